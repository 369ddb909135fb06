#include "dlds/io.hpp"

namespace dlds {

namespace {

std::vector<Preset> build_presets() {
  std::vector<Preset> p;

  p.push_back({"fhn-regularized",
               "FitzHugh-Nagumo limit cycle, two operators, budgeted sparse coefficients",
               R"(experiment.variant = discrete_identity
experiment.seed = 1
system.kind = fhn
model.operators = 2
train.mode = constrained
train.tau = 0.3
train.max_epochs = 6000
)"});

  p.push_back({"fhn-unregularized",
               "FitzHugh-Nagumo limit cycle, two operators, least-squares coefficients",
               R"(experiment.variant = discrete_identity
experiment.seed = 1
system.kind = fhn
model.operators = 2
train.mode = pseudo_inverse
train.max_epochs = 6000
)"});

  p.push_back({"lorenz-regularized",
               "Lorenz attractor, five operators, budgeted sparse coefficients",
               R"(experiment.variant = discrete_identity
experiment.seed = 1
system.kind = lorenz
model.operators = 5
train.mode = constrained
train.tau = 0.55
train.max_epochs = 6000
)"});

  p.push_back({"lorenz-unregularized",
               "Lorenz attractor, five operators, least-squares coefficients",
               R"(experiment.variant = discrete_identity
experiment.seed = 1
system.kind = lorenz
model.operators = 5
train.mode = pseudo_inverse
train.max_epochs = 6000
)"});

  p.push_back({"spiral-speed",
               "Decaying 2D spiral swept through four speeds; continuous-time generators",
               R"(experiment.variant = continuous
experiment.seed = 2
system.kind = spiral_speed
system.T = 2000
system.dt = 0.01
model.operators = 4
ct.lambda_G = 1.0
ct.lambda_c = 0.1
ct.eta_G = 0.1
ct.eta_c = 0.01
ct.decay = 0.985
ct.inner_c_iters = 20
ct.max_epochs = 150
)"});

  p.push_back({"rotating-center",
               "3D rotation whose axis re-tilts every segment; continuous-time generators",
               R"(experiment.variant = continuous
experiment.seed = 3
system.kind = rotating_center
model.operators = 4
ct.lambda_G = 20.0
ct.lambda_c = 0.08
ct.eta_G = 0.005
ct.eta_c = 0.01
ct.decay = 0.985
ct.inner_c_iters = 20
ct.max_epochs = 100
)"});

  p.push_back({"permutation-1",
               "Single scaled permutation on 16 channels; exact operator recovery",
               R"(# One orbit alone cannot pin the operator down, so the generator pools
# short runs from fresh sparse starts (see system.perm_restarts).
experiment.variant = discrete_identity
experiment.seed = 4
system.kind = scaled_permutation
system.seed = 4
system.perm_dim = 16
system.perm_ops = 1
system.perm_sparsity = 1
system.perm_restarts = 16
system.T = 10
model.operators = 1
train.mode = pseudo_inverse
train.eta_f = 3.0
train.conv_tol = 1e-4
train.max_epochs = 1500
)"});

  p.push_back({"permutation-12",
               "Twelve scaled permutations on 36 channels, two active per step",
               R"(experiment.variant = discrete_identity
experiment.seed = 4
system.kind = scaled_permutation
system.perm_dim = 36
system.perm_ops = 12
system.perm_sparsity = 2
system.T = 1500
model.operators = 12
train.mode = constrained
train.tau = 1.0
train.max_epochs = 3000
)"});

  p.push_back({"celegans-template",
               "Template for neural recordings from CSV: learned projection, ten operators",
               R"(# Point data.path at a numeric CSV (rows = time, columns = channels),
# for example whole-brain calcium traces. The file is not bundled.
experiment.variant = discrete
experiment.seed = 5
data.source = csv
data.path = data/celegans.csv
data.has_header = true
data.dt = 1.0
data.zscore = true
model.latent_dim = 10
model.operators = 10
train.mode = penalized
train.lambda1 = 0.1
train.lambda2 = 0.01
train.max_epochs = 3000
)"});

  return p;
}

}  // namespace

const std::vector<Preset>& list_presets() {
  static const std::vector<Preset> presets = build_presets();
  return presets;
}

const Preset* find_preset(const std::string& name) {
  for (const auto& p : list_presets())
    if (p.name == name) return &p;
  return nullptr;
}

}  // namespace dlds
