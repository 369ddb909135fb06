#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "dlds/io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace dlds {

namespace {

// Collects files in a hidden staging directory and moves them into the
// destination only when every write has succeeded. The destructor sweeps
// the staging area, so a throw anywhere leaves out_dir untouched.
class StagedOutput {
 public:
  explicit StagedOutput(fs::path out_dir) : out_(std::move(out_dir)) {
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec) throw integrity_error("cannot create output directory " + out_.string());
    const auto tick =
        std::chrono::steady_clock::now().time_since_epoch().count();
    staging_ = out_ / (".staging-" + std::to_string(tick));
    fs::create_directories(staging_, ec);
    if (ec) throw integrity_error("cannot create staging directory " + staging_.string());
  }

  StagedOutput(const StagedOutput&) = delete;
  StagedOutput& operator=(const StagedOutput&) = delete;

  ~StagedOutput() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }

  fs::path file(const std::string& name) {
    names_.push_back(name);
    return staging_ / name;
  }

  std::vector<std::string> commit() {
    for (const auto& name : names_) {
      std::error_code ec;
      fs::rename(staging_ / name, out_ / name, ec);
      if (ec)
        throw integrity_error("cannot publish " + name + " into " + out_.string() + ": " +
                              ec.message());
    }
    committed_ = true;
    std::error_code ec;
    fs::remove_all(staging_, ec);
    return names_;
  }

 private:
  fs::path out_;
  fs::path staging_;
  std::vector<std::string> names_;
  bool committed_ = false;
};

std::string kind_name(SystemSpec::Kind k) {
  switch (k) {
    case SystemSpec::Kind::fhn:
      return "fhn";
    case SystemSpec::Kind::lorenz:
      return "lorenz";
    case SystemSpec::Kind::spiral_speed:
      return "spiral_speed";
    case SystemSpec::Kind::rotating_center:
      return "rotating_center";
    case SystemSpec::Kind::scaled_permutation:
      return "scaled_permutation";
  }
  return "unknown";
}

Trajectory acquire_data(const ExperimentConfig& cfg) {
  Trajectory traj =
      cfg.from_csv ? load_csv(cfg.csv_path, cfg.csv_has_header, cfg.csv_dt) : generate(cfg.system);
  if (cfg.zscore) traj = zscore_per_channel(traj);
  return traj;
}

std::vector<std::string> channel_header(Eigen::Index k) {
  std::vector<std::string> h;
  for (Eigen::Index j = 0; j < k; ++j) h.push_back("y" + std::to_string(j));
  return h;
}

void write_labels(StagedOutput& stage, const Trajectory& traj) {
  if (traj.labels.empty()) return;
  Matrix rows(static_cast<Eigen::Index>(traj.labels.size()), 2);
  for (size_t t = 0; t < traj.labels.size(); ++t) {
    rows(static_cast<Eigen::Index>(t), 0) = static_cast<double>(t);
    rows(static_cast<Eigen::Index>(t), 1) = traj.labels[t];
  }
  save_csv(stage.file("labels.csv"), rows, {"t", "label"});
}

// Long-format path table. kind 0 rows carry latent states (t = sample
// index), kind 1 rows carry coefficients (t = transition index).
void write_path(StagedOutput& stage, const Matrix& x, const Matrix& c) {
  const Eigen::Index n = x.rows() * x.cols() + c.rows() * c.cols();
  Matrix rows(n, 4);
  Eigen::Index r = 0;
  for (Eigen::Index t = 0; t < x.rows(); ++t)
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      rows(r, 0) = static_cast<double>(t);
      rows(r, 1) = 0.0;
      rows(r, 2) = static_cast<double>(j);
      rows(r, 3) = x(t, j);
      ++r;
    }
  for (Eigen::Index t = 0; t < c.rows(); ++t)
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      rows(r, 0) = static_cast<double>(t);
      rows(r, 1) = 1.0;
      rows(r, 2) = static_cast<double>(j);
      rows(r, 3) = c(t, j);
      ++r;
    }
  save_csv(stage.file("path.csv"), rows, {"t", "kind", "index", "value"});
}

// truth/pred rows are samples 1..T-1; t column reports the predicted
// sample index.
void write_reconstruction(StagedOutput& stage, const Matrix& truth, const Matrix& pred) {
  Matrix rows(truth.rows() * truth.cols(), 4);
  Eigen::Index r = 0;
  for (Eigen::Index t = 0; t < truth.rows(); ++t)
    for (Eigen::Index j = 0; j < truth.cols(); ++j) {
      rows(r, 0) = static_cast<double>(t + 1);
      rows(r, 1) = static_cast<double>(j);
      rows(r, 2) = truth(t, j);
      rows(r, 3) = pred(t, j);
      ++r;
    }
  save_csv(stage.file("reconstruction.csv"), rows, {"t", "channel", "truth", "prediction"});
}

void write_trace(StagedOutput& stage, const TrainTrace& trace) {
  Matrix rows(static_cast<Eigen::Index>(trace.rmse.size()), 3);
  for (size_t e = 0; e < trace.rmse.size(); ++e) {
    const int epoch = static_cast<int>(e) + 1;
    rows(static_cast<Eigen::Index>(e), 0) = epoch;
    rows(static_cast<Eigen::Index>(e), 1) = trace.rmse[e];
    const bool hit = std::find(trace.perturbation_events.begin(),
                               trace.perturbation_events.end(),
                               epoch) != trace.perturbation_events.end();
    rows(static_cast<Eigen::Index>(e), 2) = hit ? 1.0 : 0.0;
  }
  save_csv(stage.file("trace.csv"), rows, {"epoch", "rmse", "perturbed"});
}

// Sampled vector field per 2D operator: per-step displacement (f - I)v
// for discrete operators, the generator field Gv for continuous ones.
void write_portraits(StagedOutput& stage, const std::vector<Matrix>& ops, bool subtract_identity,
                     double extent, int grid) {
  if (ops.empty() || ops[0].rows() != 2) return;
  if (!(extent > 0.0)) extent = 1.0;
  const Eigen::Index n = static_cast<Eigen::Index>(ops.size()) * grid * grid;
  Matrix rows(n, 5);
  Eigen::Index r = 0;
  for (size_t m = 0; m < ops.size(); ++m) {
    Matrix field = ops[m];
    if (subtract_identity) field -= Matrix::Identity(2, 2);
    for (int i = 0; i < grid; ++i)
      for (int j = 0; j < grid; ++j) {
        Vector v(2);
        v[0] = -extent + 2.0 * extent * i / (grid - 1);
        v[1] = -extent + 2.0 * extent * j / (grid - 1);
        const Vector dv = field * v;
        rows(r, 0) = static_cast<double>(m);
        rows(r, 1) = v[0];
        rows(r, 2) = v[1];
        rows(r, 3) = dv[0];
        rows(r, 4) = dv[1];
        ++r;
      }
  }
  save_csv(stage.file("portraits.csv"), rows, {"op", "x", "y", "dx", "dy"});
}

json metrics_json(const EvalReport& rep) {
  return json{{"pearson_r", rep.pearson},
              {"r2", rep.r2},
              {"rmse", rep.rmse},
              {"per_channel",
               {{"pearson_r", rep.pearson_per_channel},
                {"r2", rep.r2_per_channel},
                {"rmse", rep.rmse_per_channel}}}};
}

void write_report(StagedOutput& stage, const json& j) {
  const fs::path p = stage.file("report.json");
  std::ofstream out(p);
  if (!out) throw integrity_error("cannot write " + p.string());
  out << j.dump(2) << "\n";
  if (!out) throw integrity_error("write failed for " + p.string());
}

json data_json(const ExperimentConfig& cfg, const Trajectory& traj) {
  json j{{"samples", traj.length()}, {"channels", traj.dim()}, {"dt", traj.dt}};
  if (cfg.from_csv)
    j["source"] = cfg.csv_path;
  else
    j["source"] = kind_name(cfg.system.kind);
  return j;
}

// Coefficients for a fixed continuous model, one pair at a time from a
// zero start. Deterministic: evaluation must not depend on draw order.
Matrix infer_ct_path(const ContinuousModel& model, const Trajectory& traj,
                     const CtTrainConfig& cfg) {
  const Eigen::Index steps = traj.length() - 1;
  Matrix c(steps, model.count());
  for (Eigen::Index t = 0; t < steps; ++t) {
    Vector c0 = Vector::Zero(model.count());
    c.row(t) = infer_c_step(model, traj.state(t), traj.state(t + 1), c0, cfg).transpose();
  }
  return c;
}

struct InferredPath {
  Matrix x;
  Matrix c;
};

InferredPath infer_with_model(const SavedModel& model, const Trajectory& traj) {
  InferredPath out;
  if (model.variant == Variant::continuous) {
    if (traj.dim() != model.continuous.dim())
      throw dimension_error("data has " + std::to_string(traj.dim()) +
                            " channels but the model expects " +
                            std::to_string(model.continuous.dim()));
    out.x = traj.samples;
    out.c = infer_ct_path(model.continuous, traj, model.ct);
    return out;
  }
  if (model.variant == Variant::discrete_identity) {
    if (traj.dim() != model.discrete.latent_dim())
      throw dimension_error("data has " + std::to_string(traj.dim()) +
                            " channels but the model expects " +
                            std::to_string(model.discrete.latent_dim()));
    const CoefficientPath path = infer_sequence_identity(traj, model.discrete, model.train);
    out.x = path.x;
    out.c = path.c;
    return out;
  }
  if (traj.dim() != model.discrete.obs_dim())
    throw dimension_error("data has " + std::to_string(traj.dim()) +
                          " channels but the model expects " +
                          std::to_string(model.discrete.obs_dim()));
  const CoefficientPath path = infer_sequence(traj, model.discrete, model.train);
  out.x = path.x;
  out.c = path.c;
  return out;
}

Matrix predict_with_model(const SavedModel& model, const Trajectory& traj,
                          const InferredPath& path) {
  if (model.variant == Variant::continuous)
    return one_step_predict(model.continuous, traj, path.c);
  CoefficientPath p;
  p.x = path.x;
  p.c = path.c;
  return one_step_predict(model.discrete, p);
}

double state_extent(const Matrix& x) {
  if (x.size() == 0) return 1.0;
  const double m = x.cwiseAbs().maxCoeff();
  return m > 0.0 ? 1.05 * m : 1.0;
}

SavedModel load_model_for(const ExperimentConfig& cfg) {
  if (cfg.model_path.empty())
    throw parse_error("config: infer.model is required for this subcommand");
  return load_model(cfg.model_path);
}

}  // namespace

ExperimentResult run_generate(const ExperimentConfig& cfg, const fs::path& out_dir, bool quiet) {
  const Trajectory traj =
      cfg.from_csv ? load_csv(cfg.csv_path, cfg.csv_has_header, cfg.csv_dt) : generate(cfg.system);

  StagedOutput stage(out_dir);
  save_csv(stage.file("data.csv"), traj.samples, channel_header(traj.dim()));
  write_labels(stage, traj);
  write_report(stage, data_json(cfg, traj));

  ExperimentResult res;
  res.out_dir = out_dir;
  res.files = stage.commit();
  if (!quiet)
    std::cout << "wrote data.csv: " << traj.length() << " samples x " << traj.dim()
              << " channels (dt=" << traj.dt << ")\n";
  return res;
}

ExperimentResult run_train(const ExperimentConfig& cfg, const fs::path& out_dir, bool quiet) {
  const Trajectory traj = acquire_data(cfg);
  if (traj.length() < 2) throw domain_error("training needs at least 2 samples");

  ExperimentResult res;
  res.out_dir = out_dir;
  SavedModel saved;
  saved.variant = cfg.variant;
  InferredPath path;

  if (cfg.variant == Variant::continuous) {
    const CtTrainResult t = train_continuous(traj, cfg.operators, cfg.ct);
    saved.continuous = t.model;
    saved.ct = cfg.ct;
    saved.trace = t.trace;
    path.x = traj.samples;
    path.c = t.c;
  } else if (cfg.variant == Variant::discrete) {
    const Eigen::Index p = cfg.latent_dim > 0 ? cfg.latent_dim : traj.dim();
    const TrainResult t = train_discrete(traj, p, cfg.operators, cfg.train);
    saved.discrete = t.model;
    saved.train = cfg.train;
    saved.trace = t.trace;
    path.x = t.path.x;
    path.c = t.path.c;
  } else {
    const TrainResult t = train_identity_observation(traj, cfg.operators, cfg.train);
    saved.discrete = t.model;
    saved.train = cfg.train;
    saved.trace = t.trace;
    path.x = t.path.x;
    path.c = t.path.c;
  }

  const Matrix pred = predict_with_model(saved, traj, path);
  const Matrix truth = traj.samples.bottomRows(traj.length() - 1);
  res.report = evaluate_forecast(truth, pred);
  res.model = saved;

  StagedOutput stage(out_dir);
  save_model(stage.file("model.dlds"), saved);
  save_csv(stage.file("data.csv"), traj.samples, channel_header(traj.dim()));
  write_labels(stage, traj);
  write_path(stage, path.x, path.c);
  write_reconstruction(stage, truth, pred);
  write_trace(stage, saved.trace);
  if (cfg.variant == Variant::continuous)
    write_portraits(stage, saved.continuous.G, false, state_extent(traj.samples),
                    cfg.portrait_grid);
  else
    write_portraits(stage, saved.discrete.f, true, state_extent(path.x), cfg.portrait_grid);

  json j{{"variant", variant_name(cfg.variant)},
         {"data", data_json(cfg, traj)},
         {"metrics", metrics_json(res.report)},
         {"training",
          {{"epochs", saved.trace.epochs},
           {"final_rmse", saved.trace.rmse.empty() ? 0.0 : saved.trace.rmse.back()},
           {"perturbations", saved.trace.perturbation_events.size()}}}};
  if (cfg.variant != Variant::continuous)
    j["training"]["converged"] =
        !saved.trace.rmse.empty() && saved.trace.rmse.back() < cfg.train.conv_tol;
  write_report(stage, j);

  res.files = stage.commit();
  if (!quiet) {
    char line[256];
    std::snprintf(line, sizeof line,
                  "trained %s model: epochs=%d final_rmse=%.6g pearson_r=%.4f r2=%.4f\n",
                  variant_name(cfg.variant).c_str(), saved.trace.epochs,
                  saved.trace.rmse.empty() ? 0.0 : saved.trace.rmse.back(), res.report.pearson,
                  res.report.r2);
    std::cout << line;
  }
  return res;
}

ExperimentResult run_infer(const ExperimentConfig& cfg, const fs::path& out_dir, bool quiet) {
  const SavedModel model = load_model_for(cfg);
  const Trajectory traj = acquire_data(cfg);
  if (traj.length() < 2) throw domain_error("inference needs at least 2 samples");
  const InferredPath path = infer_with_model(model, traj);

  StagedOutput stage(out_dir);
  write_path(stage, path.x, path.c);
  json j{{"variant", variant_name(model.variant)},
         {"data", data_json(cfg, traj)},
         {"coefficient_rows", path.c.rows()},
         {"operators", path.c.cols()}};
  write_report(stage, j);

  ExperimentResult res;
  res.model = model;
  res.out_dir = out_dir;
  res.files = stage.commit();
  if (!quiet)
    std::cout << "inferred coefficient path: " << path.c.rows() << " steps x " << path.c.cols()
              << " operators\n";
  return res;
}

ExperimentResult run_eval(const ExperimentConfig& cfg, const fs::path& out_dir, bool quiet) {
  const SavedModel model = load_model_for(cfg);
  const Trajectory traj = acquire_data(cfg);
  if (traj.length() < 2) throw domain_error("evaluation needs at least 2 samples");
  const InferredPath path = infer_with_model(model, traj);
  const Matrix pred = predict_with_model(model, traj, path);
  const Matrix truth = traj.samples.bottomRows(traj.length() - 1);

  ExperimentResult res;
  res.model = model;
  res.out_dir = out_dir;
  res.report = evaluate_forecast(truth, pred);

  StagedOutput stage(out_dir);
  write_path(stage, path.x, path.c);
  write_reconstruction(stage, truth, pred);
  write_report(stage, json{{"variant", variant_name(model.variant)},
                           {"data", data_json(cfg, traj)},
                           {"metrics", metrics_json(res.report)}});

  res.files = stage.commit();
  if (!quiet) {
    char line[256];
    std::snprintf(line, sizeof line, "eval %s model: pearson_r=%.4f r2=%.4f rmse=%.6g\n",
                  variant_name(model.variant).c_str(), res.report.pearson, res.report.r2,
                  res.report.rmse);
    std::cout << line;
  }
  return res;
}

KeyValueConfig resolve_config(const std::string& arg) {
  if (fs::exists(arg)) return KeyValueConfig::parse_file(arg);
  if (const Preset* p = find_preset(arg)) return KeyValueConfig::parse_string(p->config_text);
  throw parse_error("--config: '" + arg + "' is neither a file nor a preset name");
}

}  // namespace dlds
