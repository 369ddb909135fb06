#include "dlds/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace dlds {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double_cell(const std::string& cell, const std::string& where) {
  const std::string t = trim(cell);
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || t.empty())
    throw parse_error(where + ": cannot parse '" + t + "' as a number");
  return v;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw parse_error("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw parse_error("config line " + std::to_string(lineno) + ": empty key");
    for (char ch : key)
      if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '_' || ch == '-'))
        throw parse_error("config line " + std::to_string(lineno) + ": bad key '" + key + "'");
    if (value.empty())
      throw parse_error("config line " + std::to_string(lineno) + ": empty value for '" + key +
                        "'");
    if (cfg.kv_.count(key))
      throw parse_error("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg.kv_[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

std::string KeyValueConfig::require_string(const std::string& key) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) throw parse_error("config: missing required key '" + key + "'");
  return it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  return parse_double_cell(it->second, "config key '" + key + "'");
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  const std::string t = trim(it->second);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size())
    throw parse_error("config key '" + key + "': cannot parse '" + t + "' as an integer");
  return v;
}

std::uint64_t KeyValueConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  const std::string t = trim(it->second);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size())
    throw parse_error("config key '" + key + "': cannot parse '" + t +
                      "' as an unsigned integer");
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  const std::string t = trim(it->second);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw parse_error("config key '" + key + "': expected true/false, got '" + t + "'");
}

std::vector<double> KeyValueConfig::get_list(const std::string& key,
                                             const std::vector<double>& fallback) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::vector<double> out;
  std::string cell;
  std::istringstream in(it->second);
  while (std::getline(in, cell, ','))
    out.push_back(parse_double_cell(cell, "config key '" + key + "'"));
  if (out.empty()) throw parse_error("config key '" + key + "': empty list");
  return out;
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::discrete:
      return "discrete";
    case Variant::discrete_identity:
      return "discrete_identity";
    case Variant::continuous:
      return "continuous";
  }
  return "unknown";
}

namespace {

// typed view over a KeyValueConfig that tracks which keys were read, so
// leftovers can be reported as unknown
class ConfigReader {
 public:
  explicit ConfigReader(const KeyValueConfig& cfg) : cfg_(cfg) {}

  bool has(const std::string& key) {
    seen_.insert(key);
    return cfg_.has(key);
  }
  std::string str(const std::string& key, const std::string& dflt) {
    seen_.insert(key);
    return cfg_.get_string(key, dflt);
  }
  double real(const std::string& key, double dflt) {
    seen_.insert(key);
    return cfg_.get_double(key, dflt);
  }
  int integer(const std::string& key, int dflt) {
    seen_.insert(key);
    return cfg_.get_int(key, dflt);
  }
  bool boolean(const std::string& key, bool dflt) {
    seen_.insert(key);
    return cfg_.get_bool(key, dflt);
  }
  std::uint64_t uinteger(const std::string& key, std::uint64_t dflt) {
    seen_.insert(key);
    return cfg_.get_uint(key, dflt);
  }
  std::vector<double> list(const std::string& key, const std::vector<double>& dflt) {
    seen_.insert(key);
    return cfg_.get_list(key, dflt);
  }

  void finish() const {
    for (const auto& [key, value] : cfg_.entries())
      if (!seen_.count(key)) throw parse_error("config: unknown key '" + key + "'");
  }

 private:
  const KeyValueConfig& cfg_;
  std::set<std::string> seen_;
};

LassoMode parse_mode(const std::string& s) {
  if (s == "penalized") return LassoMode::penalized;
  if (s == "constrained") return LassoMode::constrained;
  if (s == "pseudo_inverse") return LassoMode::pseudo_inverse;
  throw parse_error("config: unknown solver mode '" + s + "'");
}

FUpdate parse_f_update(const std::string& s) {
  if (s == "gradient") return FUpdate::gradient;
  if (s == "exact") return FUpdate::exact;
  throw parse_error("config: unknown dictionary update '" + s + "'");
}

SystemSpec::Kind parse_kind(const std::string& s) {
  if (s == "fhn") return SystemSpec::Kind::fhn;
  if (s == "lorenz") return SystemSpec::Kind::lorenz;
  if (s == "spiral_speed") return SystemSpec::Kind::spiral_speed;
  if (s == "rotating_center") return SystemSpec::Kind::rotating_center;
  if (s == "scaled_permutation") return SystemSpec::Kind::scaled_permutation;
  throw parse_error("config: unknown system kind '" + s + "'");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_config(const KeyValueConfig& kv) {
  ConfigReader r(kv);
  ExperimentConfig cfg;

  const std::string variant = r.str("experiment.variant", "discrete_identity");
  if (variant == "discrete")
    cfg.variant = Variant::discrete;
  else if (variant == "discrete_identity")
    cfg.variant = Variant::discrete_identity;
  else if (variant == "continuous")
    cfg.variant = Variant::continuous;
  else
    throw parse_error("config: unknown variant '" + variant + "'");

  cfg.seed = r.uinteger("experiment.seed", 0);

  const std::string source = r.str("data.source", "system");
  if (source == "csv")
    cfg.from_csv = true;
  else if (source != "system")
    throw parse_error("config: data.source must be 'system' or 'csv'");
  cfg.csv_path = r.str("data.path", "");
  cfg.csv_has_header = r.boolean("data.has_header", false);
  cfg.csv_dt = r.real("data.dt", 1.0);
  cfg.zscore = r.boolean("data.zscore", false);

  if (!cfg.from_csv) {
    cfg.system.kind = parse_kind(r.str("system.kind", "fhn"));
    cfg.system.T = r.integer("system.T", 0);
    cfg.system.dt = r.real("system.dt", 0.0);
    cfg.system.seed = r.uinteger("system.seed", cfg.seed);
    const std::vector<double> x0 = r.list("system.x0", {});
    if (!x0.empty()) {
      cfg.system.x0.resize(static_cast<Eigen::Index>(x0.size()));
      for (size_t i = 0; i < x0.size(); ++i) cfg.system.x0[static_cast<Eigen::Index>(i)] = x0[i];
    }
    cfg.system.fhn_a = r.real("system.fhn_a", cfg.system.fhn_a);
    cfg.system.fhn_b = r.real("system.fhn_b", cfg.system.fhn_b);
    cfg.system.fhn_tau = r.real("system.fhn_tau", cfg.system.fhn_tau);
    cfg.system.fhn_I = r.real("system.fhn_I", cfg.system.fhn_I);
    cfg.system.lorenz_sigma = r.real("system.lorenz_sigma", cfg.system.lorenz_sigma);
    cfg.system.lorenz_rho = r.real("system.lorenz_rho", cfg.system.lorenz_rho);
    cfg.system.lorenz_beta = r.real("system.lorenz_beta", cfg.system.lorenz_beta);
    cfg.system.spiral_decay = r.real("system.spiral_decay", cfg.system.spiral_decay);
    cfg.system.spiral_omega = r.real("system.spiral_omega", cfg.system.spiral_omega);
    cfg.system.spiral_segment = r.real("system.spiral_segment", cfg.system.spiral_segment);
    cfg.system.spiral_speeds = r.list("system.spiral_speeds", cfg.system.spiral_speeds);
    cfg.system.rotation_omega = r.real("system.rotation_omega", cfg.system.rotation_omega);
    cfg.system.rotation_segment = r.real("system.rotation_segment", cfg.system.rotation_segment);
    cfg.system.rotation_segments =
        r.integer("system.rotation_segments", cfg.system.rotation_segments);
    cfg.system.perm_dim = r.integer("system.perm_dim", cfg.system.perm_dim);
    cfg.system.perm_ops = r.integer("system.perm_ops", cfg.system.perm_ops);
    cfg.system.perm_sparsity = r.integer("system.perm_sparsity", cfg.system.perm_sparsity);
    cfg.system.perm_restarts = r.integer("system.perm_restarts", cfg.system.perm_restarts);
    cfg.system.perm_scale_lo = r.real("system.perm_scale_lo", cfg.system.perm_scale_lo);
    cfg.system.perm_scale_hi = r.real("system.perm_scale_hi", cfg.system.perm_scale_hi);
  }

  cfg.latent_dim = r.integer("model.latent_dim", 0);
  cfg.operators = r.integer("model.operators", 2);

  cfg.train.lambda0 = r.real("train.lambda0", cfg.train.lambda0);
  cfg.train.lambda1 = r.real("train.lambda1", cfg.train.lambda1);
  cfg.train.lambda2 = r.real("train.lambda2", cfg.train.lambda2);
  cfg.train.mode = parse_mode(r.str("train.mode", "constrained"));
  cfg.train.tau = r.real("train.tau", cfg.train.tau);
  cfg.train.solver_max_iter = r.integer("train.solver_max_iter", cfg.train.solver_max_iter);
  cfg.train.solver_tol = r.real("train.solver_tol", cfg.train.solver_tol);
  cfg.train.scale_refit = r.boolean("train.scale_refit", cfg.train.scale_refit);
  cfg.train.infer_rounds = r.integer("train.infer_rounds", cfg.train.infer_rounds);
  cfg.train.eta_D = r.real("train.eta_D", cfg.train.eta_D);
  cfg.train.eta_f = r.real("train.eta_f", cfg.train.eta_f);
  cfg.train.decay = r.real("train.decay", cfg.train.decay);
  cfg.train.perturb_sigma = r.real("train.perturb_sigma", cfg.train.perturb_sigma);
  cfg.train.conv_tol = r.real("train.conv_tol", cfg.train.conv_tol);
  cfg.train.max_epochs = r.integer("train.max_epochs", cfg.train.max_epochs);
  cfg.train.warmup_epochs = r.integer("train.warmup_epochs", cfg.train.warmup_epochs);
  cfg.train.f_update = parse_f_update(r.str("train.f_update", "gradient"));
  cfg.train.seed = cfg.seed;

  cfg.ct.lambda_c = r.real("ct.lambda_c", cfg.ct.lambda_c);
  cfg.ct.lambda_G = r.real("ct.lambda_G", cfg.ct.lambda_G);
  cfg.ct.eta_c = r.real("ct.eta_c", cfg.ct.eta_c);
  cfg.ct.eta_G = r.real("ct.eta_G", cfg.ct.eta_G);
  cfg.ct.decay = r.real("ct.decay", cfg.ct.decay);
  cfg.ct.inner_c_iters = r.integer("ct.inner_c_iters", cfg.ct.inner_c_iters);
  cfg.ct.inner_G_iters = r.integer("ct.inner_G_iters", cfg.ct.inner_G_iters);
  cfg.ct.c_init_sigma = r.real("ct.c_init_sigma", cfg.ct.c_init_sigma);
  cfg.ct.warm_start = r.boolean("ct.warm_start", cfg.ct.warm_start);
  cfg.ct.max_epochs = r.integer("ct.max_epochs", cfg.ct.max_epochs);
  cfg.ct.seed = cfg.seed;

  cfg.model_path = r.str("infer.model", "");
  cfg.portrait_grid = r.integer("output.portrait_grid", cfg.portrait_grid);

  r.finish();
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  if (operators < 1) throw domain_error("config: model.operators must be >= 1");
  if (latent_dim < 0) throw domain_error("config: model.latent_dim must be >= 0");
  if (from_csv && csv_path.empty()) throw parse_error("config: data.path required for csv source");
  if (from_csv && !(csv_dt > 0.0)) throw domain_error("config: data.dt must be positive");
  if (variant != Variant::discrete && latent_dim != 0)
    throw domain_error("config: model.latent_dim applies only to the discrete variant");
  if (!(train.lambda0 >= 0.0) || !(train.lambda1 >= 0.0) || !(train.lambda2 >= 0.0) ||
      !(train.tau >= 0.0))
    throw domain_error("config: train weights must be >= 0");
  if (train.max_epochs < 0 || ct.max_epochs < 0)
    throw domain_error("config: max_epochs must be >= 0");
  if (train.warmup_epochs < 0)
    throw domain_error("config: train.warmup_epochs must be >= 0");
  if (!(train.decay > 0.0) || !(ct.decay > 0.0))
    throw domain_error("config: decay must be positive");
  if (ct.inner_c_iters < 1 || ct.inner_G_iters < 1)
    throw domain_error("config: ct inner iteration counts must be >= 1");
  if (portrait_grid < 2) throw domain_error("config: output.portrait_grid must be >= 2");
  if (!(ct.eta_c > 0.0) || !(ct.eta_G >= 0.0))
    throw domain_error("config: ct step sizes must be positive");
  if (!(ct.lambda_c >= 0.0) || !(ct.lambda_G >= 0.0))
    throw domain_error("config: ct weights must be >= 0");
}

Trajectory load_csv(const std::filesystem::path& path, bool has_header, double dt) {
  if (!(dt > 0.0)) throw domain_error("load_csv: dt must be positive");
  std::ifstream in(path);
  if (!in) throw parse_error("load_csv: cannot open " + path.string());

  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  Eigen::Index width = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && has_header) continue;
    const std::string t = trim(line);
    if (t.empty()) continue;
    std::vector<double> row;
    std::string cell;
    std::istringstream cells(t);
    int col = 0;
    while (std::getline(cells, cell, ',')) {
      ++col;
      const std::string where =
          "csv " + path.filename().string() + " line " + std::to_string(lineno) + ", column " +
          std::to_string(col);
      const double v = parse_double_cell(cell, where);
      if (!std::isfinite(v)) throw parse_error(where + ": non-finite value");
      row.push_back(v);
    }
    if (width < 0)
      width = static_cast<Eigen::Index>(row.size());
    else if (static_cast<Eigen::Index>(row.size()) != width)
      throw parse_error("csv " + path.filename().string() + " line " + std::to_string(lineno) +
                        ": expected " + std::to_string(width) + " fields, got " +
                        std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty() || width < 1) throw parse_error("load_csv: no data rows in " + path.string());
  if (rows.size() < 2)
    throw domain_error("load_csv: a trajectory needs at least 2 rows, got " +
                       std::to_string(rows.size()));

  Trajectory traj;
  traj.dt = dt;
  traj.samples.resize(static_cast<Eigen::Index>(rows.size()), width);
  for (size_t i = 0; i < rows.size(); ++i)
    for (Eigen::Index j = 0; j < width; ++j)
      traj.samples(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<size_t>(j)];
  return traj;
}

void save_csv(const std::filesystem::path& path, const Matrix& rows,
              const std::vector<std::string>& header) {
  if (!header.empty() && static_cast<Eigen::Index>(header.size()) != rows.cols())
    throw dimension_error("save_csv: header width does not match data");
  std::ofstream out(path);
  if (!out) throw integrity_error("save_csv: cannot write " + path.string());
  if (!header.empty()) {
    for (size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << "\n";
  }
  char buf[64];
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", rows(i, j));
      out << (j ? "," : "") << buf;
    }
    out << "\n";
  }
  if (!out) throw integrity_error("save_csv: write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// model archive

namespace {

constexpr char kMagic[8] = {'D', 'L', 'D', 'S', 'A', 'R', 'C', 'H'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof bits);
  put_u64(buf, bits);
}

void put_matrix(std::string& buf, const Matrix& m) {
  put_u64(buf, static_cast<std::uint64_t>(m.rows()));
  put_u64(buf, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) put_f64(buf, m(i, j));
}

void put_kv(std::string& buf, const char* key, double value) {
  const std::uint32_t len = static_cast<std::uint32_t>(std::strlen(key));
  put_u32(buf, len);
  buf.append(key, len);
  put_f64(buf, value);
}

struct ArchiveReader {
  const std::string& buf;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > buf.size()) throw integrity_error("model archive: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  Matrix matrix() {
    const std::uint64_t r = u64(), c = u64();
    if (r == 0 || c == 0 || r > 1000000 || c > 1000000 || r * c > 100000000)
      throw integrity_error("model archive: implausible matrix shape");
    Matrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = f64();
    if (!m.allFinite()) throw integrity_error("model archive: non-finite matrix entries");
    return m;
  }
};

void put_train_config(std::string& buf, const TrainConfig& tc) {
  put_u32(buf, 17);
  put_kv(buf, "lambda0", tc.lambda0);
  put_kv(buf, "lambda1", tc.lambda1);
  put_kv(buf, "lambda2", tc.lambda2);
  put_kv(buf, "mode", static_cast<double>(static_cast<int>(tc.mode)));
  put_kv(buf, "tau", tc.tau);
  put_kv(buf, "solver_max_iter", tc.solver_max_iter);
  put_kv(buf, "solver_tol", tc.solver_tol);
  put_kv(buf, "scale_refit", tc.scale_refit ? 1.0 : 0.0);
  put_kv(buf, "infer_rounds", tc.infer_rounds);
  put_kv(buf, "eta_D", tc.eta_D);
  put_kv(buf, "eta_f", tc.eta_f);
  put_kv(buf, "decay", tc.decay);
  put_kv(buf, "perturb_sigma", tc.perturb_sigma);
  put_kv(buf, "conv_tol", tc.conv_tol);
  put_kv(buf, "max_epochs", tc.max_epochs);
  put_kv(buf, "warmup_epochs", tc.warmup_epochs);
  put_kv(buf, "f_update", static_cast<double>(static_cast<int>(tc.f_update)));
  put_u64(buf, tc.seed);
}

void put_ct_config(std::string& buf, const CtTrainConfig& cc) {
  put_u32(buf, 10);
  put_kv(buf, "lambda_c", cc.lambda_c);
  put_kv(buf, "lambda_G", cc.lambda_G);
  put_kv(buf, "eta_c", cc.eta_c);
  put_kv(buf, "eta_G", cc.eta_G);
  put_kv(buf, "decay", cc.decay);
  put_kv(buf, "inner_c_iters", cc.inner_c_iters);
  put_kv(buf, "inner_G_iters", cc.inner_G_iters);
  put_kv(buf, "c_init_sigma", cc.c_init_sigma);
  put_kv(buf, "warm_start", cc.warm_start ? 1.0 : 0.0);
  put_kv(buf, "max_epochs", cc.max_epochs);
  put_u64(buf, cc.seed);
}

std::map<std::string, double> read_kv_block(ArchiveReader& r) {
  const std::uint32_t count = r.u32();
  if (count > 1000) throw integrity_error("model archive: implausible config entry count");
  std::map<std::string, double> kv;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = r.u32();
    if (len == 0 || len > 256) throw integrity_error("model archive: bad config key length");
    const std::string key = r.bytes(len);
    const double value = r.f64();
    if (!kv.emplace(key, value).second)
      throw integrity_error("model archive: duplicate config key " + key);
  }
  return kv;
}

double take(std::map<std::string, double>& kv, const char* key) {
  const auto it = kv.find(key);
  if (it == kv.end())
    throw integrity_error(std::string("model archive: missing config key ") + key);
  const double v = it->second;
  kv.erase(it);
  return v;
}

}  // namespace

void save_model(const std::filesystem::path& path, const SavedModel& model) {
  std::string buf;
  buf.append(kMagic, sizeof kMagic);
  put_u32(buf, kVersion);
  put_u32(buf, static_cast<std::uint32_t>(model.variant));

  if (model.variant == Variant::continuous) {
    const auto& g = model.continuous.G;
    if (g.empty()) throw dimension_error("save_model: continuous model has no generators");
    put_u32(buf, static_cast<std::uint32_t>(g[0].rows()));  // observation dim
    put_u32(buf, static_cast<std::uint32_t>(g[0].rows()));  // latent dim
    put_u32(buf, static_cast<std::uint32_t>(g.size()));
    for (const auto& m : g) put_matrix(buf, m);
    put_ct_config(buf, model.ct);
  } else {
    const auto& d = model.discrete;
    if (d.D.size() == 0 || d.f.empty()) throw dimension_error("save_model: empty discrete model");
    put_u32(buf, static_cast<std::uint32_t>(d.obs_dim()));
    put_u32(buf, static_cast<std::uint32_t>(d.latent_dim()));
    put_u32(buf, static_cast<std::uint32_t>(d.dictionary_size()));
    put_matrix(buf, d.D);
    for (const auto& m : d.f) put_matrix(buf, m);
    put_train_config(buf, model.train);
  }

  put_u64(buf, static_cast<std::uint64_t>(model.trace.epochs));
  put_u64(buf, static_cast<std::uint64_t>(model.trace.rmse.size()));
  for (double v : model.trace.rmse) put_f64(buf, v);
  put_u64(buf, static_cast<std::uint64_t>(model.trace.perturbation_events.size()));
  for (int e : model.trace.perturbation_events) put_u64(buf, static_cast<std::uint64_t>(e));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw integrity_error("save_model: cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw integrity_error("save_model: write failed for " + path.string());
}

SavedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw integrity_error("load_model: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();

  ArchiveReader r{buf};
  if (r.bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic))
    throw integrity_error("model archive: bad magic, not a model file");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw version_error("model archive: unsupported format version " + std::to_string(version));
  const std::uint32_t variant_tag = r.u32();
  if (variant_tag > 2) throw integrity_error("model archive: unknown variant tag");

  SavedModel model;
  model.variant = static_cast<Variant>(variant_tag);
  const std::uint32_t k = r.u32(), p = r.u32(), M = r.u32();
  if (k == 0 || p == 0 || M == 0 || k > 100000 || p > 100000 || M > 100000)
    throw integrity_error("model archive: implausible dimensions");

  const auto kk = static_cast<Eigen::Index>(k);
  const auto pp = static_cast<Eigen::Index>(p);
  if (model.variant == Variant::continuous) {
    for (std::uint32_t i = 0; i < M; ++i) {
      Matrix g = r.matrix();
      if (g.rows() != pp || g.cols() != pp)
        throw integrity_error("model archive: generator shape mismatch");
      model.continuous.G.push_back(std::move(g));
    }
    auto kv = read_kv_block(r);
    model.ct.lambda_c = take(kv, "lambda_c");
    model.ct.lambda_G = take(kv, "lambda_G");
    model.ct.eta_c = take(kv, "eta_c");
    model.ct.eta_G = take(kv, "eta_G");
    model.ct.decay = take(kv, "decay");
    model.ct.inner_c_iters = static_cast<int>(take(kv, "inner_c_iters"));
    model.ct.inner_G_iters = static_cast<int>(take(kv, "inner_G_iters"));
    model.ct.c_init_sigma = take(kv, "c_init_sigma");
    model.ct.warm_start = take(kv, "warm_start") != 0.0;
    model.ct.max_epochs = static_cast<int>(take(kv, "max_epochs"));
    if (!kv.empty())
      throw integrity_error("model archive: unexpected config key " + kv.begin()->first);
    model.ct.seed = r.u64();
  } else {
    model.discrete.D = r.matrix();
    if (model.discrete.D.rows() != kk || model.discrete.D.cols() != pp)
      throw integrity_error("model archive: observation matrix shape mismatch");
    for (std::uint32_t i = 0; i < M; ++i) {
      Matrix f = r.matrix();
      if (f.rows() != pp || f.cols() != pp)
        throw integrity_error("model archive: operator shape mismatch");
      model.discrete.f.push_back(std::move(f));
    }
    auto kv = read_kv_block(r);
    model.train.lambda0 = take(kv, "lambda0");
    model.train.lambda1 = take(kv, "lambda1");
    model.train.lambda2 = take(kv, "lambda2");
    const int mode = static_cast<int>(take(kv, "mode"));
    if (mode < 0 || mode > 2) throw integrity_error("model archive: bad solver mode");
    model.train.mode = static_cast<LassoMode>(mode);
    model.train.tau = take(kv, "tau");
    model.train.solver_max_iter = static_cast<int>(take(kv, "solver_max_iter"));
    model.train.solver_tol = take(kv, "solver_tol");
    model.train.scale_refit = take(kv, "scale_refit") != 0.0;
    model.train.infer_rounds = static_cast<int>(take(kv, "infer_rounds"));
    model.train.eta_D = take(kv, "eta_D");
    model.train.eta_f = take(kv, "eta_f");
    model.train.decay = take(kv, "decay");
    model.train.perturb_sigma = take(kv, "perturb_sigma");
    model.train.conv_tol = take(kv, "conv_tol");
    model.train.max_epochs = static_cast<int>(take(kv, "max_epochs"));
    model.train.warmup_epochs = static_cast<int>(take(kv, "warmup_epochs"));
    const int fu = static_cast<int>(take(kv, "f_update"));
    if (fu < 0 || fu > 1) throw integrity_error("model archive: bad dictionary update tag");
    model.train.f_update = static_cast<FUpdate>(fu);
    if (!kv.empty())
      throw integrity_error("model archive: unexpected config key " + kv.begin()->first);
    model.train.seed = r.u64();
  }

  model.trace.epochs = static_cast<int>(r.u64());
  const std::uint64_t n_rmse = r.u64();
  if (n_rmse > 100000000) throw integrity_error("model archive: implausible trace length");
  model.trace.rmse.resize(n_rmse);
  for (auto& v : model.trace.rmse) v = r.f64();
  const std::uint64_t n_events = r.u64();
  if (n_events > n_rmse) throw integrity_error("model archive: more perturbations than epochs");
  model.trace.perturbation_events.resize(n_events);
  for (auto& e : model.trace.perturbation_events) e = static_cast<int>(r.u64());

  if (r.pos != buf.size()) throw integrity_error("model archive: trailing data");
  return model;
}

}  // namespace dlds
