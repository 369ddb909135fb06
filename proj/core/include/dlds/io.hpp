#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dlds/continuous.hpp"
#include "dlds/discrete.hpp"
#include "dlds/metrics.hpp"
#include "dlds/systems.hpp"

namespace dlds {

// Flat key-value configuration text:
//   - one `key = value` pair per line
//   - keys are dotted lowercase words, values run to end of line
//   - blank lines and lines starting with '#' are skipped
//   - duplicate keys are rejected
class KeyValueConfig {
 public:
  static KeyValueConfig parse_string(const std::string& text);
  static KeyValueConfig parse_file(const std::filesystem::path& path);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { kv_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;
  std::string require_string(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

enum class Variant { discrete = 0, discrete_identity = 1, continuous = 2 };

std::string variant_name(Variant v);

// A full experiment description assembled from a KeyValueConfig. Unknown
// keys are rejected so typos fail validation instead of silently using
// defaults.
struct ExperimentConfig {
  Variant variant = Variant::discrete_identity;
  std::uint64_t seed = 0;

  bool from_csv = false;
  std::string csv_path;
  bool csv_has_header = false;
  double csv_dt = 1.0;
  bool zscore = false;
  SystemSpec system;

  int latent_dim = 0;  // 0 -> observation dim
  int operators = 2;   // dictionary size M, or generator count L

  TrainConfig train;
  CtTrainConfig ct;

  std::string model_path;  // consumed by infer/eval
  int portrait_grid = 15;  // samples per axis in phase-portrait exports

  static ExperimentConfig from_config(const KeyValueConfig& cfg);
  void validate() const;
};

// Rectangular numeric CSV -> trajectory (rows = samples). Cells must
// parse as finite numbers; violations name the line and column.
Trajectory load_csv(const std::filesystem::path& path, bool has_header, double dt);

// Rows written at full double precision so a reload reproduces the exact
// values. header may be empty.
void save_csv(const std::filesystem::path& path, const Matrix& rows,
              const std::vector<std::string>& header);

// Everything needed to reuse a trained model: which variant, its
// matrices, the training configuration snapshot, and the trace.
struct SavedModel {
  Variant variant = Variant::discrete_identity;
  DiscreteModel discrete;
  ContinuousModel continuous;
  TrainConfig train;
  CtTrainConfig ct;
  TrainTrace trace;
};

// Binary archive, little-endian, magic "DLDSARCH", format version 1.
// Matrix payloads are raw float64 in column-major order; save -> load ->
// save reproduces the file byte for byte.
void save_model(const std::filesystem::path& path, const SavedModel& model);
SavedModel load_model(const std::filesystem::path& path);

struct ExperimentResult {
  EvalReport report;
  SavedModel model;
  std::filesystem::path out_dir;
  std::vector<std::string> files;  // names created under out_dir
};

// Drivers behind the CLI subcommands. All of them stage their outputs
// and publish into out_dir only on success, so a failed run leaves no
// partial files behind.
ExperimentResult run_generate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                              bool quiet);
ExperimentResult run_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                           bool quiet);
ExperimentResult run_infer(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                           bool quiet);
ExperimentResult run_eval(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                          bool quiet);

struct Preset {
  std::string name;
  std::string description;
  std::string config_text;
};

const std::vector<Preset>& list_presets();
const Preset* find_preset(const std::string& name);

// Resolve --config arguments: an existing file wins, otherwise a preset
// name is accepted.
KeyValueConfig resolve_config(const std::string& arg);

}  // namespace dlds
