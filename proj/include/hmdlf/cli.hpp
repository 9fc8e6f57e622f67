#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hmdlf/baselines.hpp"
#include "hmdlf/data.hpp"
#include "hmdlf/model.hpp"
#include "hmdlf/training.hpp"

namespace hmdlf {

inline constexpr const char* kArtifactVersion = "hmdlf v1";

struct EvaluateConfig {
  std::string model_path;
  std::string csv;
  std::optional<std::string> start;  // inclusive ISO-8601 bounds
  std::optional<std::string> end;
};

struct CompareConfig {
  std::vector<std::string> models = {"naive",     "seasonal_naive", "lr",   "ridge",
                                     "gru",       "cnn_gru",        "hmdlf"};
  std::vector<Eigen::Index> lookup_sizes = {20};
  Eigen::Index seasonal_period = 96;  // records per season (one day at 15 min)
  double ridge_lambda = 1.0;
  double train_fraction = 0.8;
};

/// The one structured configuration document all commands read. Unknown
/// keys are rejected; every field has a documented default, and the
/// effective (default-filled) config is echoed into every output file.
struct RunConfig {
  std::uint64_t seed = 42;
  std::string output_dir = "out";

  std::optional<std::string> data_csv;      // "data": {"csv": ...}
  std::optional<SynthConfig> data_synth;    // "data": {"synth": {...}}
  CsvSchema schema;
  ModelConfig model;
  TrainConfig train;
  std::optional<SynthConfig> synth;         // "synth": {...} for cmd_synth
  std::optional<EvaluateConfig> evaluate;
  CompareConfig compare;
};

/// Parses a config document plus "key.path=value" overrides. Throws
/// ConfigError on unknown keys or malformed values.
RunConfig parse_run_config_text(const std::string& json_text,
                                const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides = {});

/// Canonical single-line JSON echo of the effective config.
std::string config_echo(const RunConfig& cfg);

struct PreparedData {
  WindowedSamples samples;  // normalized
  std::map<std::string, Scaler> scalers;
};

/// Fits per-modality scalers on the first 80% of records (the training
/// portion), then normalizes and windows the full dataset.
PreparedData prepare_training_data(const MultimodalDataset& data,
                                   const std::vector<std::string>& modalities,
                                   Eigen::Index window_size);

/// Windows `data` with scalers fitted elsewhere (e.g. stored in a model).
WindowedSamples normalized_windows(const MultimodalDataset& data,
                                   const std::vector<std::string>& modalities,
                                   Eigen::Index window_size,
                                   const std::map<std::string, Scaler>& scalers);

/// Loads the configured dataset: data.csv when present, else data.synth.
MultimodalDataset load_dataset(const RunConfig& cfg, std::ostream& log);

/// Minimal SVG line chart, one polyline per series.
void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::vector<std::pair<std::string, Vec>>& series,
                          const std::vector<std::string>& preamble);

// Command implementations. Each returns the process exit code for its
// happy path; configuration, data and numeric errors are thrown and mapped
// by run_cli (0 success, 1 user/config error, 2 numerical failure).
int cmd_synth(const RunConfig& cfg, std::ostream& log);
int cmd_train(const RunConfig& cfg, std::ostream& log);
int cmd_evaluate(const RunConfig& cfg, std::ostream& log);
int cmd_gradcheck(const RunConfig& cfg, std::ostream& log);
int cmd_compare(const RunConfig& cfg, std::ostream& log);

int run_cli(int argc, char** argv);

}  // namespace hmdlf
