#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hmdlf/tensor.hpp"

namespace hmdlf {

/// Epoch seconds <-> "YYYY-MM-DDTHH:MM:SS" (UTC, no zone suffix; a trailing
/// 'Z' and a space separator are accepted on input).
std::int64_t parse_iso8601(const std::string& text);
std::string format_iso8601(std::int64_t epoch_seconds);

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

/// One named, timestamped, equally spaced scalar sequence.
struct ModalitySeries {
  std::string name;
  std::vector<std::int64_t> timestamps;
  Vec values;
};

/// Aligned modalities on one shared timestamp axis, flow first.
struct MultimodalDataset {
  std::vector<std::int64_t> timestamps;
  std::vector<std::string> names;
  std::vector<Vec> values;  // values[m] aligned with timestamps

  Eigen::Index count() const { return static_cast<Eigen::Index>(timestamps.size()); }
  std::int64_t interval_seconds() const;
  bool has(const std::string& name) const;
  const Vec& series(const std::string& name) const;
  /// Records with start <= timestamp <= end (either bound may be disabled
  /// with INT64_MIN / INT64_MAX).
  MultimodalDataset between(std::int64_t start, std::int64_t end) const;
  MultimodalDataset head(Eigen::Index n) const;
  MultimodalDataset tail_from(Eigen::Index first) const;
};

/// Maps the canonical column roles onto the headers actually present in a
/// CSV file.
struct CsvSchema {
  std::string timestamp_column = "timestamp";
  // canonical modality name -> csv header, in branch order (flow first)
  std::vector<std::pair<std::string, std::string>> value_columns = {
      {"flow", "flow"}, {"speed", "speed"}, {"journey_time", "journey_time"}};
};

struct IngestResult {
  MultimodalDataset data;
  std::vector<std::string> warnings;  // discarded spans, interpolated gaps
};

/// Parses and validates a CSV: sorts by time, rejects duplicate timestamps,
/// interpolates isolated single-interval gaps, and on longer gaps keeps the
/// longest contiguous segment (discarded spans are reported as warnings).
/// Lines starting with '#' are skipped.
IngestResult ingest_csv(const std::string& path, const CsvSchema& schema = CsvSchema{});

/// Writes the one CSV format the project speaks: '#' preamble lines (if
/// given), a header row, then ISO-8601 timestamp + one column per modality.
void export_csv(const MultimodalDataset& data, const std::string& path,
                const std::vector<std::string>& preamble = {});

/// Supervised single-step samples: for each k in [0, N), windows over
/// records [k, k+w) per modality and target = flow[k+w].
struct WindowedSamples {
  std::vector<std::string> modalities;
  std::vector<Mat> windows;  // per modality, [N x w]
  Vec targets;               // [N], next-interval flow
  std::vector<Eigen::Index> target_indices;  // record index k+w of each target
  std::vector<std::int64_t> target_timestamps;

  Eigen::Index count() const { return targets.size(); }
  Eigen::Index window_size() const { return windows.empty() ? 0 : windows[0].cols(); }
};

/// The model side consumes the same structure, just with normalized values.
using SampleBatch = WindowedSamples;

WindowedSamples window(const MultimodalDataset& data, Eigen::Index w);

/// Synthetic multimodal generator: a daily double-peak flow profile (weekday
/// amplitude above weekend), speed as a decreasing response to the previous
/// interval's flow level, and journey time as link length over speed. All
/// three carry independent seeded noise; at noise 0 every series is exactly
/// periodic with a one-week period.
struct SynthConfig {
  int days = 60;             // must be >= 2
  int interval_minutes = 15; // must divide 1440
  std::uint64_t seed = 42;
  double noise = 1.0;        // scales every *_noise_sd below

  double base_flow = 80.0;         // vehicles per interval, off-peak
  double am_peak = 220.0;          // morning bump amplitude
  double pm_peak = 260.0;          // evening bump amplitude
  double am_hour = 8.0;
  double pm_hour = 18.0;
  double peak_width_hours = 1.5;
  double weekend_factor = 0.6;     // weekend bump amplitude multiplier
  double flow_noise_sd = 14.0;

  double free_speed = 110.0;       // km/h at zero flow
  double min_speed = 25.0;
  double flow_speed_scale = 300.0; // e-folding flow for the speed drop
  double speed_noise_sd = 2.0;

  double link_km = 5.0;
  double journey_noise_sd = 0.25;  // minutes
};

MultimodalDataset synth(const SynthConfig& cfg);

}  // namespace hmdlf
