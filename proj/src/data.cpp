#include "hmdlf/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace hmdlf {

namespace {

// Howard Hinnant's civil-date algorithms; proleptic Gregorian, UTC.
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097LL + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yr = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = static_cast<int>(yr + (m <= 2));
}

}  // namespace

std::int64_t parse_iso8601(const std::string& text) {
  int y, hh, mm, ss;
  unsigned mo, dd;
  char sep;
  int used = 0;
  if (std::sscanf(text.c_str(), "%d-%u-%u%c%d:%d:%d%n", &y, &mo, &dd, &sep, &hh, &mm, &ss,
                  &used) != 7 ||
      (sep != 'T' && sep != ' '))
    throw DataError("cannot parse timestamp '" + text + "' (expected YYYY-MM-DDTHH:MM:SS)");
  const std::string rest = text.substr(static_cast<std::size_t>(used));
  if (!rest.empty() && rest != "Z")
    throw DataError("cannot parse timestamp '" + text + "' (trailing '" + rest + "')");
  if (mo < 1 || mo > 12 || dd < 1 || dd > 31 || hh < 0 || hh > 23 || mm < 0 || mm > 59 ||
      ss < 0 || ss > 60)
    throw DataError("timestamp out of range: '" + text + "'");
  return days_from_civil(y, mo, dd) * 86400 + hh * 3600 + mm * 60 + ss;
}

std::string format_iso8601(std::int64_t t) {
  std::int64_t days = t / 86400;
  std::int64_t rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  int y;
  unsigned mo, dd;
  civil_from_days(days, y, mo, dd);
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lld:%02lld:%02lld", y, mo, dd,
                static_cast<long long>(rem / 3600), static_cast<long long>((rem / 60) % 60),
                static_cast<long long>(rem % 60));
  return buf;
}

std::string format_double(double v) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// ---------------------------------------------------------------------------
// MultimodalDataset

std::int64_t MultimodalDataset::interval_seconds() const {
  if (timestamps.size() < 2) throw DataError("dataset: need at least two records for an interval");
  return timestamps[1] - timestamps[0];
}

bool MultimodalDataset::has(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

const Vec& MultimodalDataset::series(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return values[i];
  throw DataError("dataset: no modality named '" + name + "'");
}

MultimodalDataset MultimodalDataset::between(std::int64_t start, std::int64_t end) const {
  MultimodalDataset out;
  out.names = names;
  out.values.resize(values.size());
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < timestamps.size(); ++i)
    if (timestamps[i] >= start && timestamps[i] <= end)
      keep.push_back(static_cast<Eigen::Index>(i));
  out.timestamps.reserve(keep.size());
  for (Eigen::Index i : keep) out.timestamps.push_back(timestamps[static_cast<std::size_t>(i)]);
  for (std::size_t m = 0; m < values.size(); ++m) {
    out.values[m].resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) out.values[m](static_cast<Eigen::Index>(k)) = values[m](keep[k]);
  }
  return out;
}

MultimodalDataset MultimodalDataset::head(Eigen::Index n) const {
  MultimodalDataset out;
  out.names = names;
  out.timestamps.assign(timestamps.begin(), timestamps.begin() + n);
  for (const Vec& v : values) out.values.push_back(v.head(n));
  return out;
}

MultimodalDataset MultimodalDataset::tail_from(Eigen::Index first) const {
  MultimodalDataset out;
  out.names = names;
  out.timestamps.assign(timestamps.begin() + first, timestamps.end());
  for (const Vec& v : values) out.values.push_back(v.tail(v.size() - first));
  return out;
}

// ---------------------------------------------------------------------------
// CSV ingest

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

struct RawRow {
  std::int64_t t;
  std::vector<double> vals;
};

}  // namespace

IngestResult ingest_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("ingest: cannot open '" + path + "'");

  std::string line;
  std::size_t line_no = 0;
  // header (skipping '#' preamble)
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line[0] == '#') continue;
    header = split_csv_line(line);
    break;
  }
  if (header.empty()) throw DataError("ingest: '" + path + "' has no header row");

  auto column_of = [&header, &path](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw DataError("ingest: '" + path + "' has no column '" + name + "'");
  };
  const std::size_t ts_col = column_of(schema.timestamp_column);
  std::vector<std::string> names;
  std::vector<std::size_t> cols;
  for (const auto& [canonical, actual] : schema.value_columns) {
    names.push_back(canonical);
    cols.push_back(column_of(actual));
  }

  std::vector<RawRow> rows;
  std::vector<std::string> bad_lines;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_csv_line(line);
    try {
      if (fields.size() != header.size())
        throw DataError("wrong field count (" + std::to_string(fields.size()) + ")");
      RawRow row;
      row.t = parse_iso8601(fields[ts_col]);
      for (std::size_t c : cols) {
        const std::string& f = fields[c];
        char* end = nullptr;
        const double v = std::strtod(f.c_str(), &end);
        if (f.empty() || end != f.c_str() + f.size())
          throw DataError("bad numeric value '" + f + "'");
        row.vals.push_back(v);
      }
      rows.push_back(std::move(row));
    } catch (const DataError& e) {
      bad_lines.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!bad_lines.empty()) {
    std::string msg = "ingest: '" + path + "' has unparseable rows:";
    for (std::size_t i = 0; i < bad_lines.size() && i < 10; ++i) msg += "\n  " + bad_lines[i];
    if (bad_lines.size() > 10)
      msg += "\n  ... and " + std::to_string(bad_lines.size() - 10) + " more";
    throw DataError(msg);
  }
  if (rows.empty()) throw DataError("ingest: '" + path + "' has no data rows");

  std::stable_sort(rows.begin(), rows.end(),
                   [](const RawRow& a, const RawRow& b) { return a.t < b.t; });
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].t == rows[i - 1].t)
      throw DataError("ingest: duplicate timestamp " + format_iso8601(rows[i].t));

  IngestResult result;
  result.data.names = names;

  if (rows.size() == 1) {
    result.data.timestamps = {rows[0].t};
    for (std::size_t m = 0; m < names.size(); ++m) {
      Vec v(1);
      v(0) = rows[0].vals[m];
      result.data.values.push_back(v);
    }
    return result;
  }

  // base interval = most common gap
  std::map<std::int64_t, std::size_t> gap_counts;
  for (std::size_t i = 1; i < rows.size(); ++i) ++gap_counts[rows[i].t - rows[i - 1].t];
  std::int64_t interval = 0;
  std::size_t best_count = 0;
  for (const auto& [gap, count] : gap_counts)
    if (count > best_count) {
      interval = gap;
      best_count = count;
    }
  if (interval <= 0) throw DataError("ingest: could not infer a positive record interval");

  // walk: keep equal-spaced runs, patch single missing records by linear
  // interpolation, and split on anything larger
  std::vector<std::vector<RawRow>> segments(1);
  segments.back().push_back(rows[0]);
  std::size_t interpolated = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::int64_t gap = rows[i].t - rows[i - 1].t;
    if (gap == interval) {
      segments.back().push_back(rows[i]);
    } else if (gap == 2 * interval) {
      RawRow mid;
      mid.t = rows[i - 1].t + interval;
      for (std::size_t m = 0; m < names.size(); ++m)
        mid.vals.push_back(0.5 * (rows[i - 1].vals[m] + rows[i].vals[m]));
      segments.back().push_back(std::move(mid));
      segments.back().push_back(rows[i]);
      ++interpolated;
    } else {
      segments.emplace_back();
      segments.back().push_back(rows[i]);
    }
  }
  if (interpolated > 0)
    result.warnings.push_back("interpolated " + std::to_string(interpolated) +
                              " single-record gap(s)");

  std::size_t keep = 0;
  for (std::size_t s = 1; s < segments.size(); ++s)
    if (segments[s].size() > segments[keep].size()) keep = s;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (s == keep) continue;
    result.warnings.push_back(
        "discarded " + std::to_string(segments[s].size()) + " record(s) spanning " +
        format_iso8601(segments[s].front().t) + " .. " + format_iso8601(segments[s].back().t) +
        " (gap too large to bridge)");
  }

  const auto& seg = segments[keep];
  result.data.timestamps.reserve(seg.size());
  for (const RawRow& r : seg) result.data.timestamps.push_back(r.t);
  for (std::size_t m = 0; m < names.size(); ++m) {
    Vec v(static_cast<Eigen::Index>(seg.size()));
    for (std::size_t i = 0; i < seg.size(); ++i) v(static_cast<Eigen::Index>(i)) = seg[i].vals[m];
    result.data.values.push_back(std::move(v));
  }
  return result;
}

void export_csv(const MultimodalDataset& data, const std::string& path,
                const std::vector<std::string>& preamble) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("export: cannot open '" + path + "' for writing");
  for (const std::string& p : preamble) out << "# " << p << "\n";
  out << "timestamp";
  for (const std::string& n : data.names) out << "," << n;
  out << "\n";
  for (std::size_t i = 0; i < data.timestamps.size(); ++i) {
    out << format_iso8601(data.timestamps[i]);
    for (const Vec& v : data.values)
      out << "," << format_double(v(static_cast<Eigen::Index>(i)));
    out << "\n";
  }
  if (!out) throw IoError("export: write failure on '" + path + "'");
}

// ---------------------------------------------------------------------------
// windowing

WindowedSamples window(const MultimodalDataset& data, Eigen::Index w) {
  if (w < 1) throw DataError("window: lookup size must be >= 1");
  const Eigen::Index length = data.count();
  if (length <= w)
    throw DataError("window: series length " + std::to_string(length) +
                    " must exceed lookup size " + std::to_string(w));
  if (!data.has("flow")) throw DataError("window: dataset has no 'flow' modality for targets");

  WindowedSamples s;
  s.modalities = data.names;
  const Eigen::Index n = length - w;
  for (const Vec& series : data.values) {
    Mat win(n, w);
    for (Eigen::Index k = 0; k < n; ++k) win.row(k) = series.segment(k, w).transpose();
    s.windows.push_back(std::move(win));
  }
  const Vec& flow = data.series("flow");
  s.targets = flow.segment(w, n);
  s.target_indices.reserve(static_cast<std::size_t>(n));
  s.target_timestamps.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    s.target_indices.push_back(k + w);
    s.target_timestamps.push_back(data.timestamps[static_cast<std::size_t>(k + w)]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// synthetic generator

namespace {

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

struct SynthCurves {
  const SynthConfig& cfg;

  double flow_level(std::int64_t t) const {
    std::int64_t days = t / 86400;
    std::int64_t rem = t % 86400;
    if (rem < 0) {
      rem += 86400;
      --days;
    }
    const int weekday = static_cast<int>((days + 4) % 7);  // 0 = Sunday
    const bool weekend = weekday == 0 || weekday == 6;
    const double h = static_cast<double>(rem) / 3600.0;
    const double s2 = 2.0 * cfg.peak_width_hours * cfg.peak_width_hours;
    const double bumps = cfg.am_peak * std::exp(-(h - cfg.am_hour) * (h - cfg.am_hour) / s2) +
                         cfg.pm_peak * std::exp(-(h - cfg.pm_hour) * (h - cfg.pm_hour) / s2);
    return cfg.base_flow + (weekend ? cfg.weekend_factor : 1.0) * bumps;
  }

  double speed_level(std::int64_t t, std::int64_t interval) const {
    return cfg.min_speed + (cfg.free_speed - cfg.min_speed) *
                               std::exp(-flow_level(t - interval) / cfg.flow_speed_scale);
  }

  double journey_level(std::int64_t t, std::int64_t interval) const {
    return 60.0 * cfg.link_km / speed_level(t, interval);
  }
};

}  // namespace

MultimodalDataset synth(const SynthConfig& cfg) {
  if (cfg.days < 2) throw DataError("synth: duration must be at least 2 days");
  if (cfg.interval_minutes < 1 || 1440 % cfg.interval_minutes != 0)
    throw DataError("synth: interval must divide a day");
  if (cfg.noise < 0.0) throw DataError("synth: noise level must be >= 0");

  // Monday 2013-01-07 00:00 UTC, so weekday structure starts on a week boundary
  const std::int64_t start = days_from_civil(2013, 1, 7) * 86400;
  const std::int64_t interval = 60LL * cfg.interval_minutes;
  const Eigen::Index per_day = 1440 / cfg.interval_minutes;
  const Eigen::Index n = static_cast<Eigen::Index>(cfg.days) * per_day;

  SynthCurves curves{cfg};
  Rng rng(cfg.seed);

  MultimodalDataset d;
  d.names = {"flow", "speed", "journey_time"};
  d.values.assign(3, Vec(n));
  d.timestamps.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::int64_t t = start + i * interval;
    d.timestamps.push_back(t);
    const double flow =
        curves.flow_level(t) + cfg.noise * cfg.flow_noise_sd * rng.normal();
    const double speed =
        curves.speed_level(t, interval) + cfg.noise * cfg.speed_noise_sd * rng.normal();
    const double journey =
        curves.journey_level(t, interval) + cfg.noise * cfg.journey_noise_sd * rng.normal();
    d.values[0](i) = round3(std::max(0.0, flow));
    d.values[1](i) = round3(std::max(1.0, speed));
    d.values[2](i) = round3(std::max(0.01, journey));
  }
  return d;
}

}  // namespace hmdlf
