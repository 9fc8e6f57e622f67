#include "hmdlf/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hmdlf/gradcheck.hpp"

namespace hmdlf {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::vector<std::string>& allowed,
                         const std::string& where) {
  if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("config: unknown key '" + where + "." + key + "'");
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for '" + key + "'");
  }
}

SynthConfig parse_synth(const json& j, std::uint64_t default_seed) {
  reject_unknown_keys(j, {"days", "interval_minutes", "seed", "noise", "base_flow", "am_peak",
                          "pm_peak", "am_hour", "pm_hour", "peak_width_hours", "weekend_factor",
                          "flow_noise_sd", "free_speed", "min_speed", "flow_speed_scale",
                          "speed_noise_sd", "link_km", "journey_noise_sd"},
                      "synth");
  SynthConfig s;
  s.seed = default_seed;
  s.days = get_or(j, "days", s.days);
  s.interval_minutes = get_or(j, "interval_minutes", s.interval_minutes);
  s.seed = get_or(j, "seed", s.seed);
  s.noise = get_or(j, "noise", s.noise);
  s.base_flow = get_or(j, "base_flow", s.base_flow);
  s.am_peak = get_or(j, "am_peak", s.am_peak);
  s.pm_peak = get_or(j, "pm_peak", s.pm_peak);
  s.am_hour = get_or(j, "am_hour", s.am_hour);
  s.pm_hour = get_or(j, "pm_hour", s.pm_hour);
  s.peak_width_hours = get_or(j, "peak_width_hours", s.peak_width_hours);
  s.weekend_factor = get_or(j, "weekend_factor", s.weekend_factor);
  s.flow_noise_sd = get_or(j, "flow_noise_sd", s.flow_noise_sd);
  s.free_speed = get_or(j, "free_speed", s.free_speed);
  s.min_speed = get_or(j, "min_speed", s.min_speed);
  s.flow_speed_scale = get_or(j, "flow_speed_scale", s.flow_speed_scale);
  s.speed_noise_sd = get_or(j, "speed_noise_sd", s.speed_noise_sd);
  s.link_km = get_or(j, "link_km", s.link_km);
  s.journey_noise_sd = get_or(j, "journey_noise_sd", s.journey_noise_sd);
  return s;
}

json synth_to_json(const SynthConfig& s) {
  return json{{"days", s.days},
              {"interval_minutes", s.interval_minutes},
              {"seed", s.seed},
              {"noise", s.noise},
              {"base_flow", s.base_flow},
              {"am_peak", s.am_peak},
              {"pm_peak", s.pm_peak},
              {"am_hour", s.am_hour},
              {"pm_hour", s.pm_hour},
              {"peak_width_hours", s.peak_width_hours},
              {"weekend_factor", s.weekend_factor},
              {"flow_noise_sd", s.flow_noise_sd},
              {"free_speed", s.free_speed},
              {"min_speed", s.min_speed},
              {"flow_speed_scale", s.flow_speed_scale},
              {"speed_noise_sd", s.speed_noise_sd},
              {"link_km", s.link_km},
              {"journey_noise_sd", s.journey_noise_sd}};
}

void apply_override(json& doc, const std::string& spec) {
  const std::size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + spec + "' is not of the form key.path=value");
  const std::string path = spec.substr(0, eq);
  const std::string text = spec.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;  // plain string
  }
  json* at = &doc;
  std::size_t begin = 0;
  while (true) {
    const std::size_t dot = path.find('.', begin);
    const std::string key = path.substr(begin, dot == std::string::npos ? dot : dot - begin);
    if (key.empty()) throw ConfigError("override '" + spec + "' has an empty key segment");
    if (dot == std::string::npos) {
      (*at)[key] = value;
      break;
    }
    at = &(*at)[key];
    begin = dot + 1;
  }
}

}  // namespace

RunConfig parse_run_config_text(const std::string& json_text,
                                const std::vector<std::string>& overrides) {
  json doc;
  try {
    doc = json_text.empty() ? json::object() : json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  for (const std::string& o : overrides) apply_override(doc, o);

  reject_unknown_keys(
      doc, {"seed", "output_dir", "data", "schema", "model", "train", "synth", "evaluate",
            "compare"},
      "<top>");

  RunConfig cfg;
  cfg.seed = get_or(doc, "seed", cfg.seed);
  cfg.output_dir = get_or(doc, "output_dir", cfg.output_dir);

  if (doc.contains("data")) {
    const json& d = doc.at("data");
    reject_unknown_keys(d, {"csv", "synth"}, "data");
    if (d.contains("csv") == d.contains("synth"))
      throw ConfigError("config: data needs exactly one of 'csv' or 'synth'");
    if (d.contains("csv")) cfg.data_csv = d.at("csv").get<std::string>();
    if (d.contains("synth")) cfg.data_synth = parse_synth(d.at("synth"), cfg.seed);
  }

  if (doc.contains("schema")) {
    const json& s = doc.at("schema");
    reject_unknown_keys(s, {"timestamp", "flow", "speed", "journey_time"}, "schema");
    cfg.schema.timestamp_column = get_or(s, "timestamp", std::string("timestamp"));
    cfg.schema.value_columns = {{"flow", get_or(s, "flow", std::string("flow"))},
                                {"speed", get_or(s, "speed", std::string("speed"))},
                                {"journey_time", get_or(s, "journey_time",
                                                        std::string("journey_time"))}};
  }

  if (doc.contains("model")) {
    const json& m = doc.at("model");
    reject_unknown_keys(m, {"kind", "modalities", "conv_filters", "kernel_width", "pool_width",
                            "hidden", "attention_width", "use_attention", "fusion_width",
                            "dropout", "gru_bias"},
                        "model");
    cfg.model.kind = model_kind_from_string(get_or(m, "kind", std::string("hmdlf")));
    cfg.model.modalities = get_or(m, "modalities", cfg.model.modalities);
    cfg.model.branch.conv_filters = get_or(m, "conv_filters", cfg.model.branch.conv_filters);
    cfg.model.branch.kernel_width = get_or(m, "kernel_width", cfg.model.branch.kernel_width);
    cfg.model.branch.pool_width = get_or(m, "pool_width", cfg.model.branch.pool_width);
    cfg.model.branch.hidden = get_or(m, "hidden", cfg.model.branch.hidden);
    cfg.model.branch.attention_width = get_or(m, "attention_width", cfg.model.branch.hidden);
    cfg.model.branch.use_attention = get_or(m, "use_attention", cfg.model.branch.use_attention);
    cfg.model.fusion_width = get_or(m, "fusion_width", cfg.model.fusion_width);
    cfg.model.dropout = get_or(m, "dropout", cfg.model.dropout);
    cfg.model.gru_bias = get_or(m, "gru_bias", cfg.model.gru_bias);
    if (!m.contains("attention_width"))
      cfg.model.branch.attention_width = cfg.model.branch.hidden;
  } else {
    cfg.model.branch.attention_width = cfg.model.branch.hidden;
  }

  if (doc.contains("train")) {
    const json& t = doc.at("train");
    reject_unknown_keys(t, {"batch_size", "max_epochs", "patience", "window", "learning_rate",
                            "lambda", "early_stopping", "grad_clip"},
                        "train");
    cfg.train.batch_size = get_or(t, "batch_size", cfg.train.batch_size);
    cfg.train.max_epochs = get_or(t, "max_epochs", cfg.train.max_epochs);
    cfg.train.patience = get_or(t, "patience", cfg.train.patience);
    cfg.train.window = get_or(t, "window", cfg.train.window);
    cfg.train.learning_rate = get_or(t, "learning_rate", cfg.train.learning_rate);
    cfg.train.lambda = get_or(t, "lambda", cfg.train.lambda);
    cfg.train.early_stopping = get_or(t, "early_stopping", cfg.train.early_stopping);
    cfg.train.grad_clip = get_or(t, "grad_clip", cfg.train.grad_clip);
  }
  cfg.train.seed = cfg.seed;
  cfg.model.seed = cfg.seed;
  cfg.model.window = cfg.train.window;

  if (doc.contains("synth")) cfg.synth = parse_synth(doc.at("synth"), cfg.seed);

  if (doc.contains("evaluate")) {
    const json& e = doc.at("evaluate");
    reject_unknown_keys(e, {"model", "csv", "start", "end"}, "evaluate");
    EvaluateConfig ec;
    ec.model_path = get_or(e, "model", std::string());
    ec.csv = get_or(e, "csv", std::string());
    if (e.contains("start")) ec.start = e.at("start").get<std::string>();
    if (e.contains("end")) ec.end = e.at("end").get<std::string>();
    cfg.evaluate = ec;
  }

  if (doc.contains("compare")) {
    const json& c = doc.at("compare");
    reject_unknown_keys(c, {"models", "lookup_sizes", "seasonal_period", "ridge_lambda",
                            "train_fraction"},
                        "compare");
    cfg.compare.models = get_or(c, "models", cfg.compare.models);
    cfg.compare.lookup_sizes = get_or(c, "lookup_sizes", cfg.compare.lookup_sizes);
    cfg.compare.seasonal_period = get_or(c, "seasonal_period", cfg.compare.seasonal_period);
    cfg.compare.ridge_lambda = get_or(c, "ridge_lambda", cfg.compare.ridge_lambda);
    cfg.compare.train_fraction = get_or(c, "train_fraction", cfg.compare.train_fraction);
    if (cfg.compare.train_fraction <= 0.0 || cfg.compare.train_fraction >= 1.0)
      throw ConfigError("config: compare.train_fraction must be in (0, 1)");
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config_text(buf.str(), overrides);
}

std::string config_echo(const RunConfig& cfg) {
  json doc;
  doc["seed"] = cfg.seed;
  doc["output_dir"] = cfg.output_dir;
  if (cfg.data_csv) doc["data"]["csv"] = *cfg.data_csv;
  if (cfg.data_synth) doc["data"]["synth"] = synth_to_json(*cfg.data_synth);
  doc["schema"]["timestamp"] = cfg.schema.timestamp_column;
  for (const auto& [canonical, actual] : cfg.schema.value_columns)
    doc["schema"][canonical] = actual;
  doc["model"] = {{"kind", to_string(cfg.model.kind)},
                  {"modalities", cfg.model.modalities},
                  {"conv_filters", cfg.model.branch.conv_filters},
                  {"kernel_width", cfg.model.branch.kernel_width},
                  {"pool_width", cfg.model.branch.pool_width},
                  {"hidden", cfg.model.branch.hidden},
                  {"attention_width", cfg.model.branch.attention_width},
                  {"use_attention", cfg.model.branch.use_attention},
                  {"fusion_width", cfg.model.fusion_width},
                  {"dropout", cfg.model.dropout},
                  {"gru_bias", cfg.model.gru_bias}};
  doc["train"] = {{"batch_size", cfg.train.batch_size},
                  {"max_epochs", cfg.train.max_epochs},
                  {"patience", cfg.train.patience},
                  {"window", cfg.train.window},
                  {"learning_rate", cfg.train.learning_rate},
                  {"lambda", cfg.train.lambda},
                  {"early_stopping", cfg.train.early_stopping},
                  {"grad_clip", cfg.train.grad_clip}};
  if (cfg.synth) doc["synth"] = synth_to_json(*cfg.synth);
  if (cfg.evaluate) {
    doc["evaluate"] = {{"model", cfg.evaluate->model_path}, {"csv", cfg.evaluate->csv}};
    if (cfg.evaluate->start) doc["evaluate"]["start"] = *cfg.evaluate->start;
    if (cfg.evaluate->end) doc["evaluate"]["end"] = *cfg.evaluate->end;
  }
  doc["compare"] = {{"models", cfg.compare.models},
                    {"lookup_sizes", cfg.compare.lookup_sizes},
                    {"seasonal_period", cfg.compare.seasonal_period},
                    {"ridge_lambda", cfg.compare.ridge_lambda},
                    {"train_fraction", cfg.compare.train_fraction}};
  return doc.dump();
}

// ---------------------------------------------------------------------------
// data plumbing shared by train / evaluate / compare

namespace {

MultimodalDataset subset(const MultimodalDataset& data, const std::vector<std::string>& names) {
  MultimodalDataset out;
  out.timestamps = data.timestamps;
  for (const std::string& n : names) {
    if (!data.has(n)) throw DataError("data has no modality '" + n + "' required by the model");
    out.names.push_back(n);
    out.values.push_back(data.series(n));
  }
  return out;
}

}  // namespace

PreparedData prepare_training_data(const MultimodalDataset& data,
                                   const std::vector<std::string>& modalities,
                                   Eigen::Index window_size) {
  MultimodalDataset sub = subset(data, modalities);
  const Eigen::Index fit_count = (sub.count() * 8) / 10;
  if (fit_count < 1) throw DataError("not enough records to fit scalers on a training portion");
  PreparedData out;
  MultimodalDataset norm = sub;
  for (std::size_t m = 0; m < sub.names.size(); ++m) {
    const Scaler s = fit_scaler(sub.values[m].head(fit_count));
    out.scalers[sub.names[m]] = s;
    norm.values[m] = s.apply(sub.values[m]);
  }
  out.samples = window(norm, window_size);
  return out;
}

WindowedSamples normalized_windows(const MultimodalDataset& data,
                                   const std::vector<std::string>& modalities,
                                   Eigen::Index window_size,
                                   const std::map<std::string, Scaler>& scalers) {
  MultimodalDataset norm = subset(data, modalities);
  for (std::size_t m = 0; m < norm.names.size(); ++m) {
    const auto it = scalers.find(norm.names[m]);
    if (it == scalers.end())
      throw DataError("model stores no scaler for modality '" + norm.names[m] + "'");
    norm.values[m] = it->second.apply(norm.values[m]);
  }
  return window(norm, window_size);
}

MultimodalDataset load_dataset(const RunConfig& cfg, std::ostream& log) {
  if (cfg.data_csv) {
    IngestResult r = ingest_csv(*cfg.data_csv, cfg.schema);
    for (const std::string& w : r.warnings) log << "warning: " << w << "\n";
    return r.data;
  }
  if (cfg.data_synth) return synth(*cfg.data_synth);
  throw ConfigError("config: a 'data' section ('csv' or 'synth') is required");
}

// ---------------------------------------------------------------------------
// SVG

void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::vector<std::pair<std::string, Vec>>& series,
                          const std::vector<std::string>& preamble) {
  const int width = 960, height = 340, pad = 40;
  double lo = 0.0, hi = 1.0;
  Eigen::Index len = 0;
  bool first = true;
  for (const auto& [name, v] : series) {
    if (v.size() == 0) continue;
    len = std::max(len, v.size());
    const double vlo = v.minCoeff(), vhi = v.maxCoeff();
    lo = first ? vlo : std::min(lo, vlo);
    hi = first ? vhi : std::max(hi, vhi);
    first = false;
  }
  if (hi == lo) hi = lo + 1.0;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("svg: cannot open '" + path + "' for writing");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  for (const std::string& p : preamble) out << "<!-- " << p << " -->\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << pad << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
      << title << "</text>\n";
  std::size_t ci = 0;
  int legend_x = pad;
  for (const auto& [name, v] : series) {
    const char* color = colors[ci % 5];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1\" points=\"";
    char buf[64];
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double x = pad + (width - 2.0 * pad) * (len > 1 ? static_cast<double>(i) / (len - 1) : 0.5);
      const double y = height - pad - (height - 2.0 * pad - 20) * (v(i) - lo) / (hi - lo);
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", x, y);
      out << buf;
    }
    out << "\"/>\n";
    out << "<text x=\"" << legend_x << "\" y=\"" << height - 12
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color << "\">" << name
        << "</text>\n";
    legend_x += 24 + 8 * static_cast<int>(name.size());
    ++ci;
  }
  out << "</svg>\n";
}

// ---------------------------------------------------------------------------
// commands

namespace {

std::filesystem::path ensure_output_dir(const RunConfig& cfg) {
  std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.output_dir + "'");
  return dir;
}

std::vector<std::string> file_preamble(const RunConfig& cfg) {
  return {kArtifactVersion, "config: " + config_echo(cfg)};
}

}  // namespace

int cmd_synth(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.synth) throw ConfigError("config: cmd synth requires a 'synth' section");
  const MultimodalDataset data = synth(*cfg.synth);
  const auto dir = ensure_output_dir(cfg);
  const std::string path = (dir / "synthetic.csv").string();
  export_csv(data, path, file_preamble(cfg));
  log << "synth: wrote " << data.count() << " records to " << path << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& log) {
  const MultimodalDataset data = load_dataset(cfg, log);
  PreparedData prepared = prepare_training_data(data, cfg.model.modalities, cfg.train.window);

  HmdlfModel model(cfg.model);
  model.scalers = prepared.scalers;
  TrainReport report = train(model, prepared.samples, cfg.train);

  const auto dir = ensure_output_dir(cfg);
  const std::string model_path = (dir / "model.hmdlf").string();
  save_model(model, model_path);

  const std::string epochs_path = (dir / "train_epochs.csv").string();
  {
    std::ofstream out(epochs_path, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + epochs_path + "'");
    for (const std::string& p : file_preamble(cfg)) out << "# " << p << "\n";
    out << "epoch,train_mse,val_mse\n";
    for (const EpochRecord& e : report.epochs)
      out << e.epoch << "," << format_double(e.train_mse) << "," << format_double(e.val_mse)
          << "\n";
  }

  const std::string report_path = (dir / "train_report.json").string();
  {
    json j;
    j["artifact"] = kArtifactVersion;
    j["config"] = json::parse(config_echo(cfg));
    j["best_epoch"] = report.best_epoch;
    j["best_val_mse"] = report.best_val_mse;
    j["final_train_mse"] = report.final_train_mse;
    j["final_val_mse"] = report.final_val_mse;
    j["stopped_early"] = report.stopped_early;
    j["epochs_run"] = report.epochs.size();
    j["train_samples"] = report.train_samples;
    j["val_samples"] = report.val_samples;
    // wall clock lives only in this section; everything else is
    // byte-reproducible for a fixed seed
    json seconds = json::array();
    for (const EpochRecord& e : report.epochs) seconds.push_back(e.seconds);
    j["timing"] = {{"total_seconds", report.total_seconds}, {"per_epoch_seconds", seconds}};
    std::ofstream out(report_path, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + report_path + "'");
    out << j.dump(2) << "\n";
  }

  log << "train: " << to_string(cfg.model.kind) << " on " << report.train_samples << "+"
      << report.val_samples << " samples, " << report.epochs.size() << " epochs, best epoch "
      << report.best_epoch << " (val mse " << report.best_val_mse << ")\n";
  log << "train: model -> " << model_path << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.evaluate || cfg.evaluate->model_path.empty() || cfg.evaluate->csv.empty())
    throw ConfigError("config: cmd evaluate requires evaluate.model and evaluate.csv");
  HmdlfModel model = load_model(cfg.evaluate->model_path);

  IngestResult ingest = ingest_csv(cfg.evaluate->csv, cfg.schema);
  for (const std::string& w : ingest.warnings) log << "warning: " << w << "\n";
  MultimodalDataset data = ingest.data;
  const std::int64_t start =
      cfg.evaluate->start ? parse_iso8601(*cfg.evaluate->start) : INT64_MIN;
  const std::int64_t end = cfg.evaluate->end ? parse_iso8601(*cfg.evaluate->end) : INT64_MAX;
  if (start != INT64_MIN || end != INT64_MAX) data = data.between(start, end);

  const auto& modalities = model.config().modalities;
  const Eigen::Index w = model.config().window;
  WindowedSamples raw = window(subset(data, modalities), w);
  WindowedSamples norm = normalized_windows(data, modalities, w, model.scalers);

  Vec pred_norm = predict_all(model, norm, 1024);
  const Scaler flow_scaler = model.scalers.at("flow");
  Vec predicted = flow_scaler.invert(pred_norm);
  const Vec& actual = raw.targets;

  MetricsRecord metrics;
  metrics.rmse = rmse(predicted, actual);
  metrics.count = raw.count();
  metrics.model_tag = to_string(model.config().kind);
  metrics.data_tag = cfg.evaluate->csv;

  const auto dir = ensure_output_dir(cfg);
  const std::string pred_path = (dir / "predictions.csv").string();
  {
    std::ofstream out(pred_path, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + pred_path + "'");
    for (const std::string& p : file_preamble(cfg)) out << "# " << p << "\n";
    out << "timestamp,actual,predicted\n";
    for (Eigen::Index k = 0; k < raw.count(); ++k)
      out << format_iso8601(raw.target_timestamps[static_cast<std::size_t>(k)]) << ","
          << format_double(actual(k)) << "," << format_double(predicted(k)) << "\n";
  }

  const std::string metrics_path = (dir / "metrics.json").string();
  {
    json j;
    j["artifact"] = kArtifactVersion;
    j["config"] = json::parse(config_echo(cfg));
    j["rmse"] = metrics.rmse;
    j["count"] = metrics.count;
    j["model"] = metrics.model_tag;
    j["data"] = metrics.data_tag;
    std::ofstream out(metrics_path, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + metrics_path + "'");
    out << j.dump(2) << "\n";
  }

  write_line_chart_svg((dir / "predictions.svg").string(),
                       "actual vs predicted flow (" + metrics.model_tag + ")",
                       {{"actual", actual}, {"predicted", predicted}}, file_preamble(cfg));

  log << "evaluate: rmse " << metrics.rmse << " over " << metrics.count << " samples -> "
      << pred_path << "\n";
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg, std::ostream& log) {
  const GradcheckReport report = run_gradcheck(cfg.seed);
  log << "component            max_rel_err   status\n";
  for (const GradcheckRow& r : report.rows) {
    log << std::left << std::setw(21) << r.component << std::scientific << std::setprecision(3)
        << r.max_rel_err << "     " << (r.pass ? "pass" : "FAIL") << "\n";
    log.unsetf(std::ios::scientific);
  }
  log << "gradcheck: " << (report.all_pass ? "PASS" : "FAIL") << " (threshold "
      << report.threshold << ")\n";
  return report.all_pass ? 0 : 2;
}

namespace {

struct CompareRow {
  std::string model;
  Eigen::Index lookup = 0;
  double rmse_value = 0.0;
  Eigen::Index count = 0;
  std::string status;  // "ok" or an error note
};

CompareRow compare_one(const RunConfig& cfg, const std::string& name, Eigen::Index lookup,
                       const MultimodalDataset& train_data, const MultimodalDataset& test_data) {
  CompareRow row;
  row.model = name;
  row.lookup = lookup;
  row.status = "ok";

  const std::vector<std::string> flow_only = {"flow"};
  WindowedSamples raw_test = window(subset(test_data, flow_only), lookup);

  if (name == "naive") {
    row.rmse_value = rmse(naive(raw_test), raw_test.targets);
    row.count = raw_test.count();
    return row;
  }
  if (name == "seasonal_naive") {
    SeasonalResult r = seasonal_naive(raw_test, test_data, cfg.compare.seasonal_period);
    if (r.valid.empty()) throw DataError("seasonal_naive: no sample has enough history");
    Vec actual(static_cast<Eigen::Index>(r.valid.size()));
    for (std::size_t i = 0; i < r.valid.size(); ++i) actual(static_cast<Eigen::Index>(i)) = raw_test.targets(r.valid[i]);
    row.rmse_value = rmse(r.predictions, actual);
    row.count = static_cast<Eigen::Index>(r.valid.size());
    return row;
  }
  if (name == "lr" || name == "ridge") {
    const auto& modalities = cfg.model.modalities;
    MultimodalDataset train_sub = subset(train_data, modalities);
    std::map<std::string, Scaler> scalers;
    MultimodalDataset train_norm = train_sub;
    for (std::size_t m = 0; m < train_sub.names.size(); ++m) {
      scalers[train_sub.names[m]] = fit_scaler(train_sub.values[m]);
      train_norm.values[m] = scalers[train_sub.names[m]].apply(train_sub.values[m]);
    }
    LinearModel lm =
        fit_linear(window(train_norm, lookup), name == "ridge" ? cfg.compare.ridge_lambda : 0.0);
    WindowedSamples test_norm = normalized_windows(test_data, modalities, lookup, scalers);
    WindowedSamples raw_multi = window(subset(test_data, modalities), lookup);
    Vec predicted = scalers.at("flow").invert(lm.predict(test_norm));
    row.rmse_value = rmse(predicted, raw_multi.targets);
    row.count = raw_multi.count();
    return row;
  }

  // deep models, trained with the shared protocol
  ModelConfig mc = cfg.model;
  mc.window = lookup;
  mc.seed = cfg.seed;
  HmdlfModel model = build_baseline(name, mc);
  const auto& modalities = model.config().modalities;
  PreparedData prepared = prepare_training_data(train_data, modalities, lookup);
  model.scalers = prepared.scalers;
  TrainConfig tc = cfg.train;
  tc.window = lookup;
  train(model, prepared.samples, tc);

  WindowedSamples raw_multi = window(subset(test_data, modalities), lookup);
  WindowedSamples test_norm = normalized_windows(test_data, modalities, lookup, model.scalers);
  Vec predicted = model.scalers.at("flow").invert(predict_all(model, test_norm, 1024));
  row.rmse_value = rmse(predicted, raw_multi.targets);
  row.count = raw_multi.count();
  return row;
}

}  // namespace

int cmd_compare(const RunConfig& cfg, std::ostream& log) {
  const MultimodalDataset data = load_dataset(cfg, log);
  const Eigen::Index n_train =
      static_cast<Eigen::Index>(std::floor(cfg.compare.train_fraction * data.count()));
  if (n_train < 2 || n_train >= data.count())
    throw DataError("compare: train fraction leaves no usable split");
  const MultimodalDataset train_data = data.head(n_train);
  const MultimodalDataset test_data = data.tail_from(n_train);

  std::vector<CompareRow> rows;
  for (const std::string& name : cfg.compare.models) {
    for (Eigen::Index lookup : cfg.compare.lookup_sizes) {
      CompareRow row;
      try {
        row = compare_one(cfg, name, lookup, train_data, test_data);
      } catch (const std::exception& e) {
        row.model = name;
        row.lookup = lookup;
        row.status = std::string("failed: ") + e.what();
      }
      rows.push_back(std::move(row));
    }
  }

  // stdout table: one row per model, one column per lookup size
  log << std::left << std::setw(20) << "model";
  for (Eigen::Index lookup : cfg.compare.lookup_sizes) log << std::setw(14) << ("w=" + std::to_string(lookup));
  log << "\n";
  for (const std::string& name : cfg.compare.models) {
    log << std::left << std::setw(20) << name;
    for (Eigen::Index lookup : cfg.compare.lookup_sizes) {
      const auto it = std::find_if(rows.begin(), rows.end(), [&](const CompareRow& r) {
        return r.model == name && r.lookup == lookup;
      });
      if (it->status == "ok") {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", it->rmse_value);
        log << std::setw(14) << buf;
      } else {
        log << std::setw(14) << "failed";
      }
    }
    log << "\n";
  }

  const auto dir = ensure_output_dir(cfg);
  const std::string path = (dir / "comparison.csv").string();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const std::string& p : file_preamble(cfg)) out << "# " << p << "\n";
  out << "model,lookup,rmse,count,status\n";
  for (const CompareRow& r : rows) {
    out << r.model << "," << r.lookup << ",";
    if (r.status == "ok") out << format_double(r.rmse_value);
    out << "," << r.count << "," << (r.status == "ok" ? "ok" : r.status) << "\n";
  }
  log << "compare: wrote " << path << "\n";
  return 0;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"hmdlf: multimodal traffic flow forecasting"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;

  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(const RunConfig&, std::ostream&);
    bool config_required;
  };
  const Cmd cmds[] = {
      {"synth", "generate a synthetic multimodal CSV", &cmd_synth, true},
      {"train", "train the configured model", &cmd_train, true},
      {"evaluate", "score a saved model on a CSV", &cmd_evaluate, true},
      {"gradcheck", "finite-difference check of every backward pass", &cmd_gradcheck, false},
      {"compare", "train/fit a model roster and tabulate RMSE", &cmd_compare, true},
  };

  std::map<std::string, const Cmd*> dispatch;
  for (const Cmd& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "path to the JSON run config");
    sub->add_option("--set", overrides, "override of the form key.path=value");
    dispatch[c.name] = &c;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // all usage errors map onto exit code 1
  }

  const std::string chosen = app.get_subcommands().front()->get_name();
  const Cmd* cmd = dispatch.at(chosen);
  try {
    RunConfig cfg;
    if (!config_path.empty())
      cfg = load_run_config(config_path, overrides);
    else if (cmd->config_required)
      throw ConfigError("command '" + chosen + "' requires --config");
    else
      cfg = parse_run_config_text("", overrides);
    return cmd->fn(cfg, std::cout);
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace hmdlf
