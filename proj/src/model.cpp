#include "hmdlf/model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

namespace hmdlf {

using nlohmann::json;

void BranchConfig::validate() const {
  if (conv_filters < 1 || kernel_width < 1 || pool_width < 1 || hidden < 1 ||
      attention_width < 1)
    throw ConfigError("branch config: all sizes must be >= 1");
  if (kernel_width % 2 == 0) throw ConfigError("branch config: kernel width must be odd");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "rnn") return ModelKind::rnn;
  if (name == "gru") return ModelKind::gru;
  if (name == "cnn") return ModelKind::cnn;
  if (name == "cnn_gru") return ModelKind::cnn_gru;
  if (name == "cnn_gru_attention") return ModelKind::cnn_gru_attention;
  if (name == "hmdlf") return ModelKind::hmdlf;
  throw ConfigError("unknown model kind '" + name + "'");
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::rnn: return "rnn";
    case ModelKind::gru: return "gru";
    case ModelKind::cnn: return "cnn";
    case ModelKind::cnn_gru: return "cnn_gru";
    case ModelKind::cnn_gru_attention: return "cnn_gru_attention";
    case ModelKind::hmdlf: return "hmdlf";
  }
  return "hmdlf";
}

namespace {

bool kind_has_conv(ModelKind k) {
  return k == ModelKind::cnn || k == ModelKind::cnn_gru || k == ModelKind::cnn_gru_attention ||
         k == ModelKind::hmdlf;
}
bool kind_has_gru(ModelKind k) {
  return k == ModelKind::gru || k == ModelKind::cnn_gru || k == ModelKind::cnn_gru_attention ||
         k == ModelKind::hmdlf;
}
bool kind_has_fusion(ModelKind k) {
  return k == ModelKind::cnn_gru || k == ModelKind::cnn_gru_attention || k == ModelKind::hmdlf;
}

bool kind_has_attention(ModelKind k, const BranchConfig& b) {
  if (k == ModelKind::cnn_gru_attention) return true;
  if (k == ModelKind::hmdlf) return b.use_attention;
  return false;
}

}  // namespace

void ModelConfig::validate() const {
  branch.validate();
  if (modalities.empty()) throw ConfigError("model config: at least one modality required");
  std::set<std::string> uniq(modalities.begin(), modalities.end());
  if (uniq.size() != modalities.size())
    throw ConfigError("model config: duplicate modality names");
  if (kind != ModelKind::hmdlf && modalities.size() != 1)
    throw ConfigError("model config: kind '" + to_string(kind) + "' is single-modality");
  if (window < 1) throw ConfigError("model config: window must be >= 1");
  if (kind_has_conv(kind) && window < branch.pool_width)
    throw ConfigError("model config: window shorter than pool width");
  if (fusion_width < 1) throw ConfigError("model config: fusion width must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model config: dropout must be in [0, 1)");
}

// ---------------------------------------------------------------------------
// Branch

Mat Branch::forward(const Seq& x) {
  batch_ = x.empty() ? 0 : x[0].rows();
  Seq cur = x;
  if (conv) {
    cur = conv->forward(cur);
    cur = relu->forward(cur);
    cur = pool->forward(cur);
  }
  steps_ = static_cast<Eigen::Index>(cur.size());
  channels_ = cur.empty() ? 0 : cur[0].cols();
  if (gru) {
    Seq hs = gru->forward(cur);
    hidden_steps_ = static_cast<Eigen::Index>(hs.size());
    if (attention) return attention->forward(hs).first;
    return hs.back();
  }
  if (rnn) {
    Seq hs = rnn->forward(cur);
    hidden_steps_ = static_cast<Eigen::Index>(hs.size());
    return hs.back();
  }
  return flatten_seq(cur);
}

Seq Branch::backward(const Mat& d_rep) {
  Seq dcur;
  if (gru) {
    Seq dhs;
    if (attention) {
      dhs = attention->backward(d_rep);
    } else {
      dhs.assign(static_cast<std::size_t>(hidden_steps_), Mat::Zero(batch_, gru->hidden()));
      dhs.back() = d_rep;
    }
    dcur = gru->backward(dhs);
  } else if (rnn) {
    Seq dhs(static_cast<std::size_t>(hidden_steps_), Mat::Zero(batch_, rnn->hidden()));
    dhs.back() = d_rep;
    dcur = rnn->backward(dhs);
  } else {
    dcur = unflatten_seq(d_rep, steps_, channels_);
  }
  if (conv) {
    dcur = pool->backward(dcur);
    dcur = relu->backward(dcur);
    dcur = conv->backward(dcur);
  }
  return dcur;
}

std::vector<ParamRef> Branch::params(const std::string& prefix) {
  std::vector<ParamRef> out;
  auto append = [&out](std::vector<ParamRef> more) {
    out.insert(out.end(), more.begin(), more.end());
  };
  if (conv) append(conv->params(prefix + ".conv"));
  if (rnn) append(rnn->params(prefix + ".rnn"));
  if (gru) append(gru->params(prefix + ".gru"));
  if (attention) append(attention->params(prefix + ".attn"));
  return out;
}

void Branch::zero_grad() {
  if (conv) conv->zero_grad();
  if (rnn) rnn->zero_grad();
  if (gru) gru->zero_grad();
  if (attention) attention->zero_grad();
}

Eigen::Index Branch::rep_width(Eigen::Index window_size) const {
  if (gru) return gru->hidden();
  if (rnn) return rnn->hidden();
  return (window_size / pool->width()) * conv->out_channels();
}

// ---------------------------------------------------------------------------
// HmdlfModel

HmdlfModel::HmdlfModel(ModelConfig cfg)
    : cfg_(std::move(cfg)), dropout_rng_(cfg_.seed ^ 0x5DEECE66DULL) {
  cfg_.validate();
  Rng init_rng(cfg_.seed);
  const BranchConfig& b = cfg_.branch;
  const bool with_conv = kind_has_conv(cfg_.kind);
  const bool with_gru = kind_has_gru(cfg_.kind);
  const bool with_attn = kind_has_attention(cfg_.kind, b);

  branches_.resize(cfg_.modalities.size());
  for (Branch& br : branches_) {
    Eigen::Index rec_in = 1;
    if (with_conv) {
      br.conv.emplace(1, b.conv_filters, b.kernel_width, init_rng);
      br.relu.emplace();
      br.pool.emplace(b.pool_width);
      rec_in = b.conv_filters;
    }
    if (with_gru) {
      br.gru.emplace(rec_in, b.hidden, init_rng, cfg_.gru_bias);
      if (with_attn) br.attention.emplace(b.hidden, b.attention_width, init_rng);
    } else if (cfg_.kind == ModelKind::rnn) {
      br.rnn.emplace(rec_in, b.hidden, init_rng);
    }
    rep_widths_.push_back(br.rep_width(cfg_.window));
  }

  Eigen::Index head_in = 0;
  for (Eigen::Index w : rep_widths_) head_in += w;
  if (kind_has_fusion(cfg_.kind)) {
    fusion_.emplace(head_in, cfg_.fusion_width, Activation::relu, init_rng);
    drop_.emplace(cfg_.dropout);
    out_.emplace(cfg_.fusion_width, 1, Activation::linear, init_rng);
  } else {
    out_.emplace(head_in, 1, Activation::linear, init_rng);
  }
}

Vec HmdlfModel::forward(const std::vector<Mat>& inputs, bool training) {
  if (inputs.size() != cfg_.modalities.size())
    throw ShapeError("model: expected " + std::to_string(cfg_.modalities.size()) +
                     " modality inputs, got " + std::to_string(inputs.size()));
  const Eigen::Index batch = inputs[0].rows();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].rows() != batch)
      throw ShapeError("model: inconsistent batch size across modalities");
    if (inputs[i].cols() != cfg_.window)
      throw ShapeError("model: modality '" + cfg_.modalities[i] + "' window length " +
                       std::to_string(inputs[i].cols()) + " != configured " +
                       std::to_string(cfg_.window));
  }

  Eigen::Index head_in = 0;
  for (Eigen::Index w : rep_widths_) head_in += w;
  fused_in_.resize(batch, head_in);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    Seq steps(static_cast<std::size_t>(cfg_.window));
    for (Eigen::Index t = 0; t < cfg_.window; ++t)
      steps[static_cast<std::size_t>(t)] = inputs[i].col(t);
    fused_in_.middleCols(at, rep_widths_[i]) = branches_[i].forward(steps);
    at += rep_widths_[i];
  }

  Mat y;
  if (fusion_) {
    Mat h = fusion_->forward(fused_in_);
    h = drop_->forward(h, training, dropout_rng_);
    y = out_->forward(h);
  } else {
    y = out_->forward(fused_in_);
  }
  return y.col(0);
}

void HmdlfModel::backward(const Vec& d_pred) {
  Mat up = d_pred;
  Mat d_concat;
  if (fusion_) {
    Mat d = out_->backward(up);
    d = drop_->backward(d);
    d_concat = fusion_->backward(d);
  } else {
    d_concat = out_->backward(up);
  }
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    branches_[i].backward(d_concat.middleCols(at, rep_widths_[i]));
    at += rep_widths_[i];
  }
}

std::vector<ParamRef> HmdlfModel::params() {
  std::vector<ParamRef> out;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    auto more = branches_[i].params("branch." + cfg_.modalities[i]);
    out.insert(out.end(), more.begin(), more.end());
  }
  auto append = [&out](std::vector<ParamRef> more) {
    out.insert(out.end(), more.begin(), more.end());
  };
  if (fusion_) append(fusion_->params("head.fusion"));
  append(out_->params("head.out"));
  return out;
}

void HmdlfModel::zero_grad() {
  for (Branch& b : branches_) b.zero_grad();
  if (fusion_) fusion_->zero_grad();
  out_->zero_grad();
}

std::vector<Tensor> HmdlfModel::state() const {
  auto& self = const_cast<HmdlfModel&>(*this);  // read-only use of params()
  std::vector<Tensor> snapshot;
  for (const ParamRef& p : self.params()) snapshot.push_back(*p.value);
  return snapshot;
}

void HmdlfModel::set_state(const std::vector<Tensor>& snapshot) {
  auto refs = params();
  if (snapshot.size() != refs.size())
    throw ShapeError("model: snapshot parameter count mismatch");
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (!snapshot[i].same_shape(*refs[i].value))
      throw ShapeError("model: snapshot shape mismatch at " + refs[i].name);
    *refs[i].value = snapshot[i];
  }
}

// ---------------------------------------------------------------------------
// loss

LossValue compute_loss(const Vec& predictions, const Vec& targets, HmdlfModel& model,
                       double lambda) {
  if (predictions.size() != targets.size())
    throw ShapeError("loss: prediction/target length mismatch, " +
                     std::to_string(predictions.size()) + " vs " +
                     std::to_string(targets.size()));
  if (predictions.size() == 0) throw ShapeError("loss: empty batch");
  LossValue v;
  v.data = (predictions - targets).squaredNorm() / static_cast<double>(predictions.size());
  if (lambda != 0.0) {
    double sq = 0.0;
    for (const ParamRef& p : model.params())
      if (p.penalized) sq += p.value->flat().squaredNorm();
    v.penalty = 0.5 * lambda * sq;
  }
  v.total = v.data + v.penalty;
  return v;
}

Vec mse_gradient(const Vec& predictions, const Vec& targets) {
  return 2.0 / static_cast<double>(predictions.size()) * (predictions - targets);
}

void add_l2_gradient(HmdlfModel& model, double lambda) {
  if (lambda == 0.0) return;
  for (const ParamRef& p : model.params())
    if (p.penalized) p.grad->flat() += lambda * p.value->flat();
}

HmdlfModel build_baseline(const std::string& kind, ModelConfig config) {
  config.kind = model_kind_from_string(kind);
  if (config.kind != ModelKind::hmdlf && config.modalities.size() > 1)
    config.modalities = {config.modalities.front()};
  return HmdlfModel(std::move(config));
}

// ---------------------------------------------------------------------------
// serialization

namespace {

constexpr char kMagic[8] = {'H', 'M', 'D', 'L', 'F', 'M', 'D', 'L'};
constexpr std::uint32_t kFormatVersion = 1;

json config_to_json(const ModelConfig& c) {
  return json{{"kind", to_string(c.kind)},
              {"modalities", c.modalities},
              {"window", c.window},
              {"conv_filters", c.branch.conv_filters},
              {"kernel_width", c.branch.kernel_width},
              {"pool_width", c.branch.pool_width},
              {"hidden", c.branch.hidden},
              {"attention_width", c.branch.attention_width},
              {"use_attention", c.branch.use_attention},
              {"fusion_width", c.fusion_width},
              {"dropout", c.dropout},
              {"gru_bias", c.gru_bias},
              {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.kind = model_kind_from_string(j.at("kind").get<std::string>());
  c.modalities = j.at("modalities").get<std::vector<std::string>>();
  c.window = j.at("window").get<Eigen::Index>();
  c.branch.conv_filters = j.at("conv_filters").get<Eigen::Index>();
  c.branch.kernel_width = j.at("kernel_width").get<Eigen::Index>();
  c.branch.pool_width = j.at("pool_width").get<Eigen::Index>();
  c.branch.hidden = j.at("hidden").get<Eigen::Index>();
  c.branch.attention_width = j.at("attention_width").get<Eigen::Index>();
  c.branch.use_attention = j.at("use_attention").get<bool>();
  c.fusion_width = j.at("fusion_width").get<Eigen::Index>();
  c.dropout = j.at("dropout").get<double>();
  c.gru_bias = j.at("gru_bias").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void save_model(const HmdlfModel& model, const std::string& path) {
  auto& self = const_cast<HmdlfModel&>(model);
  auto refs = self.params();

  json header;
  header["artifact"] = "hmdlf";
  header["config"] = config_to_json(model.config());
  json scalers = json::object();
  for (const auto& [name, s] : model.scalers) scalers[name] = {{"lo", s.lo}, {"hi", s.hi}};
  header["scalers"] = scalers;
  json manifest = json::array();
  for (const ParamRef& p : refs) {
    json shape = json::array();
    for (Eigen::Index e : p.value->shape()) shape.push_back(e);
    manifest.push_back({{"name", p.name}, {"shape", shape}});
  }
  header["params"] = manifest;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_model: cannot open '" + path + "' for writing");
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kFormatVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const ParamRef& p : refs)
    out.write(reinterpret_cast<const char*>(p.value->flat().data()),
              static_cast<std::streamsize>(p.value->size() * sizeof(double)));
  if (!out) throw IoError("save_model: write failure on '" + path + "'");
}

HmdlfModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_model: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("load_model: '" + path + "' is not a model file");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != kFormatVersion)
    throw IoError("load_model: unsupported model file version " + std::to_string(version));
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in) throw IoError("load_model: truncated header in '" + path + "'");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("load_model: truncated header in '" + path + "'");

  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("load_model: corrupt header: ") + e.what());
  }

  HmdlfModel model(config_from_json(header.at("config")));
  for (const auto& [name, s] : header.at("scalers").items())
    model.scalers[name] = Scaler{s.at("lo").get<double>(), s.at("hi").get<double>()};

  auto refs = model.params();
  const auto& manifest = header.at("params");
  if (manifest.size() != refs.size())
    throw IoError("load_model: parameter manifest does not match architecture");
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (manifest[i].at("name").get<std::string>() != refs[i].name)
      throw IoError("load_model: parameter order mismatch at '" + refs[i].name + "'");
    const auto shape = manifest[i].at("shape").get<std::vector<Eigen::Index>>();
    if (shape != refs[i].value->shape())
      throw IoError("load_model: shape mismatch for '" + refs[i].name + "'");
    in.read(reinterpret_cast<char*>(refs[i].value->flat().data()),
            static_cast<std::streamsize>(refs[i].value->size() * sizeof(double)));
    if (!in) throw IoError("load_model: truncated payload at '" + refs[i].name + "'");
  }
  return model;
}

}  // namespace hmdlf
