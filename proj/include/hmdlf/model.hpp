#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hmdlf/data.hpp"
#include "hmdlf/layers.hpp"
#include "hmdlf/scaler.hpp"

namespace hmdlf {

/// Per-modality pipeline sizes. Defaults follow the reference training
/// setup: 64 conv filters, kernel 3, pool 2, hidden width 128.
struct BranchConfig {
  Eigen::Index conv_filters = 64;
  Eigen::Index kernel_width = 3;
  Eigen::Index pool_width = 2;
  Eigen::Index hidden = 128;
  Eigen::Index attention_width = 128;
  bool use_attention = true;

  void validate() const;
};

enum class ModelKind { rnn, gru, cnn, cnn_gru, cnn_gru_attention, hmdlf };

ModelKind model_kind_from_string(const std::string& name);
std::string to_string(ModelKind kind);

struct ModelConfig {
  ModelKind kind = ModelKind::hmdlf;
  std::vector<std::string> modalities = {"flow", "speed", "journey_time"};
  Eigen::Index window = 20;
  BranchConfig branch;
  Eigen::Index fusion_width = 128;
  double dropout = 0.2;
  bool gru_bias = false;
  std::uint64_t seed = 42;

  void validate() const;
};

/// One modality's feature pipeline. Which stages exist depends on the model
/// kind; the representation fed to the head is either the attention vector,
/// the last recurrent state, or the flattened pooled conv features.
struct Branch {
  std::optional<Conv1d> conv;
  std::optional<Relu> relu;
  std::optional<MaxPool1d> pool;
  std::optional<Rnn> rnn;
  std::optional<Gru> gru;
  std::optional<Attention> attention;

  Mat forward(const Seq& x);
  Seq backward(const Mat& d_rep);
  std::vector<ParamRef> params(const std::string& prefix);
  void zero_grad();
  Eigen::Index rep_width(Eigen::Index window_size) const;

 private:
  Eigen::Index steps_ = 0, channels_ = 0;  // post-pool geometry, for backward
  Eigen::Index batch_ = 0;
  Eigen::Index hidden_steps_ = 0;
};

/// Total objective per the training loss: mean squared error plus an L2
/// penalty over all weight matrices and kernels (biases excluded).
struct LossValue {
  double data = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

/// The full network: one branch per modality feeding a fusion head. The
/// single-modality baseline kinds reuse the same class with reduced stages:
///   rnn / gru      raw window -> recurrent layer -> dense(1)
///   cnn            conv -> relu -> pool -> flatten -> dense(1)
///   cnn_gru[,_attention], hmdlf
///                  branch(es) -> dense(fusion, relu) -> dropout -> dense(1)
class HmdlfModel {
 public:
  explicit HmdlfModel(ModelConfig cfg);

  /// inputs[i] is the [B x w] window matrix of modality i, normalized.
  /// Returns the [B] prediction vector (normalized units).
  Vec forward(const std::vector<Mat>& inputs, bool training);

  /// Accumulates parameter gradients for d(loss)/d(prediction).
  void backward(const Vec& d_pred);

  std::vector<ParamRef> params();
  void zero_grad();

  std::vector<Tensor> state() const;
  void set_state(const std::vector<Tensor>& snapshot);

  const ModelConfig& config() const { return cfg_; }
  bool has_fusion_stack() const { return fusion_.has_value(); }

  /// Per-modality scalers captured at training time; the flow scaler also
  /// denormalizes predictions. Identity until set.
  std::map<std::string, Scaler> scalers;

 private:
  ModelConfig cfg_;
  std::vector<Branch> branches_;
  std::optional<Dense> fusion_;
  std::optional<Dropout> drop_;
  std::optional<Dense> out_;
  Rng dropout_rng_;
  std::vector<Eigen::Index> rep_widths_;
  Mat fused_in_;  // cache of the concatenated representation's gradient split
};

LossValue compute_loss(const Vec& predictions, const Vec& targets, HmdlfModel& model,
                       double lambda);

/// d(mean squared error)/d(predictions) = 2/B (pred - target).
Vec mse_gradient(const Vec& predictions, const Vec& targets);

/// Adds lambda * W to every penalized parameter's gradient.
void add_l2_gradient(HmdlfModel& model, double lambda);

/// Single-modality reference network of the requested kind. `config` is
/// taken as the template; kind and the modality list are overridden.
HmdlfModel build_baseline(const std::string& kind, ModelConfig config);

/// Versioned binary container: magic + version + JSON header (architecture
/// config, scalers, parameter manifest) + raw little-endian float64 payload.
/// Round-trips every parameter bit-exactly.
void save_model(const HmdlfModel& model, const std::string& path);
HmdlfModel load_model(const std::string& path);

}  // namespace hmdlf
