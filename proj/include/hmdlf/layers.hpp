#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hmdlf/tensor.hpp"

namespace hmdlf {

/// A batch of sequences, stored step-major: steps[t] is [B x C]. A single
/// sample in the spec's [T x C] layout maps onto this with B = 1.
using Seq = std::vector<Mat>;

Seq seq_from_rows(const Mat& x);   // [T x C] -> T steps of [1 x C]
Mat rows_from_seq(const Seq& s);   // inverse of seq_from_rows

/// Handle to one trainable tensor and its gradient accumulator. `penalized`
/// marks weight matrices/kernels (rank >= 2) that enter the L2 penalty;
/// biases and other rank-1 parameters stay out of it.
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
  bool penalized;
};

/// 1-D convolution over time (cross-correlation, zero "same" padding, odd
/// kernel width). No activation here; that is applied by the caller.
class Conv1d {
 public:
  Conv1d(Eigen::Index c_in, Eigen::Index c_out, Eigen::Index k, Rng& rng);

  Seq forward(const Seq& x);
  Seq backward(const Seq& upstream);
  Mat forward(const Mat& x);
  Mat backward(const Mat& upstream);

  std::vector<ParamRef> params(const std::string& prefix);
  void zero_grad();

  Eigen::Index in_channels() const { return c_in_; }
  Eigen::Index out_channels() const { return c_out_; }

  Tensor kernels_;  // [K x C_in x C_out]
  Tensor bias_;     // [C_out]
  Tensor dkernels_;
  Tensor dbias_;

 private:
  Eigen::Index c_in_, c_out_, k_;
  Seq x_;  // cached input
};

/// Elementwise max(0, x) with cached mask.
class Relu {
 public:
  Seq forward(const Seq& x);
  Seq backward(const Seq& upstream) const;
  Mat forward(const Mat& x);
  Mat backward(const Mat& upstream) const;

 private:
  Seq mask_;
};

/// Non-overlapping window maxima along time: window = stride = P, output
/// length floor(T/P). Ties route the gradient to the earliest index.
class MaxPool1d {
 public:
  explicit MaxPool1d(Eigen::Index p) : p_(p) {}

  Seq forward(const Seq& x);
  Seq backward(const Seq& upstream) const;
  Mat forward(const Mat& x);
  Mat backward(const Mat& upstream) const;

  Eigen::Index width() const { return p_; }

 private:
  Eigen::Index p_;
  Eigen::Index in_steps_ = 0, batch_ = 0, channels_ = 0;
  std::vector<Eigen::MatrixXi> argmax_;  // per output step, [B x C] source offsets
};

enum class Activation { linear, relu, tanh_act };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

/// Fully connected layer: y = act(x W + b).
class Dense {
 public:
  Dense(Eigen::Index in, Eigen::Index out, Activation act, Rng& rng);

  Mat forward(const Mat& x);
  Mat backward(const Mat& upstream);

  std::vector<ParamRef> params(const std::string& prefix);
  void zero_grad();

  Eigen::Index in_width() const { return in_; }
  Eigen::Index out_width() const { return out_; }
  Activation activation() const { return act_; }

  Tensor weights_;  // [in x out]
  Tensor bias_;     // [out]
  Tensor dweights_;
  Tensor dbias_;

 private:
  Eigen::Index in_, out_;
  Activation act_;
  Mat x_, pre_, y_;
};

/// Inverted dropout: in training, kept units are scaled by 1/(1-p) so the
/// evaluation-mode forward is exactly the identity.
class Dropout {
 public:
  explicit Dropout(double rate);

  Mat forward(const Mat& x, bool training, Rng& rng);
  Mat backward(const Mat& upstream) const;

  double rate() const { return rate_; }

 private:
  double rate_;
  bool active_ = false;  // whether the last forward applied a mask
  Mat mask_;
};

/// Plain recurrent cell, unrolled over time with shared parameters:
/// s_t = tanh(x_t U + s_{t-1} W). The readout matrix of the classic
/// formulation lives in the model's output layer, not here.
class Rnn {
 public:
  Rnn(Eigen::Index input, Eigen::Index hidden, Rng& rng);

  Seq forward(const Seq& x);
  Seq backward(const Seq& upstream);
  Mat forward(const Mat& x_seq);
  Mat backward(const Mat& upstream);

  std::vector<ParamRef> params(const std::string& prefix);
  void zero_grad();

  Eigen::Index hidden() const { return hidden_; }

  Tensor u_;  // [D x H]
  Tensor w_;  // [H x H]
  Tensor du_;
  Tensor dw_;

 private:
  Eigen::Index input_, hidden_;
  Seq x_;
  Seq states_;  // states_[t] = s_{t}, t = 0..T with s_0 = 0
};

/// Gated recurrent unit. Each gate matrix acts on the concatenation
/// [h_{t-1}, x_t]:
///   z_t = sigmoid([h_{t-1}, x_t] Wz)
///   r_t = sigmoid([h_{t-1}, x_t] Wr)
///   hc_t = tanh([r_t * h_{t-1}, x_t] Wh)
///   h_t = (1 - z_t) * h_{t-1} + z_t * hc_t
/// with h_0 = 0. Gate biases are off by default, matching the bias-free
/// gate equations; use_bias enables them.
class Gru {
 public:
  Gru(Eigen::Index input, Eigen::Index hidden, Rng& rng, bool use_bias = false);

  Seq forward(const Seq& x);
  Seq backward(const Seq& upstream);
  Mat forward(const Mat& x_seq);
  Mat backward(const Mat& upstream);

  std::vector<ParamRef> params(const std::string& prefix);
  void zero_grad();

  Eigen::Index hidden() const { return hidden_; }
  bool has_bias() const { return use_bias_; }

  // Gate traces of the last forward pass, step-major like the input.
  const Seq& last_update_gates() const { return z_; }
  const Seq& last_reset_gates() const { return r_; }
  const Seq& last_candidates() const { return hc_; }

  Tensor wz_, wr_, wh_;  // each [(H + D) x H]
  Tensor bz_, br_, bh_;  // each [H], present when use_bias_
  Tensor dwz_, dwr_, dwh_;
  Tensor dbz_, dbr_, dbh_;

 private:
  Eigen::Index input_, hidden_;
  bool use_bias_;
  Seq x_;
  Seq h_;       // h_[t] = h_{t}, t = 0..T with h_0 = 0
  Seq z_, r_, hc_;
};

/// Attention pooling over the hidden-state sequence:
///   e_t = tanh(h_t W + b), score_t = e_t . c, alpha = softmax_t(score),
///   r = sum_t alpha_t h_t.
/// The context vector c is learned alongside W and b.
class Attention {
 public:
  Attention(Eigen::Index hidden, Eigen::Index width, Rng& rng);

  /// Returns (r [B x H], alpha [B x T]).
  std::pair<Mat, Mat> forward(const Seq& h);
  Seq backward(const Mat& dr);
  std::pair<Vec, Vec> forward(const Mat& h_seq);
  Mat backward(const Vec& dr);

  std::vector<ParamRef> params(const std::string& prefix);
  void zero_grad();

  Tensor w_;  // [H x A]
  Tensor b_;  // [A]
  Tensor c_;  // [A]
  Tensor dw_, db_, dc_;

 private:
  Eigen::Index hidden_, width_;
  Seq h_;
  Seq e_;      // e_[t] [B x A]
  Mat alpha_;  // [B x T]
};

/// [T steps of B x C] -> [B x T*C], time-major feature order.
Mat flatten_seq(const Seq& x);
Seq unflatten_seq(const Mat& x, Eigen::Index steps, Eigen::Index channels);

}  // namespace hmdlf
