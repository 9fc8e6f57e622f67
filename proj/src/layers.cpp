#include "hmdlf/layers.hpp"

#include <cmath>

namespace hmdlf {

Seq seq_from_rows(const Mat& x) {
  Seq s;
  s.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index t = 0; t < x.rows(); ++t) s.push_back(x.row(t));
  return s;
}

Mat rows_from_seq(const Seq& s) {
  if (s.empty()) return Mat(0, 0);
  Mat x(static_cast<Eigen::Index>(s.size()), s[0].cols());
  for (std::size_t t = 0; t < s.size(); ++t) x.row(static_cast<Eigen::Index>(t)) = s[t];
  return x;
}

namespace {

void check_seq(const Seq& x, Eigen::Index channels, const char* who) {
  if (x.empty()) throw ShapeError(std::string(who) + ": empty sequence");
  for (const Mat& step : x)
    if (step.cols() != channels)
      throw ShapeError(std::string(who) + ": expected " + std::to_string(channels) +
                       " channels, got " + std::to_string(step.cols()));
}

Vec col_sums(const Mat& m) { return m.colwise().sum().transpose(); }

}  // namespace

// ---------------------------------------------------------------------------
// Conv1d

Conv1d::Conv1d(Eigen::Index c_in, Eigen::Index c_out, Eigen::Index k, Rng& rng)
    : c_in_(c_in), c_out_(c_out), k_(k) {
  if (k < 1 || k % 2 == 0) throw ConfigError("conv1d: kernel width must be odd and positive");
  kernels_ = init_uniform({k, c_in, c_out}, k * c_in, k * c_out, rng);
  bias_ = Tensor::zeros({c_out});
  dkernels_ = Tensor::zeros({k, c_in, c_out});
  dbias_ = Tensor::zeros({c_out});
}

Seq Conv1d::forward(const Seq& x) {
  check_seq(x, c_in_, "conv1d");
  x_ = x;
  const Eigen::Index steps = static_cast<Eigen::Index>(x.size());
  const Eigen::Index batch = x[0].rows();
  const Eigen::Index center = k_ / 2;
  Seq out(static_cast<std::size_t>(steps));
  for (Eigen::Index t = 0; t < steps; ++t) {
    Mat acc = Mat::Zero(batch, c_out_);
    for (Eigen::Index dt = 0; dt < k_; ++dt) {
      const Eigen::Index s = t + dt - center;
      if (s < 0 || s >= steps) continue;  // zero padding
      acc.noalias() += x[static_cast<std::size_t>(s)] * kernels_.slice(dt);
    }
    acc.rowwise() += bias_.vec().transpose();
    out[static_cast<std::size_t>(t)] = std::move(acc);
  }
  return out;
}

Seq Conv1d::backward(const Seq& upstream) {
  const Eigen::Index steps = static_cast<Eigen::Index>(x_.size());
  const Eigen::Index batch = x_.empty() ? 0 : x_[0].rows();
  const Eigen::Index center = k_ / 2;
  Seq dx(static_cast<std::size_t>(steps), Mat::Zero(batch, c_in_));
  for (Eigen::Index t = 0; t < steps; ++t) {
    const Mat& up = upstream[static_cast<std::size_t>(t)];
    dbias_.vec() += col_sums(up);
    for (Eigen::Index dt = 0; dt < k_; ++dt) {
      const Eigen::Index s = t + dt - center;
      if (s < 0 || s >= steps) continue;
      dkernels_.slice(dt).noalias() += x_[static_cast<std::size_t>(s)].transpose() * up;
      dx[static_cast<std::size_t>(s)].noalias() += up * kernels_.slice(dt).transpose();
    }
  }
  return dx;
}

Mat Conv1d::forward(const Mat& x) { return rows_from_seq(forward(seq_from_rows(x))); }
Mat Conv1d::backward(const Mat& upstream) {
  return rows_from_seq(backward(seq_from_rows(upstream)));
}

std::vector<ParamRef> Conv1d::params(const std::string& prefix) {
  return {{prefix + ".kernels", &kernels_, &dkernels_, true},
          {prefix + ".bias", &bias_, &dbias_, false}};
}

void Conv1d::zero_grad() {
  dkernels_.set_zero();
  dbias_.set_zero();
}

// ---------------------------------------------------------------------------
// Relu

Seq Relu::forward(const Seq& x) {
  mask_.clear();
  mask_.reserve(x.size());
  Seq out(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    mask_.push_back((x[t].array() > 0.0).cast<double>().matrix());
    out[t] = x[t].cwiseProduct(mask_[t]);
  }
  return out;
}

Seq Relu::backward(const Seq& upstream) const {
  Seq dx(upstream.size());
  for (std::size_t t = 0; t < upstream.size(); ++t) dx[t] = upstream[t].cwiseProduct(mask_[t]);
  return dx;
}

Mat Relu::forward(const Mat& x) { return rows_from_seq(forward(seq_from_rows(x))); }
Mat Relu::backward(const Mat& upstream) const {
  return rows_from_seq(backward(seq_from_rows(upstream)));
}

// ---------------------------------------------------------------------------
// MaxPool1d

Seq MaxPool1d::forward(const Seq& x) {
  if (x.empty() || static_cast<Eigen::Index>(x.size()) < p_)
    throw ShapeError("maxpool: sequence shorter than pool width " + std::to_string(p_));
  in_steps_ = static_cast<Eigen::Index>(x.size());
  batch_ = x[0].rows();
  channels_ = x[0].cols();
  const Eigen::Index out_steps = in_steps_ / p_;
  Seq out(static_cast<std::size_t>(out_steps));
  argmax_.assign(static_cast<std::size_t>(out_steps), Eigen::MatrixXi::Zero(batch_, channels_));
  for (Eigen::Index to = 0; to < out_steps; ++to) {
    Mat best = x[static_cast<std::size_t>(to * p_)];
    Eigen::MatrixXi& arg = argmax_[static_cast<std::size_t>(to)];
    for (Eigen::Index p = 1; p < p_; ++p) {
      const Mat& cand = x[static_cast<std::size_t>(to * p_ + p)];
      for (Eigen::Index b = 0; b < batch_; ++b)
        for (Eigen::Index c = 0; c < channels_; ++c)
          if (cand(b, c) > best(b, c)) {  // strict: earliest index wins ties
            best(b, c) = cand(b, c);
            arg(b, c) = static_cast<int>(p);
          }
    }
    out[static_cast<std::size_t>(to)] = std::move(best);
  }
  return out;
}

Seq MaxPool1d::backward(const Seq& upstream) const {
  Seq dx(static_cast<std::size_t>(in_steps_), Mat::Zero(batch_, channels_));
  for (std::size_t to = 0; to < upstream.size(); ++to) {
    const Mat& up = upstream[to];
    const Eigen::MatrixXi& arg = argmax_[to];
    for (Eigen::Index b = 0; b < batch_; ++b)
      for (Eigen::Index c = 0; c < channels_; ++c)
        dx[to * static_cast<std::size_t>(p_) + static_cast<std::size_t>(arg(b, c))](b, c) +=
            up(b, c);
  }
  return dx;
}

Mat MaxPool1d::forward(const Mat& x) { return rows_from_seq(forward(seq_from_rows(x))); }
Mat MaxPool1d::backward(const Mat& upstream) const {
  return rows_from_seq(backward(seq_from_rows(upstream)));
}

// ---------------------------------------------------------------------------
// Dense

Activation activation_from_string(const std::string& name) {
  if (name == "linear") return Activation::linear;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh_act;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::tanh_act: return "tanh";
  }
  return "linear";
}

Dense::Dense(Eigen::Index in, Eigen::Index out, Activation act, Rng& rng)
    : in_(in), out_(out), act_(act) {
  weights_ = init_uniform({in, out}, in, out, rng);
  bias_ = Tensor::zeros({out});
  dweights_ = Tensor::zeros({in, out});
  dbias_ = Tensor::zeros({out});
}

Mat Dense::forward(const Mat& x) {
  if (x.cols() != in_)
    throw ShapeError("dense: expected " + std::to_string(in_) + " inputs, got " +
                     std::to_string(x.cols()));
  x_ = x;
  pre_ = x * weights_.mat();
  pre_.rowwise() += bias_.vec().transpose();
  switch (act_) {
    case Activation::linear: y_ = pre_; break;
    case Activation::relu: y_ = pre_.cwiseMax(0.0); break;
    case Activation::tanh_act: y_ = pre_.array().tanh().matrix(); break;
  }
  return y_;
}

Mat Dense::backward(const Mat& upstream) {
  Mat dpre;
  switch (act_) {
    case Activation::linear: dpre = upstream; break;
    case Activation::relu:
      dpre = upstream.cwiseProduct((pre_.array() > 0.0).cast<double>().matrix());
      break;
    case Activation::tanh_act:
      dpre = upstream.cwiseProduct((1.0 - y_.array().square()).matrix());
      break;
  }
  dweights_.mat().noalias() += x_.transpose() * dpre;
  dbias_.vec() += col_sums(dpre);
  return dpre * weights_.mat().transpose();
}

std::vector<ParamRef> Dense::params(const std::string& prefix) {
  return {{prefix + ".weights", &weights_, &dweights_, true},
          {prefix + ".bias", &bias_, &dbias_, false}};
}

void Dense::zero_grad() {
  dweights_.set_zero();
  dbias_.set_zero();
}

// ---------------------------------------------------------------------------
// Dropout

Dropout::Dropout(double rate) : rate_(rate) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0, 1)");
}

Mat Dropout::forward(const Mat& x, bool training, Rng& rng) {
  active_ = training && rate_ > 0.0;
  if (!active_) return x;
  const double keep_scale = 1.0 / (1.0 - rate_);
  mask_.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      mask_(i, j) = rng.next_double() >= rate_ ? keep_scale : 0.0;
  return x.cwiseProduct(mask_);
}

Mat Dropout::backward(const Mat& upstream) const {
  if (!active_) return upstream;
  return upstream.cwiseProduct(mask_);
}

// ---------------------------------------------------------------------------
// Rnn

Rnn::Rnn(Eigen::Index input, Eigen::Index hidden, Rng& rng) : input_(input), hidden_(hidden) {
  u_ = init_uniform({input, hidden}, input, hidden, rng);
  w_ = init_uniform({hidden, hidden}, hidden, hidden, rng);
  du_ = Tensor::zeros({input, hidden});
  dw_ = Tensor::zeros({hidden, hidden});
}

Seq Rnn::forward(const Seq& x) {
  check_seq(x, input_, "rnn");
  x_ = x;
  const Eigen::Index batch = x[0].rows();
  states_.assign(1, Mat::Zero(batch, hidden_));
  Seq out;
  out.reserve(x.size());
  for (const Mat& xt : x) {
    Mat pre = xt * u_.mat();
    pre.noalias() += states_.back() * w_.mat();
    states_.push_back(pre.array().tanh().matrix());
    out.push_back(states_.back());
  }
  return out;
}

Seq Rnn::backward(const Seq& upstream) {
  const Eigen::Index steps = static_cast<Eigen::Index>(x_.size());
  const Eigen::Index batch = x_[0].rows();
  Seq dx(static_cast<std::size_t>(steps));
  Mat carry = Mat::Zero(batch, hidden_);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const Mat& s = states_[static_cast<std::size_t>(t + 1)];
    Mat ds = upstream[static_cast<std::size_t>(t)] + carry;
    Mat dpre = ds.cwiseProduct((1.0 - s.array().square()).matrix());
    du_.mat().noalias() += x_[static_cast<std::size_t>(t)].transpose() * dpre;
    dw_.mat().noalias() += states_[static_cast<std::size_t>(t)].transpose() * dpre;
    dx[static_cast<std::size_t>(t)] = dpre * u_.mat().transpose();
    carry = dpre * w_.mat().transpose();
  }
  return dx;
}

Mat Rnn::forward(const Mat& x_seq) { return rows_from_seq(forward(seq_from_rows(x_seq))); }
Mat Rnn::backward(const Mat& upstream) {
  return rows_from_seq(backward(seq_from_rows(upstream)));
}

std::vector<ParamRef> Rnn::params(const std::string& prefix) {
  return {{prefix + ".u", &u_, &du_, true}, {prefix + ".w", &w_, &dw_, true}};
}

void Rnn::zero_grad() {
  du_.set_zero();
  dw_.set_zero();
}

// ---------------------------------------------------------------------------
// Gru

Gru::Gru(Eigen::Index input, Eigen::Index hidden, Rng& rng, bool use_bias)
    : input_(input), hidden_(hidden), use_bias_(use_bias) {
  const Eigen::Index cat = hidden + input;
  wz_ = init_uniform({cat, hidden}, cat, hidden, rng);
  wr_ = init_uniform({cat, hidden}, cat, hidden, rng);
  wh_ = init_uniform({cat, hidden}, cat, hidden, rng);
  dwz_ = Tensor::zeros({cat, hidden});
  dwr_ = Tensor::zeros({cat, hidden});
  dwh_ = Tensor::zeros({cat, hidden});
  if (use_bias_) {
    bz_ = Tensor::zeros({hidden});
    br_ = Tensor::zeros({hidden});
    bh_ = Tensor::zeros({hidden});
    dbz_ = Tensor::zeros({hidden});
    dbr_ = Tensor::zeros({hidden});
    dbh_ = Tensor::zeros({hidden});
  }
}

Seq Gru::forward(const Seq& x) {
  check_seq(x, input_, "gru");
  x_ = x;
  const Eigen::Index batch = x[0].rows();
  const Eigen::Index cat = hidden_ + input_;
  h_.assign(1, Mat::Zero(batch, hidden_));
  z_.clear();
  r_.clear();
  hc_.clear();
  Seq out;
  out.reserve(x.size());
  Mat a(batch, cat), g(batch, cat);
  for (const Mat& xt : x) {
    const Mat& h_prev = h_.back();
    a.leftCols(hidden_) = h_prev;
    a.rightCols(input_) = xt;
    Mat pre_z = a * wz_.mat();
    Mat pre_r = a * wr_.mat();
    if (use_bias_) {
      pre_z.rowwise() += bz_.vec().transpose();
      pre_r.rowwise() += br_.vec().transpose();
    }
    Mat z = pre_z.unaryExpr([](double v) { return sigmoid_scalar(v); });
    Mat r = pre_r.unaryExpr([](double v) { return sigmoid_scalar(v); });
    g.leftCols(hidden_) = r.cwiseProduct(h_prev);
    g.rightCols(input_) = xt;
    Mat pre_h = g * wh_.mat();
    if (use_bias_) pre_h.rowwise() += bh_.vec().transpose();
    Mat hc = pre_h.array().tanh().matrix();
    Mat h = (1.0 - z.array()).matrix().cwiseProduct(h_prev) + z.cwiseProduct(hc);
    z_.push_back(std::move(z));
    r_.push_back(std::move(r));
    hc_.push_back(std::move(hc));
    h_.push_back(h);
    out.push_back(std::move(h));
  }
  return out;
}

Seq Gru::backward(const Seq& upstream) {
  const Eigen::Index steps = static_cast<Eigen::Index>(x_.size());
  const Eigen::Index batch = x_[0].rows();
  const Eigen::Index cat = hidden_ + input_;
  Seq dx(static_cast<std::size_t>(steps));
  Mat carry = Mat::Zero(batch, hidden_);
  Mat a(batch, cat), g(batch, cat);
  for (Eigen::Index ti = steps - 1; ti >= 0; --ti) {
    const std::size_t t = static_cast<std::size_t>(ti);
    const Mat& h_prev = h_[t];
    const Mat& z = z_[t];
    const Mat& r = r_[t];
    const Mat& hc = hc_[t];
    const Mat& xt = x_[t];

    Mat dh = upstream[t] + carry;
    Mat dhc = dh.cwiseProduct(z);
    Mat dz = dh.cwiseProduct(hc - h_prev);
    Mat dh_prev = dh.cwiseProduct((1.0 - z.array()).matrix());

    Mat dpre_h = dhc.cwiseProduct((1.0 - hc.array().square()).matrix());
    g.leftCols(hidden_) = r.cwiseProduct(h_prev);
    g.rightCols(input_) = xt;
    dwh_.mat().noalias() += g.transpose() * dpre_h;
    if (use_bias_) dbh_.vec() += col_sums(dpre_h);
    Mat dg = dpre_h * wh_.mat().transpose();
    Mat dr = dg.leftCols(hidden_).cwiseProduct(h_prev);
    dh_prev.noalias() += dg.leftCols(hidden_).cwiseProduct(r);

    Mat dpre_z = dz.cwiseProduct(z.cwiseProduct((1.0 - z.array()).matrix()));
    Mat dpre_r = dr.cwiseProduct(r.cwiseProduct((1.0 - r.array()).matrix()));
    a.leftCols(hidden_) = h_prev;
    a.rightCols(input_) = xt;
    dwz_.mat().noalias() += a.transpose() * dpre_z;
    dwr_.mat().noalias() += a.transpose() * dpre_r;
    if (use_bias_) {
      dbz_.vec() += col_sums(dpre_z);
      dbr_.vec() += col_sums(dpre_r);
    }
    Mat da = dpre_z * wz_.mat().transpose();
    da.noalias() += dpre_r * wr_.mat().transpose();
    dh_prev += da.leftCols(hidden_);
    dx[t] = dg.rightCols(input_) + da.rightCols(input_);
    carry = std::move(dh_prev);
  }
  return dx;
}

Mat Gru::forward(const Mat& x_seq) { return rows_from_seq(forward(seq_from_rows(x_seq))); }
Mat Gru::backward(const Mat& upstream) {
  return rows_from_seq(backward(seq_from_rows(upstream)));
}

std::vector<ParamRef> Gru::params(const std::string& prefix) {
  std::vector<ParamRef> p = {{prefix + ".wz", &wz_, &dwz_, true},
                             {prefix + ".wr", &wr_, &dwr_, true},
                             {prefix + ".wh", &wh_, &dwh_, true}};
  if (use_bias_) {
    p.push_back({prefix + ".bz", &bz_, &dbz_, false});
    p.push_back({prefix + ".br", &br_, &dbr_, false});
    p.push_back({prefix + ".bh", &bh_, &dbh_, false});
  }
  return p;
}

void Gru::zero_grad() {
  dwz_.set_zero();
  dwr_.set_zero();
  dwh_.set_zero();
  if (use_bias_) {
    dbz_.set_zero();
    dbr_.set_zero();
    dbh_.set_zero();
  }
}

// ---------------------------------------------------------------------------
// Attention

Attention::Attention(Eigen::Index hidden, Eigen::Index width, Rng& rng)
    : hidden_(hidden), width_(width) {
  w_ = init_uniform({hidden, width}, hidden, width, rng);
  b_ = Tensor::zeros({width});
  c_ = init_uniform({width}, width, 1, rng);
  dw_ = Tensor::zeros({hidden, width});
  db_ = Tensor::zeros({width});
  dc_ = Tensor::zeros({width});
}

std::pair<Mat, Mat> Attention::forward(const Seq& h) {
  check_seq(h, hidden_, "attention");
  h_ = h;
  const Eigen::Index steps = static_cast<Eigen::Index>(h.size());
  const Eigen::Index batch = h[0].rows();
  e_.assign(static_cast<std::size_t>(steps), Mat());
  Mat scores(batch, steps);
  for (Eigen::Index t = 0; t < steps; ++t) {
    Mat pre = h[static_cast<std::size_t>(t)] * w_.mat();
    pre.rowwise() += b_.vec().transpose();
    e_[static_cast<std::size_t>(t)] = pre.array().tanh().matrix();
    scores.col(t) = e_[static_cast<std::size_t>(t)] * c_.vec();
  }
  // row-wise stable softmax over time
  alpha_.resize(batch, steps);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double m = scores.row(b).maxCoeff();
    Eigen::RowVectorXd ex = (scores.row(b).array() - m).exp();
    alpha_.row(b) = ex / ex.sum();
  }
  Mat r = Mat::Zero(batch, hidden_);
  for (Eigen::Index t = 0; t < steps; ++t)
    r += alpha_.col(t).asDiagonal() * h[static_cast<std::size_t>(t)];
  return {r, alpha_};
}

Seq Attention::backward(const Mat& dr) {
  const Eigen::Index steps = static_cast<Eigen::Index>(h_.size());
  const Eigen::Index batch = h_[0].rows();
  Seq dh(static_cast<std::size_t>(steps));
  Mat dalpha(batch, steps);
  for (Eigen::Index t = 0; t < steps; ++t) {
    dalpha.col(t) = dr.cwiseProduct(h_[static_cast<std::size_t>(t)]).rowwise().sum();
    dh[static_cast<std::size_t>(t)] = alpha_.col(t).asDiagonal() * dr;
  }
  // softmax backward, per sample
  Vec row_dot = alpha_.cwiseProduct(dalpha).rowwise().sum();
  Mat dscore = alpha_.cwiseProduct(dalpha.colwise() - row_dot);
  for (Eigen::Index t = 0; t < steps; ++t) {
    const std::size_t ts = static_cast<std::size_t>(t);
    Mat de = dscore.col(t) * c_.vec().transpose();
    dc_.vec().noalias() += e_[ts].transpose() * dscore.col(t);
    Mat dpre = de.cwiseProduct((1.0 - e_[ts].array().square()).matrix());
    dw_.mat().noalias() += h_[ts].transpose() * dpre;
    db_.vec() += col_sums(dpre);
    dh[ts].noalias() += dpre * w_.mat().transpose();
  }
  return dh;
}

std::pair<Vec, Vec> Attention::forward(const Mat& h_seq) {
  auto [r, alpha] = forward(seq_from_rows(h_seq));
  return {r.row(0).transpose(), alpha.row(0).transpose()};
}

Mat Attention::backward(const Vec& dr) {
  return rows_from_seq(backward(Mat(dr.transpose())));
}

std::vector<ParamRef> Attention::params(const std::string& prefix) {
  return {{prefix + ".w", &w_, &dw_, true},
          {prefix + ".b", &b_, &db_, false},
          {prefix + ".c", &c_, &dc_, false}};
}

void Attention::zero_grad() {
  dw_.set_zero();
  db_.set_zero();
  dc_.set_zero();
}

// ---------------------------------------------------------------------------
// flatten

Mat flatten_seq(const Seq& x) {
  if (x.empty()) throw ShapeError("flatten: empty sequence");
  const Eigen::Index steps = static_cast<Eigen::Index>(x.size());
  const Eigen::Index batch = x[0].rows();
  const Eigen::Index channels = x[0].cols();
  Mat out(batch, steps * channels);
  for (Eigen::Index t = 0; t < steps; ++t)
    out.middleCols(t * channels, channels) = x[static_cast<std::size_t>(t)];
  return out;
}

Seq unflatten_seq(const Mat& x, Eigen::Index steps, Eigen::Index channels) {
  Seq out(static_cast<std::size_t>(steps));
  for (Eigen::Index t = 0; t < steps; ++t)
    out[static_cast<std::size_t>(t)] = x.middleCols(t * channels, channels);
  return out;
}

}  // namespace hmdlf
