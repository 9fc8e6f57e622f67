#include "hmdlf/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "hmdlf/layers.hpp"
#include "hmdlf/model.hpp"

namespace hmdlf {

double max_rel_error(const Tensor& analytic, const Tensor& numeric, double floor) {
  if (!analytic.same_shape(numeric))
    throw ShapeError("max_rel_error: shape mismatch between analytic and numeric gradients");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic.flat()(i);
    const double n = numeric.flat()(i);
    const double denom = std::max({std::abs(a), std::abs(n), floor});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

namespace {

constexpr double kStep = 1e-5;

Mat random_mat(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.uniform(-1.0, 1.0);
  return m;
}

/// One component's worth of checks: analytic gradients are collected first,
/// then every tensor (parameters and, when given, the input) is re-derived
/// by central differences through `loss_of_current_state`.
struct Check {
  double worst = 0.0;

  void compare(const Tensor& analytic, const std::function<double(const Tensor&)>& f,
               const Tensor& at) {
    const Tensor numeric = fd_gradient(f, at, kStep);
    worst = std::max(worst, max_rel_error(analytic, numeric));
  }
};

// Scalar readout: sum(out .* weights) so the upstream gradient is `weights`.
double weighted_sum(const Mat& out, const Mat& weights) {
  return out.cwiseProduct(weights).sum();
}

template <typename Layer>
void check_params(Check& chk, Layer& layer, const std::vector<Tensor>& analytic_grads,
                  const std::function<double()>& loss) {
  auto refs = layer.params("p");
  for (std::size_t i = 0; i < refs.size(); ++i) {
    Tensor* value = refs[i].value;
    const Tensor saved = *value;
    chk.compare(
        analytic_grads[i],
        [&](const Tensor& candidate) {
          *value = candidate;
          return loss();
        },
        saved);
    *value = saved;
  }
}

template <typename Layer>
std::vector<Tensor> grad_copies(Layer& layer) {
  std::vector<Tensor> out;
  for (const ParamRef& p : layer.params("p")) out.push_back(*p.grad);
  return out;
}

double check_conv(std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::Index steps = 7, c_in = 2, c_out = 3, k = 3;
  Conv1d layer(c_in, c_out, k, rng);
  Mat x = random_mat(steps, c_in, rng);
  Mat up = random_mat(steps, c_out, rng);

  layer.zero_grad();
  layer.forward(x);
  Mat dx = layer.backward(up);
  auto grads = grad_copies(layer);

  Check chk;
  auto loss = [&] { return weighted_sum(layer.forward(x), up); };
  check_params(chk, layer, grads, loss);
  chk.compare(Tensor::from_matrix(dx),
              [&](const Tensor& cand) { return weighted_sum(layer.forward(Mat(cand.mat())), up); },
              Tensor::from_matrix(x));
  return chk.worst;
}

double check_maxpool(std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::Index steps = 8, channels = 3, p = 2;
  MaxPool1d layer(p);
  // keep in-window values separated so the finite-difference probe cannot
  // flip an argmax
  Mat x(steps, channels);
  for (Eigen::Index t = 0; t < steps; ++t)
    for (Eigen::Index c = 0; c < channels; ++c)
      x(t, c) = rng.uniform(-1.0, 1.0) + ((t % p) == 0 ? 0.0 : (rng.next_double() > 0.5 ? 2.5 : -2.5));
  Mat up = random_mat(steps / p, channels, rng);

  layer.forward(x);
  Mat dx = layer.backward(up);

  Check chk;
  chk.compare(Tensor::from_matrix(dx),
              [&](const Tensor& cand) { return weighted_sum(layer.forward(Mat(cand.mat())), up); },
              Tensor::from_matrix(x));
  return chk.worst;
}

double check_dense(std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::Index batch = 4, in = 5, out = 3;
  const Activation acts[] = {Activation::linear, Activation::relu, Activation::tanh_act};
  Check chk;
  for (Activation act : acts) {
    Dense layer(in, out, act, rng);
    Mat x = random_mat(batch, in, rng);
    Mat up = random_mat(batch, out, rng);
    layer.zero_grad();
    layer.forward(x);
    Mat dx = layer.backward(up);
    auto grads = grad_copies(layer);
    auto loss = [&] { return weighted_sum(layer.forward(x), up); };
    check_params(chk, layer, grads, loss);
    chk.compare(Tensor::from_matrix(dx),
                [&](const Tensor& cand) { return weighted_sum(layer.forward(Mat(cand.mat())), up); },
                Tensor::from_matrix(x));
  }
  return chk.worst;
}

double check_dropout(std::uint64_t seed) {
  // evaluation path: the identity, so d(in) must equal upstream exactly
  Rng rng(seed);
  Dropout layer(0.2);
  Mat x = random_mat(3, 4, rng);
  Mat up = random_mat(3, 4, rng);
  Mat y = layer.forward(x, false, rng);
  Mat dx = layer.backward(up);
  double worst = (y - x).cwiseAbs().maxCoeff();
  worst = std::max(worst, (dx - up).cwiseAbs().maxCoeff());
  return worst;
}

double check_rnn(std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::Index steps = 5, input = 3, hidden = 4;
  Rnn layer(input, hidden, rng);
  Mat x = random_mat(steps, input, rng);
  Mat up = random_mat(steps, hidden, rng);

  layer.zero_grad();
  layer.forward(x);
  Mat dx = layer.backward(up);
  auto grads = grad_copies(layer);

  Check chk;
  auto loss = [&] { return weighted_sum(layer.forward(x), up); };
  check_params(chk, layer, grads, loss);
  chk.compare(Tensor::from_matrix(dx),
              [&](const Tensor& cand) { return weighted_sum(layer.forward(Mat(cand.mat())), up); },
              Tensor::from_matrix(x));
  return chk.worst;
}

double check_gru(std::uint64_t seed, bool with_bias) {
  Rng rng(seed);
  const Eigen::Index steps = 5, input = 3, hidden = 4;
  Gru layer(input, hidden, rng, with_bias);
  if (with_bias)
    for (const ParamRef& p : layer.params("p"))
      if (!p.penalized)
        for (Eigen::Index i = 0; i < p.value->size(); ++i)
          p.value->flat()(i) = rng.uniform(-0.5, 0.5);
  Mat x = random_mat(steps, input, rng);
  Mat up = random_mat(steps, hidden, rng);

  layer.zero_grad();
  layer.forward(x);
  Mat dx = layer.backward(up);
  auto grads = grad_copies(layer);

  Check chk;
  auto loss = [&] { return weighted_sum(layer.forward(x), up); };
  check_params(chk, layer, grads, loss);
  chk.compare(Tensor::from_matrix(dx),
              [&](const Tensor& cand) { return weighted_sum(layer.forward(Mat(cand.mat())), up); },
              Tensor::from_matrix(x));
  return chk.worst;
}

double check_attention(std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::Index steps = 4, hidden = 3, width = 3;
  Attention layer(hidden, width, rng);
  Mat h = random_mat(steps, hidden, rng);
  Vec up(hidden);
  for (Eigen::Index i = 0; i < hidden; ++i) up(i) = rng.uniform(-1.0, 1.0);

  layer.zero_grad();
  layer.forward(h);
  Mat dh = layer.backward(up);
  auto grads = grad_copies(layer);

  Check chk;
  auto loss = [&] { return layer.forward(h).first.dot(up); };
  check_params(chk, layer, grads, loss);
  chk.compare(Tensor::from_matrix(dh),
              [&](const Tensor& cand) {
                return layer.forward(Mat(cand.mat())).first.dot(up);
              },
              Tensor::from_matrix(h));
  return chk.worst;
}

double check_model(std::uint64_t seed) {
  ModelConfig cfg;
  cfg.kind = ModelKind::hmdlf;
  cfg.modalities = {"flow", "speed"};
  cfg.window = 8;
  cfg.branch.conv_filters = 3;
  cfg.branch.kernel_width = 3;
  cfg.branch.pool_width = 2;
  cfg.branch.hidden = 4;
  cfg.branch.attention_width = 4;
  cfg.branch.use_attention = true;
  cfg.fusion_width = 5;
  cfg.dropout = 0.2;  // evaluation mode, so inert during the check
  cfg.seed = seed;
  HmdlfModel model(cfg);

  Rng rng(seed ^ 0xABCDEF);
  const Eigen::Index batch = 2;
  std::vector<Mat> inputs = {random_mat(batch, cfg.window, rng), random_mat(batch, cfg.window, rng)};
  Vec targets(batch);
  for (Eigen::Index i = 0; i < batch; ++i) targets(i) = rng.uniform(-1.0, 1.0);
  const double lambda = 1e-2;

  auto loss = [&] {
    Vec pred = model.forward(inputs, false);
    return compute_loss(pred, targets, model, lambda).total;
  };

  model.zero_grad();
  Vec pred = model.forward(inputs, false);
  model.backward(mse_gradient(pred, targets));
  add_l2_gradient(model, lambda);

  auto refs = model.params();
  std::vector<Tensor> grads;
  for (const ParamRef& p : refs) grads.push_back(*p.grad);

  Check chk;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    Tensor* value = refs[i].value;
    const Tensor saved = *value;
    chk.compare(
        grads[i],
        [&](const Tensor& candidate) {
          *value = candidate;
          return loss();
        },
        saved);
    *value = saved;
  }
  return chk.worst;
}

}  // namespace

GradcheckReport run_gradcheck(std::uint64_t base_seed, const std::string& corrupt_component) {
  struct Entry {
    const char* name;
    double (*fn)(std::uint64_t);
  };
  const auto gru_plain = +[](std::uint64_t s) { return check_gru(s, false); };
  const auto gru_bias = +[](std::uint64_t s) { return check_gru(s, true); };
  const Entry entries[] = {
      {"conv1d", &check_conv},      {"maxpool", &check_maxpool}, {"dense", &check_dense},
      {"dropout", &check_dropout},  {"rnn", &check_rnn},         {"gru", gru_plain},
      {"gru_bias", gru_bias},       {"attention", &check_attention},
      {"model_end_to_end", &check_model},
  };

  GradcheckReport report;
  bool all = true;
  for (const Entry& e : entries) {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 3; ++s) worst = std::max(worst, e.fn(base_seed + 1000 * s));
    if (corrupt_component == e.name) worst += 1.0;  // negative-control hook for tests
    GradcheckRow row{e.name, worst, worst < report.threshold};
    all = all && row.pass;
    report.rows.push_back(std::move(row));
  }
  report.all_pass = all;
  return report;
}

}  // namespace hmdlf
