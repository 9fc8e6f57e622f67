#include "hmdlf/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace hmdlf {

void Adam::step(const std::vector<ParamRef>& params) {
  if (m_.empty()) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const ParamRef& p : params) {
      m_.push_back(Vec::Zero(p.value->size()));
      v_.push_back(Vec::Zero(p.value->size()));
    }
  }
  if (m_.size() != params.size())
    throw ShapeError("adam: parameter count changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Vec& g = params[i].grad->flat();
    if (g.size() != m_[i].size())
      throw ShapeError("adam: gradient shape mismatch at " + params[i].name);
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    params[i].value->flat().array() -=
        lr_ * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
  }
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("train config: max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("train config: patience must be >= 1");
  if (window < 1) throw ConfigError("train config: window must be >= 1");
  if (learning_rate <= 0.0) throw ConfigError("train config: learning_rate must be positive");
  if (lambda < 0.0) throw ConfigError("train config: lambda must be >= 0");
  if (early_stopping && patience >= max_epochs)
    throw ConfigError("train config: patience must be < max_epochs");
}

namespace {

std::vector<Mat> gather_inputs(const WindowedSamples& s, const std::vector<Eigen::Index>& idx,
                               std::size_t first, std::size_t last) {
  const Eigen::Index rows = static_cast<Eigen::Index>(last - first);
  std::vector<Mat> inputs(s.windows.size());
  for (std::size_t m = 0; m < s.windows.size(); ++m) {
    inputs[m].resize(rows, s.windows[m].cols());
    for (std::size_t k = first; k < last; ++k)
      inputs[m].row(static_cast<Eigen::Index>(k - first)) = s.windows[m].row(idx[k]);
  }
  return inputs;
}

Vec gather_targets(const WindowedSamples& s, const std::vector<Eigen::Index>& idx,
                   std::size_t first, std::size_t last) {
  Vec t(static_cast<Eigen::Index>(last - first));
  for (std::size_t k = first; k < last; ++k)
    t(static_cast<Eigen::Index>(k - first)) = s.targets(idx[k]);
  return t;
}

void shuffle_indices(std::vector<Eigen::Index>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.index(i)]);
}

double global_grad_norm(const std::vector<ParamRef>& params) {
  double sq = 0.0;
  for (const ParamRef& p : params) sq += p.grad->flat().squaredNorm();
  return std::sqrt(sq);
}

}  // namespace

double evaluate_mse(HmdlfModel& model, const WindowedSamples& samples, Eigen::Index batch_size) {
  const Eigen::Index n = samples.count();
  if (n == 0) throw DataError("evaluate_mse: no samples");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  double sq = 0.0;
  for (Eigen::Index at = 0; at < n; at += batch_size) {
    const std::size_t first = static_cast<std::size_t>(at);
    const std::size_t last = static_cast<std::size_t>(std::min<Eigen::Index>(at + batch_size, n));
    Vec pred = model.forward(gather_inputs(samples, idx, first, last), false);
    sq += (pred - gather_targets(samples, idx, first, last)).squaredNorm();
  }
  return sq / static_cast<double>(n);
}

Vec predict_all(HmdlfModel& model, const WindowedSamples& samples, Eigen::Index batch_size) {
  const Eigen::Index n = samples.count();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Vec out(n);
  for (Eigen::Index at = 0; at < n; at += batch_size) {
    const std::size_t first = static_cast<std::size_t>(at);
    const std::size_t last = static_cast<std::size_t>(std::min<Eigen::Index>(at + batch_size, n));
    out.segment(at, static_cast<Eigen::Index>(last - first)) =
        model.forward(gather_inputs(samples, idx, first, last), false);
  }
  return out;
}

namespace {

WindowedSamples take_range(const WindowedSamples& s, Eigen::Index first, Eigen::Index count) {
  WindowedSamples out;
  out.modalities = s.modalities;
  out.windows.reserve(s.windows.size());
  for (const Mat& w : s.windows) out.windows.push_back(w.middleRows(first, count));
  out.targets = s.targets.segment(first, count);
  for (Eigen::Index k = 0; k < count; ++k) {
    if (!s.target_indices.empty())
      out.target_indices.push_back(s.target_indices[static_cast<std::size_t>(first + k)]);
    if (!s.target_timestamps.empty())
      out.target_timestamps.push_back(s.target_timestamps[static_cast<std::size_t>(first + k)]);
  }
  return out;
}

}  // namespace

TrainReport train(HmdlfModel& model, const WindowedSamples& samples, const TrainConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = samples.count();
  const Eigen::Index n_train = (n * 8) / 10;
  const Eigen::Index n_val = n - n_train;
  if (n_train < 1 || n_val < 1)
    throw DataError("train: not enough samples for an 80/20 split (" + std::to_string(n) + ")");

  WindowedSamples train_set = take_range(samples, 0, n_train);
  WindowedSamples val_set = take_range(samples, n_train, n_val);

  Adam adam(cfg.learning_rate);
  Rng shuffle_rng(cfg.seed ^ 0xD1B54A32D192ED03ULL);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n_train));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  TrainReport report;
  report.train_samples = n_train;
  report.val_samples = n_val;
  report.best_val_mse = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_state;
  int epochs_since_best = 0;

  const auto t0 = std::chrono::steady_clock::now();
  auto last_mark = t0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_indices(order, shuffle_rng);
    double train_sq = 0.0;
    for (Eigen::Index at = 0; at < n_train; at += cfg.batch_size) {
      const std::size_t first = static_cast<std::size_t>(at);
      const std::size_t last =
          static_cast<std::size_t>(std::min<Eigen::Index>(at + cfg.batch_size, n_train));
      auto inputs = gather_inputs(train_set, order, first, last);
      Vec targets = gather_targets(train_set, order, first, last);
      Vec pred = model.forward(inputs, true);
      LossValue loss = compute_loss(pred, targets, model, cfg.lambda);
      if (!std::isfinite(loss.total))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           " (diverged)");
      train_sq += loss.data * static_cast<double>(last - first);
      model.zero_grad();
      model.backward(mse_gradient(pred, targets));
      add_l2_gradient(model, cfg.lambda);
      auto refs = model.params();
      if (cfg.grad_clip) {
        const double norm = global_grad_norm(refs);
        if (norm > 5.0)
          for (const ParamRef& p : refs) p.grad->flat() *= 5.0 / norm;
      }
      adam.step(refs);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mse = train_sq / static_cast<double>(n_train);
    rec.val_mse = evaluate_mse(model, val_set, cfg.batch_size);
    const auto mark = std::chrono::steady_clock::now();
    rec.seconds = std::chrono::duration<double>(mark - last_mark).count();
    last_mark = mark;
    report.epochs.push_back(rec);

    if (rec.val_mse < report.best_val_mse) {
      report.best_val_mse = rec.val_mse;
      report.best_epoch = epoch;
      best_state = model.state();
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
    }
    if (cfg.early_stopping && epochs_since_best >= cfg.patience) {
      report.stopped_early = true;
      break;
    }
  }

  if (cfg.early_stopping && !best_state.empty()) model.set_state(best_state);
  report.final_train_mse = evaluate_mse(model, train_set, cfg.batch_size);
  report.final_val_mse = evaluate_mse(model, val_set, cfg.batch_size);
  report.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace hmdlf
