#pragma once

// Independent oracles used by the unit and acceptance suites. Everything
// here recomputes expectations through a different route than the code
// under test.

#include "hmdlf/baselines.hpp"
#include "hmdlf/data.hpp"
#include "hmdlf/tensor.hpp"

namespace hmdlf::testing {

/// Gradient-descent solve of the ridge objective
/// ||X b - y||^2 + lambda * ||b without intercept||^2, run to convergence.
/// Deliberately avoids the normal equations used by fit_linear.
inline Vec ridge_gradient_descent(const Mat& x, const Vec& y, double lambda,
                                  Eigen::Index intercept_col, int iters = 200000) {
  Vec beta = Vec::Zero(x.cols());
  // step size from a crude power-iteration bound on the Hessian 2(X^T X + lambda I)
  Vec probe = Vec::Ones(x.cols());
  double norm_est = 1.0;
  for (int i = 0; i < 50; ++i) {
    probe = x.transpose() * (x * probe) + lambda * probe;
    norm_est = probe.norm();
    probe /= norm_est;
  }
  const double step = 0.9 / (2.0 * norm_est);
  for (int i = 0; i < iters; ++i) {
    Vec grad = 2.0 * (x.transpose() * (x * beta - y));
    for (Eigen::Index j = 0; j < beta.size(); ++j)
      if (j != intercept_col) grad(j) += 2.0 * lambda * beta(j);
    beta -= step * grad;
  }
  return beta;
}

/// Design matrix in the same layout fit_linear uses (modality-major windows,
/// intercept last).
inline Mat design_like_fit_linear(const WindowedSamples& s) {
  const Eigen::Index n = s.count();
  const Eigen::Index w = s.window_size();
  const Eigen::Index m = static_cast<Eigen::Index>(s.windows.size());
  Mat x(n, w * m + 1);
  for (Eigen::Index i = 0; i < m; ++i)
    x.middleCols(i * w, w) = s.windows[static_cast<std::size_t>(i)];
  x.col(w * m).setOnes();
  return x;
}

/// Pearson correlation.
inline double correlation(const Vec& a, const Vec& b) {
  const double ma = a.mean(), mb = b.mean();
  const Vec da = a.array() - ma, db = b.array() - mb;
  return da.dot(db) / std::sqrt(da.squaredNorm() * db.squaredNorm());
}

inline double stddev(const Vec& v) {
  return std::sqrt((v.array() - v.mean()).square().sum() / static_cast<double>(v.size()));
}

/// Deterministic tiny memorization task: windows from a short noisy synth
/// series, truncated to `count` samples.
inline WindowedSamples tiny_task(Eigen::Index count, Eigen::Index window_size,
                                 std::uint64_t seed) {
  SynthConfig sc;
  sc.days = 2;
  sc.seed = seed;
  sc.noise = 1.0;
  MultimodalDataset d = synth(sc);
  // normalize each series to [0, 1] over the slice we keep
  const Eigen::Index keep = count + window_size;
  MultimodalDataset h = d.head(keep);
  for (Vec& v : h.values) {
    const double lo = v.minCoeff(), hi = v.maxCoeff();
    v = (v.array() - lo) / (hi - lo);
  }
  return window(h, window_size);
}

}  // namespace hmdlf::testing
