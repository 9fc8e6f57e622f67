#include "hmdlf/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace hmdlf {

double rmse(const Vec& predicted, const Vec& actual) {
  if (predicted.size() != actual.size())
    throw ShapeError("rmse: length mismatch, " + std::to_string(predicted.size()) + " vs " +
                     std::to_string(actual.size()));
  if (predicted.size() == 0) throw ShapeError("rmse: empty sequences");
  return std::sqrt((predicted - actual).squaredNorm() / static_cast<double>(predicted.size()));
}

Vec naive(const WindowedSamples& samples) {
  const auto it = std::find(samples.modalities.begin(), samples.modalities.end(), "flow");
  if (it == samples.modalities.end()) throw DataError("naive: samples have no flow windows");
  const Mat& flow = samples.windows[static_cast<std::size_t>(it - samples.modalities.begin())];
  return flow.col(flow.cols() - 1);
}

SeasonalResult seasonal_naive(const WindowedSamples& samples, const MultimodalDataset& source,
                              Eigen::Index period) {
  if (period < 1) throw DataError("seasonal_naive: period must be >= 1");
  const Vec& flow = source.series("flow");
  SeasonalResult out;
  std::vector<double> preds;
  for (std::size_t k = 0; k < samples.target_indices.size(); ++k) {
    const Eigen::Index back = samples.target_indices[k] - period;
    if (back < 0) {
      ++out.skipped;
      continue;
    }
    out.valid.push_back(static_cast<Eigen::Index>(k));
    preds.push_back(flow(back));
  }
  out.predictions = Eigen::Map<const Vec>(preds.data(), static_cast<Eigen::Index>(preds.size()));
  return out;
}

Vec solve_spd(Mat a, Vec b) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.size() != n) throw ShapeError("solve_spd: dimension mismatch");
  // lower Cholesky, in place
  for (Eigen::Index j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) diag -= a(j, k) * a(j, k);
    if (!(diag > 0.0))
      throw NumericError("solve_spd: matrix not positive definite (singular system; "
                         "a ridge penalty > 0 regularizes it)");
    const double root = std::sqrt(diag);
    a(j, j) = root;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double v = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) v -= a(i, k) * a(j, k);
      a(i, j) = v / root;
    }
  }
  // forward substitution L y = b
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = b(i);
    for (Eigen::Index k = 0; k < i; ++k) v -= a(i, k) * b(k);
    b(i) = v / a(i, i);
  }
  // back substitution L^T x = y
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double v = b(i);
    for (Eigen::Index k = i + 1; k < n; ++k) v -= a(k, i) * b(k);
    b(i) = v / a(i, i);
  }
  return b;
}

namespace {

Mat design_matrix(const WindowedSamples& samples) {
  const Eigen::Index n = samples.count();
  const Eigen::Index w = samples.window_size();
  const Eigen::Index m = static_cast<Eigen::Index>(samples.windows.size());
  Mat x(n, w * m + 1);
  for (Eigen::Index i = 0; i < m; ++i) x.middleCols(i * w, w) = samples.windows[static_cast<std::size_t>(i)];
  x.col(w * m).setOnes();  // intercept last
  return x;
}

}  // namespace

Vec LinearModel::predict(const WindowedSamples& samples) const {
  const Mat x = design_matrix(samples);
  if (x.cols() != coefficients.size())
    throw ShapeError("linear model: expected " + std::to_string(coefficients.size()) +
                     " features, got " + std::to_string(x.cols()));
  return x * coefficients;
}

LinearModel fit_linear(const WindowedSamples& samples, double ridge_lambda) {
  if (ridge_lambda < 0.0) throw ConfigError("fit_linear: ridge strength must be >= 0");
  if (samples.count() < 1) throw DataError("fit_linear: no samples");
  const Mat x = design_matrix(samples);
  Mat gram = x.transpose() * x;
  for (Eigen::Index i = 0; i + 1 < gram.rows(); ++i) gram(i, i) += ridge_lambda;
  LinearModel model;
  model.ridge_lambda = ridge_lambda;
  model.coefficients = solve_spd(std::move(gram), x.transpose() * samples.targets);
  return model;
}

}  // namespace hmdlf
