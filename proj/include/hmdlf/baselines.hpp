#pragma once

#include <string>
#include <vector>

#include "hmdlf/data.hpp"

namespace hmdlf {

/// Root mean square error, reported in whatever units the sequences carry
/// (the harness always scores in original, denormalized units).
double rmse(const Vec& predicted, const Vec& actual);

struct MetricsRecord {
  double rmse = 0.0;
  Eigen::Index count = 0;
  std::string model_tag;
  std::string data_tag;
};

/// Persistence: predict the last flow value of each window.
Vec naive(const WindowedSamples& samples);

struct SeasonalResult {
  Vec predictions;                    // one per valid sample
  std::vector<Eigen::Index> valid;    // sample indices with enough history
  Eigen::Index skipped = 0;
};

/// Predict the flow value exactly `period` records before each target.
/// Samples whose look-back falls before the start of `source` are skipped
/// and counted.
SeasonalResult seasonal_naive(const WindowedSamples& samples, const MultimodalDataset& source,
                              Eigen::Index period);

/// Linear model on the flattened multimodal window (modality-major), with
/// an unpenalized intercept as the last coefficient.
struct LinearModel {
  Vec coefficients;  // [w * M + 1]
  double ridge_lambda = 0.0;

  Vec predict(const WindowedSamples& samples) const;
};

/// Solves (X^T X + lambda D) beta = X^T y by an in-repo Cholesky
/// factorization; D is the identity with a zero in the intercept slot.
/// lambda = 0 is ordinary least squares; a singular system then raises a
/// NumericError advising ridge.
LinearModel fit_linear(const WindowedSamples& samples, double ridge_lambda);

/// Symmetric positive definite solve (lower Cholesky, in-repo).
Vec solve_spd(Mat a, Vec b);

}  // namespace hmdlf
