#pragma once

#include "hmdlf/errors.hpp"
#include "hmdlf/tensor.hpp"

namespace hmdlf {

/// Min-max normalization to [0, 1], fitted on training data only. A
/// degenerate series (max == min) maps to all zeros. The default-constructed
/// scaler is the identity.
struct Scaler {
  double lo = 0.0;
  double hi = 1.0;

  double apply(double x) const { return hi == lo ? 0.0 : (x - lo) / (hi - lo); }
  double invert(double y) const { return hi == lo ? lo : lo + y * (hi - lo); }

  Vec apply(const Vec& x) const {
    if (hi == lo) return Vec::Zero(x.size());
    return (x.array() - lo) / (hi - lo);
  }
  Vec invert(const Vec& y) const {
    if (hi == lo) return Vec::Constant(y.size(), lo);
    return lo + y.array() * (hi - lo);
  }
  Mat apply(const Mat& x) const {
    if (hi == lo) return Mat::Zero(x.rows(), x.cols());
    return ((x.array() - lo) / (hi - lo)).matrix();
  }
};

inline Scaler fit_scaler(const Vec& values) {
  if (values.size() == 0) throw DataError("fit_scaler: empty series");
  return Scaler{values.minCoeff(), values.maxCoeff()};
}

}  // namespace hmdlf
