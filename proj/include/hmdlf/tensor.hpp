#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <vector>

#include "hmdlf/errors.hpp"

namespace hmdlf {

// Dense row-major matrix; the workhorse type for all layer math.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;
using VecMap = Eigen::Map<Vec>;
using ConstVecMap = Eigen::Map<const Vec>;

/// Deterministic 64-bit generator (splitmix64). The same seed produces the
/// same draw sequence on every platform; this is what makes weight init,
/// dropout masks and shuffling reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53 bits of precision.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Standard normal via Box-Muller (two uniforms per draw).
  double normal() {
    double u1 = next_double();
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Uniform index in [0, n). n must be positive.
  std::uint64_t index(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

/// Dense array of doubles with an explicit shape and flat row-major storage.
/// Rank 0 (shape {}) holds a single scalar. Tensors are the carrier for
/// layer parameters, gradients and serialized model state; heavy math goes
/// through the Eigen views below.
class Tensor {
 public:
  Tensor() : shape_{}, data_(Vec::Zero(1)) {}

  explicit Tensor(std::vector<Eigen::Index> shape)
      : shape_(std::move(shape)), data_(Vec::Zero(count(shape_))) {}

  static Tensor zeros(std::vector<Eigen::Index> shape) { return Tensor(std::move(shape)); }

  static Tensor scalar(double v) {
    Tensor t;
    t.data_(0) = v;
    return t;
  }

  static Tensor from_matrix(const Mat& m) {
    Tensor t({m.rows(), m.cols()});
    MatMap(t.data_.data(), m.rows(), m.cols()) = m;
    return t;
  }

  static Tensor from_vector(const Vec& v) {
    Tensor t({v.size()});
    t.data_ = v;
    return t;
  }

  /// Rank-2 constructor from nested braces, e.g. Tensor::matrix({{1,2},{3,4}}).
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<Eigen::Index>& shape() const { return shape_; }
  Eigen::Index extent(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  Eigen::Index size() const { return data_.size(); }

  const Vec& flat() const { return data_; }
  Vec& flat() { return data_; }

  double operator()(Eigen::Index i) const { return data_(i); }
  double& operator()(Eigen::Index i) { return data_(i); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return data_(i * shape_[1] + j); }
  double& operator()(Eigen::Index i, Eigen::Index j) { return data_(i * shape_[1] + j); }
  double operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
    return data_((i * shape_[1] + j) * shape_[2] + k);
  }
  double& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) {
    return data_((i * shape_[1] + j) * shape_[2] + k);
  }

  /// Rank-2 Eigen view of the whole tensor.
  MatMap mat() {
    require_rank(2, "mat()");
    return MatMap(data_.data(), shape_[0], shape_[1]);
  }
  ConstMatMap mat() const {
    require_rank(2, "mat()");
    return ConstMatMap(data_.data(), shape_[0], shape_[1]);
  }

  /// Rank-1 Eigen view.
  VecMap vec() {
    require_rank(1, "vec()");
    return VecMap(data_.data(), shape_[0]);
  }
  ConstVecMap vec() const {
    require_rank(1, "vec()");
    return ConstVecMap(data_.data(), shape_[0]);
  }

  /// For a rank-3 tensor [A x B x C], the B x C slice at index a.
  MatMap slice(Eigen::Index a) {
    require_rank(3, "slice()");
    return MatMap(data_.data() + a * shape_[1] * shape_[2], shape_[1], shape_[2]);
  }
  ConstMatMap slice(Eigen::Index a) const {
    require_rank(3, "slice()");
    return ConstMatMap(data_.data() + a * shape_[1] * shape_[2], shape_[1], shape_[2]);
  }

  void set_zero() { data_.setZero(); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const { return data_.allFinite(); }

  static Eigen::Index count(const std::vector<Eigen::Index>& shape) {
    Eigen::Index n = 1;
    for (Eigen::Index e : shape) {
      if (e < 0) throw ShapeError("tensor: negative extent in shape");
      n *= e;
    }
    return n;
  }

 private:
  void require_rank(int r, const char* what) const {
    if (rank() != r)
      throw ShapeError(std::string("tensor: ") + what + " requires rank " + std::to_string(r) +
                       ", have rank " + std::to_string(rank()));
  }

  std::vector<Eigen::Index> shape_;
  Vec data_;  // flat row-major
};

std::string shape_string(const std::vector<Eigen::Index>& shape);

/// result[i][j] = sum_p a[i][p] * b[p][j]. Both operands must be rank 2 with
/// matching inner extents.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Elementwise binary ops. Shapes must match exactly; the only sanctioned
/// broadcast in the project is add_rowwise below.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

/// Adds bias[j] to every row of a rank-2 tensor.
Tensor add_rowwise(const Tensor& a, const Tensor& bias);

/// Elementwise activations.
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);

inline double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Numerically stable softmax of a non-empty vector: max is subtracted
/// before exponentiation, output sums to 1.
Vec softmax(const Vec& v);
Tensor softmax(const Tensor& v);

/// Central finite differences: (f(x + h e_i) - f(x - h e_i)) / (2h) per
/// coordinate. The oracle every hand-written backward pass is checked
/// against.
Tensor fd_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h);

/// Glorot-style uniform init: values in [-limit, limit] with
/// limit = sqrt(6 / (fan_in + fan_out)).
Tensor init_uniform(std::vector<Eigen::Index> shape, Eigen::Index fan_in, Eigen::Index fan_out,
                    Rng& rng);

}  // namespace hmdlf
