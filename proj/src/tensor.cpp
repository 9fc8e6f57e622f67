#include "hmdlf/tensor.hpp"

#include <cmath>
#include <sstream>

namespace hmdlf {

std::string shape_string(const std::vector<Eigen::Index>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index c = r > 0 ? static_cast<Eigen::Index>(rows.begin()->size()) : 0;
  Tensor t({r, c});
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    if (static_cast<Eigen::Index>(row.size()) != c)
      throw ShapeError("tensor: ragged initializer for matrix()");
    Eigen::Index j = 0;
    for (double v : row) t(i, j++) = v;
    ++i;
  }
  return t;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ShapeError("matmul: operands must be rank 2, got " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  if (a.extent(1) != b.extent(0))
    throw ShapeError("matmul: inner extents differ, " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  Tensor out({a.extent(0), b.extent(1)});
  out.mat().noalias() = a.mat() * b.mat();
  return out;
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shapes differ, " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

template <typename F>
Tensor map_unary(const Tensor& x, F f) {
  Tensor out(x.shape());
  out.flat() = x.flat().unaryExpr(f);
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  out.flat() = a.flat() + b.flat();
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  out.flat() = a.flat() - b.flat();
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  out.flat() = a.flat().cwiseProduct(b.flat());
  return out;
}

Tensor add_rowwise(const Tensor& a, const Tensor& bias) {
  if (a.rank() != 2 || bias.rank() != 1)
    throw ShapeError("add_rowwise: need rank-2 input and rank-1 bias, got " +
                     shape_string(a.shape()) + " and " + shape_string(bias.shape()));
  if (a.extent(1) != bias.extent(0))
    throw ShapeError("add_rowwise: bias length " + std::to_string(bias.extent(0)) +
                     " does not match column count " + std::to_string(a.extent(1)));
  Tensor out = a;
  out.mat().rowwise() += bias.vec().transpose();
  return out;
}

Tensor tanh(const Tensor& x) {
  return map_unary(x, [](double v) { return std::tanh(v); });
}

Tensor sigmoid(const Tensor& x) {
  return map_unary(x, [](double v) { return sigmoid_scalar(v); });
}

Tensor relu(const Tensor& x) {
  return map_unary(x, [](double v) { return v > 0.0 ? v : 0.0; });
}

Vec softmax(const Vec& v) {
  if (v.size() == 0) throw ShapeError("softmax: empty vector");
  const double m = v.maxCoeff();
  Vec e = (v.array() - m).exp();
  return e / e.sum();
}

Tensor softmax(const Tensor& v) {
  if (v.rank() != 1) throw ShapeError("softmax: input must be rank 1, got " + shape_string(v.shape()));
  return Tensor::from_vector(softmax(Vec(v.vec())));
}

Tensor fd_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
  Tensor grad(x.shape());
  Tensor probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = probe.flat()(i);
    probe.flat()(i) = saved + h;
    const double fp = f(probe);
    probe.flat()(i) = saved - h;
    const double fm = f(probe);
    probe.flat()(i) = saved;
    grad.flat()(i) = (fp - fm) / (2.0 * h);
  }
  return grad;
}

Tensor init_uniform(std::vector<Eigen::Index> shape, Eigen::Index fan_in, Eigen::Index fan_out,
                    Rng& rng) {
  if (fan_in < 1 || fan_out < 1) throw ConfigError("init_uniform: fans must be >= 1");
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (Eigen::Index i = 0; i < t.size(); ++i) t.flat()(i) = rng.uniform(-limit, limit);
  return t;
}

}  // namespace hmdlf
