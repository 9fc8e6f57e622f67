#include <doctest.h>

#include <cmath>

#include "hmdlf/tensor.hpp"

using namespace hmdlf;

TEST_CASE("matmul identity and hand cases") {
  Tensor eye = Tensor::matrix({{1, 0}, {0, 1}});
  Tensor x = Tensor::matrix({{3, -1}, {2.5, 7}});
  Tensor p = matmul(eye, x);
  CHECK(p(0, 0) == 3.0);
  CHECK(p(0, 1) == -1.0);
  CHECK(p(1, 0) == 2.5);
  CHECK(p(1, 1) == 7.0);

  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor b = Tensor::matrix({{5}, {6}});
  Tensor c = matmul(a, b);
  CHECK(c.shape() == std::vector<Eigen::Index>{2, 1});
  CHECK(c(0, 0) == 17.0);
  CHECK(c(1, 0) == 39.0);
}

TEST_CASE("matmul rejects mismatched inner extents") {
  Tensor a({1, 3});
  Tensor b({2, 2});
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("matmul associativity on random 3x3 chains") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor a({3, 3}), b({3, 3}), c({3, 3});
    for (Eigen::Index i = 0; i < 9; ++i) {
      a.flat()(i) = rng.uniform(-1, 1);
      b.flat()(i) = rng.uniform(-1, 1);
      c.flat()(i) = rng.uniform(-1, 1);
    }
    Tensor left = matmul(matmul(a, b), c);
    Tensor right = matmul(a, matmul(b, c));
    CHECK((left.flat() - right.flat()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("elementwise fixed points and hand arithmetic") {
  Tensor z = Tensor::from_vector(Vec::Zero(1));
  CHECK(tanh(z)(0) == 0.0);
  CHECK(sigmoid(z)(0) == 0.5);
  Tensor neg = Tensor::from_vector(Vec::Constant(1, -3.0));
  CHECK(relu(neg)(0) == 0.0);

  Tensor big = Tensor::from_vector(Vec::Constant(1, 1000.0));
  CHECK(sigmoid(big)(0) == doctest::Approx(1.0));
  CHECK(std::isfinite(sigmoid(big)(0)));
  Tensor small = Tensor::from_vector(Vec::Constant(1, -1000.0));
  CHECK(sigmoid(small)(0) == doctest::Approx(0.0));

  Vec u(2), v(2);
  u << 1, 2;
  v << 3, 4;
  Tensor s = add(Tensor::from_vector(u), Tensor::from_vector(v));
  CHECK(s(0) == 4.0);
  CHECK(s(1) == 6.0);
  CHECK(sub(Tensor::from_vector(v), Tensor::from_vector(u))(1) == 2.0);
  CHECK(mul(Tensor::from_vector(u), Tensor::from_vector(v))(1) == 8.0);
}

TEST_CASE("elementwise shape mismatch is rejected") {
  Tensor a({2});
  Tensor b({3});
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(mul(a, b), ShapeError);
}

TEST_CASE("row-wise bias add is the one sanctioned broadcast") {
  Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor bias = Tensor::from_vector((Vec(2) << 10, 20).finished());
  Tensor out = add_rowwise(m, bias);
  CHECK(out(0, 0) == 11.0);
  CHECK(out(1, 1) == 24.0);
  CHECK_THROWS_AS(add_rowwise(m, Tensor({3})), ShapeError);
}

TEST_CASE("softmax hand values and stability") {
  Vec c4 = Vec::Constant(4, -3.7);
  Vec s = softmax(c4);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(s(i) == doctest::Approx(0.25).epsilon(1e-12));

  Vec v(2);
  v << 0.0, std::log(3.0);
  Vec p = softmax(v);
  CHECK(p(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p(1) == doctest::Approx(0.75).epsilon(1e-12));

  Vec extreme(2);
  extreme << 1000.0, 0.0;
  Vec q = softmax(extreme);
  CHECK(std::isfinite(q(0)));
  CHECK(q(0) == doctest::Approx(1.0));
  CHECK(q(1) == doctest::Approx(0.0));

  CHECK_THROWS_AS(softmax(Vec(0)), ShapeError);
}

TEST_CASE("softmax sums to one and is shift invariant") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.index(8));
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(-4, 4);
    Vec s = softmax(v);
    CHECK(s.minCoeff() >= 0.0);
    CHECK(std::abs(s.sum() - 1.0) < 1e-12);
    const double shift = rng.uniform(-100, 100);
    Vec shifted = softmax(Vec(v.array() + shift));
    CHECK((s - shifted).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("fd_gradient matches analytic gradients") {
  auto sum_sq = [](const Tensor& t) { return t.flat().squaredNorm(); };
  Tensor x = Tensor::from_vector((Vec(2) << 1, 2).finished());
  Tensor g = fd_gradient(sum_sq, x, 1e-5);
  CHECK(std::abs(g(0) - 2.0) < 1e-6);
  CHECK(std::abs(g(1) - 4.0) < 1e-6);

  auto constant = [](const Tensor&) { return 3.25; };
  Tensor gz = fd_gradient(constant, x, 1e-5);
  CHECK(gz(0) == 0.0);
  CHECK(gz(1) == 0.0);

  auto prod = [](const Tensor& t) { return t(0) * t(1); };
  Tensor xp = Tensor::from_vector((Vec(2) << 3, 5).finished());
  Tensor gp = fd_gradient(prod, xp, 1e-5);
  CHECK(std::abs(gp(0) - 5.0) < 1e-6);
  CHECK(std::abs(gp(1) - 3.0) < 1e-6);
}

TEST_CASE("init_uniform stays in the Glorot range and is seed deterministic") {
  const double limit = std::sqrt(6.0 / (20 + 30));
  for (std::uint64_t seed : {1ULL, 17ULL, 123456789ULL}) {
    Rng rng(seed);
    Tensor t = init_uniform({20, 30}, 20, 30, rng);
    CHECK(t.flat().maxCoeff() <= limit);
    CHECK(t.flat().minCoeff() >= -limit);
  }
  Rng a(9), b(9);
  Tensor ta = init_uniform({4, 4}, 4, 4, a);
  Tensor tb = init_uniform({4, 4}, 4, 4, b);
  CHECK((ta.flat() - tb.flat()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("init_uniform pinned draws for two fixed seeds") {
  // frozen from one reference run of the documented generator
  Rng a(42);
  Tensor t42 = init_uniform({2, 2}, 2, 2, a);
  CHECK(t42(0, 0) == doctest::Approx(0.59171069276824295).epsilon(1e-15));
  CHECK(t42(0, 1) == doctest::Approx(-0.83304600427514497).epsilon(1e-15));
  CHECK(t42(1, 0) == doctest::Approx(-0.5423142605038267).epsilon(1e-15));
  CHECK(t42(1, 1) == doctest::Approx(-0.38165324170574633).epsilon(1e-15));

  Rng b(43);
  Tensor t43 = init_uniform({2, 2}, 2, 2, b);
  CHECK(t43(0, 0) == doctest::Approx(0.55892156469312892).epsilon(1e-15));
  // different seeds must differ somewhere
  CHECK((t42.flat() - t43.flat()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("init_uniform edge cases") {
  Rng rng(1);
  Tensor empty = init_uniform({0, 5}, 5, 5, rng);
  CHECK(empty.size() == 0);
  CHECK_THROWS_AS(init_uniform({2}, 0, 1, rng), ConfigError);
}

TEST_CASE("rng matches the published splitmix64 sequence") {
  Rng r(1);
  CHECK(r.next_u64() == 10451216379200822465ULL);
  CHECK(r.next_u64() == 13757245211066428519ULL);
  Rng d(7);
  CHECK(d.next_double() == doctest::Approx(0.016788294528156111).epsilon(1e-15));
  CHECK(d.next_double() >= 0.0);
}

TEST_CASE("tensor shape bookkeeping") {
  Tensor scalar = Tensor::scalar(2.5);
  CHECK(scalar.rank() == 0);
  CHECK(scalar.size() == 1);

  Tensor cube({2, 3, 4});
  CHECK(cube.size() == 24);
  cube(1, 2, 3) = 9.0;
  CHECK(cube.flat()(23) == 9.0);  // row-major: last slot
  CHECK(cube.slice(1)(2, 3) == 9.0);

  CHECK_THROWS_AS(Tensor({2, -1}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 3}).vec(), ShapeError);
}
