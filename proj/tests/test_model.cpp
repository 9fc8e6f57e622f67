#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "hmdlf/model.hpp"

using namespace hmdlf;

namespace {

ModelConfig toy_config(ModelKind kind, std::vector<std::string> modalities,
                       std::uint64_t seed = 5) {
  ModelConfig cfg;
  cfg.kind = kind;
  cfg.modalities = std::move(modalities);
  cfg.window = 8;
  cfg.branch.conv_filters = 3;
  cfg.branch.kernel_width = 3;
  cfg.branch.pool_width = 2;
  cfg.branch.hidden = 4;
  cfg.branch.attention_width = 4;
  cfg.fusion_width = 5;
  cfg.dropout = 0.2;
  cfg.seed = seed;
  return cfg;
}

Mat random_mat(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-1, 1);
  return m;
}

Tensor* find_param(HmdlfModel& model, const std::string& name) {
  for (const ParamRef& p : model.params())
    if (p.name == name) return p.value;
  FAIL("no parameter named ", name);
  return nullptr;
}

}  // namespace

TEST_CASE("all-zero weights collapse the prediction to the output bias") {
  HmdlfModel model(toy_config(ModelKind::hmdlf, {"flow", "speed"}));
  for (const ParamRef& p : model.params()) p.value->set_zero();
  find_param(model, "head.out.bias")->flat()(0) = -2.75;
  Rng rng(1);
  std::vector<Mat> inputs = {random_mat(1, 8, rng), random_mat(1, 8, rng)};
  Vec pred = model.forward(inputs, false);
  CHECK(pred.size() == 1);
  CHECK(pred(0) == -2.75);
}

TEST_CASE("degenerate pipeline with one pooled step stays finite") {
  ModelConfig cfg = toy_config(ModelKind::cnn_gru, {"flow"});
  cfg.window = 2;  // pool width 2 leaves a single recurrent step
  cfg.branch.use_attention = false;
  HmdlfModel model(cfg);
  Rng rng(2);
  Vec pred = model.forward({random_mat(3, 2, rng)}, false);
  CHECK(pred.size() == 3);
  CHECK(pred.allFinite());
}

TEST_CASE("model forward validates its inputs") {
  HmdlfModel model(toy_config(ModelKind::hmdlf, {"flow", "speed"}));
  Rng rng(3);
  CHECK_THROWS_AS(model.forward({random_mat(2, 8, rng)}, false), ShapeError);
  CHECK_THROWS_AS(model.forward({random_mat(2, 8, rng), random_mat(3, 8, rng)}, false),
                  ShapeError);
  CHECK_THROWS_AS(model.forward({random_mat(2, 8, rng), random_mat(2, 7, rng)}, false),
                  ShapeError);
}

TEST_CASE("loss hand cases") {
  ModelConfig cfg = toy_config(ModelKind::gru, {"flow"});
  cfg.branch.hidden = 1;
  HmdlfModel model(cfg);
  for (const ParamRef& p : model.params()) p.value->set_zero();

  Vec pred(2), target(2);
  pred << 0, 0;
  target << 3, 4;
  LossValue ident = compute_loss(target, target, model, 0.0);
  CHECK(ident.total == 0.0);

  LossValue v = compute_loss(pred, target, model, 0.0);
  CHECK(v.data == doctest::Approx(12.5).epsilon(1e-12));
  CHECK(v.penalty == 0.0);

  // one weight matrix [[1],[1]], lambda 2 -> penalty (2/2) * (1 + 1) = 2
  Tensor* wz = find_param(model, "branch.flow.gru.wz");
  wz->flat().setOnes();
  LossValue w = compute_loss(pred, target, model, 2.0);
  CHECK(w.penalty == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(w.total == doctest::Approx(w.data + w.penalty).epsilon(1e-12));

  CHECK_THROWS_AS(compute_loss(Vec(2), Vec(3), model, 0.0), ShapeError);
  CHECK_THROWS_AS(compute_loss(Vec(0), Vec(0), model, 0.0), ShapeError);
}

TEST_CASE("bias vectors and the attention context stay out of the penalty") {
  HmdlfModel model(toy_config(ModelKind::hmdlf, {"flow"}));
  for (const ParamRef& p : model.params()) {
    const bool is_matrix = p.value->rank() >= 2;
    CHECK(p.penalized == is_matrix);
  }
}

TEST_CASE("gru baseline parameter count matches the closed form") {
  ModelConfig cfg = toy_config(ModelKind::gru, {"flow"});
  cfg.branch.hidden = 5;
  HmdlfModel model = build_baseline("gru", cfg);
  Eigen::Index total = 0;
  for (const ParamRef& p : model.params()) total += p.value->size();
  const Eigen::Index h = 5;
  CHECK(total == 3 * (h + 1) * h + h + 1);
}

TEST_CASE("every baseline kind produces finite predictions") {
  Rng rng(4);
  for (const char* kind : {"rnn", "gru", "cnn", "cnn_gru", "cnn_gru_attention"}) {
    HmdlfModel model = build_baseline(kind, toy_config(ModelKind::hmdlf, {"flow", "speed"}));
    CHECK(model.config().modalities.size() == 1);  // reduced to the first modality
    Vec pred = model.forward({random_mat(4, 8, rng)}, false);
    CHECK(pred.allFinite());
  }
  CHECK_THROWS_AS(build_baseline("lstm", toy_config(ModelKind::hmdlf, {"flow"})),
                  ConfigError);
}

TEST_CASE("cnn_gru_attention equals a one-branch instance of the full model") {
  ModelConfig cfg = toy_config(ModelKind::hmdlf, {"flow"}, 77);
  cfg.branch.use_attention = true;
  HmdlfModel full(cfg);
  HmdlfModel baseline = build_baseline("cnn_gru_attention", cfg);
  Rng rng(5);
  Mat x = random_mat(6, 8, rng);
  Vec a = full.forward({x}, false);
  Vec b = baseline.forward({x}, false);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a zeroed second branch reduces the fused model to the single-modality one") {
  ModelConfig two_cfg = toy_config(ModelKind::hmdlf, {"flow", "speed"}, 9);
  HmdlfModel two(two_cfg);
  ModelConfig one_cfg = toy_config(ModelKind::cnn_gru_attention, {"flow"}, 10);
  HmdlfModel one(one_cfg);

  // zero the second branch, then share every remaining weight
  for (const ParamRef& p : two.params())
    if (p.name.rfind("branch.speed", 0) == 0) p.value->set_zero();
  const Eigen::Index hidden = two_cfg.branch.hidden;
  for (const ParamRef& p : one.params()) {
    if (p.name == "head.fusion.weights") {
      Tensor* big = nullptr;
      for (const ParamRef& q : two.params())
        if (q.name == p.name) big = q.value;
      p.value->mat() = big->mat().topRows(hidden);
    } else {
      for (const ParamRef& q : two.params())
        if (q.name == p.name) *p.value = *q.value;
    }
  }

  Rng rng(6);
  Mat x = random_mat(5, 8, rng);
  Vec from_two = two.forward({x, Mat::Zero(5, 8)}, false);
  Vec from_one = one.forward({x}, false);
  CHECK((from_two - from_one).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("evaluation-mode forward is deterministic") {
  HmdlfModel model(toy_config(ModelKind::hmdlf, {"flow", "speed"}));
  Rng rng(7);
  std::vector<Mat> inputs = {random_mat(3, 8, rng), random_mat(3, 8, rng)};
  Vec a = model.forward(inputs, false);
  Vec b = model.forward(inputs, false);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("model files round-trip bit-exactly") {
  const std::string path = "test_model_roundtrip.hmdlf";
  ModelConfig cfg = toy_config(ModelKind::hmdlf, {"flow", "speed"}, 21);
  HmdlfModel model(cfg);
  model.scalers["flow"] = Scaler{10.0, 250.0};
  model.scalers["speed"] = Scaler{30.0, 110.0};
  save_model(model, path);

  HmdlfModel loaded = load_model(path);
  CHECK(loaded.config().window == cfg.window);
  CHECK(loaded.config().modalities == cfg.modalities);
  CHECK(to_string(loaded.config().kind) == "hmdlf");
  CHECK(loaded.scalers.at("flow").lo == 10.0);
  CHECK(loaded.scalers.at("speed").hi == 110.0);

  Rng rng(8);
  std::vector<Mat> inputs = {random_mat(4, 8, rng), random_mat(4, 8, rng)};
  Vec a = model.forward(inputs, false);
  Vec b = loaded.forward(inputs, false);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("corrupt model files raise load errors, not crashes") {
  const std::string path = "test_model_corrupt.hmdlf";
  HmdlfModel model(toy_config(ModelKind::gru, {"flow"}));
  save_model(model, path);

  // truncate to half
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_model(path), IoError);

  // wrong magic
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "definitely not a model file";
  }
  CHECK_THROWS_AS(load_model(path), IoError);
  CHECK_THROWS_AS(load_model("no_such_file.hmdlf"), IoError);
  std::remove(path.c_str());
}

TEST_CASE("model config validation") {
  ModelConfig cfg = toy_config(ModelKind::gru, {"flow", "speed"});
  CHECK_THROWS_AS(HmdlfModel{cfg}, ConfigError);  // baselines are single-modality
  ModelConfig dup = toy_config(ModelKind::hmdlf, {"flow", "flow"});
  CHECK_THROWS_AS(HmdlfModel{dup}, ConfigError);
  ModelConfig even = toy_config(ModelKind::hmdlf, {"flow"});
  even.branch.kernel_width = 4;
  CHECK_THROWS_AS(HmdlfModel{even}, ConfigError);
  ModelConfig bad_drop = toy_config(ModelKind::hmdlf, {"flow"});
  bad_drop.dropout = 1.0;
  CHECK_THROWS_AS(HmdlfModel{bad_drop}, ConfigError);
}
