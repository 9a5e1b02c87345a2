// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "gsr/errors.hpp"
#include "gsr/optimizer.hpp"
#include "gsr/trainer.hpp"
#include "helpers.hpp"

using namespace gsr;
using gsr::testing::temp_dir;
using gsr::testing::tiny_config;
using gsr::testing::tiny_space;

namespace {

NamedTensor param(const std::string& name, std::vector<double> values) {
  const std::size_t n = values.size();
  return {name, Tensor::from({n}, std::move(values), true)};
}

void set_grad(NamedTensor& p, std::vector<double> g) {
  auto dst = p.tensor.mutable_grad();
  std::copy(g.begin(), g.end(), dst.begin());
}

// Single-parameter AdamW written out directly.
struct ReferenceAdamW {
  double lr, wd, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double theta, double g) {
    ++t;
    theta -= lr * wd * theta;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    return theta - lr * mh / (std::sqrt(vh) + eps);
  }
};

struct Fixture {
  FrameSpace space = tiny_space();
  std::vector<SituationAnnotation> annotations;
  std::vector<FeatureGrid> grids;
  Fixture() {
    SyntheticOptions o;
    o.channels = 3;
    o.height = 4;
    o.width = 4;
    o.min_extent = 1;
    o.max_extent = 1;
    for (auto& s : generate_synthetic(space, 10, o, 5)) {
      annotations.push_back(s.annotation);
      grids.push_back(s.grid);
    }
  }
  ModelConfig config() const {
    ModelConfig c = tiny_config(space);
    c.grid_h = 4;
    c.grid_w = 4;
    return c;
  }
};

}  // namespace

TEST_SUITE("optimizer") {
  TEST_CASE("first step moves each coordinate by lr against the gradient sign") {
    std::vector<NamedTensor> ps{param("w", {0.5, -0.2, 3.0})};
    set_grad(ps[0], {2.0, -0.01, 1e-3});
    AdamW opt(ps, {.lr = 1e-2, .backbone_lr = 0.0, .weight_decay = 0.0, .clip = 0.0});
    opt.step();
    CHECK(ps[0].tensor[0] == doctest::Approx(0.49).epsilon(1e-9));
    CHECK(ps[0].tensor[1] == doctest::Approx(-0.19).epsilon(1e-6));
    CHECK(ps[0].tensor[2] == doctest::Approx(2.99).epsilon(1e-6));
  }

  TEST_CASE("matches a direct AdamW transcription over many steps") {
    std::vector<NamedTensor> ps{param("w", {0.8})};
    AdamW opt(ps, {.lr = 3e-3, .weight_decay = 0.1, .clip = 0.0});
    ReferenceAdamW ref{3e-3, 0.1};
    double theta = 0.8;
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
      const double g = rng.uniform(-1.0, 1.0);
      opt.zero_grad();
      set_grad(ps[0], {g});
      opt.step();
      theta = ref.step(theta, g);
      CHECK(ps[0].tensor[0] == doctest::Approx(theta).epsilon(1e-13));
    }
    CHECK(opt.state().step == 50);
  }

  TEST_CASE("decay alone shrinks parameters geometrically") {
    std::vector<NamedTensor> ps{param("w", {2.0, -4.0})};
    set_grad(ps[0], {0.0, 0.0});
    AdamW opt(ps, {.lr = 0.1, .weight_decay = 0.5, .clip = 0.0});
    opt.step();
    CHECK(ps[0].tensor[0] == doctest::Approx(2.0 * 0.95).epsilon(1e-15));
    CHECK(ps[0].tensor[1] == doctest::Approx(-4.0 * 0.95).epsilon(1e-15));
  }

  TEST_CASE("backbone parameters use their own learning rate") {
    std::vector<NamedTensor> ps{param("backbone.0.weight", {1.0}), param("encoder.0.w", {1.0}),
                                param("backbones", {1.0})};
    for (auto& p : ps) set_grad(p, {1.0});
    AdamW opt(ps, {.lr = 1e-2, .backbone_lr = 1e-3, .weight_decay = 0.0, .clip = 0.0});
    opt.step(0.5);
    CHECK(ps[0].tensor[0] == doctest::Approx(1.0 - 5e-4).epsilon(1e-9));
    CHECK(ps[1].tensor[0] == doctest::Approx(1.0 - 5e-3).epsilon(1e-9));
    CHECK(ps[2].tensor[0] == doctest::Approx(1.0 - 5e-3).epsilon(1e-9));
  }

  TEST_CASE("global norm clipping") {
    std::vector<NamedTensor> ps{param("a", {3.0}), param("b", {0.0}), param("c", {1.0})};
    set_grad(ps[0], {3.0});
    set_grad(ps[1], {4.0});
    ClipResult r = clip_gradients(ps, 0.1);
    CHECK(r.norm == doctest::Approx(5.0));
    CHECK(r.scale == doctest::Approx(0.02));
    CHECK(gradient_norm(ps) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(ps[0].tensor.grad()[0] == doctest::Approx(0.06));
    r = clip_gradients(ps, 1.0);
    CHECK(r.scale == 1.0);
    CHECK(gradient_norm(ps) == doctest::Approx(0.1).epsilon(1e-12));
  }

  TEST_CASE("state round trip continues identically") {
    const auto dir = temp_dir("optim_state");
    std::vector<NamedTensor> a{param("w", {0.3, -0.7})}, b{param("w", {0.3, -0.7})};
    AdamW oa(a, {.lr = 1e-2, .clip = 0.0}), ob(b, {.lr = 1e-2, .clip = 0.0});
    for (int i = 0; i < 3; ++i) {
      oa.zero_grad();
      set_grad(a[0], {0.1 * i, -0.2});
      oa.step();
    }
    oa.save_state(dir / "s.optim");
    std::copy(a[0].tensor.values().begin(), a[0].tensor.values().end(), b[0].tensor.mutable_values().begin());
    ob.load_state(dir / "s.optim");
    CHECK(ob.state().step == 3);
    oa.zero_grad();
    ob.zero_grad();
    set_grad(a[0], {0.5, 0.5});
    set_grad(b[0], {0.5, 0.5});
    oa.step();
    ob.step();
    CHECK(a[0].tensor[0] == b[0].tensor[0]);
    CHECK(a[0].tensor[1] == b[0].tensor[1]);
    std::vector<NamedTensor> other{param("v", {0.0})};
    AdamW oc(other, {});
    CHECK_THROWS(oc.load_state(dir / "s.optim"));
  }
}

TEST_SUITE("trainer") {
  TEST_CASE("training is deterministic in the seeds and lowers the loss") {
    const Fixture f;
    TrainOptions o;
    o.epochs = 0;
    o.max_steps = 30;
    o.batch_size = 4;
    o.seed = 3;
    o.optimizer.lr = 3e-3;
    Model a(f.config(), f.space, 1), b(f.config(), f.space, 1);
    const TrainResult ra = train(a, f.annotations, f.grids, f.space, o);
    const TrainResult rb = train(b, f.annotations, f.grids, f.space, o);
    REQUIRE(ra.steps.size() == 30);
    for (std::size_t i = 0; i < ra.steps.size(); ++i) CHECK(ra.steps[i].to_json() == rb.steps[i].to_json());
    CHECK(ra.steps.back().total < ra.steps.front().total);
    CHECK(ra.steps.back().step == 30);
    CHECK(ra.steps.back().epoch == 9);  // 3 batches per epoch

    o.seed = 4;
    Model c(f.config(), f.space, 1);
    const TrainResult rc = train(c, f.annotations, f.grids, f.space, o);
    CHECK(rc.steps[1].to_json() != ra.steps[1].to_json());
  }

  TEST_CASE("logs, checkpoints and learning-rate decay") {
    const Fixture f;
    const auto dir = temp_dir("trainer_ckpt");
    TrainOptions o;
    o.epochs = 4;
    o.batch_size = 5;
    o.lr_decay = 0.1;
    o.lr_decay_epochs = 2;
    o.log_path = dir / "log.jsonl";
    o.checkpoint_dir = dir / "epochs";
    o.checkpoint_every = 2;
    Model m(f.config(), f.space, 2);
    const TrainResult r = train(m, f.annotations, f.grids, f.space, o);
    CHECK(r.epochs.size() == 4);
    CHECK(r.steps[0].lr == doctest::Approx(1e-4));
    CHECK(r.steps.back().lr == doctest::Approx(1e-5));
    std::ifstream log(o.log_path);
    std::size_t lines = 0;
    for (std::string line; std::getline(log, line);) ++lines;
    CHECK(lines == 8);
    CHECK_FALSE(std::filesystem::exists(o.checkpoint_dir / "epoch_1.ckpt"));
    REQUIRE(std::filesystem::exists(o.checkpoint_dir / "epoch_3.ckpt"));
    CHECK(std::filesystem::exists(o.checkpoint_dir / "epoch_3.ckpt.optim"));
    std::ifstream meta(o.checkpoint_dir / "epoch_3.ckpt.json");
    const auto j = nlohmann::json::parse(meta);
    CHECK(j["training"]["step"] == 8);
    CHECK(j["training"]["rng"]["order"]["position"].get<std::uint64_t>() > 0);
    const Model back = Model::load(o.checkpoint_dir / "epoch_3.ckpt");
    CHECK(back.named_parameters()[3].tensor[0] == m.named_parameters()[3].tensor[0]);
  }

  TEST_CASE("invalid training requests") {
    const Fixture f;
    Model m(f.config(), f.space, 2);
    TrainOptions o;
    CHECK_THROWS_AS(train(m, {}, {}, f.space, o), ValidationError);
    CHECK_THROWS_AS(train(m, f.annotations, std::span<const FeatureGrid>(f.grids).first(3), f.space, o), ValidationError);
    o.batch_size = 0;
    CHECK_THROWS_AS(train(m, f.annotations, f.grids, f.space, o), ValidationError);
  }
}
