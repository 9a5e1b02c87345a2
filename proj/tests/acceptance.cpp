// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
//
//   acceptance            all criteria
//   acceptance 3 5        selected criteria

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gsr/boxes.hpp"
#include "gsr/evaluator.hpp"
#include "gsr/grad_check.hpp"
#include "gsr/losses.hpp"
#include "gsr/model.hpp"
#include "gsr/retrieval.hpp"
#include "gsr/trainer.hpp"
#include "helpers.hpp"
#include "random_records.hpp"

using namespace gsr;
using namespace gsr::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "failed: ";
      else detail << "; ";
      detail << what;
    }
    pass = pass && ok;
  }
};

// ---------------------------------------------------------------------------
// 1. Gradient checks

struct GradTally {
  double worst = 0.0;
  std::string worst_name;
  std::vector<std::string> failed;
  std::size_t checks = 0;

  void run(const std::string& name, const std::function<Tensor()>& f, const std::vector<Tensor>& inputs) {
    const GradCheckReport r = grad_check(f, inputs, 1e-5, 1e-4);
    ++checks;
    if (r.max_relative_error > worst) {
      worst = r.max_relative_error;
      worst_name = name;
    }
    if (!r.passed || r.entries_checked == 0 || !(r.max_relative_error < 1e-4)) failed.push_back(name);
  }
};

ModelConfig without_dropout(ModelConfig c) {
  c.dropout = {0.0, 0.0, 0.0, 0.0, 0.0};
  return c;
}

Outcome criterion_gradients() {
  Outcome out;
  const auto start = Clock::now();
  GradTally t;
  Rng rng(101);
  Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng), pos = random_tensor({3, 4}, rng, 0.5, 2.0);
  Tensor m = random_tensor({4, 2}, rng), c = random_tensor({2, 4}, rng), bias = random_tensor({4}, rng);
  Tensor wide = random_tensor({3, 5}, rng, -2.0, 2.0), gain = random_tensor({5}, rng, 0.5, 1.5),
         shift = random_tensor({5}, rng);
  Tensor row = random_tensor({4}, rng, -2.0, 2.0), prob = random_tensor({5}, rng, 0.05, 0.95);

  t.run("add", [&] { return probe(add(a, b)); }, {a, b});
  t.run("sub", [&] { return probe(sub(a, b)); }, {a, b});
  t.run("mul", [&] { return probe(mul(a, b)); }, {a, b});
  t.run("div", [&] { return probe(div(a, pos)); }, {a, pos});
  t.run("minimum", [&] { return probe(minimum(a, b)); }, {a, b});
  t.run("maximum", [&] { return probe(maximum(a, b)); }, {a, b});
  t.run("scale", [&] { return probe(scale(a, -2.5)); }, {a});
  t.run("add_scalar", [&] { return probe(add_scalar(a, 0.3)); }, {a});
  t.run("relu", [&] { return probe(relu(a)); }, {a});
  t.run("sigmoid", [&] { return probe(sigmoid(a)); }, {a});
  t.run("log", [&] { return probe(log(pos)); }, {pos});
  t.run("abs", [&] { return probe(abs(a)); }, {a});
  t.run("clamp", [&] { return probe(clamp(a, -0.5, 0.5)); }, {a});
  t.run("matmul", [&] { return probe(matmul(a, m)); }, {a, m});
  t.run("transpose", [&] { return probe(transpose(a)); }, {a});
  t.run("reshape", [&] { return probe(reshape(a, {2, 6})); }, {a});
  t.run("concat", [&] { return probe(concat({a, c}, 0)); }, {a, c});
  t.run("concat_cols", [&] { return probe(concat({a, b}, 1)); }, {a, b});
  t.run("slice", [&] { return probe(slice(a, 1, 1, 2)); }, {a});
  t.run("gather_rows", [&] { return probe(gather_rows(a, {2, 0, 2})); }, {a});
  t.run("add_bias", [&] { return probe(add_bias(a, bias)); }, {a, bias});
  t.run("sum", [&] { return sum(wide); }, {wide});
  t.run("sum_axis", [&] { return probe(sum(wide, 1)); }, {wide});
  t.run("mean", [&] { return mean(mul(wide, wide)); }, {wide});
  t.run("softmax", [&] { return probe(softmax(wide, 1)); }, {wide});
  t.run("log_softmax", [&] { return probe(log_softmax(wide, 1)); }, {wide});
  t.run("layer_norm", [&] { return probe(layer_norm(wide, gain, shift)); }, {wide, gain, shift});
  t.run("dropout", [&] { Rng mask(17); return probe(dropout(a, 0.3, mask, true)); }, {a});
  const std::vector<double> dist{0.1, 0.2, 0.3, 0.4};
  std::vector<double> dists;
  for (int r = 0; r < 3; ++r) dists.insert(dists.end(), dist.begin(), dist.end());
  t.run("cross_entropy", [&] { return cross_entropy(row, dist); }, {row});
  Tensor logits = random_tensor({3, 4}, rng, -2.0, 2.0);
  t.run("cross_entropy_rows", [&] { return probe(cross_entropy_rows(logits, dists)); }, {logits});
  const std::vector<double> bits{1, 0, 1, 1, 0};
  t.run("binary_cross_entropy", [&] { return probe(binary_cross_entropy(prob, bits)); }, {prob});

  // Attention blocks and layers at d = 8.
  Tensor q = random_tensor({3, 4}, rng), k = random_tensor({5, 4}, rng), v = random_tensor({5, 4}, rng);
  t.run("attention", [&] { return probe(attention(q, k, v)); }, {q, k, v});
  const AttentionParams attn = make_attention(8, 2, rng);
  Tensor xq = random_tensor({3, 8}, rng), xkv = random_tensor({5, 8}, rng), qa = random_tensor({3, 8}, rng),
         ka = random_tensor({5, 8}, rng);
  t.run("multi_head_attention", [&] { return probe(multi_head_attention(xq, xkv, attn, &qa, &ka)); },
        {xq, xkv, qa, ka, attn.w_q, attn.w_k, attn.w_v, attn.w_o});
  for (bool pre : {true, false}) {
    const BlockOptions opts{pre, 0.0, 1e-5};
    const EncoderLayerParams enc = make_encoder_layer(8, 2, 16, rng);
    Tensor x = random_tensor({4, 8}, rng);
    Tensor p = concat({Tensor::zeros({1, 8}), random_tensor({3, 8}, rng, -1.0, 1.0, false)}, 0);
    std::vector<NamedTensor> enc_params;
    enc.collect("enc", enc_params);
    std::vector<Tensor> enc_inputs{x};
    for (const auto& np : enc_params) enc_inputs.push_back(np.tensor);
    t.run(pre ? "encoder_layer_pre" : "encoder_layer_post", [&] { return probe(encoder_layer(x, p, enc, opts, {})); },
          enc_inputs);
    const DecoderLayerParams dec = make_decoder_layer(8, 2, 16, rng);
    Tensor y = random_tensor({3, 8}, rng), queries = random_tensor({3, 8}, rng), mem = random_tensor({6, 8}, rng),
           mpos = random_tensor({6, 8}, rng);
    std::vector<NamedTensor> dec_params;
    dec.collect("dec", dec_params);
    std::vector<Tensor> dec_inputs{y, queries, mem, mpos};
    for (const auto& np : dec_params) dec_inputs.push_back(np.tensor);
    t.run(pre ? "decoder_layer_pre" : "decoder_layer_post",
          [&] { return probe(decoder_layer(y, queries, mem, mpos, dec, opts, {})); }, dec_inputs);
  }

  // Box terms and the full objective.
  Tensor pred = random_tensor({4, 4}, rng, 0.2, 0.6);
  const Tensor gt_c = Tensor::from({4, 4}, {0.5, 0.5, 0.3, 0.4, 0.2, 0.7, 0.2, 0.2, 0.6, 0.3, 0.5, 0.3, 0.4, 0.4, 0.6, 0.6});
  const Tensor gt_x = Tensor::from({4, 4}, {0.1, 0.2, 0.5, 0.6, 0.0, 0.0, 0.3, 0.9, 0.5, 0.5, 0.9, 0.8, 0.3, 0.1, 0.4, 0.2});
  t.run("l1_rows", [&] { return probe(l1_rows(pred, gt_c)); }, {pred});
  t.run("giou_rows", [&] { return probe(giou_rows(pred, gt_x)); }, {pred});

  const FrameSpace s = tiny_space();
  const Model model(without_dropout(tiny_config(s, 8)), 21);
  const FeatureGrid g = random_grid(3, 2, 3, rng);
  SampleTargets targets;
  targets.verb = 2;
  targets.nouns = {{1, 1, 2}, {3, 3, 3}, {0, 4, 4}};
  targets.boxes = {BoxXYXY{0.1, 0.1, 0.5, 0.5}, std::nullopt, BoxXYXY{0.0, 0.2, 1.0, 0.9}};
  std::vector<Tensor> params;
  for (const auto& p : model.named_parameters()) params.push_back(p.tensor);
  t.run("L_total", [&] { return sample_loss(forward(g, 2, s, model), targets, model.config()).objective; }, params);

  const double elapsed = seconds_since(start);
  out.require(t.failed.empty(), "gradient mismatch in " + (t.failed.empty() ? "" : t.failed.front()));
  out.require(elapsed < 60.0, "runtime over 60 s");
  if (out.pass) {
    out.detail << t.checks << " checks, max relative error " << t.worst << " (" << t.worst_name << "), " << elapsed
               << " s";
  }
  return out;
}

// ---------------------------------------------------------------------------
// 2, 8, 9. Training on the synthetic frame ontology

struct SyntheticSetup {
  FrameSpace space;
  std::vector<SituationAnnotation> annotations;
  std::vector<FeatureGrid> grids;
};

const SyntheticSetup& synthetic_setup() {
  static const SyntheticSetup setup = [] {
    SyntheticSetup s;
    SyntheticSpaceOptions so;
    so.seed = 7;
    s.space = make_synthetic_space(so);
    for (auto& sample : generate_synthetic(s.space, 64, SyntheticOptions{}, 11)) {
      s.annotations.push_back(std::move(sample.annotation));
      s.grids.push_back(std::move(sample.grid));
    }
    return s;
  }();
  return setup;
}

ModelConfig learnability_config(const FrameSpace& space) {
  ModelConfig c;
  c.d = 64;
  c.d_verb = 32;
  c.d_role = 32;
  c.heads = 4;
  c.encoder_layers = 2;
  c.decoder_layers = 2;
  c.ffn_dim = 128;
  c.channels = 32;
  c.grid_h = 6;
  c.grid_w = 6;
  c.num_verbs = space.num_verbs();
  c.num_roles = space.num_roles();
  c.num_nouns = space.num_nouns();
  return c;
}

struct RunResult {
  std::string log;
  MetricsReport report;
  std::string report_json;
  double seconds = 0.0;
};

RunResult train_and_evaluate(const ModelConfig& config, std::size_t steps) {
  const SyntheticSetup& setup = synthetic_setup();
  const auto start = Clock::now();
  Model model(config, setup.space, 1);
  TrainOptions o;
  o.epochs = 0;
  o.max_steps = steps;
  o.batch_size = 16;
  o.seed = 3;
  o.optimizer.lr = 1e-3;
  RunResult r;
  const TrainResult tr = train(model, setup.annotations, setup.grids, setup.space, o);
  for (const auto& step : tr.steps) r.log += step.to_json() + "\n";
  std::vector<PredictionRecord> records;
  for (std::size_t i = 0; i < setup.annotations.size(); ++i) {
    const auto& a = setup.annotations[i];
    records.push_back(infer_topk(a.image_id, setup.grids[i], a.width, a.height, setup.space, model, 5,
                                 setup.space.verb_index(a.verb)));
  }
  r.report = evaluate(setup.annotations, records, setup.space);
  r.report_json = r.report.to_json();
  r.seconds = seconds_since(start);
  return r;
}

const RunResult& learnability_run() {
  static const RunResult run = train_and_evaluate(learnability_config(synthetic_setup().space), 500);
  return run;
}

Outcome criterion_learnability() {
  Outcome out;
  const RunResult& r = learnability_run();
  const double verb = *r.report.top1.verb, value = r.report.ground_truth.value,
               grounded = r.report.ground_truth.grounded_value;
  out.require(verb >= 95.0, "top-1 verb below 95%");
  out.require(value >= 90.0, "ground-truth value below 90%");
  out.require(grounded >= 70.0, "ground-truth grounded-value below 70%");
  out.require(r.seconds < 600.0, "runtime over 10 min");
  out.detail << (out.pass ? "" : "; ") << "top-1 verb " << verb << "%, gt value " << value << "%, gt grounded-value "
             << grounded << "%, top-1 grounded-value " << r.report.top1.grounded_value << "%, " << r.seconds << " s";
  return out;
}

Outcome criterion_ablations() {
  Outcome out;
  const FrameSpace& space = synthetic_setup().space;
  struct Variant {
    std::string name;
    std::function<void(ModelConfig&)> apply;
  };
  const std::vector<Variant> variants{
      {"no verb embedding", [](ModelConfig& c) { c.d_verb = 0; c.d_role = c.d; }},
      {"4+4 layers", [](ModelConfig& c) { c.encoder_layers = c.decoder_layers = 4; }},
      {"8+8 layers", [](ModelConfig& c) { c.encoder_layers = c.decoder_layers = 8; }},
      {"post-LN", [](ModelConfig& c) { c.pre_ln = false; }},
  };
  for (const auto& v : variants) {
    ModelConfig c = learnability_config(space);
    v.apply(c);
    try {
      const RunResult r = train_and_evaluate(c, 100);
      const auto bad = dominance_violations(r.report);
      out.require(bad.empty(), v.name + " breaks " + (bad.empty() ? "" : bad.front()));
      out.require(r.report.images == 64, v.name + " did not score every image");
      if (out.pass) {
        out.detail << (v.name == variants.front().name ? "" : "; ") << v.name << ": verb " << *r.report.top1.verb << "%, gt value " << r.report.ground_truth.value
                   << "% (" << r.seconds << " s)";
      }
    } catch (const std::exception& e) {
      out.require(false, v.name + " threw: " + e.what());
    }
  }
  return out;
}

Outcome criterion_determinism() {
  Outcome out;
  const RunResult& first = learnability_run();
  const RunResult second = train_and_evaluate(learnability_config(synthetic_setup().space), 500);
  out.require(first.log == second.log, "loss logs differ");
  out.require(first.report_json == second.report_json, "metric reports differ");
  if (out.pass) out.detail << "500-step logs (" << first.log.size() << " bytes) and reports identical";
  return out;
}

// ---------------------------------------------------------------------------
// 3. Loss formulas

Outcome criterion_losses() {
  Outcome out;
  auto near = [&](double got, double want, const std::string& what) {
    out.require(std::abs(got - want) <= 1e-9, what + " = " + std::to_string(got) + ", expected " + std::to_string(want));
  };
  near(iou(BoxXYXY{0, 0, 2, 2}, BoxXYXY{1, 1, 3, 3}), 1.0 / 7.0, "IoU");
  near(giou_loss_term(BoxXYXY{0, 0, 2, 2}, BoxXYXY{1, 1, 3, 3}), 1.0 - (1.0 / 7.0 - 2.0 / 9.0), "overlapping GIoU");
  near(giou_loss_term(BoxXYXY{0, 0, 1, 1}, BoxXYXY{2, 2, 3, 3}), 16.0 / 9.0, "disjoint GIoU");

  SampleTargets t;
  t.verb = 0;
  t.nouns = {{2, 2, 0}, {1, 0, 1}};
  t.boxes = {BoxXYXY{0.25, 0.25, 0.5, 0.5}, std::nullopt};
  near(existence_loss(Tensor::from({2}, {0.9, 0.2}), t).item(), -(std::log(0.9) + std::log(0.8)) / 2.0, "existence");
  const BoxLosses box = box_regression_losses(Tensor::from({2, 4}, {0.5, 0.5, 0.5, 0.5, 0.3, 0.3, 0.1, 0.1}), t);
  near(box.l1.item(), 0.75, "L1");
  near(box.giou.item(), 0.75, "GIoU");

  // Noun loss: smoothed cross entropy per role, role mean per annotator, summed over annotators.
  const std::vector<std::vector<double>> rows{{1.0, -0.5, 2.0}, {0.0, 0.3, -1.2}};
  const double eps = 0.2;
  double want = 0.0;
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t r = 0; r < 2; ++r) {
      double lse = 0.0;
      for (double x : rows[r]) lse += std::exp(x);
      lse = std::log(lse);
      for (std::size_t j = 0; j < 3; ++j) {
        const double target = eps / 3.0 + (j == t.nouns[r][a] ? 1.0 - eps : 0.0);
        want -= target * (rows[r][j] - lse) / 2.0;
      }
    }
  }
  near(noun_loss(Tensor::from({2, 3}, {1.0, -0.5, 2.0, 0.0, 0.3, -1.2}), t, eps).item(), want, "noun");
  near(verb_loss(Tensor::from({4}, {0.3, 0.3, 0.3, 0.3}), 1, 0.3).item(), std::log(4.0), "verb");

  Rng rng(33);
  bool in_range = true;
  for (int i = 0; i < 10000; ++i) {
    const BoxCXCYWH p{rng.uniform(), rng.uniform(), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
    const double x1 = rng.uniform(), y1 = rng.uniform();
    const Tensor v = giou_rows(Tensor::from({1, 4}, {p.cx, p.cy, p.w, p.h}),
                               Tensor::from({1, 4}, {x1, y1, x1 + rng.uniform(), y1 + rng.uniform()}));
    in_range = in_range && v[0] >= 0.0 && v[0] <= 2.0;
  }
  out.require(in_range, "GIoU term left [0, 2]");

  const LossWeights w;
  out.require(w.verb == 1 && w.noun == 1 && w.exist == 5 && w.l1 == 5 && w.giou == 5, "default weights are not (1,1,5,5,5)");
  bool exact = true;
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(0, 5), n = rng.uniform(0, 5), e = rng.uniform(0, 5), l = rng.uniform(0, 5),
                 g = rng.uniform(0, 2);
    const LossBreakdown b = total_loss(Tensor::scalar(v), Tensor::scalar(n), Tensor::scalar(e), Tensor::scalar(l),
                                       Tensor::scalar(g), w);
    exact = exact && b.total == (((v * 1.0 + n * 1.0) + e * 5.0) + l * 5.0) + g * 5.0;
  }
  out.require(exact, "L_total differs from the weighted combination");
  if (out.pass) out.detail << "hand oracles within 1e-9, GIoU in [0,2] on 10^4 pairs, L_total exact on 1000 draws";
  return out;
}

// ---------------------------------------------------------------------------
// 4. Padding

Outcome criterion_padding() {
  Outcome out;
  const FrameSpace& space = synthetic_setup().space;
  ModelConfig config = learnability_config(space);
  Rng rng(44);
  double worst = 0.0;
  std::set<std::size_t> widths;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t batch = 1 + rng.below(8);
    std::vector<ForwardOutput> outputs;
    std::vector<SampleTargets> targets;
    double mean_total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      SampleTargets t;
      t.verb = rng.below(space.num_verbs());
      const std::size_t roles = space.frame(t.verb).size();
      widths.insert(roles);
      for (std::size_t k = 0; k < roles; ++k) {
        t.nouns.push_back({rng.below(space.num_nouns()), rng.below(space.num_nouns()), rng.below(space.num_nouns())});
        if (rng.uniform() < 0.6) {
          const double x1 = rng.uniform(0, 0.6), y1 = rng.uniform(0, 0.6);
          t.boxes.push_back(BoxXYXY{x1, y1, x1 + rng.uniform(0.05, 0.4), y1 + rng.uniform(0.05, 0.4)});
        } else {
          t.boxes.push_back(std::nullopt);
        }
      }
      ForwardOutput o;
      o.verb_logits = random_tensor({space.num_verbs()}, rng, -3, 3);
      o.grounded.verb = t.verb;
      o.grounded.noun_logits = random_tensor({roles, space.num_nouns()}, rng, -3, 3);
      o.grounded.boxes = random_tensor({roles, 4}, rng, 0.05, 0.95);
      o.grounded.existence = random_tensor({roles}, rng, 0.02, 0.98);
      mean_total += sample_loss(o, t, config).total / static_cast<double>(batch);
      outputs.push_back(std::move(o));
      targets.push_back(std::move(t));
    }
    worst = std::max(worst, std::abs(padded_batch_loss(outputs, targets, config).total - mean_total));
  }
  out.require(worst <= 1e-6, "deviation " + std::to_string(worst));
  out.require(widths.size() > 1, "batches never mixed frame sizes");
  if (out.pass) out.detail << "1000 batches, max |padded - mean| = " << worst;
  return out;
}

// ---------------------------------------------------------------------------
// 5. Role permutation

Outcome criterion_equivariance() {
  Outcome out;
  const FrameSpace& space = synthetic_setup().space;
  Rng rng(55);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    ModelConfig c = without_dropout(learnability_config(space));
    c.d = 16;
    c.d_verb = 8;
    c.d_role = 8;
    c.ffn_dim = 32;
    c.channels = 4;
    c.grid_h = 3;
    c.grid_w = 3;
    c.pre_ln = trial % 2 == 0;
    const Model model(c, space, rng.next_u64());
    const FeatureGrid g = random_grid(4, 3, 3, rng);
    std::size_t verb = rng.below(space.num_verbs());
    while (space.frame(verb).size() < 2) verb = rng.below(space.num_verbs());
    const std::size_t r = space.frame(verb).size();
    std::vector<std::size_t> perm(r);
    for (std::size_t i = 0; i < r; ++i) perm[i] = i;
    for (std::size_t i = r; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

    const EncoderOutput enc = encode(project_features(g, model), model);
    const Tensor queries = build_role_queries(verb, space, model);
    const GroundedPrediction base = predict_heads(decode(queries, enc.image_memory, model), model);
    const GroundedPrediction moved = predict_heads(decode(gather_rows(queries, perm), enc.image_memory, model), model);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < space.num_nouns(); ++j) {
        worst = std::max(worst, std::abs(moved.noun_logits.at(i, j) - base.noun_logits.at(perm[i], j)));
      }
      for (std::size_t j = 0; j < 4; ++j) worst = std::max(worst, std::abs(moved.boxes.at(i, j) - base.boxes.at(perm[i], j)));
      worst = std::max(worst, std::abs(moved.existence[i] - base.existence[perm[i]]));
    }
  }
  out.require(worst <= 1e-6, "deviation " + std::to_string(worst));
  if (out.pass) out.detail << "100 trials, max deviation " << worst;
  return out;
}

// ---------------------------------------------------------------------------
// 6. Evaluator

Outcome criterion_evaluator() {
  Outcome out;
  const FrameSpace space = tiny_space();
  Rng rng(66);
  std::size_t mismatches = 0, violations = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<SituationAnnotation> ds;
    std::vector<PredictionRecord> records;
    const std::size_t n = 1 + rng.below(10);
    for (std::size_t i = 0; i < n; ++i) {
      ds.push_back(random_annotation("img" + std::to_string(i), space, rng));
      records.push_back(random_record(ds.back().image_id, ds.back().verb, space, rng, 3));
    }
    const MetricsReport report = evaluate(ds, records, space);
    const auto got = flatten(report);
    const auto want = brute_force_scores(ds, records, space).values;
    bool same = got.size() == want.size();
    for (const auto& [k, v] : want) {
      same = same && got.count(k) && std::abs(got.at(k) - v) <= 1e-9;
      if (got.count(k)) worst = std::max(worst, std::abs(got.at(k) - v));
    }
    mismatches += !same;
    violations += !dominance_violations(report).empty();
  }
  out.require(mismatches == 0, std::to_string(mismatches) + " datasets disagree with the brute-force scorer");
  out.require(violations == 0, std::to_string(violations) + " reports break the dominance chain");
  if (out.pass) {
    out.detail << "1000 datasets agree with the brute-force scorer (max difference " << worst
               << " percentage points, summation order only), dominance chain holds";
  }
  return out;
}

// ---------------------------------------------------------------------------
// 7. Retrieval

Outcome criterion_retrieval() {
  Outcome out;
  const FrameSpace& space = synthetic_setup().space;
  Rng rng(77);
  bool self_one = true;
  for (int i = 0; i < 200; ++i) {
    PredictionRecord r = random_record("s", std::nullopt, space, rng);
    for (auto& e : r.entries) {
      for (auto& role : e.roles) role.box = BoxXYXY{0, 0, 1.0 + rng.uniform(), 1.0 + rng.uniform()};
    }
    self_one = self_one && grsitsim(r, r) == 1.0;
  }
  out.require(self_one, "self-similarity of a fully grounded record is not 1");

  bool symmetric = true, in_range = true;
  for (int i = 0; i < 10000; ++i) {
    const PredictionRecord a = random_record("a", std::nullopt, space, rng);
    const PredictionRecord b = random_record("b", std::nullopt, space, rng);
    const double ab = grsitsim(a, b);
    symmetric = symmetric && ab == grsitsim(b, a);
    in_range = in_range && ab >= 0.0 && ab <= 1.0;
  }
  out.require(symmetric, "asymmetric pair found");
  out.require(in_range, "similarity outside [0, 1]");

  std::vector<PredictionRecord> corpus;
  for (int i = 0; i < 200; ++i) corpus.push_back(random_record("c" + std::to_string(i), std::nullopt, space, rng, 3));
  const RetrievalIndex index = build_index(corpus);
  bool agree = true;
  for (const auto& probe_record : corpus) {
    for (std::size_t k : {1, 10, 200}) agree = agree && index.query(probe_record, k) == exhaustive_query(corpus, probe_record, k);
  }
  out.require(agree, "indexed top-k differs from the exhaustive scan");
  if (out.pass) out.detail << "self-similarity 1, symmetry and range on 10^4 pairs, index equals scan for 200 probes";
  return out;
}

// ---------------------------------------------------------------------------
// 10. Parameter count

Outcome criterion_parameters() {
  Outcome out;
  const FrameSpace& space = synthetic_setup().space;
  Rng rng(1010);
  for (int trial = 0; trial < 5; ++trial) {
    ModelConfig c = learnability_config(space);
    c.heads = 1 + rng.below(4);
    c.d = 2 * c.heads * (1 + rng.below(6));
    c.d_verb = trial == 0 ? 0 : 2 * rng.below(c.d / 2);
    c.d_role = c.d - c.d_verb;
    c.encoder_layers = 1 + rng.below(4);
    c.decoder_layers = 1 + rng.below(4);
    c.ffn_dim = 1 + rng.below(64);
    c.head_hidden = rng.below(2) ? 0 : 1 + rng.below(32);
    c.backbone_layers = rng.below(2);
    c.per_layer_pos = rng.below(2) == 1;
    c.full_pos_table = rng.below(2) == 1;
    c.pre_ln = rng.below(2) == 1;
    const Model m(c, space, 5);
    const std::size_t got = count_parameters(m), want = closed_form_parameters(m.config());
    out.require(got == want, "config " + std::to_string(trial) + ": " + std::to_string(got) + " vs " + std::to_string(want));
    if (out.pass) out.detail << (trial ? ", " : "") << got;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", criterion_gradients},
      {"desk-scale learnability", criterion_learnability},
      {"loss formula fidelity", criterion_losses},
      {"padding equivalence", criterion_padding},
      {"role-permutation equivariance", criterion_equivariance},
      {"metric oracle equivalence", criterion_evaluator},
      {"retrieval similarity properties", criterion_retrieval},
      {"ablation plumbing", criterion_ablations},
      {"determinism", criterion_determinism},
      {"parameter accounting", criterion_parameters},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "threw: " << e.what();
    }
    failures += !o.pass;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
