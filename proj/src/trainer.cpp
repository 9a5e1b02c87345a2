// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "gsr/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "gsr/errors.hpp"

namespace gsr {

using json = nlohmann::ordered_json;

std::string StepRecord::to_json() const {
  json j{{"step", step}, {"epoch", epoch}, {"verb", verb}, {"noun", noun},           {"exist", exist},
         {"l1", l1},     {"giou", giou},   {"total", total}, {"grad_norm", grad_norm}, {"lr", lr}};
  return j.dump();
}

std::string EpochSummary::to_json() const {
  json j{{"epoch", epoch}, {"steps", steps}, {"verb", verb}, {"noun", noun},
         {"exist", exist}, {"l1", l1},       {"giou", giou}, {"total", total}};
  return j.dump();
}

TrainResult train(Model& model, std::span<const SituationAnnotation> annotations, std::span<const FeatureGrid> grids,
                  const FrameSpace& space, const TrainOptions& options,
                  const std::function<void(const StepRecord&)>& on_step) {
  if (annotations.empty()) throw ValidationError("train: empty dataset");
  if (annotations.size() != grids.size()) throw ValidationError("train: one feature grid per annotation required");
  if (options.batch_size == 0) throw ValidationError("train: batch size must be positive");
  if (options.epochs == 0 && options.max_steps == 0) throw ValidationError("train: set epochs or max_steps");

  std::vector<SampleTargets> targets;
  for (const auto& a : annotations) targets.push_back(make_targets(a, space));

  Rng order_rng(options.seed);
  Rng dropout_rng(order_rng.split());
  const ForwardContext ctx{true, &dropout_rng};
  AdamW optimizer(model.named_parameters(), options.optimizer);

  std::ofstream log;
  if (!options.log_path.empty()) {
    log.open(options.log_path, std::ios::trunc);
    if (!log) throw IoError("cannot write " + options.log_path.string());
  }
  if (!options.checkpoint_dir.empty()) std::filesystem::create_directories(options.checkpoint_dir);

  TrainResult result;
  std::filesystem::path previous_checkpoint;
  std::vector<std::size_t> order(annotations.size());
  std::size_t step = 0;
  auto done = [&] { return options.max_steps > 0 && step >= options.max_steps; };
  for (std::size_t epoch = 0; (options.epochs == 0 || epoch < options.epochs) && !done(); ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    double lr_scale = 1.0;
    if (options.lr_decay_epochs > 0) {
      lr_scale = std::pow(options.lr_decay, static_cast<double>(epoch / options.lr_decay_epochs));
    }

    EpochSummary summary;
    summary.epoch = epoch;
    for (std::size_t start = 0; start < order.size() && !done(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      std::vector<ForwardOutput> outputs;
      std::vector<SampleTargets> batch_targets;
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t s = order[i];
        outputs.push_back(forward(grids[s], targets[s].verb, space, model, ctx));
        batch_targets.push_back(targets[s]);
      }
      const LossBreakdown loss = padded_batch_loss(outputs, batch_targets, model.config());
      optimizer.zero_grad();
      loss.objective.backward();
      const ClipResult clip = clip_gradients(optimizer.params(), options.optimizer.clip);
      optimizer.step(lr_scale);
      ++step;

      StepRecord rec{step, epoch, loss.verb, loss.noun, loss.exist, loss.l1, loss.giou, loss.total,
                     clip.norm, options.optimizer.lr * lr_scale};
      if (log) log << rec.to_json() << '\n';
      if (on_step) on_step(rec);
      result.steps.push_back(rec);
      ++summary.steps;
      summary.verb += rec.verb;
      summary.noun += rec.noun;
      summary.exist += rec.exist;
      summary.l1 += rec.l1;
      summary.giou += rec.giou;
      summary.total += rec.total;
    }
    if (summary.steps > 0) {
      const double n = static_cast<double>(summary.steps);
      summary.verb /= n;
      summary.noun /= n;
      summary.exist /= n;
      summary.l1 /= n;
      summary.giou /= n;
      summary.total /= n;
    }
    result.epochs.push_back(summary);
    const bool last = done() || (options.epochs != 0 && epoch + 1 == options.epochs);
    if (!options.checkpoint_dir.empty() &&
        (last || (options.checkpoint_every > 0 && (epoch + 1) % options.checkpoint_every == 0))) {
      json state{{"epoch", epoch},
                 {"step", step},
                 {"seed", options.seed},
                 {"rng", {{"algorithm", std::string(Rng::kAlgorithm)},
                          {"order", {{"seed", order_rng.seed()}, {"position", order_rng.position()}}},
                          {"dropout", {{"seed", dropout_rng.seed()}, {"position", dropout_rng.position()}}}}},
                 {"summary", json::parse(summary.to_json())}};
      const auto path = options.checkpoint_dir / ("epoch_" + std::to_string(epoch) + ".ckpt");
      model.save(path, state.dump());
      optimizer.save_state(path.string() + ".optim");
      if (!options.keep_all_checkpoints && !previous_checkpoint.empty()) {
        for (const char* suffix : {"", ".json", ".optim"}) std::filesystem::remove(previous_checkpoint.string() + suffix);
      }
      previous_checkpoint = path;
    }
  }
  return result;
}

}  // namespace gsr
