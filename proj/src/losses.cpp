// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "gsr/losses.hpp"

#include <algorithm>

#include "gsr/boxes.hpp"
#include "gsr/errors.hpp"

namespace gsr {

namespace {

// Guards the IoU and slack divisions; only reached by zero-area boxes, where
// the numerator is zero as well.
constexpr double kAreaFloor = 1e-12;

Tensor column(const Tensor& t, std::size_t j) { return slice(t, 1, j, 1); }

Tensor floor_at(const Tensor& t, double lo) { return maximum(t, Tensor::full(t.shape(), lo)); }

const BoxCXCYWH kPadBox{0.5, 0.5, 0.5, 0.5};

}  // namespace

std::size_t SampleTargets::grounded() const {
  return static_cast<std::size_t>(std::count_if(boxes.begin(), boxes.end(), [](const auto& b) { return b.has_value(); }));
}

SampleTargets make_targets(const SituationAnnotation& a, const FrameSpace& space) {
  const auto verb = space.find_verb(a.verb);
  if (!verb) throw ValidationError(a.image_id + ": verb '" + a.verb + "' not in space");
  const auto& frame = space.frame(*verb);
  if (a.roles.size() != frame.size()) {
    throw ValidationError(a.image_id + ": role count " + std::to_string(a.roles.size()) + " does not match frame of '" +
                          a.verb + "'");
  }
  if (!(a.width > 0.0 && a.height > 0.0)) throw ValidationError(a.image_id + ": image size must be positive");
  SampleTargets t;
  t.verb = *verb;
  for (std::size_t k = 0; k < frame.size(); ++k) {
    const RoleEntry& r = a.roles[k];
    if (r.role != space.role_name(frame[k])) {
      throw ValidationError(a.image_id + ": role " + std::to_string(k) + " is '" + r.role + "', frame expects '" +
                            space.role_name(frame[k]) + "'");
    }
    if (r.nouns.size() != 3) throw ValidationError(a.image_id + ": expected 3 noun labels for role '" + r.role + "'");
    t.nouns.push_back({space.noun_index(r.nouns[0]), space.noun_index(r.nouns[1]), space.noun_index(r.nouns[2])});
    if (r.box) {
      t.boxes.push_back(normalize(*r.box, a.width, a.height));
    } else {
      t.boxes.push_back(std::nullopt);
    }
  }
  return t;
}

std::vector<double> smoothed_target(std::size_t classes, std::size_t gold, double eps) {
  if (gold >= classes) throw ValidationError("gold class out of range");
  std::vector<double> t(classes, eps / static_cast<double>(classes));
  t[gold] += 1.0 - eps;
  return t;
}

Tensor verb_loss(const Tensor& verb_logits, std::size_t gold, double smoothing) {
  return cross_entropy(verb_logits, smoothed_target(verb_logits.numel(), gold, smoothing));
}

Tensor noun_loss(const Tensor& noun_logits, const SampleTargets& targets, double smoothing) {
  const std::size_t roles = targets.nouns.size();
  if (noun_logits.rank() != 2 || noun_logits.dim(0) != roles) {
    throw ShapeError("noun_loss: logits " + shape_string(noun_logits.shape()) + " do not match " +
                     std::to_string(roles) + " roles");
  }
  const std::size_t n = noun_logits.dim(1);
  Tensor total;
  for (std::size_t a = 0; a < 3; ++a) {
    std::vector<double> target;
    for (const auto& nouns : targets.nouns) {
      const auto row = smoothed_target(n, nouns[a], smoothing);
      target.insert(target.end(), row.begin(), row.end());
    }
    const Tensor annotator = mean(cross_entropy_rows(noun_logits, target));
    total = total.defined() ? add(total, annotator) : annotator;
  }
  return total;
}

Tensor existence_loss(const Tensor& existence, const SampleTargets& targets) {
  if (existence.numel() != targets.boxes.size()) throw ShapeError("existence_loss: one probability per role expected");
  std::vector<double> t;
  for (const auto& b : targets.boxes) t.push_back(b ? 1.0 : 0.0);
  return mean(binary_cross_entropy(existence, t));
}

Tensor l1_rows(const Tensor& pred, const Tensor& gt) { return sum(abs(sub(pred, gt)), 1); }

Tensor giou_rows(const Tensor& pred, const Tensor& gt) {
  const Tensor half_w = scale(column(pred, 2), 0.5);
  const Tensor half_h = scale(column(pred, 3), 0.5);
  const Tensor px1 = sub(column(pred, 0), half_w);
  const Tensor py1 = sub(column(pred, 1), half_h);
  const Tensor px2 = add(column(pred, 0), half_w);
  const Tensor py2 = add(column(pred, 1), half_h);
  const Tensor gx1 = column(gt, 0), gy1 = column(gt, 1), gx2 = column(gt, 2), gy2 = column(gt, 3);

  const Tensor inter = mul(relu(sub(minimum(px2, gx2), maximum(px1, gx1))), relu(sub(minimum(py2, gy2), maximum(py1, gy1))));
  const Tensor area_p = mul(relu(sub(px2, px1)), relu(sub(py2, py1)));
  const Tensor area_g = mul(relu(sub(gx2, gx1)), relu(sub(gy2, gy1)));
  const Tensor uni = sub(add(area_p, area_g), inter);
  const Tensor iou_value = div(inter, floor_at(uni, kAreaFloor));
  const Tensor hull = mul(sub(maximum(px2, gx2), minimum(px1, gx1)), sub(maximum(py2, gy2), minimum(py1, gy1)));
  const Tensor slack = div(sub(hull, uni), floor_at(hull, kAreaFloor));
  const Tensor term = add_scalar(scale(sub(iou_value, slack), -1.0), 1.0);
  return reshape(term, {pred.dim(0)});
}

BoxLosses box_regression_losses(const Tensor& boxes, const SampleTargets& targets) {
  if (boxes.rank() != 2 || boxes.dim(0) != targets.boxes.size() || boxes.dim(1) != 4) {
    throw ShapeError("box_regression_losses: boxes " + shape_string(boxes.shape()) + " are not [roles x 4]");
  }
  std::vector<std::size_t> rows;
  std::vector<double> gt_c, gt_x;
  for (std::size_t k = 0; k < targets.boxes.size(); ++k) {
    if (!targets.boxes[k]) continue;
    rows.push_back(k);
    const BoxXYXY& b = *targets.boxes[k];
    const BoxCXCYWH c = xyxy_to_cxcywh(b);
    gt_c.insert(gt_c.end(), {c.cx, c.cy, c.w, c.h});
    gt_x.insert(gt_x.end(), {b.x1, b.y1, b.x2, b.y2});
  }
  if (rows.empty()) return {Tensor::scalar(0.0), Tensor::scalar(0.0)};
  const Tensor pred = gather_rows(boxes, rows);
  const std::size_t g = rows.size();
  return {mean(l1_rows(pred, Tensor::from({g, 4}, gt_c))), mean(giou_rows(pred, Tensor::from({g, 4}, gt_x)))};
}

LossBreakdown total_loss(const Tensor& verb, const Tensor& noun, const Tensor& exist, const Tensor& l1,
                         const Tensor& giou, const LossWeights& w) {
  LossBreakdown out;
  out.objective = add(add(add(add(scale(verb, w.verb), scale(noun, w.noun)), scale(exist, w.exist)), scale(l1, w.l1)),
                      scale(giou, w.giou));
  out.verb = verb.item();
  out.noun = noun.item();
  out.exist = exist.item();
  out.l1 = l1.item();
  out.giou = giou.item();
  out.total = out.objective.item();
  return out;
}

LossBreakdown sample_loss(const ForwardOutput& output, const SampleTargets& targets, const ModelConfig& config) {
  const GroundedPrediction& g = output.grounded;
  if (g.verb != targets.verb) throw ValidationError("sample_loss: forward pass was not conditioned on the gold verb");
  const BoxLosses box = box_regression_losses(g.boxes, targets);
  LossBreakdown out = total_loss(verb_loss(output.verb_logits, targets.verb, config.smoothing.verb),
                                 noun_loss(g.noun_logits, targets, config.smoothing.noun),
                                 existence_loss(g.existence, targets), box.l1, box.giou, config.loss);
  out.roles = targets.nouns.size();
  out.grounded_roles = targets.grounded();
  return out;
}

LossBreakdown padded_batch_loss(const std::vector<ForwardOutput>& outputs, const std::vector<SampleTargets>& targets,
                                const ModelConfig& config) {
  if (outputs.empty() || outputs.size() != targets.size()) {
    throw ValidationError("padded_batch_loss: need one target per output and a nonempty batch");
  }
  const std::size_t batch = outputs.size();
  const double inv_batch = 1.0 / static_cast<double>(batch);
  std::size_t width = 0;
  for (const auto& t : targets) width = std::max(width, t.nouns.size());
  const std::size_t nouns = outputs.front().grounded.noun_logits.dim(1);
  const std::size_t verbs = outputs.front().verb_logits.numel();

  std::vector<Tensor> verb_rows, noun_blocks, exist_blocks, box_blocks;
  std::vector<double> verb_target;
  std::vector<std::vector<double>> noun_target(3);
  std::vector<double> exist_target, role_weight, gt_c, gt_x, box_weight;
  std::size_t roles = 0, grounded = 0;

  for (std::size_t b = 0; b < batch; ++b) {
    const GroundedPrediction& g = outputs[b].grounded;
    const SampleTargets& t = targets[b];
    const std::size_t r = t.nouns.size();
    if (g.verb != t.verb || g.noun_logits.dim(0) != r) {
      throw ValidationError("padded_batch_loss: sample " + std::to_string(b) + " does not match its targets");
    }
    const std::size_t pad = width - r;
    roles += r;
    grounded += t.grounded();

    verb_rows.push_back(reshape(outputs[b].verb_logits, {1, verbs}));
    const auto vt = smoothed_target(verbs, t.verb, config.smoothing.verb);
    verb_target.insert(verb_target.end(), vt.begin(), vt.end());

    Tensor logits = g.noun_logits, exist = g.existence, boxes = g.boxes;
    if (pad > 0) {
      logits = concat({logits, Tensor::zeros({pad, nouns})}, 0);
      exist = concat({exist, Tensor::full({pad}, 0.5)}, 0);
      boxes = concat({boxes, Tensor::full({pad, 4}, 0.5)}, 0);
    }
    noun_blocks.push_back(logits);
    exist_blocks.push_back(exist);
    box_blocks.push_back(boxes);

    const double role_w = inv_batch / static_cast<double>(r);
    const std::size_t g_count = t.grounded();
    const double box_w = g_count ? inv_batch / static_cast<double>(g_count) : 0.0;
    for (std::size_t k = 0; k < width; ++k) {
      const bool real = k < r;
      for (std::size_t a = 0; a < 3; ++a) {
        const auto row = real ? smoothed_target(nouns, t.nouns[k][a], config.smoothing.noun)
                              : std::vector<double>(nouns, 1.0 / static_cast<double>(nouns));
        noun_target[a].insert(noun_target[a].end(), row.begin(), row.end());
      }
      exist_target.push_back(real && t.boxes[k] ? 1.0 : 0.0);
      role_weight.push_back(real ? role_w : 0.0);
      const bool has_box = real && t.boxes[k].has_value();
      const BoxXYXY bx = has_box ? *t.boxes[k] : cxcywh_to_xyxy(kPadBox);
      const BoxCXCYWH bc = xyxy_to_cxcywh(bx);
      gt_c.insert(gt_c.end(), {bc.cx, bc.cy, bc.w, bc.h});
      gt_x.insert(gt_x.end(), {bx.x1, bx.y1, bx.x2, bx.y2});
      box_weight.push_back(has_box ? box_w : 0.0);
    }
  }

  const std::size_t rows = batch * width;
  const Tensor role_mask = Tensor::from({rows}, role_weight);
  const Tensor box_mask = Tensor::from({rows}, box_weight);

  const Tensor verb = mean(cross_entropy_rows(concat(verb_rows, 0), verb_target));
  const Tensor logits = concat(noun_blocks, 0);
  Tensor noun;
  for (std::size_t a = 0; a < 3; ++a) {
    const Tensor term = sum(mul(cross_entropy_rows(logits, noun_target[a]), role_mask));
    noun = noun.defined() ? add(noun, term) : term;
  }
  const Tensor exist = sum(mul(binary_cross_entropy(concat(exist_blocks, 0), exist_target), role_mask));
  const Tensor boxes = concat(box_blocks, 0);
  const Tensor l1 = sum(mul(l1_rows(boxes, Tensor::from({rows, 4}, gt_c)), box_mask));
  const Tensor giou = sum(mul(giou_rows(boxes, Tensor::from({rows, 4}, gt_x)), box_mask));

  LossBreakdown out = total_loss(verb, noun, exist, l1, giou, config.loss);
  out.roles = roles;
  out.grounded_roles = grounded;
  return out;
}

}  // namespace gsr
