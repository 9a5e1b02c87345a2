// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "gsr/boxes.hpp"

#include <algorithm>

namespace gsr {

BoxXYXY cxcywh_to_xyxy(const BoxCXCYWH& b) {
  return {b.cx - 0.5 * b.w, b.cy - 0.5 * b.h, b.cx + 0.5 * b.w, b.cy + 0.5 * b.h};
}

BoxCXCYWH xyxy_to_cxcywh(const BoxXYXY& b) {
  return {0.5 * (b.x1 + b.x2), 0.5 * (b.y1 + b.y2), b.x2 - b.x1, b.y2 - b.y1};
}

BoxXYXY denormalize(const BoxXYXY& b, double width, double height) {
  return {b.x1 * width, b.y1 * height, b.x2 * width, b.y2 * height};
}

BoxXYXY normalize(const BoxXYXY& b, double width, double height) {
  return {b.x1 / width, b.y1 / height, b.x2 / width, b.y2 / height};
}

double area(const BoxXYXY& b) { return std::max(0.0, b.x2 - b.x1) * std::max(0.0, b.y2 - b.y1); }

namespace {

double intersection(const BoxXYXY& a, const BoxXYXY& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  return std::max(0.0, w) * std::max(0.0, h);
}

}  // namespace

double iou(const BoxXYXY& a, const BoxXYXY& b) {
  const double inter = intersection(a, b);
  const double uni = area(a) + area(b) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double giou_loss_term(const BoxXYXY& pred, const BoxXYXY& gt) {
  const double inter = intersection(pred, gt);
  const double uni = area(pred) + area(gt) - inter;
  const double iou_value = uni > 0.0 ? inter / uni : 0.0;
  const BoxXYXY hull{std::min(pred.x1, gt.x1), std::min(pred.y1, gt.y1), std::max(pred.x2, gt.x2),
                     std::max(pred.y2, gt.y2)};
  const double c = area(hull);
  const double slack = c > 0.0 ? (c - uni) / c : 0.0;
  return 1.0 - (iou_value - slack);
}

}  // namespace gsr
