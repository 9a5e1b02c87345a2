// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gsr/ontology.hpp"

namespace gsr {

/// (cx - w/2, cy - h/2, cx + w/2, cy + h/2)
BoxXYXY cxcywh_to_xyxy(const BoxCXCYWH& b);
BoxCXCYWH xyxy_to_cxcywh(const BoxXYXY& b);

/// Scales a box normalized to [0,1] into pixel units, and back.
BoxXYXY denormalize(const BoxXYXY& b, double width, double height);
BoxXYXY normalize(const BoxXYXY& b, double width, double height);

double area(const BoxXYXY& b);

/// Intersection over union; 0 when the union has zero area.
double iou(const BoxXYXY& a, const BoxXYXY& b);

/// 1 - (IoU - |C \ (a u b)| / |C|) with C the smallest box enclosing both.
/// Lies in [0, 2]. A zero-area enclosing box (both boxes the same point)
/// contributes no slack.
double giou_loss_term(const BoxXYXY& pred, const BoxXYXY& gt);

}  // namespace gsr
