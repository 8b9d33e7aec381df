#pragma once

#include "nighttrack/box.hpp"
#include "nighttrack/tensor.hpp"

namespace nighttrack {

struct GiouResult {
    double value = 0.0;
    bool degenerate = false;  // both boxes had zero area
};

// Generalized IoU on plain boxes: IoU minus the enclosing-box penalty,
// range (-1, 1], symmetric in its arguments. Raw boxes are regularized by
// clamping widths/heights at zero.
GiouResult giou(const Box& a, const Box& b);

struct LossBreakdown {
    Tensor total;       // {1}, differentiable
    double l1_term = 0.0;
    double giou_term = 0.0;  // 1 - GIoU, in [0, 2]
    double total_value = 0.0;
    double lambda_l1 = 5.0;
    double lambda_giou = 2.0;
};

// Differentiable GIoU between two {4} corner tensors (x1,y1,x2,y2) in the
// same normalized frame; gt must be a valid box so the union stays positive.
// Clamped regions follow the zero-subgradient convention.
Tensor giou_tensor(const Tensor& pred, const Tensor& gt);

// L1 (mean over the 4 coordinates) plus GIoU loss, weighted. Coordinates
// must be finite; gt must be valid.
LossBreakdown tracking_loss(const Tensor& pred, const Tensor& gt, double lambda_l1 = 5.0,
                            double lambda_giou = 2.0);

}  // namespace nighttrack
