#include "nighttrack/objective.hpp"

#include <algorithm>
#include <cmath>

#include "nighttrack/ops.hpp"

namespace nighttrack {

GiouResult giou(const Box& a, const Box& b) {
    if (a.frame != b.frame) throw ContractError("giou: mixed coordinate frames");
    const double area_a = a.area();
    const double area_b = b.area();
    if (area_a <= 0.0 && area_b <= 0.0) return {0.0, true};

    const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = iw * ih;
    const double uni = area_a + area_b - inter;

    const double cw = std::max(0.0, std::max(a.x2, b.x2) - std::min(a.x1, b.x1));
    const double ch = std::max(0.0, std::max(a.y2, b.y2) - std::min(a.y1, b.y1));
    const double c_area = cw * ch;

    const double iou_v = inter / uni;
    return {iou_v - (c_area - uni) / c_area, false};
}

namespace {

struct Corners {
    Tensor x1, y1, x2, y2;
};

Corners split_corners(const Tensor& b) {
    if (b.shape() != Shape{4}) throw ShapeError("objective: box tensor must have shape {4}");
    return {slice(b, 0, 0, 1), slice(b, 0, 1, 1), slice(b, 0, 2, 1), slice(b, 0, 3, 1)};
}

}  // namespace

Tensor giou_tensor(const Tensor& pred, const Tensor& gt) {
    Corners p = split_corners(pred);
    Corners g = split_corners(gt);

    Tensor pw = clamp_min(sub(p.x2, p.x1), 0.0);
    Tensor ph = clamp_min(sub(p.y2, p.y1), 0.0);
    Tensor gw = clamp_min(sub(g.x2, g.x1), 0.0);
    Tensor gh = clamp_min(sub(g.y2, g.y1), 0.0);
    Tensor area_p = mul(pw, ph);
    Tensor area_g = mul(gw, gh);

    Tensor iw = clamp_min(sub(minimum(p.x2, g.x2), maximum(p.x1, g.x1)), 0.0);
    Tensor ih = clamp_min(sub(minimum(p.y2, g.y2), maximum(p.y1, g.y1)), 0.0);
    Tensor inter = mul(iw, ih);
    Tensor uni = sub(add(area_p, area_g), inter);

    Tensor cw = sub(maximum(p.x2, g.x2), minimum(p.x1, g.x1));
    Tensor ch = sub(maximum(p.y2, g.y2), minimum(p.y1, g.y1));
    Tensor c_area = mul(cw, ch);

    Tensor iou_v = div(inter, uni);
    return sub(iou_v, div(sub(c_area, uni), c_area));
}

LossBreakdown tracking_loss(const Tensor& pred, const Tensor& gt, double lambda_l1,
                            double lambda_giou) {
    for (double v : pred.data()) {
        if (!std::isfinite(v)) throw NumericsError("tracking_loss: non-finite prediction");
    }
    for (double v : gt.data()) {
        if (!std::isfinite(v)) throw NumericsError("tracking_loss: non-finite groundtruth");
    }
    Tensor l1 = mean(abs(sub(pred, gt)));
    Tensor giou_loss = add_const(mul_const(giou_tensor(pred, gt), -1.0), 1.0);
    Tensor total = add(mul_const(l1, lambda_l1), mul_const(giou_loss, lambda_giou));

    LossBreakdown out;
    out.total = total;
    out.l1_term = l1.value();
    out.giou_term = giou_loss.value();
    out.total_value = total.value();
    out.lambda_l1 = lambda_l1;
    out.lambda_giou = lambda_giou;
    return out;
}

}  // namespace nighttrack
