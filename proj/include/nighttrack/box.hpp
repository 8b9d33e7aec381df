#pragma once

#include <algorithm>
#include <cmath>

#include "nighttrack/errors.hpp"

namespace nighttrack {

// Coordinate frame a box lives in. Conversions between frames are explicit
// operations; mixed-frame arithmetic is a contract violation.
enum class BoxFrame { search_norm, pixel };

// Axis-aligned box in corner form. Raw head outputs may violate x2 >= x1;
// such boxes are still representable and get regularized where needed.
struct Box {
    double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
    BoxFrame frame = BoxFrame::pixel;

    static Box from_corners(double x1, double y1, double x2, double y2, BoxFrame f) {
        return Box{x1, y1, x2, y2, f};
    }
    static Box from_xywh(double x, double y, double w, double h, BoxFrame f) {
        return Box{x, y, x + w, y + h, f};
    }

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double cx() const { return 0.5 * (x1 + x2); }
    double cy() const { return 0.5 * (y1 + y2); }
    bool valid() const { return x2 >= x1 && y2 >= y1; }
    double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }

    Box shifted(double dx, double dy) const { return Box{x1 + dx, y1 + dy, x2 + dx, y2 + dy, frame}; }
};

// Normalized search-frame box -> pixel frame, given the source crop square.
inline Box norm_to_pixel(const Box& b, double crop_x0, double crop_y0, double crop_side) {
    if (b.frame != BoxFrame::search_norm) throw ContractError("norm_to_pixel: box is not in search_norm frame");
    return Box{crop_x0 + b.x1 * crop_side, crop_y0 + b.y1 * crop_side,
               crop_x0 + b.x2 * crop_side, crop_y0 + b.y2 * crop_side, BoxFrame::pixel};
}

inline Box pixel_to_norm(const Box& b, double crop_x0, double crop_y0, double crop_side) {
    if (b.frame != BoxFrame::pixel) throw ContractError("pixel_to_norm: box is not in pixel frame");
    return Box{(b.x1 - crop_x0) / crop_side, (b.y1 - crop_y0) / crop_side,
               (b.x2 - crop_x0) / crop_side, (b.y2 - crop_y0) / crop_side, BoxFrame::search_norm};
}

// Intersection-over-union with widths/heights regularized at zero.
inline double iou(const Box& a, const Box& b) {
    if (a.frame != b.frame) throw ContractError("iou: mixed coordinate frames");
    const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

// Center location error in the boxes' common frame.
inline double cle(const Box& a, const Box& b) {
    if (a.frame != b.frame) throw ContractError("cle: mixed coordinate frames");
    return std::hypot(a.cx() - b.cx(), a.cy() - b.cy());
}

}  // namespace nighttrack
