#include "yolite/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace yolite {

Predictions Predictions::zeros(std::size_t grid, std::size_t boxes, std::size_t classes) {
    const std::size_t n = grid * grid * boxes;
    return Predictions{grid, boxes, classes, std::vector<double>(n, 0.0), std::vector<double>(n * classes, 0.0),
                       std::vector<LossBox>(n)};
}

TargetAssignment TargetAssignment::empty(std::size_t grid, std::size_t boxes, std::size_t classes) {
    const std::size_t n = grid * grid * boxes;
    return TargetAssignment{grid,
                            boxes,
                            classes,
                            std::vector<std::uint8_t>(n, 0),
                            std::vector<double>(n, 0.0),
                            std::vector<double>(n * classes, 0.0),
                            std::vector<LossBox>(n),
                            kDefaultNoObjWeight};
}

void TargetAssignment::validate() const {
    const std::size_t n = slots();
    YOLITE_CHECK(obj_mask.size() == n && truth_confidence.size() == n && truth_box.size() == n &&
                     truth_class.size() == n * classes,
                 "target assignment arrays do not match S*S*B = " + std::to_string(n));
    for (auto m : obj_mask) YOLITE_CHECK(m <= 1, "obj_mask must be binary");
    YOLITE_CHECK(lambda_noobj >= 0.0, "lambda_noobj must be non-negative");
}

namespace {

void check_shapes(const Predictions& p, const TargetAssignment& t) {
    t.validate();
    YOLITE_CHECK(p.grid == t.grid && p.boxes == t.boxes && p.classes == t.classes,
                 "predictions and targets disagree on S, B or C");
    const std::size_t n = p.slots();
    YOLITE_CHECK(p.confidence.size() == n && p.box.size() == n && p.class_prob.size() == n * p.classes,
                 "prediction arrays do not match S*S*B");
}

struct Bce {
    double value;
    double grad;  // d/dp, zero where the clamp is active
};

// -(y log p + (1 - y) log(1 - p)) with p clamped to [eps, 1 - eps].
Bce bce(double p, double y) {
    const double lo = kProbEpsilon, hi = 1.0 - kProbEpsilon;
    const double q = std::clamp(p, lo, hi);
    const double value = -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
    const double grad = (p < lo || p > hi) ? 0.0 : -(y / q - (1.0 - y) / (1.0 - q));
    return {value, grad};
}

}  // namespace

ComponentLoss confidence_loss(const Predictions& pred, const TargetAssignment& t) {
    check_shapes(pred, t);
    ComponentLoss out{0.0, std::vector<double>(pred.slots(), 0.0)};
    double obj = 0.0, noobj = 0.0;
    for (std::size_t i = 0; i < pred.slots(); ++i) {
        const Bce b = bce(pred.confidence[i], t.truth_confidence[i]);
        if (t.obj_mask[i]) {
            obj += b.value;
            out.grad[i] = b.grad;
        } else {
            noobj += b.value;
            out.grad[i] = t.lambda_noobj * b.grad;
        }
    }
    out.value = obj + t.lambda_noobj * noobj;
    return out;
}

ComponentLoss class_loss(const Predictions& pred, const TargetAssignment& t) {
    check_shapes(pred, t);
    ComponentLoss out{0.0, std::vector<double>(pred.class_prob.size(), 0.0)};
    for (std::size_t i = 0; i < pred.slots(); ++i) {
        if (!t.obj_mask[i]) continue;
        for (std::size_t c = 0; c < pred.classes; ++c) {
            const std::size_t k = i * pred.classes + c;
            const Bce b = bce(pred.class_prob[k], t.truth_class[k]);
            out.value += b.value;
            out.grad[k] = b.grad;
        }
    }
    return out;
}

CiouResult ciou_loss(const LossBox& p, const LossBox& g) {
    YOLITE_CHECK(p.h > 0.0 && g.h > 0.0, "ciou_loss: box heights must be positive");
    YOLITE_CHECK(p.w >= 0.0 && g.w >= 0.0, "ciou_loss: box widths must be non-negative");

    const double px1 = p.cx - p.w / 2, px2 = p.cx + p.w / 2, py1 = p.cy - p.h / 2, py2 = p.cy + p.h / 2;
    const double gx1 = g.cx - g.w / 2, gx2 = g.cx + g.w / 2, gy1 = g.cy - g.h / 2, gy2 = g.cy + g.h / 2;

    // Intersection and its partials w.r.t. the predicted corners.
    const double iw_raw = std::min(px2, gx2) - std::max(px1, gx1);
    const double ih_raw = std::min(py2, gy2) - std::max(py1, gy1);
    const double iw = std::max(0.0, iw_raw), ih = std::max(0.0, ih_raw);
    const double inter = iw * ih;
    const bool overlap = iw_raw > 0.0 && ih_raw > 0.0;
    const double dI_dx1 = (overlap && px1 > gx1) ? -ih : 0.0;
    const double dI_dx2 = (overlap && px2 < gx2) ? ih : 0.0;
    const double dI_dy1 = (overlap && py1 > gy1) ? -iw : 0.0;
    const double dI_dy2 = (overlap && py2 < gy2) ? iw : 0.0;

    const double area = p.w * p.h;
    const double uni = area + g.w * g.h - inter;
    const double iou_v = uni > 0.0 ? inter / uni : 0.0;
    const double dIoU_dI = uni > 0.0 ? (uni + inter) / (uni * uni) : 0.0;
    const double dIoU_dA = uni > 0.0 ? -inter / (uni * uni) : 0.0;
    const std::array<double, 4> dIoU = {
        dIoU_dI * (dI_dx1 + dI_dx2),
        dIoU_dI * (dI_dy1 + dI_dy2),
        dIoU_dI * 0.5 * (dI_dx2 - dI_dx1) + dIoU_dA * p.h,
        dIoU_dI * 0.5 * (dI_dy2 - dI_dy1) + dIoU_dA * p.w,
    };

    // Center distance over the enclosing-box diagonal.
    const double cw = std::max(px2, gx2) - std::min(px1, gx1);
    const double chh = std::max(py2, gy2) - std::min(py1, gy1);
    const double c2 = cw * cw + chh * chh;
    const double dx = p.cx - g.cx, dy = p.cy - g.cy;
    const double rho2 = dx * dx + dy * dy;
    double dist = 0.0;
    std::array<double, 4> dDist{};
    if (c2 > 0.0) {
        dist = rho2 / c2;
        const double dc2_dx1 = px1 < gx1 ? -2.0 * cw : 0.0;
        const double dc2_dx2 = px2 > gx2 ? 2.0 * cw : 0.0;
        const double dc2_dy1 = py1 < gy1 ? -2.0 * chh : 0.0;
        const double dc2_dy2 = py2 > gy2 ? 2.0 * chh : 0.0;
        const double k = rho2 / (c2 * c2);
        dDist = {
            2.0 * dx / c2 - k * (dc2_dx1 + dc2_dx2),
            2.0 * dy / c2 - k * (dc2_dy1 + dc2_dy2),
            -k * 0.5 * (dc2_dx2 - dc2_dx1),
            -k * 0.5 * (dc2_dy2 - dc2_dy1),
        };
    }

    // Aspect-ratio consistency term.
    constexpr double four_over_pi2 = 4.0 / (std::numbers::pi * std::numbers::pi);
    const double delta = std::atan(g.w / g.h) - std::atan(p.w / p.h);
    const double v = four_over_pi2 * delta * delta;
    const double norm = p.w * p.w + p.h * p.h;
    const double dv_dw = -2.0 * four_over_pi2 * delta * p.h / norm;
    const double dv_dh = 2.0 * four_over_pi2 * delta * p.w / norm;
    const double denom = 1.0 - iou_v + v;
    double aspect = 0.0, dT_dv = 0.0, dT_dIoU = 0.0;
    if (denom > 0.0) {
        aspect = v * v / denom;
        dT_dv = (2.0 * v * denom - v * v) / (denom * denom);
        dT_dIoU = v * v / (denom * denom);
    }

    CiouResult r;
    r.value = 1.0 - iou_v + dist + aspect;
    const double dL_dIoU = -1.0 + dT_dIoU;
    for (std::size_t i = 0; i < 4; ++i) r.grad[i] = dL_dIoU * dIoU[i] + dDist[i];
    r.grad[2] += dT_dv * dv_dw;
    r.grad[3] += dT_dv * dv_dh;
    return r;
}

LossBreakdown total_loss(const Predictions& pred, const TargetAssignment& t) {
    const ComponentLoss conf = confidence_loss(pred, t);
    const ComponentLoss cls = class_loss(pred, t);
    LossBreakdown out;
    out.loss1 = conf.value;
    out.loss2 = cls.value;
    out.grad_confidence = conf.grad;
    out.grad_class_prob = cls.grad;
    out.grad_box.assign(pred.slots(), {0.0, 0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < pred.slots(); ++i) {
        if (!t.obj_mask[i]) continue;
        const CiouResult c = ciou_loss(pred.box[i], t.truth_box[i]);
        out.loss3 += c.value;
        out.grad_box[i] = c.grad;
    }
    out.total = out.loss1 + out.loss2 + out.loss3;
    return out;
}

TargetAssignment assign_targets(std::span<const GroundTruth> objects, std::span<const Anchor> anchors,
                                std::size_t grid, std::size_t input_size, std::size_t classes,
                                double lambda_noobj) {
    YOLITE_CHECK(grid > 0 && input_size > 0 && !anchors.empty(), "assign_targets: empty grid or anchor set");
    TargetAssignment t = TargetAssignment::empty(grid, anchors.size(), classes);
    t.lambda_noobj = lambda_noobj;
    const double cell = static_cast<double>(input_size) / static_cast<double>(grid);
    for (const auto& obj : objects) {
        YOLITE_CHECK(obj.class_id >= 0 && static_cast<std::size_t>(obj.class_id) < classes,
                     "assign_targets: class id out of range");
        const auto gx = static_cast<long>(std::floor(obj.box.cx / cell));
        const auto gy = static_cast<long>(std::floor(obj.box.cy / cell));
        if (gx < 0 || gy < 0 || gx >= static_cast<long>(grid) || gy >= static_cast<long>(grid)) continue;
        std::size_t best = 0;
        double best_iou = -1.0;
        for (std::size_t b = 0; b < anchors.size(); ++b) {
            const double inter = std::min<double>(anchors[b].w, obj.box.w) * std::min<double>(anchors[b].h, obj.box.h);
            const double uni = anchors[b].w * anchors[b].h + obj.box.w * obj.box.h - inter;
            const double shape_iou = uni > 0.0 ? inter / uni : 0.0;
            if (shape_iou > best_iou) {
                best_iou = shape_iou;
                best = b;
            }
        }
        const std::size_t slot = (static_cast<std::size_t>(gy) * grid + static_cast<std::size_t>(gx)) * anchors.size() + best;
        t.obj_mask[slot] = 1;
        t.truth_confidence[slot] = 1.0;
        t.truth_box[slot] = obj.box;
        for (std::size_t c = 0; c < classes; ++c)
            t.truth_class[slot * classes + c] = static_cast<std::size_t>(obj.class_id) == c ? 1.0 : 0.0;
    }
    return t;
}

}  // namespace yolite
