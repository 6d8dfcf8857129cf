#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "yolite/detect.hpp"

namespace yolite {

// Loss-side box geometry is double precision so analytic gradients can be
// checked against central differences.
struct LossBox {
    double cx = 0, cy = 0, w = 0, h = 0;

    static LossBox from(const Box& b) { return {b.cx, b.cy, b.w, b.h}; }
};

constexpr double kProbEpsilon = 1e-7;
constexpr double kDefaultNoObjWeight = 0.5;

// Slot (cell i, box j) lives at index i * B + j, cells in row-major grid order.
struct Predictions {
    std::size_t grid = 0, boxes = 0, classes = 0;
    std::vector<double> confidence;  // S*S*B
    std::vector<double> class_prob;  // S*S*B*C
    std::vector<LossBox> box;        // S*S*B

    static Predictions zeros(std::size_t grid, std::size_t boxes, std::size_t classes);
    std::size_t slots() const { return grid * grid * boxes; }
};

struct TargetAssignment {
    std::size_t grid = 0, boxes = 0, classes = 0;
    std::vector<std::uint8_t> obj_mask;  // 1 where the slot is responsible for an object
    std::vector<double> truth_confidence;
    std::vector<double> truth_class;     // S*S*B*C, values in [0,1]
    std::vector<LossBox> truth_box;      // read only where obj_mask == 1
    double lambda_noobj = kDefaultNoObjWeight;

    static TargetAssignment empty(std::size_t grid, std::size_t boxes, std::size_t classes);
    std::size_t slots() const { return grid * grid * boxes; }
    void validate() const;
};

struct ComponentLoss {
    double value = 0;
    std::vector<double> grad;
};

struct CiouResult {
    double value = 0;
    std::array<double, 4> grad{};  // d/d(cx, cy, w, h) of the predicted box
};

// -sum W [C^ log C + (1-C^) log(1-C)] - lambda * sum (1-W) [...], C clamped to [eps, 1-eps].
ComponentLoss confidence_loss(const Predictions& pred, const TargetAssignment& t);
// Binary cross-entropy per class over responsible slots.
ComponentLoss class_loss(const Predictions& pred, const TargetAssignment& t);
// 1 - IoU + rho^2 / c^2 + v^2 / (1 - IoU + v), v = 4/pi^2 (atan(wg/hg) - atan(w/h))^2.
CiouResult ciou_loss(const LossBox& pred, const LossBox& truth);

struct LossBreakdown {
    double loss1 = 0;  // confidence
    double loss2 = 0;  // classification
    double loss3 = 0;  // box regression, summed over responsible slots
    double total = 0;
    std::vector<double> grad_confidence;
    std::vector<double> grad_class_prob;
    std::vector<std::array<double, 4>> grad_box;
};

LossBreakdown total_loss(const Predictions& pred, const TargetAssignment& t);

struct GroundTruth {
    LossBox box;  // input-image pixels
    int class_id = 0;
};

// Convention helper, not part of the loss definition: the cell containing the
// object's center is responsible, using the anchor whose shape has the highest
// IoU with the object's (both centered). A later object claiming the same slot
// replaces an earlier one.
TargetAssignment assign_targets(std::span<const GroundTruth> objects, std::span<const Anchor> anchors,
                                std::size_t grid, std::size_t input_size, std::size_t classes,
                                double lambda_noobj = kDefaultNoObjWeight);

}  // namespace yolite
