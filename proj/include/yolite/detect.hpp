#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "yolite/tensor.hpp"

namespace yolite {

struct Corners {
    float x1, y1, x2, y2;
};

// Center/size box in input-image pixels.
struct Box {
    float cx = 0, cy = 0, w = 0, h = 0;

    Corners corners() const { return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2}; }
    static Box from_corners(float x1, float y1, float x2, float y2) {
        return Box{(x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1};
    }
    friend bool operator==(const Box&, const Box&) = default;
};

struct Detection {
    Box box;
    int class_id = 0;
    float objectness = 0;
    float class_prob = 0;
    float confidence = 0;  // objectness * class_prob

    friend bool operator==(const Detection&, const Detection&) = default;
};

struct Anchor {
    float w, h;
};

struct AnchorSet {
    static constexpr std::size_t kPerScale = 3;

    std::array<Anchor, kPerScale> fine;    // grid = input / 16
    std::array<Anchor, kPerScale> coarse;  // grid = input / 32

    static AnchorSet defaults();
    // Twelve numbers, w,h pairs: three fine anchors then three coarse ones.
    static AnchorSet from_list(std::span<const float> values);
    std::span<const Anchor> for_grid(std::size_t grid, std::size_t input_size) const;
};

// One detection per (anchor, cell), ordered anchor-major then row then column.
// Each carries its best class (lowest id on ties).
std::vector<Detection> decode_head(const Tensor& head, const AnchorSet& anchors, std::size_t grid,
                                   std::size_t input_size);

// Training-time objectness target: P * IoU with P in {0,1}.
float confidence_score(int object_present, float iou);

float iou(const Box& a, const Box& b);

// Keeps detections with confidence strictly above conf_thresh, then greedy
// per-class suppression of any box overlapping a kept one by iou > iou_thresh.
// Ordering: confidence descending, then lower class id, then input order.
std::vector<Detection> filter_and_nms(std::span<const Detection> dets, float conf_thresh, float iou_thresh);

struct DetectDefaults {
    static constexpr float conf_thresh = 0.25f;
    static constexpr float iou_thresh = 0.45f;
};

// COCO names for the 80-class configuration; empty for any other index.
std::string_view coco_class_name(int class_id);

}  // namespace yolite
