#include "yolite/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace yolite {

AnchorSet AnchorSet::defaults() {
    return AnchorSet{{{{10, 14}, {23, 27}, {37, 58}}}, {{{81, 82}, {135, 169}, {344, 319}}}};
}

AnchorSet AnchorSet::from_list(std::span<const float> v) {
    YOLITE_CHECK(v.size() == 4 * kPerScale, "anchor list needs 12 values (6 w,h pairs), got " + std::to_string(v.size()));
    for (float x : v) YOLITE_CHECK(std::isfinite(x) && x > 0.0f, "anchor dimensions must be positive");
    AnchorSet a{};
    for (std::size_t i = 0; i < kPerScale; ++i) {
        a.fine[i] = Anchor{v[2 * i], v[2 * i + 1]};
        a.coarse[i] = Anchor{v[2 * (i + kPerScale)], v[2 * (i + kPerScale) + 1]};
    }
    return a;
}

std::span<const Anchor> AnchorSet::for_grid(std::size_t grid, std::size_t input_size) const {
    if (grid * 32 == input_size) return coarse;
    if (grid * 16 == input_size) return fine;
    throw Error("no anchors for a " + std::to_string(grid) + "x" + std::to_string(grid) + " grid at input " +
                std::to_string(input_size));
}

std::vector<Detection> decode_head(const Tensor& head, const AnchorSet& anchors, std::size_t grid,
                                   std::size_t input_size) {
    const Shape& s = head.shape();
    const auto priors = anchors.for_grid(grid, input_size);
    const std::size_t boxes = priors.size();
    YOLITE_CHECK(s.n == 1 && s.h == grid && s.w == grid,
                 "decode_head: head " + to_string(s) + " does not match grid " + std::to_string(grid));
    YOLITE_CHECK(s.c % boxes == 0 && s.c / boxes > 5,
                 "decode_head: channel count " + std::to_string(s.c) + " is not B*(5+classes)");
    const std::size_t stride = s.c / boxes;
    const std::size_t classes = stride - 5;
    const float cell = static_cast<float>(input_size) / static_cast<float>(grid);

    std::vector<Detection> out;
    out.reserve(boxes * grid * grid);
    for (std::size_t b = 0; b < boxes; ++b) {
        const std::size_t base = b * stride;
        for (std::size_t gy = 0; gy < grid; ++gy) {
            for (std::size_t gx = 0; gx < grid; ++gx) {
                Detection d;
                d.box.cx = (sigmoid(head.at(0, base + 0, gy, gx)) + static_cast<float>(gx)) * cell;
                d.box.cy = (sigmoid(head.at(0, base + 1, gy, gx)) + static_cast<float>(gy)) * cell;
                d.box.w = priors[b].w * std::exp(head.at(0, base + 2, gy, gx));
                d.box.h = priors[b].h * std::exp(head.at(0, base + 3, gy, gx));
                d.objectness = sigmoid(head.at(0, base + 4, gy, gx));
                float best = -1.0f;
                for (std::size_t c = 0; c < classes; ++c) {
                    const float p = sigmoid(head.at(0, base + 5 + c, gy, gx));
                    if (p > best) {
                        best = p;
                        d.class_id = static_cast<int>(c);
                    }
                }
                d.class_prob = best;
                d.confidence = d.objectness * d.class_prob;
                out.push_back(d);
            }
        }
    }
    return out;
}

float confidence_score(int object_present, float iou_value) {
    YOLITE_CHECK(object_present == 0 || object_present == 1, "confidence_score: P must be 0 or 1");
    YOLITE_CHECK(iou_value >= 0.0f && iou_value <= 1.0f, "confidence_score: iou must lie in [0,1]");
    return static_cast<float>(object_present) * iou_value;
}

float iou(const Box& a, const Box& b) {
    const Corners p = a.corners();
    const Corners q = b.corners();
    const float iw = std::max(0.0f, std::min(p.x2, q.x2) - std::max(p.x1, q.x1));
    const float ih = std::max(0.0f, std::min(p.y2, q.y2) - std::max(p.y1, q.y1));
    const float inter = iw * ih;
    const float uni = a.w * a.h + b.w * b.h - inter;
    if (!(uni > 0.0f)) return 0.0f;
    return std::clamp(inter / uni, 0.0f, 1.0f);
}

std::vector<Detection> filter_and_nms(std::span<const Detection> dets, float conf_thresh, float iou_thresh) {
    YOLITE_CHECK(conf_thresh >= 0.0f && conf_thresh <= 1.0f, "conf_thresh must lie in [0,1]");
    YOLITE_CHECK(iou_thresh >= 0.0f && iou_thresh <= 1.0f, "iou_thresh must lie in [0,1]");
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < dets.size(); ++i)
        if (dets[i].confidence > conf_thresh) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dets[a].confidence != dets[b].confidence) return dets[a].confidence > dets[b].confidence;
        return dets[a].class_id < dets[b].class_id;
    });
    std::vector<Detection> kept;
    for (std::size_t i : order) {
        const Detection& d = dets[i];
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
            return k.class_id == d.class_id && iou(k.box, d.box) > iou_thresh;
        });
        if (!suppressed) kept.push_back(d);
    }
    return kept;
}

std::string_view coco_class_name(int class_id) {
    static constexpr std::array<std::string_view, 80> names = {
        "person",        "bicycle",      "car",
        "motorbike",     "aeroplane",    "bus",
        "train",         "truck",        "boat",
        "traffic light", "fire hydrant", "stop sign",
        "parking meter", "bench",        "bird",
        "cat",           "dog",          "horse",
        "sheep",         "cow",          "elephant",
        "bear",          "zebra",        "giraffe",
        "backpack",      "umbrella",     "handbag",
        "tie",           "suitcase",     "frisbee",
        "skis",          "snowboard",    "sports ball",
        "kite",          "baseball bat", "baseball glove",
        "skateboard",    "surfboard",    "tennis racket",
        "bottle",        "wine glass",   "cup",
        "fork",          "knife",        "spoon",
        "bowl",          "banana",       "apple",
        "sandwich",      "orange",       "broccoli",
        "carrot",        "hot dog",      "pizza",
        "donut",         "cake",         "chair",
        "sofa",          "pottedplant",  "bed",
        "diningtable",   "toilet",       "tvmonitor",
        "laptop",        "mouse",        "remote",
        "keyboard",      "cell phone",   "microwave",
        "oven",          "toaster",      "sink",
        "refrigerator",  "book",         "clock",
        "vase",          "scissors",     "teddy bear",
        "hair drier",    "toothbrush"};
    if (class_id < 0 || static_cast<std::size_t>(class_id) >= names.size()) return {};
    return names[static_cast<std::size_t>(class_id)];
}

}  // namespace yolite
