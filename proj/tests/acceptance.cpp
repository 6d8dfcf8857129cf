// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "yolite/analysis.hpp"
#include "yolite/blocks.hpp"
#include "yolite/detect.hpp"
#include "yolite/loss.hpp"
#include "yolite/network.hpp"
#include "yolite/weights_io.hpp"

using namespace yolite;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool ok = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& what) {
        if (!cond && ok) detail << "failed: " << what << "; ";
        ok = ok && cond;
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Tensor random_shape_tensor(Xoshiro256& rng, std::size_t max_c, std::size_t max_hw, float lo = -1, float hi = 1) {
    const std::size_t c = 1 + rng.next() % max_c, h = 1 + rng.next() % max_hw, w = 1 + rng.next() % max_hw;
    return oracle::random_tensor(rng, {1, c, h, w}, lo, hi);
}

void crit1(Outcome& o) {
    const auto t0 = Clock::now();
    const auto r = flops_of_list(csp_worked_example());
    const double dt = seconds_since(t0);
    o.require(r.total == 742064128u, "total == 742064128");
    o.require(dt < 1.0, "runtime < 1 s");
    o.detail << "total " << r.total << " in " << dt << " s";
}

void crit2(Outcome& o) {
    const auto t0 = Clock::now();
    const auto r = flops_of_list(resblock_d_worked_example());
    const double dt = seconds_since(t0);
    o.require(r.total == 64376832u, "total == 64376832");
    o.require(dt < 1.0, "runtime < 1 s");
    o.detail << "total " << r.total << " in " << dt << " s";
}

void crit3(Outcome& o) {
    const double ratio = double(flops_of_list(csp_worked_example()).total) /
                         double(flops_of_list(resblock_d_worked_example()).total);
    o.require(ratio >= 11.52 && ratio <= 11.54, "ratio in [11.52, 11.54]");
    o.detail << "ratio " << ratio << " (roughly 10:1)";
}

void crit4(Outcome& o) {
    const std::size_t base = count_params(build_yolov4_tiny(80));
    const std::size_t prop = count_params(build_proposed(80));
    o.require(std::abs(double(base) / 6.05661e6 - 1.0) <= 0.05, "baseline within 5% of 6.05661e6");
    o.require(std::abs(double(prop) / 6.16429e6 - 1.0) <= 0.05, "proposed within 5% of 6.16429e6");
    o.require(prop > base, "proposed > baseline");
    o.detail << "baseline " << base << ", proposed " << prop;
}

void crit5(Outcome& o) {
    const std::vector<std::pair<std::uint64_t, std::uint64_t>> two{{3, 1}, {3, 1}}, one{{3, 1}};
    const auto r2 = receptive_field(two).size, r1 = receptive_field(one).size;
    o.require(r2 == 5, "two stacked 3x3 -> 5");
    o.require(r1 == 3, "single 3x3 -> 3");
    o.detail << "two 3x3: " << r2 << ", one 3x3: " << r1;
}

void crit6(Outcome& o) {
    const auto base = flops_of_graph(build_yolov4_tiny(80), 416).total;
    const auto prop = flops_of_graph(build_proposed(80), 416).total;
    o.require(prop < base, "proposed < baseline");
    o.detail << "baseline " << base << ", proposed " << prop << ", margin " << (base - prop) << " ("
             << 100.0 * double(base - prop) / double(base) << "% lower)";
}

void crit7(Outcome& o) {
    const auto t0 = Clock::now();
    constexpr int kCases = 100;
    Xoshiro256 rng(7);
    int conv = 0, pool = 0, red = 0, up = 0, bcast = 0;
    for (int i = 0; i < kCases; ++i) {
        const std::size_t k = std::array<std::size_t, 3>{1, 3, 5}[rng.next() % 3];
        const std::size_t s = 1 + rng.next() % 2, pad = rng.next() % 2 ? k / 2 : 0;
        const std::size_t cin = 1 + rng.next() % 8, cout = 1 + rng.next() % 8;
        const std::size_t h = k + rng.next() % (33 - k), w = k + rng.next() % (33 - k);
        const Tensor x = oracle::random_tensor(rng, {1, cin, h, w});
        const ConvParams p = oracle::random_conv(rng, cin, cout, k, s, pad, rng.next() % 2, rng.next() % 2);
        conv += conv2d(x, p) == oracle::conv2d(x, p);
    }
    for (int i = 0; i < kCases; ++i) {
        const bool is_max = rng.next() % 2;
        const std::size_t k = 1 + rng.next() % 3, s = 1 + rng.next() % 2;
        const std::size_t c = 1 + rng.next() % 8, h = k + rng.next() % (33 - k), w = k + rng.next() % (33 - k);
        const Tensor x = oracle::random_tensor(rng, {1, c, h, w});
        pool += pool2d(x, is_max ? PoolKind::max : PoolKind::avg, k, s) == oracle::pool2d(x, is_max, k, s);
    }
    for (int i = 0; i < kCases; ++i) {
        const Tensor x = random_shape_tensor(rng, 8, 32);
        const bool is_max = rng.next() % 2;
        const PoolKind kind = is_max ? PoolKind::max : PoolKind::avg;
        red += channel_pool(x, kind) == oracle::channel_pool(x, is_max) &&
               spatial_pool(x, kind) == oracle::spatial_pool(x, is_max);
    }
    for (int i = 0; i < kCases; ++i) {
        const Tensor x = random_shape_tensor(rng, 8, 16);
        up += upsample_nearest2x(x) == oracle::upsample2x(x);
    }
    for (int i = 0; i < kCases; ++i) {
        const Tensor x = random_shape_tensor(rng, 8, 32);
        const Shape s = x.shape();
        const Tensor same = oracle::random_tensor(rng, s);
        const Tensor per_c = oracle::random_tensor(rng, {1, s.c, 1, 1});
        const Tensor per_px = oracle::random_tensor(rng, {1, 1, s.h, s.w});
        bcast += add(x, same) == oracle::add(x, same) && broadcast_mul(x, same) == oracle::broadcast_mul(x, same) &&
                 broadcast_mul(x, per_c) == oracle::broadcast_mul(x, per_c) &&
                 broadcast_mul(x, per_px) == oracle::broadcast_mul(x, per_px);
    }
    const double dt = seconds_since(t0);
    o.require(conv == kCases, "conv2d bit-exact");
    o.require(pool == kCases, "pool2d bit-exact");
    o.require(red == kCases, "reductions bit-exact");
    o.require(up == kCases, "upsample bit-exact");
    o.require(bcast == kCases, "add/broadcast bit-exact");
    o.require(dt < 30.0, "runtime < 30 s");
    o.detail << "exact matches conv " << conv << "/" << kCases << ", pool " << pool << ", reductions " << red
             << ", upsample " << up << ", broadcast " << bcast << " in " << dt << " s";
}

void crit8(Outcome& o) {
    Xoshiro256 rng(8);
    bool zero_ok = true;
    for (int i = 0; i < 10; ++i) {
        const std::size_t c = 4 * (1 + rng.next() % 4);
        const Tensor f = oracle::random_tensor(rng, {1, c, 1 + rng.next() % 12, 1 + rng.next() % 12}, -5, 5);
        const Tensor out = cbam_forward(Cbam::make(c, 4), f);
        for (std::size_t j = 0; j < f.numel(); ++j) zero_ok = zero_ok && out.data()[j] == 0.25f * f.data()[j];
    }
    o.require(zero_ok, "zero weights give exactly 0.25 F");

    double worst = 0.0;
    constexpr int kTrials = 50;
    for (int i = 0; i < kTrials; ++i) {
        const std::size_t c = 4 * (1 + rng.next() % 4);
        Cbam m = Cbam::make(c, 4);
        m.visit_mut([&](const std::string&, ConvParams& p) {
            p = oracle::random_conv(rng, p.in_channels, p.out_channels, p.kernel, p.stride, p.pad, !p.bias.empty(),
                                    p.bn.has_value());
        });
        const Tensor f = oracle::random_tensor(rng, {1, c, 1 + rng.next() % 12, 1 + rng.next() % 12});
        const Tensor got = cbam_forward(m, f);
        const auto want = oracle::cbam(m, f);
        for (std::size_t j = 0; j < want.size(); ++j)
            if (want[j] != 0.0) worst = std::max(worst, oracle::relative_error(got.data()[j], want[j]));
    }
    o.require(worst <= 1e-5, "transcription within 1e-5 relative");
    o.detail << "zero-weight exact " << (zero_ok ? "yes" : "no") << ", worst relative error " << worst << " over "
             << kTrials << " random blocks";
}

void crit9(Outcome& o) {
    Xoshiro256 rng(9);
    // Non-negativity over random assignments.
    bool nonneg = true;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t grid = 1 + rng.next() % 3, boxes = 1 + rng.next() % 3, classes = 1 + rng.next() % 4;
        Predictions p = Predictions::zeros(grid, boxes, classes);
        TargetAssignment t = TargetAssignment::empty(grid, boxes, classes);
        for (std::size_t i = 0; i < p.slots(); ++i) {
            t.obj_mask[i] = rng.next() % 2;
            t.truth_confidence[i] = t.obj_mask[i] ? rng.uniform01d() : 0.0;
            p.confidence[i] = 0.01 + 0.98 * rng.uniform01d();
            for (std::size_t c = 0; c < classes; ++c) {
                t.truth_class[i * classes + c] = rng.next() % 2;
                p.class_prob[i * classes + c] = 0.01 + 0.98 * rng.uniform01d();
            }
            t.truth_box[i] = {rng.uniform01d() * 40, rng.uniform01d() * 40, 1 + rng.uniform01d() * 20,
                              1 + rng.uniform01d() * 20};
            p.box[i] = {rng.uniform01d() * 40, rng.uniform01d() * 40, 1 + rng.uniform01d() * 20,
                        1 + rng.uniform01d() * 20};
        }
        const auto r = total_loss(p, t);
        nonneg = nonneg && r.loss1 >= 0 && r.loss2 >= 0 && r.loss3 >= 0;
    }
    o.require(nonneg, "losses non-negative");

    // Perfect predictions.
    Predictions p = Predictions::zeros(2, 3, 4);
    TargetAssignment t = TargetAssignment::empty(2, 3, 4);
    for (std::size_t i = 0; i < p.slots(); ++i) {
        t.obj_mask[i] = i % 2;
        t.truth_confidence[i] = p.confidence[i] = i % 2;
        for (std::size_t c = 0; c < 4; ++c) t.truth_class[i * 4 + c] = p.class_prob[i * 4 + c] = (c == i % 4);
        t.truth_box[i] = p.box[i] = {5.0 + i, 9.0, 4.0, 6.0};
    }
    const auto perfect = total_loss(p, t);
    o.require(perfect.total < 1e-5, "perfect total < 1e-5");

    const double same = ciou_loss({3, 4, 5, 6}, {3, 4, 5, 6}).value;
    const double concentric = ciou_loss({0, 0, 1, 1}, {0, 0, 2, 2}).value;
    o.require(same == 0.0, "identical boxes give 0");
    o.require(std::abs(concentric - 0.75) < 1e-12, "concentric squares give 0.75");

    // Confidence and class gradients by central differences.
    double worst_bce = 0.0;
    for (std::size_t i = 0; i < p.slots(); ++i) {
        p.confidence[i] = 0.05 + 0.9 * rng.uniform01d();
        for (std::size_t c = 0; c < 4; ++c) p.class_prob[i * 4 + c] = 0.05 + 0.9 * rng.uniform01d();
    }
    const double h = 1e-5;
    const auto gc = confidence_loss(p, t).grad;
    for (std::size_t i = 0; i < p.slots(); ++i) {
        Predictions up = p, dn = p;
        up.confidence[i] += h;
        dn.confidence[i] -= h;
        const double fd = (confidence_loss(up, t).value - confidence_loss(dn, t).value) / (2 * h);
        worst_bce = std::max(worst_bce, oracle::relative_error(gc[i], fd));
    }
    const auto gk = class_loss(p, t).grad;
    for (std::size_t i = 0; i < p.class_prob.size(); ++i) {
        Predictions up = p, dn = p;
        up.class_prob[i] += h;
        dn.class_prob[i] -= h;
        const double fd = (class_loss(up, t).value - class_loss(dn, t).value) / (2 * h);
        if (fd != 0.0 || gk[i] != 0.0) worst_bce = std::max(worst_bce, oracle::relative_error(gk[i], fd));
    }
    o.require(worst_bce <= 1e-3, "BCE gradients within 1e-3");

    // CIoU gradients on random configurations away from the IoU kinks.
    int configs = 0, skipped = 0;
    double worst_ciou = 0.0;
    while (configs < 250) {
        const LossBox a{rng.uniform01d() * 30, rng.uniform01d() * 30, 2 + rng.uniform01d() * 20,
                        2 + rng.uniform01d() * 20};
        const LossBox b{rng.uniform01d() * 30, rng.uniform01d() * 30, 2 + rng.uniform01d() * 20,
                        2 + rng.uniform01d() * 20};
        if (oracle::near_kink(a, b, 1e-3)) {
            ++skipped;
            continue;
        }
        const auto analytic = ciou_loss(a, b).grad;
        const auto fd = oracle::ciou_fd(a, b, 1e-6);
        for (int k = 0; k < 4; ++k)
            worst_ciou = std::max(worst_ciou, std::abs(analytic[k] - fd[k]) / std::max(std::abs(fd[k]), 1e-3));
        ++configs;
    }
    o.require(worst_ciou <= 1e-3, "CIoU gradients within 1e-3");
    o.detail << "perfect total " << perfect.total << ", concentric " << concentric << ", worst BCE grad error "
             << worst_bce << ", worst CIoU grad error " << worst_ciou << " over " << configs << " configs ("
             << skipped << " near kinks skipped)";
}

std::vector<Detection> random_detections(Xoshiro256& rng, std::size_t n) {
    std::vector<Detection> out(n);
    for (auto& d : out) {
        d.box = Box{rng.uniform(0, 120), rng.uniform(0, 120), rng.uniform(5, 60), rng.uniform(5, 60)};
        d.class_id = static_cast<int>(rng.next() % 3);
        d.objectness = rng.uniform(0.01f, 0.99f);
        d.class_prob = 1.0f;
        d.confidence = std::round(rng.uniform(0.01f, 0.99f) * 20.0f) / 20.0f;
    }
    return out;
}

void crit10(Outcome& o) {
    const auto decoded = decode_head(Tensor(Shape{1, 255, 13, 13}), AnchorSet::defaults(), 13, 416);
    o.require(decoded.size() == 507, "decode emits 507 boxes");

    Xoshiro256 rng(10);
    constexpr int kInstances = 100;
    int matched = 0, monotone = 0;
    for (int i = 0; i < kInstances; ++i) {
        const auto dets = random_detections(rng, 50);
        const float ct = rng.uniform(0, 0.5f), it = rng.uniform(0.2f, 0.8f);
        matched += filter_and_nms(dets, ct, it) == oracle::nms(dets, ct, it);
    }
    for (int i = 0; i < kInstances; ++i) {
        const auto dets = random_detections(rng, 50);
        float t1 = rng.uniform01(), t2 = rng.uniform01();
        if (t1 > t2) std::swap(t1, t2);
        const auto lo = filter_and_nms(dets, t1, 0.45f), hi = filter_and_nms(dets, t2, 0.45f);
        bool subset = hi.size() <= lo.size();
        for (const auto& d : hi) subset = subset && std::find(lo.begin(), lo.end(), d) != lo.end();
        monotone += subset;
    }
    o.require(matched == kInstances, "NMS matches reference");
    o.require(monotone == kInstances, "threshold monotonicity");
    o.detail << "decode " << decoded.size() << " boxes, NMS match " << matched << "/" << kInstances
             << ", monotone " << monotone << "/" << kInstances;
}

Tensor fixed_input(std::size_t size) {
    Tensor x(network_input_shape(size));
    auto d = x.mutable_data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = float((i * 7919) % 256) / 255.0f;
    return x;
}

void crit11(Outcome& o) {
    const Tensor x = fixed_input(416);
    for (ModelKind kind : {ModelKind::proposed, ModelKind::v4tiny}) {
        NetworkGraph g = build(kind, 80);
        init_seeded(g, 42);
        const HeadOutputs first = g.forward(x, ExecPolicy{1});
        const auto c13 = checksum(first.head_13), c26 = checksum(first.head_26);
        int same = 1;
        const int runs = kind == ModelKind::proposed ? 10 : 2;
        for (int r = 1; r < runs; ++r) {
            const HeadOutputs h = g.forward(x, ExecPolicy{1});
            same += checksum(h.head_13) == c13 && checksum(h.head_26) == c26;
        }
        const HeadOutputs par = g.forward(x, ExecPolicy{4});
        const bool par_ok = checksum(par.head_13) == c13 && checksum(par.head_26) == c26;
        o.require(same == runs, std::string(to_string(kind)) + " repeated runs identical");
        o.require(par_ok, std::string(to_string(kind)) + " serial == parallel");
        char hex[64];
        std::snprintf(hex, sizeof hex, "%016llx/%016llx", static_cast<unsigned long long>(c13),
                      static_cast<unsigned long long>(c26));
        o.detail << to_string(kind) << " " << same << "/" << runs << " runs identical, 4-thread "
                 << (par_ok ? "equal" : "DIFFERENT") << ", checksums " << hex << "; ";
    }
}

void crit12(Outcome& o) {
    const auto path = std::filesystem::temp_directory_path() / "yolite_acceptance.yltw";
    for (ModelKind kind : {ModelKind::v4tiny, ModelKind::proposed}) {
        NetworkGraph g = build(kind, 80);
        init_seeded(g, 42);
        save(g, path);
        NetworkGraph h = build(kind, 80);
        load(h, path);
        std::ifstream in(path, std::ios::binary);
        const std::vector<std::uint8_t> disk((std::istreambuf_iterator<char>(in)), {});
        o.require(serialize_weights(h) == disk && disk == serialize_weights(g),
                  std::string(to_string(kind)) + " byte-stable round trip");
        o.require(parameter_hash(h) == parameter_hash(g), std::string(to_string(kind)) + " parameters restored");
    }
    NetworkGraph base = build_yolov4_tiny(80);
    init_seeded(base, 42);
    save(base, path);
    NetworkGraph other = build_proposed(80);
    bool rejected = false;
    try {
        load(other, path);
    } catch (const WeightsError& e) {
        rejected = e.code() == WeightsErrc::fingerprint_mismatch;
    }
    std::filesystem::remove(path);
    o.require(rejected, "fingerprint mismatch rejected");
    o.detail << "round trip byte-stable for both models, mismatch " << (rejected ? "rejected" : "ACCEPTED");
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
        {"CSP block FLOPs", crit1},       {"ResBlock-D FLOPs", crit2},     {"FLOPs ratio", crit3},
        {"parameter anchors", crit4},     {"receptive field", crit5},      {"network FLOPs ordering", crit6},
        {"primitive oracles", crit7},     {"CBAM attention", crit8},       {"losses", crit9},
        {"decode and NMS", crit10},       {"determinism", crit11},         {"weights round trip", crit12},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.ok = false;
            o.detail << "exception: " << e.what();
        }
        failures += !o.ok;
        std::printf("%s %zu %s: %s\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
