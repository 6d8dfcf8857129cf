#include "yolite/selftest.hpp"

#include <cmath>
#include <functional>

#include "yolite/analysis.hpp"
#include "yolite/blocks.hpp"
#include "yolite/detect.hpp"
#include "yolite/loss.hpp"
#include "yolite/rng.hpp"
#include "yolite/weights_io.hpp"

namespace yolite {

namespace {

Tensor random_tensor(Xoshiro256& rng, Shape s, float lo = -1.0f, float hi = 1.0f) {
    std::vector<float> v(s.numel());
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor(s, std::move(v));
}

bool conv_matches_direct_sum(Xoshiro256& rng) {
    const Tensor x = random_tensor(rng, {1, 3, 9, 7});
    ConvParams p = ConvParams::make(3, 4, 3, 2, 1, true, false);
    for (auto& w : p.weights) w = rng.uniform(-1, 1);
    for (auto& b : p.bias) b = rng.uniform(-1, 1);
    const Tensor y = conv2d(x, p);
    for (std::size_t oc = 0; oc < 4; ++oc)
        for (std::size_t oy = 0; oy < y.shape().h; ++oy)
            for (std::size_t ox = 0; ox < y.shape().w; ++ox) {
                float acc = 0.0f;
                for (std::size_t ic = 0; ic < 3; ++ic)
                    for (std::size_t ky = 0; ky < 3; ++ky)
                        for (std::size_t kx = 0; kx < 3; ++kx) {
                            const long iy = static_cast<long>(oy * 2 + ky) - 1;
                            const long ix = static_cast<long>(ox * 2 + kx) - 1;
                            if (iy < 0 || ix < 0 || iy >= 9 || ix >= 7) continue;
                            acc += p.weights[((oc * 3 + ic) * 3 + ky) * 3 + kx] *
                                   x.at(0, ic, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                        }
                if (acc + p.bias[oc] != y.at(0, oc, oy, ox)) return false;
            }
    return true;
}

}  // namespace

std::vector<SelfTestCheck> run_selftest(const SelfTestOptions& opts) {
    std::vector<SelfTestCheck> checks;
    auto run = [&](const std::string& name, const std::function<std::string()>& body) {
        // body returns an empty string on success, a failure description otherwise
        try {
            std::string failure = body();
            checks.push_back({name, failure.empty(), failure});
        } catch (const std::exception& e) {
            checks.push_back({name, false, e.what()});
        }
    };
    Xoshiro256 rng(opts.seed);

    run("flops.worked_examples", [] {
        const auto csp = flops_of_list(csp_worked_example()).total;
        const auto rbd = flops_of_list(resblock_d_worked_example()).total;
        if (csp != 742064128u || rbd != 64376832u)
            return "totals " + std::to_string(csp) + " / " + std::to_string(rbd);
        const double ratio = static_cast<double>(csp) / static_cast<double>(rbd);
        return (ratio >= 11.52 && ratio <= 11.54) ? std::string{} : "ratio " + std::to_string(ratio);
    });
    run("analysis.receptive_field", [] {
        const std::vector<std::pair<std::uint64_t, std::uint64_t>> one{{3, 1}}, two{{3, 1}, {3, 1}};
        return receptive_field(one).size == 3 && receptive_field(two).size == 5 ? std::string{} : "wrong size";
    });
    run("network.param_counts", [&] {
        const double base = static_cast<double>(count_params(build_yolov4_tiny(80)));
        const double prop = static_cast<double>(count_params(build_proposed(80)));
        if (std::abs(base / 6.05661e6 - 1.0) > 0.05) return "baseline " + std::to_string(base);
        if (std::abs(prop / 6.16429e6 - 1.0) > 0.05) return "proposed " + std::to_string(prop);
        return prop > base ? std::string{} : "proposed not larger than baseline";
    });
    run("tensor.conv2d_direct_sum", [&] { return conv_matches_direct_sum(rng) ? std::string{} : "mismatch"; });
    run("tensor.upsample_avgpool_inverse", [&] {
        const Tensor x = random_tensor(rng, {1, 2, 5, 6});
        return pool2d(upsample_nearest2x(x), PoolKind::avg, 2, 2) == x ? std::string{} : "not an exact inverse";
    });
    run("blocks.cbam_zero_weights", [&] {
        const Tensor f = random_tensor(rng, {1, 8, 6, 6});
        const Tensor out = cbam_forward(Cbam::make(8, 4), f);
        for (std::size_t i = 0; i < f.numel(); ++i)
            if (out.data()[i] != 0.25f * f.data()[i]) return std::string("output differs from 0.25 F");
        return std::string{};
    });
    run("loss.reference_values", [] {
        const double concentric = ciou_loss({0, 0, 1, 1}, {0, 0, 2, 2}).value;
        const double same = ciou_loss({5, 5, 3, 2}, {5, 5, 3, 2}).value;
        if (std::abs(concentric - 0.75) > 1e-12 || same != 0.0) return std::string("ciou reference values");
        return std::string{};
    });
    run("detect.nms_duplicate", [] {
        const Detection a{{50, 50, 20, 20}, 0, 0.9f, 1.0f, 0.9f};
        Detection b = a;
        b.confidence = 0.8f;
        const std::vector<Detection> in{b, a};
        const auto out = filter_and_nms(in, 0.25f, 0.5f);
        return out.size() == 1 && out[0].confidence == 0.9f ? std::string{} : "duplicate not suppressed";
    });
    run("weights.round_trip", [&] {
        NetworkGraph g = build(opts.model, opts.classes);
        init_seeded(g, opts.seed);
        const auto bytes = serialize_weights(g);
        NetworkGraph h = build(opts.model, opts.classes);
        deserialize_weights(h, bytes);
        return serialize_weights(h) == bytes ? std::string{} : "re-serialised bytes differ";
    });
    if (opts.weights) {
        run("weights.load_file", [&] {
            NetworkGraph g = build(opts.model, opts.classes);
            load(g, *opts.weights);
            return std::string{};
        });
    }
    run("network.forward_determinism", [&] {
        NetworkGraph g = build(opts.model, opts.classes);
        init_seeded(g, opts.seed);
        const Tensor x = random_tensor(rng, network_input_shape(64), 0.0f, 1.0f);
        const HeadOutputs serial = g.forward(x, ExecPolicy{1});
        const HeadOutputs parallel = g.forward(x, ExecPolicy{std::max(2u, opts.threads)});
        if (checksum(serial.head_13) != checksum(parallel.head_13) ||
            checksum(serial.head_26) != checksum(parallel.head_26))
            return std::string("serial and parallel heads differ");
        return std::string{};
    });
    return checks;
}

}  // namespace yolite
