// yolite: describe, analyze and run the tiny detector variants from the command line.
//
// Exit codes: 0 ok, 2 bad configuration, 3 bad input image, 4 weight file error,
// 5 selftest failure.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "yolite/analysis.hpp"
#include "yolite/detect.hpp"
#include "yolite/image.hpp"
#include "yolite/network.hpp"
#include "yolite/report.hpp"
#include "yolite/rng.hpp"
#include "yolite/selftest.hpp"
#include "yolite/weights_io.hpp"

namespace {

using namespace yolite;

enum Exit { kOk = 0, kConfig = 2, kInput = 3, kWeights = 4, kSelftest = 5 };

struct ConfigError : Error {
    using Error::Error;
};

struct Config {
    std::string model = "proposed";
    std::size_t classes = 80;
    std::size_t input_size = 416;
    float conf_thresh = DetectDefaults::conf_thresh;
    float iou_thresh = DetectDefaults::iou_thresh;
    std::string anchors;  // comma-separated
    std::optional<std::uint64_t> seed;
    std::string weights;
    std::string format = "text";
    unsigned threads = 1;

    ModelKind model_kind() const { return model == "v4tiny" ? ModelKind::v4tiny : ModelKind::proposed; }

    std::uint64_t effective_seed() const {
        if (seed) return *seed;
        if (const char* env = std::getenv("YOLITE_SEED")) {
            try {
                return std::stoull(env);
            } catch (const std::exception&) {
                throw ConfigError(std::string("YOLITE_SEED is not an unsigned integer: ") + env);
            }
        }
        return 42;
    }

    AnchorSet anchor_set() const {
        if (anchors.empty()) return AnchorSet::defaults();
        std::vector<float> values;
        std::stringstream in(anchors);
        for (std::string item; std::getline(in, item, ',');) {
            try {
                std::size_t used = 0;
                values.push_back(std::stof(item, &used));
                if (used != item.size()) throw std::invalid_argument(item);
            } catch (const std::exception&) {
                throw ConfigError("--anchors: not a number: '" + item + "'");
            }
        }
        try {
            return AnchorSet::from_list(values);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }

    void validate() const {
        if (model != "v4tiny" && model != "proposed") throw ConfigError("--model must be v4tiny or proposed");
        if (classes < 1) throw ConfigError("--classes must be >= 1");
        if (input_size == 0 || input_size % 32 != 0) throw ConfigError("--input-size must be a positive multiple of 32");
        if (!(conf_thresh >= 0 && conf_thresh <= 1)) throw ConfigError("--conf-thresh must lie in [0,1]");
        if (!(iou_thresh >= 0 && iou_thresh <= 1)) throw ConfigError("--iou-thresh must lie in [0,1]");
        if (format != "text" && format != "json") throw ConfigError("--format must be text or json");
        anchor_set();
    }
};

void add_common(CLI::App* cmd, Config& cfg) {
    cmd->add_option("--model", cfg.model, "Network variant: v4tiny or proposed")->capture_default_str();
    cmd->add_option("--classes", cfg.classes, "Number of object classes")->capture_default_str();
    cmd->add_option("--input-size", cfg.input_size, "Square input side, multiple of 32")->capture_default_str();
    cmd->add_option("--format", cfg.format, "Output format: text or json")->capture_default_str();
    cmd->add_option("--threads", cfg.threads, "Worker threads for convolutions")->capture_default_str();
}

void add_model_inputs(CLI::App* cmd, Config& cfg) {
    cmd->add_option("--seed", cfg.seed, "Seed for fixture weights (falls back to $YOLITE_SEED, then 42)");
    cmd->add_option("--weights", cfg.weights, "Weight file written by init-weights");
}

NetworkGraph make_network(const Config& cfg, bool zero_weights = false) {
    NetworkGraph g = build(cfg.model_kind(), cfg.classes);
    if (!cfg.weights.empty()) {
        load(g, cfg.weights);
    } else if (zero_weights) {
        init_zero(g);
    } else {
        init_seeded(g, cfg.effective_seed());
    }
    return g;
}

void print_json(const nlohmann::json& j) {
    std::cout << j.dump(2) << "\n";
}

int cmd_describe(const Config& cfg) {
    const NetworkGraph g = build(cfg.model_kind(), cfg.classes);
    if (cfg.format == "json") print_json(describe_json(g, cfg.input_size));
    else std::cout << describe_text(g, cfg.input_size);
    return kOk;
}

int cmd_flops(const Config& cfg, bool fixtures) {
    if (fixtures) {
        const FlopsReport csp = flops_of_list(csp_worked_example());
        const FlopsReport rbd = flops_of_list(resblock_d_worked_example());
        const double ratio = static_cast<double>(csp.total) / static_cast<double>(rbd.total);
        if (cfg.format == "json") {
            print_json({{"csp_block", flops_json(csp)}, {"resblock_d", flops_json(rbd)}, {"ratio", round_sig6(ratio)}});
        } else {
            std::cout << "CSPBlock (104x104x64)\n" << flops_text(csp) << "\nResBlock-D (104x104x64)\n" << flops_text(rbd)
                      << "\nratio " << std::fixed << std::setprecision(4) << ratio << "\n";
        }
        return kOk;
    }
    const NetworkGraph g = build(cfg.model_kind(), cfg.classes);
    const FlopsReport r = flops_of_graph(g, cfg.input_size);
    if (cfg.format == "json") {
        auto j = flops_json(r);
        j["model"] = g.name();
        j["input_size"] = cfg.input_size;
        print_json(j);
    } else {
        std::cout << "model " << g.name() << ", input " << cfg.input_size << "\n" << flops_text(r);
    }
    return kOk;
}

int cmd_detect(const Config& cfg, const std::string& image_path, bool zero_weights) {
    Image img;
    try {
        img = read_image(image_path);
    } catch (const Error& e) {
        std::cerr << "yolite: " << e.what() << "\n";
        return kInput;
    }
    const NetworkGraph g = make_network(cfg, zero_weights);
    const Letterbox lb = letterbox(img, cfg.input_size);
    const HeadOutputs heads = g.forward(lb.tensor, ExecPolicy{cfg.threads});
    const AnchorSet anchors = cfg.anchor_set();
    auto dets = decode_head(heads.head_13, anchors, cfg.input_size / 32, cfg.input_size);
    auto fine = decode_head(heads.head_26, anchors, cfg.input_size / 16, cfg.input_size);
    dets.insert(dets.end(), fine.begin(), fine.end());
    auto kept = filter_and_nms(dets, cfg.conf_thresh, cfg.iou_thresh);
    for (auto& d : kept) d.box = lb.to_source(d.box);
    if (cfg.format == "json") {
        print_json(detections_json(kept, cfg.classes));
    } else {
        for (const auto& d : kept) {
            std::cout << d.class_id;
            if (cfg.classes == 80) std::cout << " (" << coco_class_name(d.class_id) << ")";
            std::cout << " conf " << round_sig6(d.confidence) << " box " << round_sig6(d.box.cx) << " "
                      << round_sig6(d.box.cy) << " " << round_sig6(d.box.w) << " " << round_sig6(d.box.h) << "\n";
        }
        std::cout << kept.size() << " detection(s)\n";
    }
    return kOk;
}

struct BenchStats {
    std::string model;
    std::size_t iters = 0;
    double mean_ms = 0, min_ms = 0, fps = 0;
};

BenchStats bench_one(const Config& cfg, ModelKind kind, std::size_t iters) {
    Config c = cfg;
    c.model = to_string(kind);
    const NetworkGraph g = make_network(c);
    Xoshiro256 rng(c.effective_seed());
    std::vector<float> px(network_input_shape(c.input_size).numel());
    for (auto& v : px) v = rng.uniform01();
    const Tensor x(network_input_shape(c.input_size), std::move(px));
    BenchStats s{g.name(), iters, 0, 1e300, 0};
    double total = 0;
    for (std::size_t i = 0; i < iters; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const HeadOutputs out = g.forward(x, ExecPolicy{c.threads});
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        total += ms;
        s.min_ms = std::min(s.min_ms, ms);
    }
    s.mean_ms = total / static_cast<double>(iters);
    s.fps = static_cast<double>(iters) / (total / 1000.0);
    return s;
}

int cmd_bench(const Config& cfg, std::size_t iters, bool compare) {
    if (iters < 1) throw ConfigError("--iters must be >= 1");
    std::vector<BenchStats> rows;
    if (compare) {
        rows.push_back(bench_one(cfg, ModelKind::v4tiny, iters));
        rows.push_back(bench_one(cfg, ModelKind::proposed, iters));
    } else {
        rows.push_back(bench_one(cfg, cfg.model_kind(), iters));
    }
    if (cfg.format == "json") {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& r : rows)
            j.push_back({{"model", r.model},
                         {"iterations", r.iters},
                         {"mean_ms", round_sig6(r.mean_ms)},
                         {"min_ms", round_sig6(r.min_ms)},
                         {"fps", round_sig6(r.fps)}});
        print_json(j);
    } else {
        std::cout << std::left << std::setw(12) << "model" << std::right << std::setw(8) << "iters" << std::setw(12)
                  << "mean_ms" << std::setw(12) << "min_ms" << std::setw(10) << "fps" << "\n";
        for (const auto& r : rows)
            std::cout << std::left << std::setw(12) << r.model << std::right << std::setw(8) << r.iters << std::fixed
                      << std::setprecision(2) << std::setw(12) << r.mean_ms << std::setw(12) << r.min_ms
                      << std::setw(10) << r.fps << "\n";
    }
    return kOk;
}

int cmd_selftest(const Config& cfg) {
    SelfTestOptions opts;
    opts.model = cfg.model_kind();
    opts.classes = cfg.classes;
    opts.seed = cfg.effective_seed();
    opts.threads = std::max(2u, cfg.threads);
    if (!cfg.weights.empty()) opts.weights = cfg.weights;
    const auto checks = run_selftest(opts);
    const bool ok = std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    if (cfg.format == "json") {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& c : checks) j.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        print_json({{"passed", ok}, {"checks", j}});
    } else {
        for (const auto& c : checks)
            std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : ": " + c.detail) << "\n";
        std::cout << (ok ? "selftest passed" : "selftest FAILED") << "\n";
    }
    return ok ? kOk : kSelftest;
}

int cmd_init_weights(const Config& cfg, const std::string& out, bool zero_weights) {
    NetworkGraph g = build(cfg.model_kind(), cfg.classes);
    if (zero_weights) init_zero(g);
    else init_seeded(g, cfg.effective_seed());
    save(g, out);
    std::cout << "wrote " << out << " (" << count_params(g) << " parameters, fingerprint " << std::hex
              << graph_fingerprint(g) << std::dec << ")\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"yolite: tiny one-stage detector engine and cost analyzer"};
    app.require_subcommand(1);
    Config cfg;

    auto* describe = app.add_subcommand("describe", "Print the layer table and parameter totals");
    add_common(describe, cfg);

    bool fixtures = false;
    auto* flops = app.add_subcommand("flops", "Per-layer FLOPs report");
    add_common(flops, cfg);
    flops->add_flag("--paper-fixtures", fixtures, "Report the two hand-worked 104x104x64 block examples");

    std::string image;
    bool zero_weights = false;
    auto* detect = app.add_subcommand("detect", "Run detection on a PPM (P6) image or YLTI tensor");
    add_common(detect, cfg);
    add_model_inputs(detect, cfg);
    detect->add_option("image", image, "Input image path")->required();
    detect->add_option("--conf-thresh", cfg.conf_thresh, "Confidence threshold")->capture_default_str();
    detect->add_option("--iou-thresh", cfg.iou_thresh, "NMS IoU threshold")->capture_default_str();
    detect->add_option("--anchors", cfg.anchors, "12 comma-separated values: fine-scale then coarse-scale w,h pairs");
    detect->add_flag("--zero-weights", zero_weights, "Use all-zero weights instead of seeded ones");

    std::size_t iters = 10;
    bool compare = false;
    auto* bench = app.add_subcommand("bench", "Time forward passes on synthetic input");
    add_common(bench, cfg);
    add_model_inputs(bench, cfg);
    bench->add_option("--iters", iters, "Iterations")->capture_default_str();
    bench->add_flag("--compare", compare, "Time v4tiny and proposed side by side");

    auto* selftest = app.add_subcommand("selftest", "Run the built-in invariant checks");
    add_common(selftest, cfg);
    add_model_inputs(selftest, cfg);

    std::string out_path;
    auto* init = app.add_subcommand("init-weights", "Write a fixture weight file");
    add_common(init, cfg);
    add_model_inputs(init, cfg);
    init->add_option("--out", out_path, "Output path")->required();
    init->add_flag("--zero-weights", zero_weights, "Write all-zero weights");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        cfg.validate();
        if (*describe) return cmd_describe(cfg);
        if (*flops) return cmd_flops(cfg, fixtures);
        if (*detect) return cmd_detect(cfg, image, zero_weights);
        if (*bench) return cmd_bench(cfg, iters, compare);
        if (*selftest) return cmd_selftest(cfg);
        if (*init) return cmd_init_weights(cfg, out_path, zero_weights);
    } catch (const ConfigError& e) {
        std::cerr << "yolite: " << e.what() << "\n";
        return kConfig;
    } catch (const ImageError& e) {
        std::cerr << "yolite: " << e.what() << "\n";
        return kInput;
    } catch (const WeightsError& e) {
        std::cerr << "yolite: weights: " << to_string(e.code()) << ": " << e.what() << "\n";
        return kWeights;
    } catch (const Error& e) {
        std::cerr << "yolite: " << e.what() << "\n";
        return kConfig;
    }
    return kConfig;
}
