#include "yolite/report.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

namespace yolite {

double round_sig6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::strtod(buf, nullptr);
}

namespace {

nlohmann::json shape_json(const Shape& s) {
    return nlohmann::json::array({s.n, s.c, s.h, s.w});
}

std::string shape_cell(const Shape& s) {
    return std::to_string(s.c) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
}

}  // namespace

nlohmann::json describe_json(const NetworkGraph& g, std::size_t input_size) {
    const auto shapes = g.infer_shapes(network_input_shape(input_size));
    nlohmann::json nodes = nlohmann::json::array();
    for (std::size_t i = 0; i < g.nodes().size(); ++i) {
        const LayerNode& n = g.nodes()[i];
        nlohmann::json outs = nlohmann::json::array();
        for (const auto& s : shapes[i]) outs.push_back(shape_json(s));
        nodes.push_back({{"id", n.id},
                         {"kind", to_string(n.kind)},
                         {"inputs", n.inputs},
                         {"output_shapes", outs},
                         {"params", node_params(n)}});
    }
    return {{"model", g.name()},
            {"classes", g.classes()},
            {"input_size", input_size},
            {"head_channels", g.head_channels()},
            {"nodes", nodes},
            {"total_params", count_params(g)},
            {"conv_layers", count_layers(g)}};
}

std::string describe_text(const NetworkGraph& g, std::size_t input_size) {
    const auto shapes = g.infer_shapes(network_input_shape(input_size));
    std::ostringstream os;
    os << std::left << std::setw(14) << "id" << std::setw(12) << "kind" << std::setw(22) << "inputs" << std::setw(16)
       << "output" << std::right << std::setw(12) << "params" << "\n";
    for (std::size_t i = 0; i < g.nodes().size(); ++i) {
        const LayerNode& n = g.nodes()[i];
        std::string ins;
        for (const auto& in : n.inputs) ins += (ins.empty() ? "" : ",") + in;
        os << std::left << std::setw(14) << n.id << std::setw(12) << to_string(n.kind) << std::setw(22) << ins
           << std::setw(16) << shape_cell(shapes[i][0]) << std::right << std::setw(12) << node_params(n) << "\n";
    }
    os << "model " << g.name() << ", classes " << g.classes() << ", input " << input_size << "x" << input_size
       << ", head channels " << g.head_channels() << "\n";
    os << "summary: " << count_layers(g) << " conv layers, " << count_params(g) << " parameters\n";
    return os.str();
}

nlohmann::json flops_json(const FlopsReport& r) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : r.entries) {
        entries.push_back({{"id", e.layer.id},
                           {"kind", to_string(e.layer.kind)},
                           {"m", e.layer.m},
                           {"k", e.layer.k},
                           {"c_in", e.layer.c_in},
                           {"c_out", e.layer.c_out},
                           {"flops", e.flops}});
    }
    return {{"entries", entries}, {"total", r.total}, {"by_kind", r.by_kind}};
}

std::string flops_text(const FlopsReport& r) {
    std::ostringstream os;
    os << std::left << std::setw(24) << "layer" << std::setw(6) << "kind" << std::right << std::setw(6) << "M"
       << std::setw(4) << "K" << std::setw(7) << "C_in" << std::setw(7) << "C_out" << std::setw(16) << "flops"
       << "\n";
    for (const auto& e : r.entries) {
        os << std::left << std::setw(24) << e.layer.id << std::setw(6) << to_string(e.layer.kind) << std::right
           << std::setw(6) << e.layer.m << std::setw(4) << e.layer.k << std::setw(7) << e.layer.c_in << std::setw(7)
           << e.layer.c_out << std::setw(16) << e.flops << "\n";
    }
    for (const auto& [kind, v] : r.by_kind) os << std::left << std::setw(54) << ("subtotal " + kind) << std::right << std::setw(16) << v << "\n";
    os << std::left << std::setw(54) << "total" << std::right << std::setw(16) << r.total << "\n";
    return os.str();
}

nlohmann::json detections_json(std::span<const Detection> dets, std::size_t classes) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& d : dets) {
        nlohmann::json j = {{"class_id", d.class_id},
                            {"confidence", round_sig6(d.confidence)},
                            {"box",
                             {{"cx", round_sig6(d.box.cx)},
                              {"cy", round_sig6(d.box.cy)},
                              {"w", round_sig6(d.box.w)},
                              {"h", round_sig6(d.box.h)}}}};
        if (classes == 80) j["class_name"] = std::string(coco_class_name(d.class_id));
        out.push_back(std::move(j));
    }
    return out;
}

}  // namespace yolite
