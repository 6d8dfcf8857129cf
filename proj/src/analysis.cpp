#include "yolite/analysis.hpp"

namespace yolite {

std::uint64_t flops_of_layer(std::uint64_t m, std::uint64_t k, std::uint64_t c_in, std::uint64_t c_out) {
    YOLITE_CHECK(m >= 1 && k >= 1 && c_in >= 1 && c_out >= 1, "flops_of_layer: arguments must be >= 1");
    return m * m * k * k * c_in * c_out;
}

std::uint64_t flops_of_pool(std::uint64_t m, std::uint64_t k, std::uint64_t c) {
    YOLITE_CHECK(m >= 1 && k >= 1 && c >= 1, "flops_of_pool: arguments must be >= 1");
    return c * m * m * k * k;
}

const char* to_string(CostKind kind) {
    return kind == CostKind::conv ? "conv" : "pool";
}

LayerDescriptor LayerDescriptor::conv(std::string id, std::uint64_t m, std::uint64_t k, std::uint64_t c_in,
                                      std::uint64_t c_out) {
    return LayerDescriptor{std::move(id), CostKind::conv, m, k, c_in, c_out};
}

LayerDescriptor LayerDescriptor::pool(std::string id, std::uint64_t c, std::uint64_t m, std::uint64_t k) {
    return LayerDescriptor{std::move(id), CostKind::pool, m, k, c, c};
}

FlopsReport flops_of_list(std::span<const LayerDescriptor> layers) {
    FlopsReport report;
    report.by_kind["conv"] = 0;
    report.by_kind["pool"] = 0;
    for (const auto& l : layers) {
        const std::uint64_t f =
            l.kind == CostKind::conv ? flops_of_layer(l.m, l.k, l.c_in, l.c_out) : flops_of_pool(l.m, l.k, l.c_in);
        report.entries.push_back(FlopsEntry{l, f});
        report.total += f;
        report.by_kind[to_string(l.kind)] += f;
    }
    return report;
}

namespace {

std::uint64_t side(const Shape& s) {
    YOLITE_CHECK(s.h == s.w, "cost model needs square feature maps, got " + to_string(s));
    return s.h;
}

void conv_term(std::vector<LayerDescriptor>& out, const std::string& id, const ConvUnit& u, const Shape& in) {
    const Shape o = u.output_shape(in);
    out.push_back(LayerDescriptor::conv(id, side(o), u.conv.kernel, u.conv.in_channels, u.conv.out_channels));
}

// Only the 7x7 spatial conv of the attention module enters the cost model.
void cbam_terms(std::vector<LayerDescriptor>& out, const std::string& id, const Cbam& b, const Shape& in) {
    conv_term(out, id + ".spatial", b.spatial, Shape{in.n, 2, in.h, in.w});
}

void node_terms(std::vector<LayerDescriptor>& out, const LayerNode& node, const std::vector<Shape>& in,
                const std::vector<Shape>& outs) {
    const std::string& id = node.id;
    switch (node.kind) {
        case NodeKind::conv:
        case NodeKind::head: conv_term(out, id, std::get<ConvUnit>(node.op), in[0]); break;
        case NodeKind::pool: {
            const auto& p = std::get<PoolSpec>(node.op);
            out.push_back(LayerDescriptor::pool(id, in[0].c, side(outs[0]), p.k));
            break;
        }
        case NodeKind::csp: {
            const auto& b = std::get<CspBlock>(node.op);
            const Shape x0 = b.conv0.output_shape(in[0]);
            conv_term(out, id + ".conv0", b.conv0, in[0]);
            const Shape half{x0.n, b.channels / 2, x0.h, x0.w};
            conv_term(out, id + ".conv1", b.conv1, half);
            conv_term(out, id + ".conv2", b.conv2, half);
            conv_term(out, id + ".conv3", b.conv3, x0);
            out.push_back(LayerDescriptor::pool(id + ".maxpool", 2 * b.channels, side(outs[0]), 2));
            break;
        }
        case NodeKind::resblock_d: {
            const auto& b = std::get<ResBlockD>(node.op);
            const Shape a0 = b.a0.output_shape(in[0]);
            const Shape a1 = b.a1.output_shape(a0);
            conv_term(out, id + ".a0", b.a0, in[0]);
            conv_term(out, id + ".a1", b.a1, a0);
            conv_term(out, id + ".a2", b.a2, a1);
            const Shape pooled{in[0].n, in[0].c, in[0].h / 2, in[0].w / 2};
            out.push_back(LayerDescriptor::pool(id + ".avgpool", b.channels, side(pooled), 2));
            conv_term(out, id + ".b0", b.b0, pooled);
            break;
        }
        case NodeKind::aux: {
            const auto& b = std::get<AuxBlock>(node.op);
            const Shape a = b.conv1.output_shape(in[0]);
            conv_term(out, id + ".conv1", b.conv1, in[0]);
            conv_term(out, id + ".conv2", b.conv2, a);
            cbam_terms(out, id + ".cbam", b.cbam, a);
            break;
        }
        case NodeKind::cbam: cbam_terms(out, id, std::get<Cbam>(node.op), in[0]); break;
        case NodeKind::upsample:
        case NodeKind::concat:
        case NodeKind::add: break;
    }
}

}  // namespace

FlopsReport flops_of_graph(const NetworkGraph& g, std::size_t input_size) {
    const Shape input = network_input_shape(input_size);
    const auto shapes = g.infer_shapes(input);
    std::vector<LayerDescriptor> layers;
    for (std::size_t i = 0; i < g.nodes().size(); ++i) {
        const LayerNode& node = g.nodes()[i];
        std::vector<Shape> in;
        for (const auto& ref : node.inputs) {
            const auto p = g.resolve(ref);
            in.push_back(p.node == NetworkGraph::npos ? input : shapes[p.node][p.port]);
        }
        node_terms(layers, node, in, shapes[i]);
    }
    return flops_of_list(layers);
}

std::vector<LayerDescriptor> csp_worked_example() {
    return {
        LayerDescriptor::conv("conv3x3_64_64", 104, 3, 64, 64),
        LayerDescriptor::conv("conv3x3_64_32", 104, 3, 64, 32),
        LayerDescriptor::conv("conv3x3_32_32", 104, 3, 32, 32),
        LayerDescriptor::conv("conv1x1_64_64", 104, 1, 64, 64),
    };
}

std::vector<LayerDescriptor> resblock_d_worked_example() {
    return {
        LayerDescriptor::conv("a.conv1x1_64_32", 104, 1, 64, 32),
        LayerDescriptor::conv("a.conv3x3s2_32_32", 52, 3, 32, 32),
        LayerDescriptor::conv("a.conv1x1_32_64", 52, 1, 32, 64),
        LayerDescriptor::pool("b.avgpool2x2", 64, 52, 2),
        LayerDescriptor::conv("b.conv1x1_64_64", 52, 1, 64, 64),
    };
}

ReceptiveField receptive_field(std::span<const std::pair<std::uint64_t, std::uint64_t>> layers) {
    YOLITE_CHECK(!layers.empty(), "receptive_field: empty layer list");
    ReceptiveField rf;
    for (const auto& [k, stride] : layers) {
        YOLITE_CHECK(k >= 1 && stride >= 1, "receptive_field: kernel and stride must be >= 1");
        rf.size += (k - 1) * rf.jump;
        rf.jump *= stride;
    }
    return rf;
}

}  // namespace yolite
