#include "yolite/network.hpp"

#include <algorithm>
#include <cstring>

namespace yolite {

const char* to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::conv: return "conv";
        case NodeKind::pool: return "pool";
        case NodeKind::upsample: return "upsample";
        case NodeKind::concat: return "concat";
        case NodeKind::add: return "add";
        case NodeKind::csp: return "csp";
        case NodeKind::resblock_d: return "resblock_d";
        case NodeKind::aux: return "aux";
        case NodeKind::cbam: return "cbam";
        case NodeKind::head: return "head";
    }
    return "?";
}

const char* to_string(ModelKind kind) {
    return kind == ModelKind::v4tiny ? "v4tiny" : "proposed";
}

NetworkGraph::NetworkGraph(std::string name, std::size_t classes) : name_(std::move(name)), classes_(classes) {
    YOLITE_CHECK(classes >= 1, "network needs at least one class");
}

NetworkGraph::Port NetworkGraph::resolve(const std::string& ref) const {
    std::string id = ref;
    std::size_t port = 0;
    if (auto colon = ref.find(':'); colon != std::string::npos) {
        id = ref.substr(0, colon);
        port = std::stoul(ref.substr(colon + 1));
    }
    if (id == kInputId) {
        YOLITE_CHECK(port == 0, "graph input has a single port");
        return Port{npos, 0};
    }
    auto it = index_.find(id);
    YOLITE_CHECK(it != index_.end(), "unknown node reference '" + ref + "'");
    YOLITE_CHECK(port < nodes_[it->second].output_ports(), "node '" + id + "' has no port " + std::to_string(port));
    return Port{it->second, port};
}

void NetworkGraph::add(LayerNode node) {
    YOLITE_CHECK(!node.id.empty() && node.id != kInputId && node.id.find(':') == std::string::npos,
                 "invalid node id '" + node.id + "'");
    YOLITE_CHECK(!contains(node.id), "duplicate node id '" + node.id + "'");
    for (const auto& in : node.inputs) resolve(in);  // earlier nodes only: the new node is not indexed yet
    const std::size_t expected = [&]() -> std::size_t {
        switch (node.kind) {
            case NodeKind::concat:
            case NodeKind::add: return 2;
            default: return 1;
        }
    }();
    YOLITE_CHECK(node.inputs.size() == expected, "node '" + node.id + "' expects " + std::to_string(expected) +
                                                     " inputs, got " + std::to_string(node.inputs.size()));
    visit_node_convs(node, [&](const std::string& name, const ConvParams& p) {
        try {
            p.validate();
        } catch (const Error& e) {
            throw Error("node '" + name + "': " + e.what());
        }
    });
    index_.emplace(node.id, nodes_.size());
    nodes_.push_back(std::move(node));
}

const LayerNode& NetworkGraph::node(const std::string& id) const {
    auto it = index_.find(id);
    YOLITE_CHECK(it != index_.end(), "unknown node '" + id + "'");
    return nodes_[it->second];
}

LayerNode& NetworkGraph::node(const std::string& id) {
    auto it = index_.find(id);
    YOLITE_CHECK(it != index_.end(), "unknown node '" + id + "'");
    return nodes_[it->second];
}

void visit_node_convs(const LayerNode& node, const ConvVisitor& f) {
    const std::string prefix = node.id + ".";
    auto sub = [&](const std::string& name, const ConvParams& p) { f(prefix + name, p); };
    std::visit(
        [&](const auto& op) {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, ConvUnit>) {
                f(node.id, op.conv);
            } else if constexpr (std::is_same_v<T, CspBlock> || std::is_same_v<T, ResBlockD> ||
                                 std::is_same_v<T, AuxBlock> || std::is_same_v<T, Cbam>) {
                op.visit(sub);
            }
        },
        node.op);
}

void visit_node_convs_mut(LayerNode& node, const MutableConvVisitor& f) {
    const std::string prefix = node.id + ".";
    auto sub = [&](const std::string& name, ConvParams& p) { f(prefix + name, p); };
    std::visit(
        [&](auto& op) {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, ConvUnit>) {
                f(node.id, op.conv);
            } else if constexpr (std::is_same_v<T, CspBlock> || std::is_same_v<T, ResBlockD> ||
                                 std::is_same_v<T, AuxBlock> || std::is_same_v<T, Cbam>) {
                op.visit_mut(sub);
            }
        },
        node.op);
}

void NetworkGraph::visit_convs(const ConvVisitor& f) const {
    for (const auto& n : nodes_) visit_node_convs(n, f);
}

void NetworkGraph::visit_convs_mut(const MutableConvVisitor& f) {
    for (auto& n : nodes_) visit_node_convs_mut(n, f);
}

namespace {

template <class T>
const T& op_as(const LayerNode& node) {
    const T* op = std::get_if<T>(&node.op);
    YOLITE_CHECK(op != nullptr, "node '" + node.id + "' has parameters of the wrong kind");
    return *op;
}

Shape half_spatial(const Shape& s, std::size_t channels) {
    YOLITE_CHECK(s.h % 2 == 0 && s.w % 2 == 0, "spatial size " + to_string(s) + " is not even");
    return Shape{s.n, channels, s.h / 2, s.w / 2};
}

std::vector<Shape> node_shapes(const LayerNode& node, const std::vector<Shape>& in) {
    switch (node.kind) {
        case NodeKind::conv:
        case NodeKind::head: return {op_as<ConvUnit>(node).output_shape(in[0])};
        case NodeKind::pool: {
            const auto& p = op_as<PoolSpec>(node);
            YOLITE_CHECK(in[0].h >= p.k && in[0].w >= p.k, "pool window larger than input");
            return {Shape{in[0].n, in[0].c, (in[0].h - p.k) / p.s + 1, (in[0].w - p.k) / p.s + 1}};
        }
        case NodeKind::upsample: return {Shape{in[0].n, in[0].c, in[0].h * 2, in[0].w * 2}};
        case NodeKind::concat:
            YOLITE_CHECK(in[0].n == in[1].n && in[0].h == in[1].h && in[0].w == in[1].w,
                         "concat of " + to_string(in[0]) + " and " + to_string(in[1]));
            return {Shape{in[0].n, in[0].c + in[1].c, in[0].h, in[0].w}};
        case NodeKind::add:
            YOLITE_CHECK(in[0] == in[1], "add of " + to_string(in[0]) + " and " + to_string(in[1]));
            return {in[0]};
        case NodeKind::csp: {
            const auto& b = op_as<CspBlock>(node);
            YOLITE_CHECK(in[0].c == b.channels, "csp expects " + std::to_string(b.channels) + " channels");
            const Shape x0 = b.conv0.output_shape(in[0]);
            return {half_spatial(x0, 2 * b.channels), Shape{x0.n, b.channels, x0.h, x0.w}};
        }
        case NodeKind::resblock_d: {
            const auto& b = op_as<ResBlockD>(node);
            YOLITE_CHECK(in[0].c == b.channels, "resblock_d expects " + std::to_string(b.channels) + " channels");
            return {half_spatial(in[0], 2 * b.channels)};
        }
        case NodeKind::aux: {
            const auto& b = op_as<AuxBlock>(node);
            YOLITE_CHECK(in[0].c == b.channels, "aux expects " + std::to_string(b.channels) + " channels");
            const Shape a = b.conv1.output_shape(in[0]);
            return {Shape{a.n, 2 * b.channels, a.h, a.w}};
        }
        case NodeKind::cbam: {
            const auto& b = op_as<Cbam>(node);
            YOLITE_CHECK(in[0].c == b.channels, "cbam expects " + std::to_string(b.channels) + " channels");
            return {in[0]};
        }
    }
    throw Error("unhandled node kind");
}

std::vector<Tensor> node_forward(const LayerNode& node, const std::vector<const Tensor*>& in,
                                 const ExecPolicy& exec) {
    switch (node.kind) {
        case NodeKind::conv:
        case NodeKind::head: return {op_as<ConvUnit>(node).forward(*in[0], exec)};
        case NodeKind::pool: {
            const auto& p = op_as<PoolSpec>(node);
            return {pool2d(*in[0], p.kind, p.k, p.s)};
        }
        case NodeKind::upsample: return {upsample_nearest2x(*in[0])};
        case NodeKind::concat: return {concat_channels(*in[0], *in[1])};
        case NodeKind::add: return {fuse(*in[0], *in[1])};
        case NodeKind::csp: {
            auto outs = csp_forward_full(op_as<CspBlock>(node), *in[0], exec);
            return {std::move(outs.out), std::move(outs.route)};
        }
        case NodeKind::resblock_d: return {resblock_d_forward(op_as<ResBlockD>(node), *in[0], exec)};
        case NodeKind::aux: return {aux_forward(op_as<AuxBlock>(node), *in[0], exec)};
        case NodeKind::cbam: return {cbam_forward(op_as<Cbam>(node), *in[0], exec)};
    }
    throw Error("unhandled node kind");
}

}  // namespace

std::vector<std::vector<Shape>> NetworkGraph::infer_shapes(const Shape& input) const {
    std::vector<std::vector<Shape>> shapes;
    shapes.reserve(nodes_.size());
    for (const auto& node : nodes_) {
        std::vector<Shape> in;
        for (const auto& ref : node.inputs) {
            const Port p = resolve(ref);
            in.push_back(p.node == npos ? input : shapes[p.node][p.port]);
        }
        try {
            shapes.push_back(node_shapes(node, in));
        } catch (const Error& e) {
            throw Error("shape inference failed at node '" + node.id + "': " + e.what());
        }
    }
    return shapes;
}

HeadOutputs NetworkGraph::forward(const Tensor& input, const ExecPolicy& exec, const NodeObserver& observe) const {
    const Shape& s = input.shape();
    YOLITE_CHECK(s.c == 3, "network input must have 3 channels, got " + std::to_string(s.c));
    YOLITE_CHECK(s.h == s.w && s.h > 0 && s.h % 32 == 0,
                 "network input must be square with a side that is a multiple of 32, got " + to_string(s));
    for (float v : input.data()) YOLITE_CHECK(v >= 0.0f && v <= 1.0f, "network input values must lie in [0,1]");
    infer_shapes(s);  // fail early with the offending node id

    std::vector<std::vector<Tensor>> values(nodes_.size());
    // Remaining consumers per node so intermediate activations are released early.
    std::vector<std::size_t> uses(nodes_.size(), 0);
    for (const auto& node : nodes_)
        for (const auto& ref : node.inputs)
            if (auto p = resolve(ref); p.node != npos) ++uses[p.node];

    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const LayerNode& node = nodes_[i];
        std::vector<const Tensor*> in;
        std::vector<std::size_t> sources;
        for (const auto& ref : node.inputs) {
            const Port p = resolve(ref);
            in.push_back(p.node == npos ? &input : &values[p.node][p.port]);
            if (p.node != npos) sources.push_back(p.node);
        }
        try {
            values[i] = node_forward(node, in, exec);
        } catch (const Error& e) {
            throw Error("forward failed at node '" + node.id + "': " + e.what());
        }
        if (observe) observe(node, values[i]);
        for (std::size_t src : sources)
            if (--uses[src] == 0 && nodes_[src].kind != NodeKind::head) values[src].clear();
    }
    return HeadOutputs{std::move(values[index_.at(kCoarseHead)][0]), std::move(values[index_.at(kFineHead)][0])};
}

// Builders --------------------------------------------------------------------

namespace {

LayerNode conv_node(std::string id, std::string input, std::size_t in, std::size_t out, std::size_t k,
                    std::size_t stride = 1) {
    return LayerNode{std::move(id), NodeKind::conv, {std::move(input)}, ConvUnit::cbl(in, out, k, stride)};
}

LayerNode head_node(std::string id, std::string input, std::size_t in, std::size_t out) {
    return LayerNode{std::move(id), NodeKind::head, {std::move(input)}, ConvUnit::linear(in, out, 1, 0)};
}

// Shared tail: stage 3 (CSP at 26x26), trunk, neck and the two heads.
void add_tail(NetworkGraph& g, const std::string& stage2_out) {
    const std::size_t head = g.head_channels();
    g.add(LayerNode{"stage3", NodeKind::csp, {stage2_out}, CspBlock::make(256)});
    g.add(conv_node("trunk", "stage3", 512, 512, 3));
    g.add(conv_node("neck", "trunk", 512, 256, 1));
    g.add(conv_node("head13_conv", "neck", 256, 512, 3));
    g.add(head_node(NetworkGraph::kCoarseHead, "head13_conv", 512, head));
    g.add(conv_node("lateral", "neck", 256, 128, 1));
    g.add(LayerNode{"upsample", NodeKind::upsample, {"lateral"}, std::monostate{}});
    g.add(LayerNode{"fpn_concat", NodeKind::concat, {"upsample", "stage3:1"}, std::monostate{}});
    g.add(conv_node("head26_conv", "fpn_concat", 384, 256, 3));
    g.add(head_node(NetworkGraph::kFineHead, "head26_conv", 256, head));
}

void add_stem(NetworkGraph& g) {
    g.add(conv_node("stem0", NetworkGraph::kInputId, 3, 32, 3, 2));
    g.add(conv_node("stem1", "stem0", 32, 64, 3, 2));
}

}  // namespace

NetworkGraph build_yolov4_tiny(std::size_t classes) {
    NetworkGraph g("v4tiny", classes);
    add_stem(g);
    g.add(LayerNode{"stage1", NodeKind::csp, {"stem1"}, CspBlock::make(64)});
    g.add(LayerNode{"stage2", NodeKind::csp, {"stage1"}, CspBlock::make(128)});
    add_tail(g, "stage2");
    return g;
}

NetworkGraph build_proposed(std::size_t classes, bool with_aux) {
    NetworkGraph g(with_aux ? "proposed" : "proposed-noaux", classes);
    add_stem(g);
    std::string x = "stem1";
    std::size_t c = 64;
    for (int stage = 1; stage <= 2; ++stage, c *= 2) {
        const std::string n = std::to_string(stage);
        const std::string stage_in = x;
        g.add(LayerNode{"stage" + n, NodeKind::resblock_d, {stage_in}, ResBlockD::make(c)});
        x = "stage" + n;
        if (with_aux) {
            // The auxiliary branch taps the stage input and rejoins after downsampling.
            g.add(LayerNode{"aux" + n, NodeKind::aux, {stage_in}, AuxBlock::make(c)});
            g.add(LayerNode{"fuse" + n, NodeKind::add, {x, "aux" + n}, std::monostate{}});
            x = "fuse" + n;
        }
    }
    add_tail(g, x);
    return g;
}

NetworkGraph build(ModelKind kind, std::size_t classes) {
    return kind == ModelKind::v4tiny ? build_yolov4_tiny(classes) : build_proposed(classes);
}

HeadOutputs forward(const NetworkGraph& g, const Tensor& input, const ExecPolicy& exec) {
    return g.forward(input, exec);
}

std::size_t node_params(const LayerNode& node) {
    std::size_t total = 0;
    visit_node_convs(node, [&](const std::string&, const ConvParams& p) { total += p.param_count(); });
    return total;
}

std::size_t count_params(const NetworkGraph& g) {
    std::size_t total = 0;
    for (const auto& n : g.nodes()) total += node_params(n);
    return total;
}

std::size_t count_layers(const NetworkGraph& g) {
    std::size_t total = 0;
    g.visit_convs([&](const std::string&, const ConvParams&) { ++total; });
    return total;
}

Shape network_input_shape(std::size_t size, std::size_t batch) {
    YOLITE_CHECK(size > 0 && size % 32 == 0, "input size must be a positive multiple of 32, got " + std::to_string(size));
    return Shape{batch, 3, size, size};
}

std::uint64_t checksum(const Tensor& t) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (float v : t.data()) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 4; ++i) {
            h ^= (bits >> (8 * i)) & 0xffu;
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

}  // namespace yolite
