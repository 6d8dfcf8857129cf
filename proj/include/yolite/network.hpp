#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "yolite/blocks.hpp"

namespace yolite {

enum class NodeKind { conv, pool, upsample, concat, add, csp, resblock_d, aux, cbam, head };

const char* to_string(NodeKind kind);

struct PoolSpec {
    PoolKind kind = PoolKind::max;
    std::size_t k = 2;
    std::size_t s = 2;
};

using NodeOp = std::variant<std::monostate, ConvUnit, PoolSpec, CspBlock, ResBlockD, AuxBlock, Cbam>;

// Inputs are node ids, optionally suffixed with ":port" (e.g. "stage3:1" is the
// CSP route tap). The reserved id "input" is the network input.
struct LayerNode {
    std::string id;
    NodeKind kind = NodeKind::conv;
    std::vector<std::string> inputs;
    NodeOp op;

    std::size_t output_ports() const { return kind == NodeKind::csp ? 2 : 1; }
};

enum class ModelKind { v4tiny, proposed };

const char* to_string(ModelKind kind);

struct HeadOutputs {
    Tensor head_13;  // coarse scale (input / 32)
    Tensor head_26;  // fine scale (input / 16)
};

class NetworkGraph {
public:
    static constexpr const char* kInputId = "input";
    static constexpr const char* kCoarseHead = "head_13";
    static constexpr const char* kFineHead = "head_26";

    NetworkGraph(std::string name, std::size_t classes);

    // Appends a node. Every input must name an earlier node (or "input").
    void add(LayerNode node);

    const std::string& name() const { return name_; }
    std::size_t classes() const { return classes_; }
    std::size_t head_channels() const { return 3 * (5 + classes_); }
    const std::vector<LayerNode>& nodes() const { return nodes_; }
    const LayerNode& node(const std::string& id) const;
    LayerNode& node(const std::string& id);
    bool contains(const std::string& id) const { return index_.count(id) != 0; }

    // Output shapes of every node (indexed like nodes(), then by port) for the given input.
    std::vector<std::vector<Shape>> infer_shapes(const Shape& input) const;

    // Called once per node, in order, with that node's outputs.
    using NodeObserver = std::function<void(const LayerNode&, const std::vector<Tensor>&)>;

    HeadOutputs forward(const Tensor& input, const ExecPolicy& exec = {}, const NodeObserver& observe = {}) const;

    // Every convolution in topological order, named "<node>" or "<node>.<sub>".
    void visit_convs(const ConvVisitor& f) const;
    void visit_convs_mut(const MutableConvVisitor& f);

    struct Port {
        std::size_t node;  // npos for the graph input
        std::size_t port;
    };
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    Port resolve(const std::string& ref) const;

private:
    std::string name_;
    std::size_t classes_;
    std::vector<LayerNode> nodes_;
    std::map<std::string, std::size_t> index_;
};

NetworkGraph build_yolov4_tiny(std::size_t classes);
// with_aux = false drops the auxiliary blocks and their fusions (ablation).
NetworkGraph build_proposed(std::size_t classes, bool with_aux = true);
NetworkGraph build(ModelKind kind, std::size_t classes);

HeadOutputs forward(const NetworkGraph& g, const Tensor& input, const ExecPolicy& exec = {});

std::size_t count_params(const NetworkGraph& g);
std::size_t count_layers(const NetworkGraph& g);
std::size_t node_params(const LayerNode& node);

// Parameters of every node, NodeOp dispatch.
void visit_node_convs(const LayerNode& node, const ConvVisitor& f);
void visit_node_convs_mut(LayerNode& node, const MutableConvVisitor& f);

// Shape of a 416-style input: (n, 3, size, size). Size must be a positive multiple of 32.
Shape network_input_shape(std::size_t size, std::size_t batch = 1);

// FNV-1a over the float bit patterns of a tensor.
std::uint64_t checksum(const Tensor& t);

}  // namespace yolite
