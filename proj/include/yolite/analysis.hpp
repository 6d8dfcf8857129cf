#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "yolite/network.hpp"

namespace yolite {

// Cost model: a convolution costs M^2 * K^2 * C_in * C_out multiply-accumulates
// (M = output side, K = kernel side); a pooling window costs C * M^2 * K^2.
// Activations, BN, concat, elementwise add and the attention MLP/sigmoid are free.
std::uint64_t flops_of_layer(std::uint64_t m, std::uint64_t k, std::uint64_t c_in, std::uint64_t c_out);
std::uint64_t flops_of_pool(std::uint64_t m, std::uint64_t k, std::uint64_t c);

enum class CostKind { conv, pool };

struct LayerDescriptor {
    std::string id;
    CostKind kind = CostKind::conv;
    std::uint64_t m = 0;      // output side
    std::uint64_t k = 0;      // kernel side
    std::uint64_t c_in = 0;   // for pools: channel count
    std::uint64_t c_out = 0;  // for pools: equal to c_in

    static LayerDescriptor conv(std::string id, std::uint64_t m, std::uint64_t k, std::uint64_t c_in,
                                std::uint64_t c_out);
    static LayerDescriptor pool(std::string id, std::uint64_t c, std::uint64_t m, std::uint64_t k);
};

struct FlopsEntry {
    LayerDescriptor layer;
    std::uint64_t flops = 0;
};

struct FlopsReport {
    std::vector<FlopsEntry> entries;
    std::uint64_t total = 0;
    std::map<std::string, std::uint64_t> by_kind;  // "conv", "pool"
};

const char* to_string(CostKind kind);

FlopsReport flops_of_list(std::span<const LayerDescriptor> layers);
FlopsReport flops_of_graph(const NetworkGraph& g, std::size_t input_size);

// Hand-worked layer lists for one 104x104x64 stage: the tiny CSP block (conv
// sequence 3x3 64->64, 3x3 64->32, 3x3 32->32, 1x1 64->64) and the ResBlock-D
// replacement (1x1 at 104, 3x3/2, 1x1, 2x2 avg pool, 1x1).
std::vector<LayerDescriptor> csp_worked_example();
std::vector<LayerDescriptor> resblock_d_worked_example();

struct ReceptiveField {
    std::uint64_t size = 1;
    std::uint64_t jump = 1;
};

// r <- r + (K - 1) * j, j <- j * stride, starting from r = j = 1.
ReceptiveField receptive_field(std::span<const std::pair<std::uint64_t, std::uint64_t>> layers);

}  // namespace yolite
