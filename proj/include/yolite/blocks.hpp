#pragma once

#include <functional>
#include <string>

#include "yolite/tensor.hpp"

namespace yolite {

enum class Activation { linear, leaky, relu };

// One convolution with its optional BN and trailing activation ("CBL" when the
// activation is leaky and BN is present).
struct ConvUnit {
    ConvParams conv;
    Activation act = Activation::leaky;

    static ConvUnit cbl(std::size_t in, std::size_t out, std::size_t k, std::size_t stride = 1);
    // BN but no activation.
    static ConvUnit conv_bn(std::size_t in, std::size_t out, std::size_t k, std::size_t stride = 1);
    // Bias, no BN.
    static ConvUnit linear(std::size_t in, std::size_t out, std::size_t k, std::size_t pad);

    Tensor forward(const Tensor& x, const ExecPolicy& exec = {}) const;
    Shape output_shape(const Shape& in) const;
};

Tensor apply_activation(const Tensor& x, Activation act);

using ConvVisitor = std::function<void(const std::string& name, const ConvParams&)>;
using MutableConvVisitor = std::function<void(const std::string& name, ConvParams&)>;

// Tiny-variant cross-stage-partial block:
//   x0 = CBL3x3(x), s = second channel half of x0, x1 = CBL3x3(s), x2 = CBL3x3(x1),
//   x3 = CBL1x1([x2; x1]), out = maxpool2x2([x0; x3]).
struct CspBlock {
    std::size_t channels = 0;
    ConvUnit conv0, conv1, conv2, conv3;

    static CspBlock make(std::size_t channels);
    void visit(const ConvVisitor& f) const;
    void visit_mut(const MutableConvVisitor& f);
};

struct CspOutputs {
    Tensor out;    // (n, 2c, h/2, w/2)
    Tensor route;  // x3, (n, c, h, w); the FPN tap in the last stage
};

CspOutputs csp_forward_full(const CspBlock& block, const Tensor& x, const ExecPolicy& exec = {});
Tensor csp_forward(const CspBlock& block, const Tensor& x, const ExecPolicy& exec = {});

// Downsampling residual block with two paths summed before a single LeakyReLU.
//   path A: CBL1x1 c->c/2, CBL3x3/2 c/2->c/2, conv1x1+BN c/2->2c
//   path B: avgpool2x2/2, conv1x1+BN c->2c
struct ResBlockD {
    std::size_t channels = 0;
    ConvUnit a0, a1, a2;
    ConvUnit b0;

    static ResBlockD make(std::size_t channels);
    void visit(const ConvVisitor& f) const;
    void visit_mut(const MutableConvVisitor& f);
};

Tensor resblock_d_forward(const ResBlockD& block, const Tensor& x, const ExecPolicy& exec = {});

// Channel attention (shared two-layer MLP over global avg and max pools) followed
// by spatial attention (7x7 conv over the per-pixel [max; avg] maps).
struct Cbam {
    static constexpr std::size_t kDefaultReduction = 4;

    std::size_t channels = 0;
    std::size_t reduction = kDefaultReduction;
    ConvUnit fc1;      // 1x1 c -> c/r, bias, ReLU
    ConvUnit fc2;      // 1x1 c/r -> c, bias
    ConvUnit spatial;  // 7x7 2 -> 1, pad 3, bias

    static Cbam make(std::size_t channels, std::size_t reduction = kDefaultReduction);
    void visit(const ConvVisitor& f) const;
    void visit_mut(const MutableConvVisitor& f);
};

Tensor cbam_channel_map(const Cbam& block, const Tensor& f);  // (n,c,1,1) in (0,1)
Tensor cbam_spatial_map(const Cbam& block, const Tensor& f);  // (n,1,h,w) in (0,1)
Tensor cbam_forward(const Cbam& block, const Tensor& f, const ExecPolicy& exec = {});

// Auxiliary residual block: a = CBL3x3/2(x), b = CBL3x3(a), out = [a; cbam(b)].
struct AuxBlock {
    std::size_t channels = 0;
    ConvUnit conv1, conv2;
    Cbam cbam;

    static AuxBlock make(std::size_t channels, std::size_t reduction = Cbam::kDefaultReduction);
    void visit(const ConvVisitor& f) const;
    void visit_mut(const MutableConvVisitor& f);
};

Tensor aux_forward(const AuxBlock& block, const Tensor& x, const ExecPolicy& exec = {});

// Elementwise sum of a backbone stage output and its auxiliary branch.
Tensor fuse(const Tensor& stage_out, const Tensor& aux_out);

}  // namespace yolite
