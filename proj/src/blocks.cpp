#include "yolite/blocks.hpp"

namespace yolite {

ConvUnit ConvUnit::cbl(std::size_t in, std::size_t out, std::size_t k, std::size_t stride) {
    return ConvUnit{ConvParams::make(in, out, k, stride, false, true), Activation::leaky};
}

ConvUnit ConvUnit::conv_bn(std::size_t in, std::size_t out, std::size_t k, std::size_t stride) {
    return ConvUnit{ConvParams::make(in, out, k, stride, false, true), Activation::linear};
}

ConvUnit ConvUnit::linear(std::size_t in, std::size_t out, std::size_t k, std::size_t pad) {
    return ConvUnit{ConvParams::make(in, out, k, 1, pad, true, false), Activation::linear};
}

Tensor apply_activation(const Tensor& x, Activation act) {
    switch (act) {
        case Activation::leaky: return leaky_relu(x);
        case Activation::relu: return relu(x);
        case Activation::linear: break;
    }
    return x;
}

Tensor ConvUnit::forward(const Tensor& x, const ExecPolicy& exec) const {
    return apply_activation(conv2d(x, conv, exec), act);
}

Shape ConvUnit::output_shape(const Shape& in) const {
    YOLITE_CHECK(in.c == conv.in_channels, "conv expects " + std::to_string(conv.in_channels) +
                                               " input channels, got " + std::to_string(in.c));
    return Shape{in.n, conv.out_channels, window_output(in.h, conv.kernel, conv.stride, conv.pad),
                 window_output(in.w, conv.kernel, conv.stride, conv.pad)};
}

// CSP -----------------------------------------------------------------------

CspBlock CspBlock::make(std::size_t c) {
    YOLITE_CHECK(c >= 2 && c % 2 == 0, "CspBlock: channel count must be even, got " + std::to_string(c));
    const std::size_t half = c / 2;
    return CspBlock{c, ConvUnit::cbl(c, c, 3), ConvUnit::cbl(half, half, 3), ConvUnit::cbl(half, half, 3),
                    ConvUnit::cbl(c, c, 1)};
}

void CspBlock::visit(const ConvVisitor& f) const {
    f("conv0", conv0.conv);
    f("conv1", conv1.conv);
    f("conv2", conv2.conv);
    f("conv3", conv3.conv);
}

void CspBlock::visit_mut(const MutableConvVisitor& f) {
    f("conv0", conv0.conv);
    f("conv1", conv1.conv);
    f("conv2", conv2.conv);
    f("conv3", conv3.conv);
}

CspOutputs csp_forward_full(const CspBlock& block, const Tensor& x, const ExecPolicy& exec) {
    YOLITE_CHECK(block.channels % 2 == 0, "CspBlock: odd channel count");
    YOLITE_CHECK(x.shape().c == block.channels, "CspBlock: expected " + std::to_string(block.channels) +
                                                    " channels, got " + std::to_string(x.shape().c));
    const Tensor x0 = block.conv0.forward(x, exec);
    YOLITE_CHECK(x0.shape().h % 2 == 0 && x0.shape().w % 2 == 0, "CspBlock: spatial size must be even");
    const Tensor second = slice_channels(x0, block.channels / 2, block.channels);
    const Tensor x1 = block.conv1.forward(second, exec);
    const Tensor x2 = block.conv2.forward(x1, exec);
    Tensor x3 = block.conv3.forward(concat_channels(x2, x1), exec);
    Tensor out = pool2d(concat_channels(x0, x3), PoolKind::max, 2, 2);
    return CspOutputs{std::move(out), std::move(x3)};
}

Tensor csp_forward(const CspBlock& block, const Tensor& x, const ExecPolicy& exec) {
    return csp_forward_full(block, x, exec).out;
}

// ResBlock-D ----------------------------------------------------------------

ResBlockD ResBlockD::make(std::size_t c) {
    YOLITE_CHECK(c >= 2 && c % 2 == 0, "ResBlockD: channel count must be even, got " + std::to_string(c));
    const std::size_t half = c / 2;
    return ResBlockD{c, ConvUnit::cbl(c, half, 1), ConvUnit::cbl(half, half, 3, 2),
                     ConvUnit::conv_bn(half, 2 * c, 1), ConvUnit::conv_bn(c, 2 * c, 1)};
}

void ResBlockD::visit(const ConvVisitor& f) const {
    f("a0", a0.conv);
    f("a1", a1.conv);
    f("a2", a2.conv);
    f("b0", b0.conv);
}

void ResBlockD::visit_mut(const MutableConvVisitor& f) {
    f("a0", a0.conv);
    f("a1", a1.conv);
    f("a2", a2.conv);
    f("b0", b0.conv);
}

Tensor resblock_d_forward(const ResBlockD& block, const Tensor& x, const ExecPolicy& exec) {
    YOLITE_CHECK(x.shape().c == block.channels, "ResBlockD: expected " + std::to_string(block.channels) +
                                                    " channels, got " + std::to_string(x.shape().c));
    YOLITE_CHECK(x.shape().h % 2 == 0 && x.shape().w % 2 == 0, "ResBlockD: spatial size must be even");
    const Tensor path_a = block.a2.forward(block.a1.forward(block.a0.forward(x, exec), exec), exec);
    const Tensor path_b = block.b0.forward(pool2d(x, PoolKind::avg, 2, 2), exec);
    YOLITE_CHECK(path_a.shape() == path_b.shape(), "ResBlockD: path shapes diverged: " +
                                                       to_string(path_a.shape()) + " vs " +
                                                       to_string(path_b.shape()));
    return leaky_relu(add(path_a, path_b));
}

// CBAM ----------------------------------------------------------------------

Cbam Cbam::make(std::size_t c, std::size_t r) {
    YOLITE_CHECK(r >= 1 && c % r == 0 && c / r >= 1,
                 "Cbam: channels " + std::to_string(c) + " not divisible by reduction " + std::to_string(r));
    const std::size_t hidden = c / r;
    Cbam m{c, r, ConvUnit::linear(c, hidden, 1, 0), ConvUnit::linear(hidden, c, 1, 0),
           ConvUnit::linear(2, 1, 7, 3)};
    m.fc1.act = Activation::relu;
    return m;
}

void Cbam::visit(const ConvVisitor& f) const {
    f("fc1", fc1.conv);
    f("fc2", fc2.conv);
    f("spatial", spatial.conv);
}

void Cbam::visit_mut(const MutableConvVisitor& f) {
    f("fc1", fc1.conv);
    f("fc2", fc2.conv);
    f("spatial", spatial.conv);
}

Tensor cbam_channel_map(const Cbam& block, const Tensor& f) {
    YOLITE_CHECK(f.shape().c == block.channels, "Cbam: expected " + std::to_string(block.channels) +
                                                    " channels, got " + std::to_string(f.shape().c));
    auto mlp = [&](const Tensor& v) { return block.fc2.forward(block.fc1.forward(v)); };
    return sigmoid(add(mlp(channel_pool(f, PoolKind::avg)), mlp(channel_pool(f, PoolKind::max))));
}

Tensor cbam_spatial_map(const Cbam& block, const Tensor& f) {
    const Tensor pooled = concat_channels(spatial_pool(f, PoolKind::max), spatial_pool(f, PoolKind::avg));
    return sigmoid(block.spatial.forward(pooled));
}

Tensor cbam_forward(const Cbam& block, const Tensor& f, const ExecPolicy&) {
    const Tensor refined = broadcast_mul(f, cbam_channel_map(block, f));
    return broadcast_mul(refined, cbam_spatial_map(block, refined));
}

// Auxiliary block ------------------------------------------------------------

AuxBlock AuxBlock::make(std::size_t c, std::size_t r) {
    return AuxBlock{c, ConvUnit::cbl(c, c, 3, 2), ConvUnit::cbl(c, c, 3, 1), Cbam::make(c, r)};
}

void AuxBlock::visit(const ConvVisitor& f) const {
    f("conv1", conv1.conv);
    f("conv2", conv2.conv);
    cbam.visit([&](const std::string& name, const ConvParams& p) { f("cbam." + name, p); });
}

void AuxBlock::visit_mut(const MutableConvVisitor& f) {
    f("conv1", conv1.conv);
    f("conv2", conv2.conv);
    cbam.visit_mut([&](const std::string& name, ConvParams& p) { f("cbam." + name, p); });
}

Tensor aux_forward(const AuxBlock& block, const Tensor& x, const ExecPolicy& exec) {
    YOLITE_CHECK(x.shape().c == block.channels, "AuxBlock: expected " + std::to_string(block.channels) +
                                                    " channels, got " + std::to_string(x.shape().c));
    const Tensor a = block.conv1.forward(x, exec);
    const Tensor b = block.conv2.forward(a, exec);
    return concat_channels(a, cbam_forward(block.cbam, b, exec));
}

Tensor fuse(const Tensor& stage_out, const Tensor& aux_out) {
    YOLITE_CHECK(stage_out.shape() == aux_out.shape(), "fuse: stage output " + to_string(stage_out.shape()) +
                                                           " and auxiliary output " +
                                                           to_string(aux_out.shape()) + " differ");
    return add(stage_out, aux_out);
}

}  // namespace yolite
