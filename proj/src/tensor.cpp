#include "yolite/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace yolite {

std::string to_string(const Shape& s) {
    return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
           std::to_string(s.w) + ")";
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape), data_(shape.numel(), fill) {
    YOLITE_CHECK(std::isfinite(fill), "tensor fill value is not finite");
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
    YOLITE_CHECK(data_.size() == shape_.numel(),
                 "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                     to_string(shape_));
    check_finite(*this, "Tensor");
}

void check_finite(const Tensor& t, const char* what) {
    for (float v : t.data()) {
        if (!std::isfinite(v)) throw Error(std::string(what) + ": produced a non-finite value");
    }
}

BatchNorm BatchNorm::identity(std::size_t channels) {
    return BatchNorm{std::vector<float>(channels, 1.0f), std::vector<float>(channels, 0.0f),
                     std::vector<float>(channels, 0.0f), std::vector<float>(channels, 1.0f)};
}

ConvParams ConvParams::make(std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                            bool with_bias, bool with_bn) {
    return make(in, out, k, stride, k / 2, with_bias, with_bn);
}

ConvParams ConvParams::make(std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                            std::size_t pad, bool with_bias, bool with_bn) {
    ConvParams p;
    p.in_channels = in;
    p.out_channels = out;
    p.kernel = k;
    p.stride = stride;
    p.pad = pad;
    p.weights.assign(p.weight_count(), 0.0f);
    if (with_bias) p.bias.assign(out, 0.0f);
    if (with_bn) p.bn = BatchNorm::identity(out);
    return p;
}

std::size_t ConvParams::param_count() const {
    std::size_t total = weights.size() + bias.size();
    if (bn) total += bn->gamma.size() + bn->beta.size();
    return total;
}

namespace {

void require_finite(std::span<const float> values, const char* what) {
    for (float v : values) YOLITE_CHECK(std::isfinite(v), std::string("conv ") + what + " contains a non-finite value");
}

}  // namespace

void ConvParams::validate() const {
    YOLITE_CHECK(kernel > 0 && stride > 0, "conv kernel and stride must be positive");
    YOLITE_CHECK(in_channels > 0 && out_channels > 0, "conv channel counts must be positive");
    YOLITE_CHECK(weights.size() == weight_count(),
                 "conv weight length " + std::to_string(weights.size()) + " != " +
                     std::to_string(weight_count()));
    YOLITE_CHECK(bias.empty() || bias.size() == out_channels, "conv bias length mismatch");
    require_finite(weights, "weights");
    require_finite(bias, "bias");
    if (bn) {
        YOLITE_CHECK(bn->gamma.size() == out_channels && bn->beta.size() == out_channels &&
                         bn->running_mean.size() == out_channels &&
                         bn->running_var.size() == out_channels,
                     "batch-norm array length mismatch");
        require_finite(bn->gamma, "bn gamma");
        require_finite(bn->beta, "bn beta");
        require_finite(bn->running_mean, "bn running_mean");
        require_finite(bn->running_var, "bn running_var");
        for (float v : bn->running_var) YOLITE_CHECK(v >= 0.0f, "batch-norm running_var is negative");
    }
}

std::size_t window_output(std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
    YOLITE_CHECK(k > 0 && s > 0, "window kernel and stride must be positive");
    YOLITE_CHECK(in + 2 * p >= k, "window of size " + std::to_string(k) + " does not fit extent " +
                                      std::to_string(in) + " with padding " + std::to_string(p));
    return (in + 2 * p - k) / s + 1;
}

namespace {

template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < count; i += workers) fn(i);
        });
    }
}

// First/last output column whose tap at kernel offset `kx` lands inside [0, in_w).
void valid_range(std::size_t out_w, std::size_t in_w, std::size_t kx, std::size_t s, std::size_t p,
                 std::size_t& first, std::size_t& last_excl) {
    // ix = ox*s + kx - p
    first = kx >= p ? 0 : (p - kx + s - 1) / s;
    if (in_w + p <= kx) {
        last_excl = first;
        return;
    }
    const std::size_t max_ox = (in_w - 1 + p - kx) / s;
    last_excl = std::min(out_w, max_ox + 1);
    if (last_excl < first) last_excl = first;
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvParams& params, const ExecPolicy& exec) {
    const Shape& in = input.shape();
    YOLITE_CHECK(in.c == params.in_channels, "conv2d: input channels " + std::to_string(in.c) +
                                                 " != expected " + std::to_string(params.in_channels));
    YOLITE_CHECK(params.weights.size() == params.weight_count(), "conv2d: weight length mismatch");
    const std::size_t k = params.kernel, s = params.stride, p = params.pad;
    YOLITE_CHECK(in.h + 2 * p >= k, "conv2d: height " + std::to_string(in.h) + " too small for kernel");
    YOLITE_CHECK(in.w + 2 * p >= k, "conv2d: width " + std::to_string(in.w) + " too small for kernel");
    const std::size_t oh = window_output(in.h, k, s, p);
    const std::size_t ow = window_output(in.w, k, s, p);

    Tensor out(Shape{in.n, params.out_channels, oh, ow});
    const float* src = input.data().data();
    float* dst = out.mutable_data().data();
    const float* wts = params.weights.data();

    // Per output element the accumulation order is: input channel, then kernel
    // row, then kernel column; starting from 0, bias added last.
    parallel_for(in.n * params.out_channels, exec.threads, [&](std::size_t task) {
        const std::size_t n = task / params.out_channels;
        const std::size_t oc = task % params.out_channels;
        float* plane = dst + (n * params.out_channels + oc) * oh * ow;
        for (std::size_t ic = 0; ic < in.c; ++ic) {
            const float* chan = src + (n * in.c + ic) * in.h * in.w;
            const float* kern = wts + (oc * in.c + ic) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const float wv = kern[ky * k + kx];
                    std::size_t x0, x1;
                    valid_range(ow, in.w, kx, s, p, x0, x1);
                    for (std::size_t oy = 0; oy < oh; ++oy) {
                        const std::size_t iy_p = oy * s + ky;
                        if (iy_p < p || iy_p - p >= in.h) continue;
                        const float* row = chan + (iy_p - p) * in.w;
                        float* orow = plane + oy * ow;
                        if (s == 1) {
                            for (std::size_t ox = x0; ox < x1; ++ox) orow[ox] += wv * row[ox + kx - p];
                        } else {
                            for (std::size_t ox = x0; ox < x1; ++ox) orow[ox] += wv * row[ox * s + kx - p];
                        }
                    }
                }
            }
        }
        if (!params.bias.empty()) {
            const float b = params.bias[oc];
            for (std::size_t i = 0; i < oh * ow; ++i) plane[i] += b;
        }
        if (params.bn) {
            const BatchNorm& bn = *params.bn;
            const float scale = bn.gamma[oc] / std::sqrt(bn.running_var[oc] + BatchNorm::kEpsilon);
            const float mean = bn.running_mean[oc];
            const float shift = bn.beta[oc];
            for (std::size_t i = 0; i < oh * ow; ++i) plane[i] = (plane[i] - mean) * scale + shift;
        }
    });
    check_finite(out, "conv2d");
    return out;
}

Tensor pool2d(const Tensor& input, PoolKind kind, std::size_t k, std::size_t s) {
    YOLITE_CHECK(k > 0 && s > 0, "pool2d: kernel and stride must be positive");
    const Shape& in = input.shape();
    YOLITE_CHECK(in.h >= k && in.w >= k, "pool2d: input " + to_string(in) + " smaller than window");
    const std::size_t oh = (in.h - k) / s + 1;
    const std::size_t ow = (in.w - k) / s + 1;
    Tensor out(Shape{in.n, in.c, oh, ow});
    const double area = static_cast<double>(k * k);
    for (std::size_t n = 0; n < in.n; ++n)
        for (std::size_t c = 0; c < in.c; ++c)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    if (kind == PoolKind::max) {
                        float m = input.at(n, c, oy * s, ox * s);
                        for (std::size_t ky = 0; ky < k; ++ky)
                            for (std::size_t kx = 0; kx < k; ++kx)
                                m = std::max(m, input.at(n, c, oy * s + ky, ox * s + kx));
                        out.at(n, c, oy, ox) = m;
                    } else {
                        double sum = 0.0;
                        for (std::size_t ky = 0; ky < k; ++ky)
                            for (std::size_t kx = 0; kx < k; ++kx)
                                sum += input.at(n, c, oy * s + ky, ox * s + kx);
                        out.at(n, c, oy, ox) = static_cast<float>(sum / area);
                    }
                }
    return out;
}

namespace {

template <class Fn>
Tensor map(const Tensor& input, Fn&& fn, const char* what) {
    Tensor out(input.shape());
    auto src = input.data();
    auto dst = out.mutable_data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = fn(src[i]);
    check_finite(out, what);
    return out;
}

}  // namespace

Tensor leaky_relu(const Tensor& input, float a) {
    YOLITE_CHECK(a > 1.0f, "leaky_relu: divisor a must be > 1");
    return map(input, [a](float x) { return x >= 0.0f ? x : x / a; }, "leaky_relu");
}

Tensor relu(const Tensor& input) {
    return map(input, [](float x) { return x > 0.0f ? x : 0.0f; }, "relu");
}

float sigmoid(float x) {
    // Split by sign so exp never overflows.
    if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
    const float e = std::exp(x);
    return e / (1.0f + e);
}

Tensor sigmoid(const Tensor& input) {
    return map(input, [](float x) { return sigmoid(x); }, "sigmoid");
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    YOLITE_CHECK(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w,
                 "concat_channels: shapes " + to_string(sa) + " and " + to_string(sb) + " disagree");
    Tensor out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
    const std::size_t plane = sa.h * sa.w;
    auto dst = out.mutable_data();
    for (std::size_t n = 0; n < sa.n; ++n) {
        auto pa = a.data().subspan(n * sa.c * plane, sa.c * plane);
        auto pb = b.data().subspan(n * sb.c * plane, sb.c * plane);
        auto d = dst.subspan(n * (sa.c + sb.c) * plane);
        std::copy(pa.begin(), pa.end(), d.begin());
        std::copy(pb.begin(), pb.end(), d.begin() + static_cast<std::ptrdiff_t>(pa.size()));
    }
    return out;
}

Tensor slice_channels(const Tensor& t, std::size_t begin, std::size_t end) {
    const Shape& s = t.shape();
    YOLITE_CHECK(begin <= end && end <= s.c, "slice_channels: range out of bounds");
    Tensor out(Shape{s.n, end - begin, s.h, s.w});
    const std::size_t plane = s.h * s.w;
    auto dst = out.mutable_data();
    for (std::size_t n = 0; n < s.n; ++n) {
        auto src = t.data().subspan((n * s.c + begin) * plane, (end - begin) * plane);
        std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(n * (end - begin) * plane));
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    YOLITE_CHECK(a.shape() == b.shape(),
                 "add: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ");
    Tensor out(a.shape());
    auto dst = out.mutable_data();
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = x[i] + y[i];
    check_finite(out, "add");
    return out;
}

Tensor broadcast_mul(const Tensor& a, const Tensor& m) {
    const Shape& s = a.shape();
    const Shape& ms = m.shape();
    const bool full = ms == s;
    const bool per_channel = ms == Shape{s.n, s.c, 1, 1};
    const bool per_pixel = ms == Shape{s.n, 1, s.h, s.w};
    YOLITE_CHECK(full || per_channel || per_pixel,
                 "broadcast_mul: multiplier " + to_string(ms) + " incompatible with " + to_string(s));
    Tensor out(s);
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t y = 0; y < s.h; ++y)
                for (std::size_t x = 0; x < s.w; ++x) {
                    float f;
                    if (full) f = m.at(n, c, y, x);
                    else if (per_channel) f = m.at(n, c, 0, 0);
                    else f = m.at(n, 0, y, x);
                    out.at(n, c, y, x) = a.at(n, c, y, x) * f;
                }
    check_finite(out, "broadcast_mul");
    return out;
}

Tensor channel_pool(const Tensor& input, PoolKind kind) {
    const Shape& s = input.shape();
    YOLITE_CHECK(s.numel() > 0, "channel_pool: empty input");
    Tensor out(Shape{s.n, s.c, 1, 1});
    const double count = static_cast<double>(s.h * s.w);
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c) {
            if (kind == PoolKind::max) {
                float m = input.at(n, c, 0, 0);
                for (std::size_t y = 0; y < s.h; ++y)
                    for (std::size_t x = 0; x < s.w; ++x) m = std::max(m, input.at(n, c, y, x));
                out.at(n, c, 0, 0) = m;
            } else {
                double sum = 0.0;
                for (std::size_t y = 0; y < s.h; ++y)
                    for (std::size_t x = 0; x < s.w; ++x) sum += input.at(n, c, y, x);
                out.at(n, c, 0, 0) = static_cast<float>(sum / count);
            }
        }
    return out;
}

Tensor spatial_pool(const Tensor& input, PoolKind kind) {
    const Shape& s = input.shape();
    YOLITE_CHECK(s.numel() > 0, "spatial_pool: empty input");
    Tensor out(Shape{s.n, 1, s.h, s.w});
    const double count = static_cast<double>(s.c);
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t x = 0; x < s.w; ++x) {
                if (kind == PoolKind::max) {
                    float m = input.at(n, 0, y, x);
                    for (std::size_t c = 1; c < s.c; ++c) m = std::max(m, input.at(n, c, y, x));
                    out.at(n, 0, y, x) = m;
                } else {
                    double sum = 0.0;
                    for (std::size_t c = 0; c < s.c; ++c) sum += input.at(n, c, y, x);
                    out.at(n, 0, y, x) = static_cast<float>(sum / count);
                }
            }
    return out;
}

Tensor upsample_nearest2x(const Tensor& input) {
    const Shape& s = input.shape();
    Tensor out(Shape{s.n, s.c, s.h * 2, s.w * 2});
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t y = 0; y < s.h * 2; ++y)
                for (std::size_t x = 0; x < s.w * 2; ++x) out.at(n, c, y, x) = input.at(n, c, y / 2, x / 2);
    return out;
}

}  // namespace yolite
