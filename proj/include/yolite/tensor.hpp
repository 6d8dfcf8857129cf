#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "yolite/error.hpp"

namespace yolite {

struct Shape {
    std::size_t n = 0;
    std::size_t c = 0;
    std::size_t h = 0;
    std::size_t w = 0;

    std::size_t numel() const { return n * c * h * w; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

// Dense NCHW float tensor. Values are always finite: constructors and every
// operation below reject NaN/Inf instead of storing them.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> data);

    const Shape& shape() const { return shape_; }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<const float> data() const { return data_; }
    std::span<float> mutable_data() { return data_; }

    std::size_t index(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
        return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }
    float at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
        return data_[index(n, c, y, x)];
    }
    float& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
        return data_[index(n, c, y, x)];
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_{};
    std::vector<float> data_;
};

// Throws if any element is NaN or infinite; `what` names the producing op.
void check_finite(const Tensor& t, const char* what);

// Inference-mode batch norm. Applied as (x - mean) * (gamma / sqrt(var + eps)) + beta.
struct BatchNorm {
    static constexpr float kEpsilon = 1e-5f;

    std::vector<float> gamma;
    std::vector<float> beta;
    std::vector<float> running_mean;
    std::vector<float> running_var;

    static BatchNorm identity(std::size_t channels);
};

struct ConvParams {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t pad = 0;
    std::vector<float> weights;  // out * in * k * k, OIHW
    std::vector<float> bias;     // empty or out_channels
    std::optional<BatchNorm> bn;

    // Zero-initialised conv. `pad` defaults to "same" (k / 2).
    static ConvParams make(std::size_t in, std::size_t out, std::size_t k, std::size_t stride = 1,
                           bool with_bias = false, bool with_bn = true);
    static ConvParams make(std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                           std::size_t pad, bool with_bias, bool with_bn);

    std::size_t weight_count() const { return out_channels * in_channels * kernel * kernel; }
    // Learnable parameters: weights, bias, BN gamma and beta. Running statistics are buffers.
    std::size_t param_count() const;

    // Throws on inconsistent array lengths, negative variances or non-finite values.
    void validate() const;
};

// Output spatial extent of a window op: floor((in + 2p - k) / s) + 1.
std::size_t window_output(std::size_t in, std::size_t k, std::size_t s, std::size_t p);

// Serial vs multi-threaded execution. Work is split over (batch, output channel)
// so every output element is produced by exactly the same instruction sequence
// regardless of thread count.
struct ExecPolicy {
    unsigned threads = 1;
};

enum class PoolKind { max, avg };

Tensor conv2d(const Tensor& input, const ConvParams& params, const ExecPolicy& exec = {});
Tensor pool2d(const Tensor& input, PoolKind kind, std::size_t k, std::size_t s);

// y = x for x >= 0, x / a otherwise. Requires a > 1.
Tensor leaky_relu(const Tensor& input, float a = 10.0f);
Tensor relu(const Tensor& input);
Tensor sigmoid(const Tensor& input);
float sigmoid(float x);

Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& t, std::size_t begin, std::size_t end);
Tensor add(const Tensor& a, const Tensor& b);
// m is (n,c,1,1), (n,1,h,w) or the full shape of a.
Tensor broadcast_mul(const Tensor& a, const Tensor& m);

// Global reduction over h,w per channel -> (n,c,1,1).
Tensor channel_pool(const Tensor& input, PoolKind kind);
// Reduction over channels per pixel -> (n,1,h,w).
Tensor spatial_pool(const Tensor& input, PoolKind kind);

Tensor upsample_nearest2x(const Tensor& input);

}  // namespace yolite
