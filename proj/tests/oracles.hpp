#pragma once

// Naive reference implementations used only by the tests. They are written as
// plain loops over the definitions, without any of the library's fast paths.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "yolite/blocks.hpp"
#include "yolite/detect.hpp"
#include "yolite/loss.hpp"
#include "yolite/rng.hpp"
#include "yolite/tensor.hpp"

namespace oracle {

using yolite::Box;
using yolite::ConvParams;
using yolite::Detection;
using yolite::Shape;
using yolite::Tensor;
using yolite::Xoshiro256;

// Owning copy, safe to iterate over a temporary tensor.
inline std::vector<float> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

inline Tensor random_tensor(Xoshiro256& rng, Shape s, float lo = -1.0f, float hi = 1.0f) {
    std::vector<float> v(s.numel());
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor(s, std::move(v));
}

inline ConvParams random_conv(Xoshiro256& rng, std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                              std::size_t pad, bool bias, bool bn) {
    ConvParams p = ConvParams::make(in, out, k, stride, pad, bias, bn);
    for (auto& w : p.weights) w = rng.uniform(-1, 1);
    for (auto& b : p.bias) b = rng.uniform(-1, 1);
    if (p.bn) {
        for (auto& g : p.bn->gamma) g = rng.uniform(0.5f, 1.5f);
        for (auto& b : p.bn->beta) b = rng.uniform(-0.5f, 0.5f);
        for (auto& m : p.bn->running_mean) m = rng.uniform(-0.5f, 0.5f);
        for (auto& v : p.bn->running_var) v = rng.uniform(0.1f, 2.0f);
    }
    return p;
}

// Direct convolution: one output element at a time, window taps in
// (input channel, kernel row, kernel column) order, padded taps skipped.
inline Tensor conv2d(const Tensor& x, const ConvParams& p) {
    const Shape in = x.shape();
    const std::size_t k = p.kernel, s = p.stride, pad = p.pad;
    const std::size_t oh = (in.h + 2 * pad - k) / s + 1;
    const std::size_t ow = (in.w + 2 * pad - k) / s + 1;
    Tensor y(Shape{in.n, p.out_channels, oh, ow});
    for (std::size_t n = 0; n < in.n; ++n)
        for (std::size_t oc = 0; oc < p.out_channels; ++oc)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    float acc = 0.0f;
                    for (std::size_t ic = 0; ic < in.c; ++ic)
                        for (std::size_t ky = 0; ky < k; ++ky)
                            for (std::size_t kx = 0; kx < k; ++kx) {
                                const long iy = static_cast<long>(oy * s + ky) - static_cast<long>(pad);
                                const long ix = static_cast<long>(ox * s + kx) - static_cast<long>(pad);
                                if (iy < 0 || ix < 0 || iy >= static_cast<long>(in.h) || ix >= static_cast<long>(in.w))
                                    continue;
                                acc += p.weights[((oc * in.c + ic) * k + ky) * k + kx] *
                                       x.at(n, ic, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                            }
                    if (!p.bias.empty()) acc += p.bias[oc];
                    if (p.bn) {
                        const float scale =
                            p.bn->gamma[oc] / std::sqrt(p.bn->running_var[oc] + yolite::BatchNorm::kEpsilon);
                        acc = (acc - p.bn->running_mean[oc]) * scale + p.bn->beta[oc];
                    }
                    y.at(n, oc, oy, ox) = acc;
                }
    return y;
}

// Window scan; the average is the double-precision mean of the window.
inline Tensor pool2d(const Tensor& x, bool is_max, std::size_t k, std::size_t s) {
    const Shape in = x.shape();
    const std::size_t oh = (in.h - k) / s + 1, ow = (in.w - k) / s + 1;
    Tensor y(Shape{in.n, in.c, oh, ow});
    for (std::size_t n = 0; n < in.n; ++n)
        for (std::size_t c = 0; c < in.c; ++c)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    float best = -INFINITY;
                    double sum = 0.0;
                    for (std::size_t ky = 0; ky < k; ++ky)
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const float v = x.at(n, c, oy * s + ky, ox * s + kx);
                            if (v > best) best = v;
                            sum += v;
                        }
                    y.at(n, c, oy, ox) = is_max ? best : static_cast<float>(sum / static_cast<double>(k * k));
                }
    return y;
}

// Global reduction over h, w per channel -> (n, c, 1, 1).
inline Tensor channel_pool(const Tensor& x, bool is_max) {
    const Shape in = x.shape();
    Tensor y(Shape{in.n, in.c, 1, 1});
    for (std::size_t n = 0; n < in.n; ++n)
        for (std::size_t c = 0; c < in.c; ++c) {
            float best = -INFINITY;
            double sum = 0.0;
            for (std::size_t i = 0; i < in.h; ++i)
                for (std::size_t j = 0; j < in.w; ++j) {
                    best = std::max(best, x.at(n, c, i, j));
                    sum += x.at(n, c, i, j);
                }
            y.at(n, c, 0, 0) = is_max ? best : static_cast<float>(sum / static_cast<double>(in.h * in.w));
        }
    return y;
}

// Reduction over channels per pixel -> (n, 1, h, w).
inline Tensor spatial_pool(const Tensor& x, bool is_max) {
    const Shape in = x.shape();
    Tensor y(Shape{in.n, 1, in.h, in.w});
    for (std::size_t n = 0; n < in.n; ++n)
        for (std::size_t i = 0; i < in.h; ++i)
            for (std::size_t j = 0; j < in.w; ++j) {
                float best = -INFINITY;
                double sum = 0.0;
                for (std::size_t c = 0; c < in.c; ++c) {
                    best = std::max(best, x.at(n, c, i, j));
                    sum += x.at(n, c, i, j);
                }
                y.at(n, 0, i, j) = is_max ? best : static_cast<float>(sum / static_cast<double>(in.c));
            }
    return y;
}

inline Tensor upsample2x(const Tensor& x) {
    const Shape in = x.shape();
    Tensor y(Shape{in.n, in.c, in.h * 2, in.w * 2});
    for (std::size_t n = 0; n < in.n; ++n)
        for (std::size_t c = 0; c < in.c; ++c)
            for (std::size_t i = 0; i < in.h * 2; ++i)
                for (std::size_t j = 0; j < in.w * 2; ++j) y.at(n, c, i, j) = x.at(n, c, i / 2, j / 2);
    return y;
}

// m has shape (n,c,1,1), (n,1,h,w) or the full shape of x.
inline Tensor broadcast_mul(const Tensor& x, const Tensor& m) {
    const Shape in = x.shape();
    const Shape ms = m.shape();
    Tensor y(in);
    for (std::size_t n = 0; n < in.n; ++n)
        for (std::size_t c = 0; c < in.c; ++c)
            for (std::size_t i = 0; i < in.h; ++i)
                for (std::size_t j = 0; j < in.w; ++j) {
                    const std::size_t mc = ms.c == 1 ? 0 : c;
                    const std::size_t mi = ms.h == 1 ? 0 : i;
                    const std::size_t mj = ms.w == 1 ? 0 : j;
                    y.at(n, c, i, j) = x.at(n, c, i, j) * m.at(n, mc, mi, mj);
                }
    return y;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    Tensor y(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) y.mutable_data()[i] = a.data()[i] + b.data()[i];
    return y;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double relative_error(double got, double want) {
    return std::abs(got - want) / std::max(std::abs(want), 1e-12);
}

// Intersection over union from corner coordinates, in double.
inline double iou(const Box& a, const Box& b) {
    const double ax1 = a.cx - a.w / 2.0, ax2 = a.cx + a.w / 2.0, ay1 = a.cy - a.h / 2.0, ay2 = a.cy + a.h / 2.0;
    const double bx1 = b.cx - b.w / 2.0, bx2 = b.cx + b.w / 2.0, by1 = b.cy - b.h / 2.0, by2 = b.cy + b.h / 2.0;
    const double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
    const double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
    const double inter = iw * ih;
    const double uni = double(a.w) * a.h + double(b.w) * b.h - inter;
    return uni > 0 ? inter / uni : 0.0;
}

// Greedy NMS by repeated linear selection of the best remaining detection.
// O(n^2): no sorting, the ranking rule is applied directly at each pick.
inline std::vector<Detection> nms(const std::vector<Detection>& in, float conf_thresh, float iou_thresh) {
    std::vector<bool> alive(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) alive[i] = in[i].confidence > conf_thresh;
    auto better = [&](std::size_t a, std::size_t b) {
        if (in[a].confidence != in[b].confidence) return in[a].confidence > in[b].confidence;
        if (in[a].class_id != in[b].class_id) return in[a].class_id < in[b].class_id;
        return a < b;
    };
    std::vector<Detection> kept;
    for (;;) {
        std::size_t best = in.size();
        for (std::size_t i = 0; i < in.size(); ++i)
            if (alive[i] && (best == in.size() || better(i, best))) best = i;
        if (best == in.size()) break;
        kept.push_back(in[best]);
        alive[best] = false;
        for (std::size_t i = 0; i < in.size(); ++i)
            if (alive[i] && in[i].class_id == in[best].class_id && oracle::iou(in[i].box, in[best].box) > iou_thresh)
                alive[i] = false;
    }
    return kept;
}

// Complete-IoU loss written in the collapsed (16/pi^4) delta^4 form.
inline double ciou(const yolite::LossBox& p, const yolite::LossBox& g) {
    const double px1 = p.cx - p.w / 2, px2 = p.cx + p.w / 2, py1 = p.cy - p.h / 2, py2 = p.cy + p.h / 2;
    const double gx1 = g.cx - g.w / 2, gx2 = g.cx + g.w / 2, gy1 = g.cy - g.h / 2, gy2 = g.cy + g.h / 2;
    const double iw = std::max(0.0, std::min(px2, gx2) - std::max(px1, gx1));
    const double ih = std::max(0.0, std::min(py2, gy2) - std::max(py1, gy1));
    const double inter = iw * ih;
    const double iou = inter / (p.w * p.h + g.w * g.h - inter);
    const double rho2 = (p.cx - g.cx) * (p.cx - g.cx) + (p.cy - g.cy) * (p.cy - g.cy);
    const double cw = std::max(px2, gx2) - std::min(px1, gx1);
    const double ch = std::max(py2, gy2) - std::min(py1, gy1);
    const double c2 = cw * cw + ch * ch;
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const double delta = std::atan(g.w / g.h) - std::atan(p.w / p.h);
    const double d2 = delta * delta;
    const double aspect = (16.0 / (pi2 * pi2)) * d2 * d2 / (1.0 - iou + (4.0 / pi2) * d2);
    return 1.0 - iou + (c2 > 0 ? rho2 / c2 : 0.0) + (d2 > 0 ? aspect : 0.0);
}

// Eqs. 12-13 written out element by element in double precision.
inline std::vector<double> cbam(const yolite::Cbam& m, const Tensor& f) {
    const Shape s = f.shape();
    const std::size_t c = s.c, hid = c / m.reduction;
    const Tensor avg = channel_pool(f, false), mx = channel_pool(f, true);
    const auto& w1 = m.fc1.conv.weights;
    const auto& b1 = m.fc1.conv.bias;
    const auto& w2 = m.fc2.conv.weights;
    const auto& b2 = m.fc2.conv.bias;
    auto mlp = [&](const Tensor& v, std::size_t o) {
        double out = b2[o];
        for (std::size_t j = 0; j < hid; ++j) {
            double hsum = b1[j];
            for (std::size_t i = 0; i < c; ++i) hsum += double(w1[j * c + i]) * v.at(0, i, 0, 0);
            out += double(w2[o * hid + j]) * std::max(0.0, hsum);
        }
        return out;
    };
    std::vector<double> fprime(s.numel());
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double mc = sigmoid(mlp(avg, ch) + mlp(mx, ch));
        for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t x = 0; x < s.w; ++x) fprime[(ch * s.h + y) * s.w + x] = mc * f.at(0, ch, y, x);
    }
    std::vector<double> mxmap(s.h * s.w, -INFINITY), avgmap(s.h * s.w, 0.0);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < s.h * s.w; ++i) {
            mxmap[i] = std::max(mxmap[i], fprime[ch * s.h * s.w + i]);
            avgmap[i] += fprime[ch * s.h * s.w + i] / double(c);
        }
    const auto& ws = m.spatial.conv.weights;
    std::vector<double> out(s.numel());
    for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) {
            double acc = m.spatial.conv.bias[0];
            for (std::size_t plane = 0; plane < 2; ++plane)
                for (std::size_t ky = 0; ky < 7; ++ky)
                    for (std::size_t kx = 0; kx < 7; ++kx) {
                        const long iy = long(y + ky) - 3, ix = long(x + kx) - 3;
                        if (iy < 0 || ix < 0 || iy >= long(s.h) || ix >= long(s.w)) continue;
                        const auto& map = plane == 0 ? mxmap : avgmap;
                        acc += double(ws[(plane * 7 + ky) * 7 + kx]) * map[std::size_t(iy) * s.w + std::size_t(ix)];
                    }
            const double ms = sigmoid(acc);
            for (std::size_t ch = 0; ch < c; ++ch) out[(ch * s.h + y) * s.w + x] = ms * fprime[(ch * s.h + y) * s.w + x];
        }
    return out;
}


// True when some pair of box edges lies within `margin`. IoU and the enclosing
// box switch branches there, so the loss is not differentiable.
inline bool near_kink(const yolite::LossBox& p, const yolite::LossBox& g, double margin) {
    const double pe[2][2] = {{p.cx - p.w / 2, p.cx + p.w / 2}, {p.cy - p.h / 2, p.cy + p.h / 2}};
    const double ge[2][2] = {{g.cx - g.w / 2, g.cx + g.w / 2}, {g.cy - g.h / 2, g.cy + g.h / 2}};
    for (int axis = 0; axis < 2; ++axis)
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                if (std::abs(pe[axis][a] - ge[axis][b]) < margin) return true;
    return false;
}

// Central finite differences of ciou_loss w.r.t. (cx, cy, w, h) of the prediction.
inline std::array<double, 4> ciou_fd(const yolite::LossBox& p, const yolite::LossBox& g, double h) {
    std::array<double, 4> out{};
    for (int k = 0; k < 4; ++k) {
        yolite::LossBox up = p, dn = p;
        double* fu[4] = {&up.cx, &up.cy, &up.w, &up.h};
        double* fdn[4] = {&dn.cx, &dn.cy, &dn.w, &dn.h};
        *fu[k] += h;
        *fdn[k] -= h;
        out[k] = (yolite::ciou_loss(up, g).value - yolite::ciou_loss(dn, g).value) / (2 * h);
    }
    return out;
}

}  // namespace oracle
