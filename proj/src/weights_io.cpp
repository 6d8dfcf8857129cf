#include "yolite/weights_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "yolite/rng.hpp"

namespace yolite {

const char* to_string(WeightsErrc code) {
    switch (code) {
        case WeightsErrc::io: return "io";
        case WeightsErrc::bad_magic: return "bad_magic";
        case WeightsErrc::bad_version: return "bad_version";
        case WeightsErrc::fingerprint_mismatch: return "fingerprint_mismatch";
        case WeightsErrc::length_mismatch: return "length_mismatch";
        case WeightsErrc::truncated: return "truncated";
        case WeightsErrc::trailing_bytes: return "trailing_bytes";
        case WeightsErrc::bad_values: return "bad_values";
    }
    return "?";
}

namespace {

class Fnv1a {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001b3ull;
        }
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            const unsigned char b = static_cast<unsigned char>(v >> (8 * i));
            bytes(&b, 1);
        }
    }
    void str(const std::string& s) {
        u64(s.size());
        bytes(s.data(), s.size());
    }
    void floats(const std::vector<float>& v) {
        u64(v.size());
        for (float f : v) u64(std::bit_cast<std::uint32_t>(f));
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ull;
};

// The six arrays of a conv in file order. Missing BN yields empty slots.
std::array<const std::vector<float>*, 6> arrays_of(const ConvParams& p) {
    static const std::vector<float> none;
    if (!p.bn) return {&p.weights, &p.bias, &none, &none, &none, &none};
    return {&p.weights, &p.bias, &p.bn->gamma, &p.bn->beta, &p.bn->running_mean, &p.bn->running_var};
}

std::array<std::size_t, 6> expected_lengths(const ConvParams& p) {
    const std::size_t bn = p.bn ? p.out_channels : 0;
    return {p.weight_count(), p.bias.empty() ? 0 : p.out_channels, bn, bn, bn, bn};
}

class Writer {
public:
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}

    void need(std::size_t n, const std::string& where) const {
        if (b_.size() - pos_ < n)
            throw WeightsError(WeightsErrc::truncated, "weight file truncated in " + where + " at byte " +
                                                           std::to_string(b_.size()));
    }
    std::uint64_t uint(int n, const std::string& where) {
        need(static_cast<std::size_t>(n), where);
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::string bytes(std::size_t n, const std::string& where) {
        need(n, where);
        std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::vector<float> floats(std::size_t n, const std::string& where) {
        need(n * 4, where);
        std::vector<float> v(n);
        for (auto& f : v) f = std::bit_cast<float>(static_cast<std::uint32_t>(uint(4, where)));
        return v;
    }
    std::size_t remaining() const { return b_.size() - pos_; }

private:
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

struct ConvRef {
    std::string name;
    ConvParams* params;
};

std::vector<ConvRef> conv_table(NetworkGraph& g) {
    std::vector<ConvRef> refs;
    g.visit_convs_mut([&](const std::string& name, ConvParams& p) { refs.push_back({name, &p}); });
    return refs;
}

}  // namespace

std::uint64_t graph_fingerprint(const NetworkGraph& g) {
    Fnv1a h;
    g.visit_convs([&](const std::string& name, const ConvParams& p) {
        h.str(name);
        for (std::uint64_t v : {p.in_channels, p.out_channels, p.kernel, p.stride, p.pad}) h.u64(v);
        h.u64(p.bias.empty() ? 0 : 1);
        h.u64(p.bn ? 1 : 0);
    });
    return h.value();
}

void init_seeded(NetworkGraph& g, std::uint64_t seed) {
    Xoshiro256 rng(seed);
    g.visit_convs_mut([&](const std::string&, ConvParams& p) {
        const float bound = std::sqrt(2.0f / static_cast<float>(p.kernel * p.kernel * p.in_channels));
        for (auto& w : p.weights) w = rng.uniform(-bound, bound);
        std::fill(p.bias.begin(), p.bias.end(), 0.0f);
        if (p.bn) p.bn = BatchNorm::identity(p.out_channels);
    });
}

void init_zero(NetworkGraph& g) {
    g.visit_convs_mut([&](const std::string&, ConvParams& p) {
        std::fill(p.weights.begin(), p.weights.end(), 0.0f);
        std::fill(p.bias.begin(), p.bias.end(), 0.0f);
        if (p.bn) p.bn = BatchNorm::identity(p.out_channels);
    });
}

std::uint64_t parameter_hash(const NetworkGraph& g) {
    Fnv1a h;
    g.visit_convs([&](const std::string&, const ConvParams& p) {
        for (const auto* arr : arrays_of(p)) h.floats(*arr);
    });
    return h.value();
}

std::vector<std::uint8_t> serialize_weights(const NetworkGraph& g) {
    Writer w;
    w.raw(kWeightMagic, 4);
    w.u32(kWeightVersion);
    w.u64(graph_fingerprint(g));
    std::uint32_t count = 0;
    g.visit_convs([&](const std::string&, const ConvParams&) { ++count; });
    w.u32(count);
    g.visit_convs([&](const std::string& name, const ConvParams& p) {
        YOLITE_CHECK(name.size() <= 0xffff, "conv id too long for the weight format");
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.raw(name.data(), name.size());
        const auto arrays = arrays_of(p);
        for (const auto* arr : arrays) w.u32(static_cast<std::uint32_t>(arr->size()));
        for (const auto* arr : arrays)
            for (float f : *arr) w.f32(f);
    });
    return w.take();
}

void deserialize_weights(NetworkGraph& g, const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    if (r.bytes(4, "header") != std::string(kWeightMagic, 4))
        throw WeightsError(WeightsErrc::bad_magic, "not a weight file (bad magic)");
    const auto version = r.uint(4, "header");
    if (version != kWeightVersion)
        throw WeightsError(WeightsErrc::bad_version, "unsupported weight file version " + std::to_string(version));
    const auto fingerprint = r.uint(8, "header");
    if (fingerprint != graph_fingerprint(g))
        throw WeightsError(WeightsErrc::fingerprint_mismatch,
                           "weight file was written for a different network than '" + g.name() + "'");
    const auto count = r.uint(4, "header");
    auto table = conv_table(g);
    if (count != table.size())
        throw WeightsError(WeightsErrc::length_mismatch, "weight file holds " + std::to_string(count) +
                                                             " convolutions, network has " +
                                                             std::to_string(table.size()));

    // Parse everything into staging first so a failure leaves the graph untouched.
    std::vector<ConvParams> staged;
    staged.reserve(table.size());
    for (const auto& ref : table) {
        const auto id_len = r.uint(2, "layer '" + ref.name + "'");
        const std::string id = r.bytes(id_len, "layer '" + ref.name + "'");
        if (id != ref.name)
            throw WeightsError(WeightsErrc::length_mismatch,
                               "expected layer '" + ref.name + "', file has '" + id + "'");
        const std::string where = "layer '" + id + "'";
        std::array<std::size_t, 6> lengths{};
        for (auto& l : lengths) l = r.uint(4, where);
        if (lengths != expected_lengths(*ref.params))
            throw WeightsError(WeightsErrc::length_mismatch, "array lengths of " + where + " do not match the network");
        ConvParams p = *ref.params;
        p.weights = r.floats(lengths[0], where);
        p.bias = r.floats(lengths[1], where);
        if (p.bn) {
            p.bn->gamma = r.floats(lengths[2], where);
            p.bn->beta = r.floats(lengths[3], where);
            p.bn->running_mean = r.floats(lengths[4], where);
            p.bn->running_var = r.floats(lengths[5], where);
        }
        try {
            p.validate();
        } catch (const Error& e) {
            throw WeightsError(WeightsErrc::bad_values, where + ": " + e.what());
        }
        staged.push_back(std::move(p));
    }
    if (r.remaining() != 0)
        throw WeightsError(WeightsErrc::trailing_bytes,
                           std::to_string(r.remaining()) + " unexpected bytes after the last layer");
    for (std::size_t i = 0; i < table.size(); ++i) *table[i].params = std::move(staged[i]);
}

void save(const NetworkGraph& g, const std::filesystem::path& path) {
    const auto bytes = serialize_weights(g);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw WeightsError(WeightsErrc::io, "cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw WeightsError(WeightsErrc::io, "write to '" + path.string() + "' failed");
}

void load(NetworkGraph& g, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WeightsError(WeightsErrc::io, "cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    deserialize_weights(g, bytes);
}

}  // namespace yolite
