#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "yolite/network.hpp"

namespace yolite {

// File layout (little-endian):
//   "YLTW" | u32 version | u64 graph fingerprint | u32 conv count
//   per conv, in topological order:
//     u16 id length | id bytes |
//     u32 x6 lengths (weights, bias, gamma, beta, running_mean, running_var) |
//     the six arrays as f32, absent arrays have length 0
inline constexpr char kWeightMagic[4] = {'Y', 'L', 'T', 'W'};
inline constexpr std::uint32_t kWeightVersion = 1;

enum class WeightsErrc {
    io,
    bad_magic,
    bad_version,
    fingerprint_mismatch,
    length_mismatch,
    truncated,
    trailing_bytes,
    bad_values,
};

const char* to_string(WeightsErrc code);

class WeightsError : public Error {
public:
    WeightsError(WeightsErrc code, const std::string& msg) : Error(msg), code_(code) {}
    WeightsErrc code() const { return code_; }

private:
    WeightsErrc code_;
};

// Hash of the conv table: names, shapes, stride/pad and which arrays exist.
std::uint64_t graph_fingerprint(const NetworkGraph& g);

// He-style uniform weights in +-sqrt(2 / (k^2 * C_in)); bias 0, BN gamma 1,
// beta 0, mean 0, var 1.
void init_seeded(NetworkGraph& g, std::uint64_t seed);
void init_zero(NetworkGraph& g);

// FNV-1a over every parameter and buffer array.
std::uint64_t parameter_hash(const NetworkGraph& g);

std::vector<std::uint8_t> serialize_weights(const NetworkGraph& g);
// All-or-nothing: on any error `g` is left untouched.
void deserialize_weights(NetworkGraph& g, const std::vector<std::uint8_t>& bytes);

void save(const NetworkGraph& g, const std::filesystem::path& path);
void load(NetworkGraph& g, const std::filesystem::path& path);

}  // namespace yolite
