#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "yolite/network.hpp"

namespace yolite {

struct SelfTestCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct SelfTestOptions {
    ModelKind model = ModelKind::proposed;
    std::size_t classes = 80;
    std::uint64_t seed = 42;
    unsigned threads = 2;
    std::optional<std::filesystem::path> weights;  // when set, loading it is one of the checks
};

// Fast runtime invariant suite behind `yolite selftest`.
std::vector<SelfTestCheck> run_selftest(const SelfTestOptions& opts);

}  // namespace yolite
