#pragma once

#include <span>
#include <string>

#include "json.hpp"
#include "yolite/analysis.hpp"
#include "yolite/detect.hpp"
#include "yolite/network.hpp"

namespace yolite {

// Rounds to 6 significant digits so the JSON text is stable across platforms.
double round_sig6(double v);

nlohmann::json describe_json(const NetworkGraph& g, std::size_t input_size);
std::string describe_text(const NetworkGraph& g, std::size_t input_size);

nlohmann::json flops_json(const FlopsReport& r);
std::string flops_text(const FlopsReport& r);

nlohmann::json detections_json(std::span<const Detection> dets, std::size_t classes);

}  // namespace yolite
