#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gatedgeom/attention.hpp"

namespace gatedgeom {

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
// Throws ConfigError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Flat name -> tensor map: {"tensors": {name: {"shape": [r, c], "data": base64}}}
// with row-major little-endian float64 payloads, plus the gate settings.
std::string checkpoint_json(const ModelParams& params);
ModelParams checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace gatedgeom
