#pragma once

#include "kmine/core/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace kmine::teacher {

/// Row-major run lengths alternating (zeros, ones), starting with a possibly-zero run of zeros.
std::vector<std::uint32_t> encode_rle(const BinaryMask& mask);
BinaryMask decode_rle(const std::vector<std::uint32_t>& counts, Eigen::Index rows,
                      Eigen::Index cols);

/// {"size": [rows, cols], "counts": [...]}
nlohmann::json rle_json(const BinaryMask& mask);
BinaryMask mask_from_rle_json(const nlohmann::json& j);

std::string base64_encode(const std::vector<unsigned char>& bytes);
std::vector<unsigned char> base64_decode(const std::string& text);

}  // namespace kmine::teacher
