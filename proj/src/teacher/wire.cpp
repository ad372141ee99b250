#include "kmine/teacher/wire.hpp"

#include <array>

namespace kmine::teacher {

std::vector<std::uint32_t> encode_rle(const BinaryMask& mask) {
  std::vector<std::uint32_t> counts;
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  const auto* p = mask.data();
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    const std::uint8_t v = p[i] ? 1 : 0;
    if (v != current) {
      counts.push_back(run);
      current = v;
      run = 0;
    }
    ++run;
  }
  counts.push_back(run);
  return counts;
}

BinaryMask decode_rle(const std::vector<std::uint32_t>& counts, Eigen::Index rows,
                      Eigen::Index cols) {
  if (rows < 0 || cols < 0) throw ValidationError("rle: negative size");
  BinaryMask m(rows, cols);
  auto* p = m.data();
  Eigen::Index pos = 0;
  std::uint8_t v = 0;
  for (const auto c : counts) {
    if (pos + static_cast<Eigen::Index>(c) > m.size()) {
      throw ValidationError("rle: counts exceed mask size");
    }
    std::fill(p + pos, p + pos + c, v);
    pos += c;
    v ^= 1;
  }
  if (pos != m.size()) throw ValidationError("rle: counts do not cover the mask");
  return m;
}

nlohmann::json rle_json(const BinaryMask& mask) {
  return {{"size", {mask.rows(), mask.cols()}}, {"counts", encode_rle(mask)}};
}

BinaryMask mask_from_rle_json(const nlohmann::json& j) {
  const auto& size = j.at("size");
  return decode_rle(j.at("counts").get<std::vector<std::uint32_t>>(), size.at(0).get<Eigen::Index>(),
                    size.at(1).get<Eigen::Index>());
}

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

std::string base64_encode(const std::vector<unsigned char>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    for (int s = 18; s >= 0; s -= 6) out.push_back(kAlphabet[(v >> s) & 63]);
  }
  const auto rest = bytes.size() - i;
  if (rest > 0) {
    std::uint32_t v = bytes[i] << 16;
    if (rest == 2) v |= bytes[i + 1] << 8;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(rest == 2 ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
  std::array<int, 256> lookup;
  lookup.fill(-1);
  for (int k = 0; k < 64; ++k) lookup[static_cast<unsigned char>(kAlphabet[k])] = k;
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  for (const char ch : text) {
    if (ch == '=') break;
    if (ch == '\n' || ch == '\r') continue;
    const int v = lookup[static_cast<unsigned char>(ch)];
    if (v < 0) throw ValidationError("base64: invalid character");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<unsigned char>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

}  // namespace kmine::teacher
