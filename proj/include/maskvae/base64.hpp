#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace maskvae {

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
// Padded standard alphabet; throws InvalidInput otherwise. Line breaks are
// skipped.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace maskvae
