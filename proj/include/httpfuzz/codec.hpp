#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace httpfuzz {

std::string base64_encode(std::string_view in);
std::optional<std::string> base64_decode(std::string_view in);

std::string base32_encode(std::string_view in);
std::optional<std::string> base32_decode(std::string_view in);

std::string hex_encode(std::string_view in);
std::optional<std::string> hex_decode(std::string_view in);

std::string url_encode(std::string_view in);
std::optional<std::string> url_decode(std::string_view in);

std::uint64_t fnv1a64(std::string_view in);

}  // namespace httpfuzz
