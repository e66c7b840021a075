#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace personaforge::text {

std::string to_lower_ascii(std::string_view s);
std::string_view trim(std::string_view s) noexcept;
/// Lowercased, with everything but ASCII letters and digits dropped.
std::string fold_alnum(std::string_view s);
bool is_word_byte(unsigned char c) noexcept;
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

} // namespace personaforge::text
