#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace msde::io {

/// Round-trip decimal representation used in every CSV ('.' decimal point,
/// locale independent).
[[nodiscard]] std::string num(double v);

/// RFC-4180 field quoting for free text.
[[nodiscard]] std::string csv_field(std::string_view s);

/// FNV-1a 64-bit digest, rendered as 16 hex digits by hex_digest.
[[nodiscard]] std::uint64_t fnv1a64(std::string_view bytes);
[[nodiscard]] std::string hex_digest(std::string_view bytes);

[[nodiscard]] std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, std::string_view contents);

}  // namespace msde::io
