#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace drpn::ingest {

/// Splits on single tab characters; empty fields are kept.
std::vector<std::string_view> split_tabs(std::string_view line);
/// Splits on runs of ASCII whitespace; empty tokens are dropped.
std::vector<std::string_view> split_ws(std::string_view text);

std::ifstream open_input(const std::filesystem::path& path);
std::ofstream open_output(const std::filesystem::path& path);

/// "path:line: message"
std::string where(const std::string& source, std::size_t line);

/// Shortest decimal that round-trips (%.17g).
std::string format_double(double v);

}  // namespace drpn::ingest
