#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace fedpoison::csv {

/// Header plus rows of raw cell text, as read from a comma-separated file.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Comma-separated, first line is the header. Double-quoted cells may contain
/// commas and doubled quotes. A UTF-8 BOM and CR line endings are tolerated;
/// header names and cells are trimmed of surrounding whitespace.
Table parse(std::istream& in);
Table read_file(const std::filesystem::path& path);

/// Splits one line into cells (same quoting rules as parse).
std::vector<std::string> split_line(std::string_view line);

enum class CellKind { empty, finite, non_finite, text };

/// Classifies a trimmed cell; `value` receives the number for finite cells.
/// Inf, Infinity and NaN (any case, optional sign) count as non-finite.
CellKind classify(std::string_view cell, double& value);

}  // namespace fedpoison::csv
