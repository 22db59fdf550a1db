#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qdgf/grid.hpp"

namespace qdgf {

/// 17 significant digits, enough for an exact double round trip.
std::string format_double(double x);

/// Text header (dims, extents, points, components, kind, column order)
/// followed by one CSV row per node: multi-index, coordinates, values.
void write_field(const std::string& path, const Field& field);
/// Throws InvalidArgument on a malformed or truncated file, or when the
/// stored kind differs from `expected_kind`.
Field read_field(const std::string& path, std::optional<FieldKind> expected_kind = std::nullopt);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  void write(const std::string& path) const;
};

}  // namespace qdgf
