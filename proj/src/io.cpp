#include "qdgf/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "qdgf/errors.hpp"

namespace qdgf {
namespace {

constexpr const char* kMagic = "# qdgf-field 1";

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InvalidArgument("field file: bad number '" + s + "' in " + what);
  }
  if (used != s.size()) throw InvalidArgument("field file: bad number '" + s + "' in " + what);
  return v;
}

long parse_long(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(s, &used);
  } catch (const std::exception&) {
    throw InvalidArgument("field file: bad integer '" + s + "' in " + what);
  }
  if (used != s.size()) throw InvalidArgument("field file: bad integer '" + s + "' in " + what);
  return v;
}

std::vector<std::string> header_values(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("field file: truncated header, missing " + key);
  const std::string prefix = "# " + key + " ";
  if (line.rfind(prefix, 0) != 0) throw InvalidArgument("field file: expected header line '" + key + "'");
  std::vector<std::string> out;
  std::istringstream is(line.substr(prefix.size()));
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> column_names(const Grid& g) {
  std::vector<std::string> cols;
  for (int k = 0; k < g.dim(); ++k) cols.push_back("i" + std::to_string(k));
  for (int k = 0; k < g.dim(); ++k) cols.push_back("x" + std::to_string(k));
  for (int m = 0; m < g.components(); ++m) {
    if (g.is_complex()) {
      cols.push_back("re" + std::to_string(m));
      cols.push_back("im" + std::to_string(m));
    } else {
      cols.push_back("v" + std::to_string(m));
    }
  }
  return cols;
}

std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_field(const std::string& path, const Field& field) {
  const Grid& g = field.grid();
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
  std::vector<std::string> hw, pts;
  for (int k = 0; k < g.dim(); ++k) {
    hw.push_back(format_double(g.half_widths()[static_cast<std::size_t>(k)]));
    pts.push_back(std::to_string(g.points_per_axis()[static_cast<std::size_t>(k)]));
  }
  const auto cols = column_names(g);
  out << kMagic << "\n"
      << "# dim " << g.dim() << "\n"
      << "# half_widths " << join(hw, ' ') << "\n"
      << "# points " << join(pts, ' ') << "\n"
      << "# components " << g.components() << "\n"
      << "# kind " << to_string(g.kind()) << "\n"
      << "# columns " << join(cols, ' ') << "\n"
      << join(cols, ',') << "\n";
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    std::vector<std::string> row;
    const auto idx = g.multi_index(i);
    for (int k = 0; k < g.dim(); ++k) row.push_back(std::to_string(idx[static_cast<std::size_t>(k)]));
    for (int k = 0; k < g.dim(); ++k) row.push_back(format_double(g.coordinate(i, k)));
    for (int m = 0; m < g.components(); ++m) {
      const std::complex<double> v = field.value(i, m);
      row.push_back(format_double(v.real()));
      if (g.is_complex()) row.push_back(format_double(v.imag()));
    }
    out << join(row, ',') << "\n";
  }
  if (!out) throw InvalidArgument("failed writing '" + path + "'");
}

Field read_field(const std::string& path, std::optional<FieldKind> expected_kind) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open field file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw InvalidArgument("'" + path + "' is not a qdgf field file");

  const auto dim_v = header_values(in, "dim");
  if (dim_v.size() != 1) throw InvalidArgument("field file: bad dim line");
  const long dim = parse_long(dim_v[0], "dim");
  if (dim < 1) throw InvalidArgument("field file: dim must be positive");
  const auto hw_v = header_values(in, "half_widths");
  const auto pts_v = header_values(in, "points");
  if (hw_v.size() != static_cast<std::size_t>(dim) || pts_v.size() != static_cast<std::size_t>(dim))
    throw InvalidArgument("field file: header dimension mismatch");
  std::vector<double> hw;
  std::vector<int> pts;
  for (long k = 0; k < dim; ++k) {
    hw.push_back(parse_double(hw_v[static_cast<std::size_t>(k)], "half_widths"));
    pts.push_back(static_cast<int>(parse_long(pts_v[static_cast<std::size_t>(k)], "points")));
  }
  const auto comp_v = header_values(in, "components");
  if (comp_v.size() != 1) throw InvalidArgument("field file: bad components line");
  const auto kind_v = header_values(in, "kind");
  if (kind_v.size() != 1) throw InvalidArgument("field file: bad kind line");
  const FieldKind kind = field_kind_from_string(kind_v[0]);
  if (expected_kind && *expected_kind != kind)
    throw InvalidArgument("field file kind '" + kind_v[0] + "' does not match the run kind '" +
                          to_string(*expected_kind) + "'");

  const GridPtr grid = build_grid(static_cast<int>(dim), hw, pts,
                                  static_cast<int>(parse_long(comp_v[0], "components")), kind);
  const auto cols = column_names(*grid);
  if (header_values(in, "columns") != cols) throw InvalidArgument("field file: unexpected column order");
  if (!std::getline(in, line) || line != join(cols, ',')) throw InvalidArgument("field file: missing column row");

  Eigen::VectorXcd values(static_cast<Eigen::Index>(grid->dof_count()));
  const int N = grid->components();
  for (std::size_t i = 0; i < grid->node_count(); ++i) {
    if (!std::getline(in, line)) throw InvalidArgument("field file: truncated, expected " +
                                                       std::to_string(grid->node_count()) + " rows");
    const auto cells = split(line, ',');
    if (cells.size() != cols.size()) throw InvalidArgument("field file: row " + std::to_string(i) + " has wrong width");
    const auto idx = grid->multi_index(i);
    for (int k = 0; k < grid->dim(); ++k)
      if (parse_long(cells[static_cast<std::size_t>(k)], "index") != idx[static_cast<std::size_t>(k)])
        throw InvalidArgument("field file: row " + std::to_string(i) + " is out of node order");
    std::size_t c = 2 * static_cast<std::size_t>(grid->dim());
    for (int m = 0; m < N; ++m) {
      const double re = parse_double(cells[c++], "values");
      const double im = grid->is_complex() ? parse_double(cells[c++], "values") : 0.0;
      values[static_cast<Eigen::Index>(grid->dof(i, m))] = {re, im};
    }
  }
  while (std::getline(in, line))
    if (!line.empty()) throw InvalidArgument("field file: trailing data after the last node");
  return Field(grid, std::move(values));
}

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != header.size()) throw InvalidArgument("CSV row width does not match the header");
  rows.push_back(std::move(row));
}

void CsvTable::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
  out << join(header, ',') << "\n";
  for (const auto& r : rows) out << join(r, ',') << "\n";
  if (!out) throw InvalidArgument("failed writing '" + path + "'");
}

}  // namespace qdgf
