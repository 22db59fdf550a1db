#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "qdgf/errors.hpp"
#include "qdgf/io.hpp"

using namespace qdgf;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "qdgf_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

Field random_field(GridPtr g, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Eigen::VectorXcd v(static_cast<Eigen::Index>(g->dof_count()));
  for (auto& x : v) x = g->is_complex() ? std::complex<double>(nd(gen), nd(gen)) : std::complex<double>(nd(gen), 0.0);
  return Field(g, v);
}

}  // namespace

TEST_CASE("format_double round-trips exactly") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) CHECK(std::stod(format_double(x)) == x);
}

TEST_CASE("field files round-trip bit for bit") {
  const auto path = temp_file("rt.field");
  for (auto [g, seed] : {std::pair{build_grid(1, {3.0}, {7}, 1, FieldKind::complex), 1u},
                         std::pair{build_grid(3, {1.0, 2.0, 0.5}, {3, 5, 3}, 3, FieldKind::real), 2u},
                         std::pair{build_grid(2, {1.0}, {5}, 2, FieldKind::complex), 3u}}) {
    const Field f = random_field(g, seed);
    write_field(path.string(), f);
    const Field r = read_field(path.string(), g->kind());
    CHECK(r.grid().same_layout(*g));
    CHECK(r.values() == f.values());
  }
}

TEST_CASE("field reader rejects malformed files") {
  const auto good = temp_file("good.field");
  const auto bad = temp_file("bad.field");
  auto g = build_grid(1, {1.0}, {5}, 1, FieldKind::real);
  write_field(good.string(), random_field(g, 4));
  const std::string text = slurp(good);

  CHECK_THROWS_AS(read_field(good.string(), FieldKind::complex), InvalidArgument);
  CHECK_THROWS_AS(read_field(temp_file("missing.field").string()), InvalidArgument);

  // truncated: drop the last row
  std::string t = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  spit(bad, t);
  CHECK_THROWS_AS(read_field(bad.string()), InvalidArgument);
  // trailing data
  spit(bad, text + "1,2,3\n");
  CHECK_THROWS_AS(read_field(bad.string()), InvalidArgument);
  // wrong magic
  spit(bad, "# something else\n" + text.substr(text.find('\n') + 1));
  CHECK_THROWS_AS(read_field(bad.string()), InvalidArgument);
  // row width
  std::string w = text;
  w.insert(w.size() - 1, ",7");
  spit(bad, w);
  CHECK_THROWS_AS(read_field(bad.string()), InvalidArgument);
  // out-of-order rows: swap the first two data rows
  std::vector<std::string> lines;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) lines.push_back(l);
  std::swap(lines[8], lines[9]);
  std::string swapped;
  for (const auto& l : lines) swapped += l + "\n";
  spit(bad, swapped);
  CHECK_THROWS_AS(read_field(bad.string()), InvalidArgument);
  // non-numeric value
  std::string nn = text;
  nn.replace(nn.rfind(',') + 1, 3, "abc");
  spit(bad, nn);
  CHECK_THROWS_AS(read_field(bad.string()), InvalidArgument);
}

TEST_CASE("CSV table") {
  CsvTable t{{"a", "b"}, {}};
  t.add_row({"1", "2"});
  CHECK_THROWS_AS(t.add_row({"1"}), InvalidArgument);
  const auto p = temp_file("t.csv");
  t.write(p.string());
  CHECK(slurp(p) == "a,b\n1,2\n");
}
