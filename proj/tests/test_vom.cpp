#include "doctest.h"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <sstream>

#include "vomfem/errors.hpp"
#include "vomfem/random.hpp"
#include "vomfem/vom.hpp"

using namespace vomfem;

namespace {

std::shared_ptr<const TriangleMesh> unit_square(std::size_t n) {
  return std::make_shared<const TriangleMesh>(build_rectangle_mesh(n, n, 1.0, 1.0));
}

std::vector<std::size_t> containing_cells(const TriangleMesh& mesh, Point2 p) {
  std::vector<std::size_t> cells;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    if (inside_reference_triangle(mesh.geometry(c).to_reference(p))) cells.push_back(c);
  }
  return cells;
}

// Exact sum in 512-bit binary floating point, rounded once to double.
double exact_sum(std::span<const double> values) {
  using Big = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<512,
      boost::multiprecision::digit_base_2>>;
  Big sum = 0;
  for (double v : values) sum += Big(v);
  return sum.convert_to<double>();
}

}  // namespace

TEST_CASE("locating an interior point") {
  const auto mesh = unit_square(8);
  const PointLocator locator(mesh);
  const auto found = locator.locate({0.5, 0.5});
  REQUIRE(found);
  const auto l = barycentric(found->ref);
  CHECK(std::abs(l[0] + l[1] + l[2] - 1.0) < 1e-12);
  const auto x = reference_to_physical(*mesh, found->cell, found->ref);
  CHECK(distance(x, {0.5, 0.5}) < 1e-12);
}

TEST_CASE("points outside the domain are not found") {
  const auto mesh = unit_square(4);
  const PointLocator locator(mesh);
  CHECK_FALSE(locator.locate({1.5, 0.5}));
  CHECK_FALSE(locator.locate({-0.1, 0.5}));
  CHECK_FALSE(locate_point_brute_force(*mesh, {1.5, 0.5}));
  try {
    locate_point(*mesh, {1.5, 0.5}, 17);
    FAIL("expected PointNotFound");
  } catch (const PointNotFound& e) {
    CHECK(e.point_index() == 17);
  }
}

TEST_CASE("a vertex shared by six cells resolves to the lowest containing cell") {
  const auto mesh = unit_square(4);
  const PointLocator locator(mesh);
  const Point2 vertex{0.5, 0.5};
  const auto cells = containing_cells(*mesh, vertex);
  CHECK(cells.size() == 6);
  const auto found = locator.locate(vertex);
  REQUIRE(found);
  CHECK(found->cell == cells.front());
  CHECK(locate_point(*mesh, vertex).cell == cells.front());
}

TEST_CASE("grid locator agrees with the brute-force scan") {
  const auto mesh = std::make_shared<const TriangleMesh>(build_rectangle_mesh(13, 7, 2.0, 1.0));
  const PointLocator locator(mesh);
  Rng rng(77);
  for (int trial = 0; trial < 2000; ++trial) {
    Point2 p{rng.uniform(-0.1, 2.1), rng.uniform(-0.1, 1.1)};
    if (trial % 4 == 0) p.x = 2.0 * static_cast<double>(rng.below(14)) / 13.0;  // on grid lines
    if (trial % 8 == 0) p.y = static_cast<double>(rng.below(8)) / 7.0;
    const auto grid = locator.locate(p);
    const auto brute = locate_point_brute_force(*mesh, p);
    REQUIRE(grid.has_value() == brute.has_value());
    if (grid) {
      CHECK(grid->cell == brute->cell);
      CHECK(grid->ref == brute->ref);
    }
  }
}

TEST_CASE("vertex-only mesh construction") {
  const auto mesh = unit_square(16);
  SUBCASE("empty") {
    const auto vom = build_vertex_only_mesh(mesh, {});
    CHECK(vom->size() == 0);
    CHECK(integrate_p0dg(P0DGField(vom)) == 0.0);
  }
  SUBCASE("4096 random points round-trip") {
    Rng rng(2024);
    std::vector<Point2> points(4096);
    for (auto& p : points) p = {rng.uniform(), rng.uniform()};
    const auto vom = build_vertex_only_mesh(mesh, points);
    REQUIRE(vom->size() == points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      CHECK(vom->points()[i] == points[i]);
      CHECK(inside_reference_triangle(vom->ref_coords(i)));
      const auto x = reference_to_physical(*mesh, vom->parent_cell(i), vom->ref_coords(i));
      CHECK(distance(x, points[i]) < 1e-10);
    }
  }
  SUBCASE("duplicates are kept") {
    const auto vom = build_vertex_only_mesh(mesh, {{0.3, 0.3}, {0.3, 0.3}, {0.7, 0.1}});
    CHECK(vom->size() == 3);
    CHECK(vom->parent_cell(0) == vom->parent_cell(1));
  }
  SUBCASE("every offender is reported") {
    try {
      build_vertex_only_mesh(mesh, {{0.5, 0.5}, {2.0, 0.5}, {0.1, 0.1}, {0.5, -1.0}});
      FAIL("expected PointsOutsideDomain");
    } catch (const PointsOutsideDomain& e) {
      CHECK(e.offenders() == std::vector<std::size_t>{1, 3});
    }
  }
}

TEST_CASE("integration over a vertex-only mesh is a plain sum") {
  const auto mesh = unit_square(2);
  const auto vom = build_vertex_only_mesh(mesh, {{0.1, 0.1}, {0.5, 0.2}, {0.9, 0.9}});
  CHECK(integrate_p0dg(P0DGField(vom, {1.0, 2.0, 3.0})) == 6.0);
}

TEST_CASE("compensated sum matches an exact summation oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> values(1000);
    for (auto& v : values) v = rng.uniform(-1.0, 1.0) * std::pow(10.0, rng.uniform(-8.0, 8.0));
    CHECK(compensated_sum(values) == exact_sum(values));
  }
  // Catastrophic cancellation that defeats naive summation.
  const std::vector<double> tricky{1e100, 1.0, -1e100, 1e-3};
  CHECK(compensated_sum(tricky) == 1.001);
}

TEST_CASE("point CSV round trip") {
  PointCloud cloud;
  cloud.points = {{0.1, 0.2}, {0.3, 1.0 / 3.0}};
  cloud.values = {1.5, -2.0};
  cloud.sigmas = {0.01, 0.02};
  std::stringstream stream;
  write_point_csv(stream, cloud);
  CHECK(stream.str().rfind("x,y,value,sigma\n", 0) == 0);
  const auto back = read_point_csv(stream);
  CHECK(back.points == cloud.points);
  CHECK(back.values == cloud.values);
  CHECK(back.sigmas == cloud.sigmas);

  std::istringstream bad_header("y,x\n0,0\n");
  CHECK_THROWS_AS(read_point_csv(bad_header), InvalidArgument);
  std::istringstream bad_row("x,y\n0.1,abc\n");
  CHECK_THROWS_AS(read_point_csv(bad_row), InvalidArgument);
}
