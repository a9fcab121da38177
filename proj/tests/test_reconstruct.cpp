#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "vomfem/errors.hpp"
#include "vomfem/random.hpp"
#include "vomfem/reconstruct.hpp"

using namespace vomfem;

namespace {

MeshPtr unit_square(std::size_t n) {
  return std::make_shared<const TriangleMesh>(build_rectangle_mesh(n, n, 1.0, 1.0));
}

Observations sample(const MeshPtr& mesh, std::vector<Point2> points, const PointFunction& f) {
  std::vector<double> values;
  for (const auto& p : points) values.push_back(f(p));
  return make_observations(build_vertex_only_mesh(mesh, std::move(points)), std::move(values));
}

std::vector<Point2> random_points(Rng& rng, std::size_t n) {
  std::vector<Point2> points(n);
  for (auto& p : points) p = {rng.uniform_open(), rng.uniform_open()};
  return points;
}

}  // namespace

TEST_CASE("orientation and in-circle predicates are exact near degeneracy") {
  CHECK(orientation({0, 0}, {1, 0}, {0, 1}) == 1);
  CHECK(orientation({0, 0}, {0, 1}, {1, 0}) == -1);
  CHECK(orientation({0, 0}, {1, 1}, {2, 2}) == 0);
  // Points on the line y = x perturbed by one ulp.
  const double x = 0.1;
  CHECK(orientation({0.0, 0.0}, {1.0, 1.0}, {x, x}) == 0);
  CHECK(orientation({0.0, 0.0}, {1.0, 1.0}, {x, std::nextafter(x, 1.0)}) == 1);
  CHECK(orientation({0.0, 0.0}, {1.0, 1.0}, {x, std::nextafter(x, 0.0)}) == -1);
  CHECK(in_circle({0, 0}, {1, 0}, {0, 1}, {1, 1}) == 0);
  CHECK(in_circle({0, 0}, {1, 0}, {0, 1}, {0.5, 0.5}) == 1);
  CHECK(in_circle({0, 0}, {1, 0}, {0, 1}, {std::nextafter(1.0, 2.0), 1.0}) == -1);
  CHECK(in_circle({0, 0}, {1, 0}, {0, 1}, {std::nextafter(1.0, 0.0), 1.0}) == 1);
}

TEST_CASE("Delaunay triangulation of random points") {
  Rng rng(21);
  const auto points = random_points(rng, 300);
  const DelaunayTriangulation dt(points);
  double area = 0.0;
  for (const auto& t : dt.triangles()) {
    CHECK(orientation(points[t[0]], points[t[1]], points[t[2]]) == 1);
    area += signed_area(points[t[0]], points[t[1]], points[t[2]]);
  }
  // Euler: a triangulation of n points with h hull vertices has 2n - 2 - h triangles.
  std::vector<std::size_t> used;
  for (const auto& t : dt.triangles()) used.insert(used.end(), t.begin(), t.end());
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  CHECK(used.size() == points.size());
  // Empty circumcircle property.
  for (const auto& t : dt.triangles()) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (i == t[0] || i == t[1] || i == t[2]) continue;
      CHECK(in_circle(points[t[0]], points[t[1]], points[t[2]], points[i]) <= 0);
    }
  }
  CHECK(area > 0.9);
  CHECK(area < 1.0);
}

TEST_CASE("Delaunay input validation") {
  CHECK_THROWS_AS(DelaunayTriangulation({{0, 0}, {1, 1}}), ReconstructionError);
  CHECK_THROWS_AS(DelaunayTriangulation({{0, 0}, {0.5, 0.5}, {1, 1}, {0.25, 0.25}}), ReconstructionError);
  CHECK_THROWS_AS(DelaunayTriangulation({{0, 0}, {1, 0}, {0, 1}, {1, 0}}), ReconstructionError);
}

TEST_CASE("cocircular points triangulate deterministically") {
  const std::vector<Point2> grid{{0, 0}, {1, 0}, {0, 1}, {1, 1}, {0.5, 0}, {0.5, 1}, {0, 0.5}, {1, 0.5}};
  const DelaunayTriangulation a(grid);
  const DelaunayTriangulation b(grid);
  CHECK(std::equal(a.triangles().begin(), a.triangles().end(), b.triangles().begin(), b.triangles().end()));
  double area = 0.0;
  for (const auto& t : a.triangles()) area += signed_area(grid[t[0]], grid[t[1]], grid[t[2]]);
  CHECK(std::abs(area - 1.0) < 1e-15);
}

TEST_CASE("nearest-neighbour reconstruction") {
  const auto mesh = unit_square(4);
  const auto space = make_function_space(mesh, ElementFamily::LagrangeP2Triangle);
  const auto single = reconstruct(sample(mesh, {{0.3, 0.3}}, [](Point2) { return 2.5; }), space,
                                  ReconstructionMethod::nearest());
  for (double v : single.coefficients()) CHECK(v == 2.5);
  // Equidistant sites: the lower observation index wins.
  const auto tie = make_observations(build_vertex_only_mesh(mesh, {{0.25, 0.5}, {0.75, 0.5}}), {1.0, 2.0});
  const auto field = reconstruct(tie, space, ReconstructionMethod::nearest());
  for (std::size_t d = 0; d < space->ndofs(); ++d) {
    if (space->dof_coordinates()[d].x == 0.5) CHECK(field.coefficients()[d] == 1.0);
  }
}

TEST_CASE("linear reconstruction reproduces affine data inside the hull") {
  const auto mesh = unit_square(6);
  const auto space = make_function_space(mesh, ElementFamily::LagrangeP2Triangle);
  Rng rng(5);
  auto points = random_points(rng, 80);
  points.insert(points.end(), {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}});
  const auto affine = [](Point2 p) { return 0.5 - 2.0 * p.x + 3.0 * p.y; };
  const auto field = reconstruct(sample(mesh, points, affine), space, ReconstructionMethod::linear());
  for (std::size_t d = 0; d < space->ndofs(); ++d) {
    CHECK(std::abs(field.coefficients()[d] - affine(space->dof_coordinates()[d])) < 1e-10);
  }
}

TEST_CASE("linear reconstruction fills outside the hull") {
  const auto mesh = unit_square(4);
  const auto space = make_function_space(mesh, ElementFamily::LagrangeP1Triangle);
  const auto obs = sample(mesh, {{0.4, 0.4}, {0.6, 0.4}, {0.5, 0.6}}, [](Point2) { return 1.0; });
  const auto field = reconstruct(obs, space, ReconstructionMethod::linear(-7.0));
  for (std::size_t d = 0; d < space->ndofs(); ++d) {
    const auto p = space->dof_coordinates()[d];
    CHECK(field.coefficients()[d] == (p == Point2{0.5, 0.5} ? 1.0 : -7.0));
  }
}

TEST_CASE("nearest and linear reconstructions interpolate and stay within the data range") {
  const auto mesh = unit_square(5);
  Rng rng(8);
  const auto points = random_points(rng, 40);
  const auto f = [](Point2 p) { return std::sin(5.0 * p.x) * std::cos(3.0 * p.y); };
  const auto obs = sample(mesh, points, f);
  const double lo = *std::min_element(obs.values.begin(), obs.values.end());
  const double hi = *std::max_element(obs.values.begin(), obs.values.end());
  // Interpolation property at the sites themselves.
  const DelaunayTriangulation dt(points);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto hit = dt.locate(points[i]);
    REQUIRE(hit);
    const auto& t = dt.triangles()[hit->triangle];
    double value = 0.0;
    for (int k = 0; k < 3; ++k) value += hit->barycentric[k] * obs.values[t[k]];
    CHECK(value == obs.values[i]);
  }
  const auto space = make_function_space(mesh, ElementFamily::LagrangeP2Triangle);
  for (const auto& method : {ReconstructionMethod::nearest(), ReconstructionMethod::linear(lo)}) {
    const auto field = reconstruct(obs, space, method);
    for (double v : field.coefficients()) {
      CHECK(v >= lo - 1e-14);
      CHECK(v <= hi + 1e-14);
    }
  }
}

TEST_CASE("Gaussian RBF reproduces the observations") {
  Rng rng(13);
  const auto points = random_points(rng, 50);
  std::vector<double> values;
  for (const auto& p : points) values.push_back(std::exp(p.x) * p.y);
  const double shape = default_rbf_shape(points);
  const RbfInterpolant rbf(points, values, shape);
  MESSAGE("shape " << shape << ", rcond " << rbf.reciprocal_condition());
  for (std::size_t i = 0; i < points.size(); ++i) CHECK(std::abs(rbf(points[i]) - values[i]) < 1e-8);

  const auto mesh = unit_square(4);
  const auto space = make_function_space(mesh, ElementFamily::LagrangeP2Triangle);
  const auto obs = make_observations(build_vertex_only_mesh(mesh, points), values);
  const auto a = reconstruct(obs, space, ReconstructionMethod::rbf());
  const auto b = reconstruct(obs, space, ReconstructionMethod::rbf(shape));
  CHECK(std::equal(a.coefficients().begin(), a.coefficients().end(), b.coefficients().begin()));
}

TEST_CASE("a singular RBF system reports its condition") {
  const std::vector<Point2> points{{0.5, 0.5}, {0.5, 0.5 + 1e-12}};
  try {
    RbfInterpolant(points, std::vector<double>{1.0, 2.0}, 1.0);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(std::string(e.what()).find("condition") != std::string::npos);
  }
}

TEST_CASE("method names") {
  CHECK(parse_reconstruction_method("linear").kind == ReconstructionKind::Linear);
  CHECK(parse_reconstruction_method("rbf").name() == "rbf");
  CHECK_THROWS_AS(parse_reconstruction_method("cubic"), InvalidArgument);
}
