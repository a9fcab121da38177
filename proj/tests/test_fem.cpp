#include "doctest.h"

#include <cmath>
#include <numbers>

#include "vomfem/errors.hpp"
#include "vomfem/fem.hpp"
#include "vomfem/random.hpp"

using namespace vomfem;
using std::numbers::pi;

namespace {

MeshPtr rectangle(std::size_t nx, std::size_t ny, double lx = 1.0, double ly = 1.0) {
  return std::make_shared<const TriangleMesh>(build_rectangle_mesh(nx, ny, lx, ly));
}

Point2 random_reference_point(Rng& rng) {
  double xi = rng.uniform();
  double eta = rng.uniform();
  if (xi + eta > 1.0) {
    xi = 1.0 - xi;
    eta = 1.0 - eta;
  }
  return {xi, eta};
}

double quadratic_form(const linalg::SparseMatrix& a, std::span<const double> w) {
  return linalg::dot(w, linalg::spmv(a, w));
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

}  // namespace

TEST_CASE("Lagrange bases are nodal") {
  for (auto family : {ElementFamily::LagrangeP1Triangle, ElementFamily::LagrangeP2Triangle}) {
    const ReferenceElement element(family);
    for (std::size_t i = 0; i < element.basis_count(); ++i) {
      const auto t = tabulate_basis(element, element.nodes()[i]);
      for (std::size_t j = 0; j < element.basis_count(); ++j) {
        CHECK(std::abs(t.values[j] - (i == j ? 1.0 : 0.0)) < 1e-15);
      }
    }
  }
}

TEST_CASE("P1 values at the centroid") {
  const auto t = tabulate_basis(ReferenceElement(ElementFamily::LagrangeP1Triangle),
                                {1.0 / 3.0, 1.0 / 3.0});
  for (int i = 0; i < 3; ++i) CHECK(std::abs(t.values[i] - 1.0 / 3.0) < 1e-15);
}

TEST_CASE("partition of unity at random reference points") {
  Rng rng(5);
  for (auto family : {ElementFamily::LagrangeP1Triangle, ElementFamily::LagrangeP2Triangle}) {
    const ReferenceElement element(family);
    for (int trial = 0; trial < 20; ++trial) {
      const auto t = element.tabulate(random_reference_point(rng));
      double sum = 0.0;
      double gx = 0.0;
      double gy = 0.0;
      for (std::size_t j = 0; j < t.count; ++j) {
        sum += t.values[j];
        gx += t.gradients[j][0];
        gy += t.gradients[j][1];
      }
      CHECK(std::abs(sum - 1.0) < 1e-13);
      CHECK(std::abs(gx) < 1e-13);
      CHECK(std::abs(gy) < 1e-13);
    }
  }
}

TEST_CASE("P2 gradients match finite differences") {
  const ReferenceElement element(ElementFamily::LagrangeP2Triangle);
  const Point2 p{0.21, 0.33};
  const double h = 1e-6;
  const auto t = element.tabulate(p);
  const auto tx = element.tabulate({p.x + h, p.y});
  const auto tx0 = element.tabulate({p.x - h, p.y});
  const auto ty = element.tabulate({p.x, p.y + h});
  const auto ty0 = element.tabulate({p.x, p.y - h});
  for (std::size_t j = 0; j < 6; ++j) {
    CHECK(std::abs(t.gradients[j][0] - (tx.values[j] - tx0.values[j]) / (2 * h)) < 1e-8);
    CHECK(std::abs(t.gradients[j][1] - (ty.values[j] - ty0.values[j]) / (2 * h)) < 1e-8);
  }
}

TEST_CASE("quadrature weights sum to 1/2 and integrate degree-4 monomials exactly") {
  const auto& rule = triangle_quadrature();
  CHECK(rule.points.size() == 6);
  double total = 0.0;
  for (double w : rule.weights) total += w;
  CHECK(std::abs(total - 0.5) < 1e-15);
  for (int a = 0; a <= 4; ++a) {
    for (int b = 0; a + b <= 4; ++b) {
      double sum = 0.0;
      for (std::size_t p = 0; p < rule.points.size(); ++p) {
        sum += rule.weights[p] * std::pow(rule.points[p].x, a) * std::pow(rule.points[p].y, b);
      }
      // int_T x^a y^b = a! b! / (a + b + 2)!
      CHECK(std::abs(sum - factorial(a) * factorial(b) / factorial(a + b + 2)) < 1e-15);
    }
  }
}

TEST_CASE("dof numbering: vertices first, then lexicographically sorted edges") {
  const auto mesh = rectangle(3, 2);
  const auto space = make_function_space(mesh, ElementFamily::LagrangeP2Triangle);
  const std::size_t nv = mesh->num_vertices();
  CHECK(space->ndofs() == nv + (3 * 3 + 4 * 2 + 6));  // horizontal + vertical + diagonal edges
  for (std::size_t v = 0; v < nv; ++v) CHECK(space->dof_coordinates()[v] == mesh->vertices()[v]);
  for (std::size_t c = 0; c < mesh->num_cells(); ++c) {
    const auto dofs = space->cell_dofs(c);
    const auto geometry = mesh->geometry(c);
    for (std::size_t i = 0; i < dofs.size(); ++i) {
      CHECK(dofs[i] < space->ndofs());
      const auto node = geometry.to_physical(space->element().nodes()[i]);
      CHECK(distance(node, space->dof_coordinates()[dofs[i]]) < 1e-14);
    }
  }
  // Edge dofs appear in increasing (low, high) endpoint order.
  std::vector<Edge> edge_keys(space->ndofs() - nv);
  for (std::size_t c = 0; c < mesh->num_cells(); ++c) {
    const auto& cell = mesh->cell(c);
    const auto dofs = space->cell_dofs(c);
    const std::array<Edge, 3> local{Edge{cell[1], cell[2]}, Edge{cell[0], cell[2]}, Edge{cell[0], cell[1]}};
    for (int e = 0; e < 3; ++e) {
      edge_keys[dofs[3 + e] - nv] = {std::min(local[e].first, local[e].second),
                                     std::max(local[e].first, local[e].second)};
    }
  }
  CHECK(std::is_sorted(edge_keys.begin(), edge_keys.end()));
}

TEST_CASE("nodal interpolation of x^2") {
  const auto space = make_function_space(rectangle(2, 1, 2.0, 1.0), ElementFamily::LagrangeP2Triangle);
  const auto u = interpolate_callable(space, [](Point2 p) { return p.x * p.x; });
  bool found = false;
  for (std::size_t i = 0; i < space->ndofs(); ++i) {
    if (space->dof_coordinates()[i].x == 1.5) {
      CHECK(u.coefficients()[i] == 2.25);
      found = true;
    }
    if (space->dof_coordinates()[i].x == 0.5) CHECK(u.coefficients()[i] == 0.25);
  }
  CHECK(found);
  const auto zero = interpolate_callable(space, [](Point2) { return 0.0; });
  for (double w : zero.coefficients()) CHECK(w == 0.0);
}

TEST_CASE("P2 reproduces quadratics exactly") {
  const auto space = make_function_space(rectangle(4, 3, 2.0, 1.0), ElementFamily::LagrangeP2Triangle);
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    std::array<double, 6> c{};
    for (auto& v : c) v = rng.uniform(-2.0, 2.0);
    const auto g = [&c](Point2 p) {
      return c[0] + c[1] * p.x + c[2] * p.y + c[3] * p.x * p.x + c[4] * p.x * p.y + c[5] * p.y * p.y;
    };
    const auto u = interpolate_callable(space, g);
    for (int k = 0; k < 20; ++k) {
      const Point2 x{rng.uniform(0.0, 2.0), rng.uniform(0.0, 1.0)};
      CHECK(std::abs(u.evaluate(x) - g(x)) < 1e-12);
    }
  }
  const auto u = interpolate_callable(space, [](Point2 p) { return p.x * p.x + p.y; });
  CHECK(std::abs(u.evaluate({0.3, 0.7}) - 0.79) < 1e-12);
}

TEST_CASE("unit stiffness on the two-cell square") {
  const auto space = make_function_space(rectangle(1, 1), ElementFamily::LagrangeP1Triangle);
  const auto a = assemble_weighted_stiffness(*space, [](Point2) { return 1.0; });
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double sum = 0.0;
    for (double v : a.row_values(r)) sum += v;
    CHECK(std::abs(sum) < 1e-14);
  }
  CHECK(a.asymmetry() < 1e-13);
}

TEST_CASE("stiffness energy of u = x is 1") {
  for (auto family : {ElementFamily::LagrangeP1Triangle, ElementFamily::LagrangeP2Triangle}) {
    const auto space = make_function_space(rectangle(5, 4), family);
    const auto a = assemble_stiffness(*space);
    CHECK(a.asymmetry() < 1e-13);
    const auto u = interpolate_callable(space, [](Point2 p) { return p.x; });
    CHECK(std::abs(quadratic_form(a, u.coefficients()) - 1.0) < 1e-12);
    CHECK(std::abs(norm_H1_semi(u) - 1.0) < 1e-12);
  }
}

TEST_CASE("weighted stiffness rejects non-positive coefficients") {
  const auto space = make_function_space(rectangle(2, 2), ElementFamily::LagrangeP1Triangle);
  CHECK_THROWS_AS(assemble_weighted_stiffness(*space, [](Point2 p) { return p.x - 0.5; }), ModelingError);
  CHECK_THROWS_AS(assemble_weighted_stiffness(*space, [](Point2) { return 0.0; }), ModelingError);
}

TEST_CASE("mass matrix integrates area and x^2") {
  for (auto family : {ElementFamily::LagrangeP1Triangle, ElementFamily::LagrangeP2Triangle}) {
    const auto space = make_function_space(rectangle(6, 5), family);
    const auto m = assemble_mass(*space);
    CHECK(m.asymmetry() < 1e-13);
    const std::vector<double> ones(space->ndofs(), 1.0);
    CHECK(std::abs(quadratic_form(m, ones) - 1.0) < 1e-12);
    const auto u = interpolate_callable(space, [](Point2 p) { return p.x; });
    CHECK(std::abs(quadratic_form(m, u.coefficients()) - 1.0 / 3.0) < 1e-12);
  }
}

TEST_CASE("mass matrix is positive definite") {
  const auto space = make_function_space(rectangle(8, 8), ElementFamily::LagrangeP2Triangle);
  const auto m = assemble_mass(*space);
  Rng rng(1);
  std::vector<double> b(space->ndofs());
  for (auto& v : b) v = rng.uniform(-1.0, 1.0);
  const auto [x, report] = linalg::cg_solve(m, b);
  CHECK(report.converged);
  CHECK(linalg::dot(x, linalg::spmv(m, x)) > 0.0);
}

TEST_CASE("load vectors") {
  const auto space = make_function_space(rectangle(4, 4), ElementFamily::LagrangeP2Triangle);
  const auto sum = [](const linalg::Vector& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  };
  CHECK(std::abs(sum(assemble_load(*space, [](Point2) { return 1.0; })) - 1.0) < 1e-12);
  for (double v : assemble_load(*space, [](Point2) { return 0.0; })) CHECK(v == 0.0);
  CHECK(std::abs(sum(assemble_load(*space, [](Point2 p) { return p.x; })) - 0.5) < 1e-12);
  const auto f = interpolate_callable(space, [](Point2 p) { return p.x; });
  CHECK(std::abs(sum(assemble_load(*space, f)) - 0.5) < 1e-12);
}

TEST_CASE("dirichlet elimination") {
  const auto space = make_function_space(rectangle(3, 3), ElementFamily::LagrangeP1Triangle);
  SUBCASE("all dofs constrained gives the identity") {
    auto a = assemble_stiffness(*space);
    linalg::Vector b(space->ndofs(), 1.0);
    std::vector<std::size_t> all(space->ndofs());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    apply_dirichlet(a, b, all, 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
      for (std::size_t c = 0; c < a.cols(); ++c) CHECK(a.at(r, c) == (r == c ? 1.0 : 0.0));
    }
    const auto [x, report] = linalg::cg_solve(a, b);
    for (double v : x) CHECK(v == 0.0);
  }
  SUBCASE("symmetry is preserved") {
    auto a = assemble_weighted_stiffness(*space, [](Point2 p) { return 1.0 + p.x * p.y; });
    linalg::Vector b(space->ndofs(), 1.0);
    const auto bc = space->boundary_dofs();
    apply_dirichlet(a, b, bc, 2.0);
    CHECK(a.asymmetry() == 0.0);
    for (auto d : bc) CHECK(b[d] == 2.0);
  }
  SUBCASE("out-of-range dof") {
    auto a = assemble_stiffness(*space);
    linalg::Vector b(space->ndofs(), 0.0);
    const std::vector<std::size_t> bad{space->ndofs()};
    CHECK_THROWS_AS(apply_dirichlet(a, b, bad, 0.0), InvalidArgument);
  }
}

TEST_CASE("harmonic ramp on a strip is reproduced") {
  const auto space = make_function_space(rectangle(8, 2, 1.0, 0.25), ElementFamily::LagrangeP1Triangle);
  auto a = assemble_stiffness(*space);
  linalg::Vector b(space->ndofs(), 0.0);
  const auto left = space->boundary_dofs([](Point2 p) { return p.x == 0.0; });
  const auto right = space->boundary_dofs([](Point2 p) { return p.x == 1.0; });
  apply_dirichlet(a, b, left, 0.0);
  apply_dirichlet(a, b, right, 1.0);
  const auto [x, report] = linalg::cg_solve(a, b, {.tolerance = 1e-13});
  REQUIRE(report.converged);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(std::abs(x[i] - space->dof_coordinates()[i].x) < 1e-10);
  }
}

TEST_CASE("norms") {
  const auto space = make_function_space(rectangle(32, 32), ElementFamily::LagrangeP2Triangle);
  CHECK(norm_L2(Field(space)) == 0.0);
  CHECK(norm_H1_semi(Field(space)) == 0.0);
  CHECK(std::abs(norm_L2(interpolate_callable(space, [](Point2) { return 1.0; })) - 1.0) < 1e-12);
  const auto s = interpolate_callable(space, [](Point2 p) { return std::sin(pi * p.x) * std::sin(pi * p.y); });
  CHECK(std::abs(norm_L2(s) - 0.5) < 1e-4);
}

TEST_CASE("L2 error against the interpolated function is zero for quadratics") {
  const auto space = make_function_space(rectangle(3, 3), ElementFamily::LagrangeP2Triangle);
  const auto g = [](Point2 p) { return p.x * p.y - 0.5 * p.y * p.y; };
  CHECK(error_L2(interpolate_callable(space, g), g) < 1e-14);
}
