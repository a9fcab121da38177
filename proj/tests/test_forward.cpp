#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "vomfem/errors.hpp"
#include "vomfem/forward.hpp"
#include "vomfem/random.hpp"

using namespace vomfem;

namespace {

constexpr double pi = std::numbers::pi;

double manufactured_error(std::size_t n) {
  const auto problem = make_conductivity_problem(
      n, [](Point2 p) { return pi * pi * std::sin(pi * p.x) * std::sin(pi * p.y); });
  const auto u = solve_conductivity(problem, Field(problem.control_space));
  return error_L2(u, [](Point2 p) { return std::sin(pi * p.x) * std::sin(pi * p.y); });
}

AquiferSettings small_aquifer() {
  AquiferSettings s;
  s.cells_x = 24;
  s.cells_y = 12;
  return s;
}

}  // namespace

TEST_CASE("manufactured conductivity solution converges at third order in L2") {
  const double e8 = manufactured_error(8);
  const double e16 = manufactured_error(16);
  const double e32 = manufactured_error(32);
  const double r1 = std::log2(e8 / e16);
  const double r2 = std::log2(e16 / e32);
  MESSAGE("L2 errors " << e8 << " " << e16 << " " << e32 << ", rates " << r1 << " " << r2);
  CHECK(std::abs(r1 - 3.0) < 0.3);
  CHECK(std::abs(r2 - 3.0) < 0.3);
}

TEST_CASE("zero forcing gives the zero solution") {
  const auto problem = make_conductivity_problem(6, [](Point2) { return 0.0; });
  const auto u = solve_conductivity(problem, Field(problem.control_space));
  for (double v : u.coefficients()) CHECK(v == 0.0);
}

TEST_CASE("shifting the log-conductivity scales the solution") {
  const auto problem = make_conductivity_problem(8);
  Rng rng(5);
  std::vector<double> q(problem.control_space->ndofs());
  for (auto& v : q) v = rng.uniform(-1.0, 1.0);
  auto shifted = q;
  const double c = 0.7;
  for (auto& v : shifted) v += c;
  const auto u = solve_conductivity(problem, Field(problem.control_space, q));
  const auto us = solve_conductivity(problem, Field(problem.control_space, shifted));
  const double scale = linalg::norm2(u.coefficients());
  for (std::size_t i = 0; i < u.size(); ++i) {
    CHECK(std::abs(us.coefficients()[i] - std::exp(-c) * u.coefficients()[i]) < 1e-9 * scale);
  }
}

TEST_CASE("constrained conductivity operator is symmetric positive definite") {
  const auto problem = make_conductivity_problem(6);
  Rng rng(3);
  std::vector<double> q(problem.control_space->ndofs());
  for (auto& v : q) v = rng.uniform(-3.0, 3.0);
  const auto state = solve_conductivity_state(problem, Field(problem.control_space, q));
  CHECK(state.matrix.is_symmetric(1e-12));
  CHECK(state.report.converged);
  CHECK(state.report.relative_residual <= 1e-10);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(q.size());
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    CHECK(linalg::dot(v, linalg::spmv(state.matrix, v)) > 0.0);
  }
  for (double k : state.k_at_quadrature) CHECK(k > 0.0);
}

TEST_CASE("non-finite control is rejected") {
  const auto problem = make_conductivity_problem(2);
  Field q(problem.control_space);
  q.coefficients()[0] = std::nan("");
  CHECK_THROWS_AS(solve_conductivity(problem, q), ModelingError);
}

TEST_CASE("aquifer setup") {
  const auto p = make_aquifer_problem();
  CHECK(p.steps == 20);
  CHECK(p.mesh->num_cells() == 2 * 36 * 18);
  std::array<int, kZones> counts{};
  for (int z : p.zone_of_cell) ++counts[static_cast<std::size_t>(z)];
  CHECK(counts[0] == counts[1]);
  CHECK(counts[1] == counts[2]);
  CHECK(p.fixed_dofs.size() == 19);
  CHECK(p.wells->size() == 1);
  CHECK(p.wells->points()[0] == Point2{800.0, 250.0});
  AquiferSettings bad;
  bad.storativity = 0.0;
  CHECK_THROWS_AS(make_aquifer_problem(bad), ModelingError);
  bad = {};
  bad.transmissivity[1] = -1.0;
  CHECK_THROWS_AS(make_aquifer_problem(bad), ModelingError);
}

TEST_CASE("without pumping the head stays at the boundary value") {
  auto s = small_aquifer();
  s.rates = {0.0};
  const auto p = make_aquifer_problem(s);
  const auto history = solve_groundwater(p);
  CHECK(history.times.size() == p.steps + 1);
  for (const auto& h : history.heads) {
    for (double v : h.coefficients()) CHECK(std::abs(v - 100.0) < 1e-9);
  }
}

TEST_CASE("pumping draws the head down monotonically and conserves water") {
  const auto p = make_aquifer_problem(small_aquifer());
  const auto history = solve_groundwater(p);
  const auto interp = build_point_interpolator(p.space, p.wells);
  double previous = interp.apply(history.heads[0].coefficients())[0];
  CHECK(std::abs(previous - 100.0) < 1e-12);
  for (std::size_t n = 1; n <= 5; ++n) {
    const double h = interp.apply(history.heads[n].coefficients())[0];
    CHECK(h < previous);
    previous = h;
  }
  const linalg::Vector ones(p.space->ndofs(), 1.0);
  const auto mass_ones = linalg::spmv(p.mass, ones);
  const double pumped = -2000.0;
  for (std::size_t n = 0; n < p.steps; ++n) {
    const auto& before = history.heads[n];
    const auto& after = history.heads[n + 1];
    const double storage = p.storativity / p.dt *
                           (linalg::dot(mass_ones, after.coefficients()) -
                            linalg::dot(mass_ones, before.coefficients()));
    const double inflow = boundary_inflow(p, p.transmissivity, before, after);
    CHECK(std::abs(storage - inflow - pumped) <= 1e-6 * std::abs(pumped));
  }
}

TEST_CASE("backward Euler is first order in time") {
  auto s = small_aquifer();
  s.storativity = 0.05;
  s.horizon = 1.0;
  const auto sample = [&s](double dt) {
    s.dt = dt;
    const auto p = make_aquifer_problem(s);
    const auto history = solve_groundwater(p);
    return build_point_interpolator(p.space, p.wells).apply(history.heads.back().coefficients())[0];
  };
  const double reference = sample(1.0 / 256.0);
  const double e1 = std::abs(sample(1.0 / 8.0) - reference);
  const double e2 = std::abs(sample(1.0 / 16.0) - reference);
  const double e3 = std::abs(sample(1.0 / 32.0) - reference);
  MESSAGE("time errors " << e1 << " " << e2 << " " << e3);
  CHECK(e1 / e2 > 1.6);
  CHECK(e1 / e2 < 2.6);
  CHECK(e2 / e3 > 1.6);
  CHECK(e2 / e3 < 2.6);
}

TEST_CASE("head series CSV") {
  auto s = small_aquifer();
  s.horizon = 1.0;
  const auto p = make_aquifer_problem(s);
  const auto history = solve_groundwater(p);
  std::ostringstream out;
  write_head_series_csv(out, history, build_point_interpolator(p.space, p.wells));
  const auto text = out.str();
  CHECK(text.rfind("time,well,x,y,head\n0,0,800,250,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 3);
}
