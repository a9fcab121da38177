#include "vomfem/forward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "vomfem/errors.hpp"

namespace vomfem {

namespace {

void require_converged(const linalg::SolveReport& report, const char* what) {
  if (!report.converged) {
    char buffer[160];
    std::snprintf(buffer, sizeof buffer, "%s: CG did not converge (%zu iterations, relative residual %.3e)",
                  what, report.iterations, report.relative_residual);
    throw SolverError(buffer);
  }
}

}  // namespace

ConductivityProblem make_conductivity_problem(std::size_t cells, const PointFunction& forcing, double k0) {
  if (!(k0 > 0.0)) throw ModelingError("base conductivity must be positive");
  ConductivityProblem problem;
  problem.mesh = std::make_shared<const TriangleMesh>(build_rectangle_mesh(cells, cells, 1.0, 1.0));
  problem.state_space = make_function_space(problem.mesh, ElementFamily::LagrangeP2Triangle);
  problem.control_space = problem.state_space;
  problem.k0 = k0;
  problem.load = assemble_load(*problem.state_space, forcing);
  problem.boundary_dofs = problem.state_space->boundary_dofs();
  return problem;
}

ConductivityProblem make_conductivity_problem(std::size_t cells) {
  return make_conductivity_problem(cells, [](Point2) { return 1.0; });
}

ConductivityState solve_conductivity_state(const ConductivityProblem& problem, const Field& q) {
  if (&q.space() != problem.control_space.get()) {
    throw InvalidArgument("control field is not in the problem's control space");
  }
  for (double v : q.coefficients()) {
    if (!std::isfinite(v)) throw ModelingError("log-conductivity must be finite");
  }
  ConductivityState state{Field(problem.state_space), {}, evaluate_at_quadrature(q), {}};
  for (double& k : state.k_at_quadrature) k = problem.k0 * std::exp(k);
  state.matrix = assemble_weighted_stiffness(*problem.state_space, state.k_at_quadrature);
  linalg::Vector b = problem.load;
  apply_dirichlet(state.matrix, b, problem.boundary_dofs, problem.boundary_value);
  state.report = linalg::cg_solve(state.matrix, b, state.u.coefficients(), problem.solver);
  require_converged(state.report, "conductivity solve");
  return state;
}

Field solve_conductivity(const ConductivityProblem& problem, const Field& q) {
  return std::move(solve_conductivity_state(problem, q).u);
}

AquiferProblem make_aquifer_problem(const AquiferSettings& s) {
  if (!(s.storativity > 0.0)) throw ModelingError("storativity must be positive");
  for (double t : s.transmissivity) {
    if (!(t > 0.0)) throw ModelingError("transmissivities must be positive");
  }
  if (!(s.dt > 0.0) || !(s.horizon > 0.0)) throw InvalidArgument("time step and horizon must be positive");
  if (s.wells.size() != s.rates.size()) throw InvalidArgument("one pumping rate per well required");

  AquiferProblem p;
  p.mesh = std::make_shared<const TriangleMesh>(
      build_rectangle_mesh(s.cells_x, s.cells_y, s.length_x, s.length_y));
  p.space = make_function_space(p.mesh, ElementFamily::LagrangeP1Triangle);
  p.storativity = s.storativity;
  p.transmissivity = s.transmissivity;
  p.boundary_head = s.boundary_head;
  p.initial_head = s.initial_head;
  p.dt = s.dt;
  p.steps = static_cast<std::size_t>(std::llround(s.horizon / s.dt));
  if (p.steps == 0) throw InvalidArgument("horizon shorter than one time step");

  std::array<std::vector<std::size_t>, kZones> zone_cells;
  p.zone_of_cell.resize(p.mesh->num_cells());
  for (std::size_t c = 0; c < p.mesh->num_cells(); ++c) {
    const auto centroid = reference_to_physical(*p.mesh, c, {1.0 / 3.0, 1.0 / 3.0});
    const auto zone = std::min<std::size_t>(
        kZones - 1, static_cast<std::size_t>(std::floor(kZones * centroid.x / s.length_x)));
    p.zone_of_cell[c] = static_cast<int>(zone);
    zone_cells[zone].push_back(c);
  }
  for (std::size_t z = 0; z < kZones; ++z) {
    p.zone_stiffness[z] = assemble_stiffness_on_cells(*p.space, zone_cells[z]);
  }
  p.mass = assemble_mass(*p.space);
  p.fixed_dofs = p.space->boundary_dofs([](Point2 x) { return x.x == 0.0; });
  p.wells = build_vertex_only_mesh(p.mesh, s.wells);
  p.rates = s.rates;
  p.well_load = delta_load(p.space, p.wells, p.rates);
  return p;
}

linalg::SparseMatrix aquifer_stiffness(const AquiferProblem& problem,
                                       const std::array<double, kZones>& transmissivity) {
  linalg::SparseMatrix a = problem.zone_stiffness[0];
  auto values = a.values();
  for (std::size_t k = 0; k < values.size(); ++k) {
    values[k] = 0.0;
    for (std::size_t z = 0; z < kZones; ++z) {
      values[k] += transmissivity[z] * problem.zone_stiffness[z].values()[k];
    }
  }
  return a;
}

linalg::SparseMatrix aquifer_step_matrix(const AquiferProblem& problem,
                                         const std::array<double, kZones>& transmissivity) {
  for (double t : transmissivity) {
    if (!(t > 0.0) || !std::isfinite(t)) throw ModelingError("transmissivities must be positive");
  }
  linalg::SparseMatrix k = aquifer_stiffness(problem, transmissivity);
  const double scale = problem.storativity / problem.dt;
  linalg::axpy(scale, problem.mass.values(), k.values());
  return k;
}

HeadHistory solve_groundwater(const AquiferProblem& problem) {
  return solve_groundwater(problem, problem.transmissivity);
}

HeadHistory solve_groundwater(const AquiferProblem& problem,
                              const std::array<double, kZones>& transmissivity) {
  linalg::SparseMatrix k = aquifer_step_matrix(problem, transmissivity);
  // The lifting of the fixed head into the right-hand side is the same every step.
  linalg::Vector lifting(k.rows(), 0.0);
  apply_dirichlet(k, lifting, problem.fixed_dofs, problem.boundary_head);
  const double scale = problem.storativity / problem.dt;
  const linalg::CholeskyFactor factor(k);

  HeadHistory history;
  Field head(problem.space, std::vector<double>(problem.space->ndofs(), problem.initial_head));
  history.times.push_back(0.0);
  history.heads.push_back(head);
  std::vector<bool> fixed(k.rows(), false);
  for (auto d : problem.fixed_dofs) fixed[d] = true;
  for (std::size_t n = 1; n <= problem.steps; ++n) {
    linalg::Vector b = linalg::spmv(problem.mass, head.coefficients());
    for (std::size_t i = 0; i < b.size(); ++i) {
      b[i] = fixed[i] ? lifting[i] : scale * b[i] + problem.well_load[i] + lifting[i];
    }
    // Solve for the increment so that a steady head is reproduced to roundoff.
    const auto k_head = linalg::spmv(k, head.coefficients());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] -= k_head[i];
    linalg::Vector increment(b.size(), 0.0);
    factor.solve(b, increment);
    Field next = head;
    linalg::axpy(1.0, increment, next.coefficients());
    head = next;
    history.times.push_back(static_cast<double>(n) * problem.dt);
    history.heads.push_back(std::move(next));
  }
  return history;
}

double boundary_inflow(const AquiferProblem& problem, const std::array<double, kZones>& transmissivity,
                       const Field& before, const Field& after) {
  const auto k = aquifer_step_matrix(problem, transmissivity);
  auto residual = linalg::spmv(k, after.coefficients());
  const auto m_before = linalg::spmv(problem.mass, before.coefficients());
  const double scale = problem.storativity / problem.dt;
  double inflow = 0.0;
  for (auto d : problem.fixed_dofs) {
    inflow += residual[d] - scale * m_before[d] - problem.well_load[d];
  }
  return inflow;
}

void write_head_series_csv(std::ostream& out, const HeadHistory& history, const PointInterpolator& wells) {
  out << "time,well,x,y,head\n";
  char buffer[128];
  for (std::size_t n = 0; n < history.times.size(); ++n) {
    const auto values = wells.apply(history.heads[n].coefficients());
    for (std::size_t w = 0; w < values.size(); ++w) {
      const auto x = wells.vom().points()[w];
      std::snprintf(buffer, sizeof buffer, "%.17g,%zu,%.17g,%.17g,%.17g\n", history.times[n], w, x.x,
                    x.y, values[w]);
      out << buffer;
    }
  }
}

}  // namespace vomfem
