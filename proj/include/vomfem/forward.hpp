#pragma once

// Forward models: steady diffusion with log-conductivity control, and
// transient confined groundwater flow with zonal transmissivity.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <vector>

#include "vomfem/fem.hpp"
#include "vomfem/linalg.hpp"
#include "vomfem/pointeval.hpp"
#include "vomfem/vom.hpp"

namespace vomfem {

/// -div(k0 exp(q) grad u) = f on the mesh, u = boundary_value on the boundary.
struct ConductivityProblem {
  MeshPtr mesh;
  FunctionSpacePtr state_space;
  FunctionSpacePtr control_space;
  double k0 = 0.5;
  linalg::Vector load;
  std::vector<std::size_t> boundary_dofs;
  double boundary_value = 0.0;
  linalg::CgOptions solver;
};

/// Unit square, cells x cells, P2 state and control, forcing f.
ConductivityProblem make_conductivity_problem(std::size_t cells, const PointFunction& forcing,
                                              double k0 = 0.5);
ConductivityProblem make_conductivity_problem(std::size_t cells = 32);

/// Forward solution together with the constrained operator it came from, so
/// that adjoint solves can reuse it.
struct ConductivityState {
  Field u;
  linalg::SparseMatrix matrix;
  std::vector<double> k_at_quadrature;
  linalg::SolveReport report;
};

/// Throws SolverError (carrying the report) when CG does not converge.
ConductivityState solve_conductivity_state(const ConductivityProblem& problem, const Field& q);
Field solve_conductivity(const ConductivityProblem& problem, const Field& q);

struct AquiferSettings {
  double length_x = 1000.0;
  double length_y = 500.0;
  std::size_t cells_x = 36;
  std::size_t cells_y = 18;
  double storativity = 1e-4;
  std::array<double, 3> transmissivity{50.0, 150.0, 300.0};
  std::vector<Point2> wells{{800.0, 250.0}};
  std::vector<double> rates{-2000.0};
  double boundary_head = 100.0;
  double initial_head = 100.0;
  double dt = 0.5;
  double horizon = 10.0;
};

inline constexpr std::size_t kZones = 3;

/// Confined aquifer on a rectangle: S dphi/dt - div(T grad phi) = sum of well
/// rates times point deltas, fixed head on the left edge, no flow elsewhere.
/// Units are metres and days.
struct AquiferProblem {
  MeshPtr mesh;
  FunctionSpacePtr space;
  double storativity = 1e-4;
  /// Zone of each cell: three vertical strips of equal width.
  std::vector<int> zone_of_cell;
  std::array<double, kZones> transmissivity{};
  VertexOnlyMeshPtr wells;
  std::vector<double> rates;
  double boundary_head = 100.0;
  double initial_head = 100.0;
  double dt = 0.5;
  std::size_t steps = 0;

  std::array<linalg::SparseMatrix, kZones> zone_stiffness;
  linalg::SparseMatrix mass;
  std::vector<std::size_t> fixed_dofs;
  linalg::Vector well_load;
};

AquiferProblem make_aquifer_problem(const AquiferSettings& settings = {});

struct HeadHistory {
  std::vector<double> times;
  std::vector<Field> heads;
};

/// sum_z T_z A_z
linalg::SparseMatrix aquifer_stiffness(const AquiferProblem& problem,
                                       const std::array<double, kZones>& transmissivity);
/// S/dt M + A(T), before boundary conditions.
linalg::SparseMatrix aquifer_step_matrix(const AquiferProblem& problem,
                                         const std::array<double, kZones>& transmissivity);

/// Backward Euler from the initial head over problem.steps steps.
HeadHistory solve_groundwater(const AquiferProblem& problem);
HeadHistory solve_groundwater(const AquiferProblem& problem,
                              const std::array<double, kZones>& transmissivity);

/// Inflow through the fixed-head boundary during step n -> n+1, read off the
/// residual of the unconstrained system at the constrained rows.
double boundary_inflow(const AquiferProblem& problem, const std::array<double, kZones>& transmissivity,
                       const Field& before, const Field& after);

/// CSV with columns time,well,x,y,head.
void write_head_series_csv(std::ostream& out, const HeadHistory& history,
                           const PointInterpolator& wells);

}  // namespace vomfem
