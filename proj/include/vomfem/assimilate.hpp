#pragma once

// Misfit and regularisation functionals, their discrete adjoint gradients,
// gradient verification, and a limited-memory quasi-Newton minimizer.

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vomfem/fem.hpp"
#include "vomfem/forward.hpp"
#include "vomfem/linalg.hpp"
#include "vomfem/pointeval.hpp"
#include "vomfem/vom.hpp"

namespace vomfem {

struct Observations {
  VertexOnlyMeshPtr points;
  std::vector<double> values;
  std::vector<double> sigmas;

  std::size_t size() const { return values.size(); }
};

/// Validates lengths and, when sigmas are given, their positivity.
Observations make_observations(VertexOnlyMeshPtr points, std::vector<double> values,
                               std::vector<double> sigmas = {});
/// The subset of observations with the given indices, in that order.
Observations select_observations(const Observations& obs, std::span<const std::size_t> indices);

enum class MisfitKind { Point, Field };

struct FunctionalSpec {
  MisfitKind misfit = MisfitKind::Point;
  double alpha = 0.02;
  /// Point misfit as sum |u - d|^2 / (2 sigma^2) instead of sum |u - d|^2.
  bool sigma_weighted = false;
  /// Multiplies alpha^2 int |grad q|^2; 0.5 gives the cross-validation form.
  double regularisation_scale = 1.0;
};

/// sum_i (d_i - u(X_i))^2, or sum_i (u(X_i) - d_i)^2 / (2 sigma_i^2) when weighted,
/// computed as the integral of a P0DG field on the vertex-only mesh.
double misfit_point(const Field& u, const Observations& obs, const PointInterpolator& interp,
                    bool weighted);
/// (w_rec - w)^T M (w_rec - w)
double misfit_field(const Field& u, const Field& u_rec);
/// alpha^2 w^T A_1 w with the unit-coefficient stiffness A_1.
double regularisation(const Field& q, double alpha);

struct GradientReport {
  double value = 0.0;
  double misfit = 0.0;
  double regularisation = 0.0;
  linalg::Vector gradient;
  std::vector<double> taylor_rates;
};

/// J(q) = misfit(u(q)) + scale * alpha^2 int |grad q|^2 for the conductivity
/// problem. The misfit is either against point observations or against a
/// reconstructed field fixed in advance. Keeps a reference to the problem,
/// which must outlive the functional.
class ConductivityFunctional {
 public:
  ConductivityFunctional(const ConductivityProblem& problem, FunctionalSpec spec, Observations obs);
  ConductivityFunctional(const ConductivityProblem& problem, FunctionalSpec spec, Field reconstruction);

  const ConductivityProblem& problem() const { return *problem_; }
  const FunctionalSpec& spec() const { return spec_; }

  /// Value only; gradient stays empty.
  GradientReport evaluate(std::span<const double> q) const;
  /// Value and the exact gradient of the discrete functional (adjoint method).
  GradientReport gradient(std::span<const double> q) const;

  double misfit_of_state(const Field& u) const;

 private:
  linalg::Vector misfit_derivative(const Field& u) const;

  const ConductivityProblem* problem_;
  FunctionalSpec spec_;
  std::optional<Observations> obs_;
  std::optional<PointInterpolator> interp_;
  std::optional<Field> reconstruction_;
  linalg::SparseMatrix mass_;
  linalg::SparseMatrix unit_stiffness_;
};

/// Observation wells sampled every `stride` model time steps.
struct WellRecord {
  VertexOnlyMeshPtr wells;
  /// values[k][w]: head at well w after step (k + 1) * stride.
  std::vector<std::vector<double>> values;
  double sigma = 0.01;
  std::size_t stride = 1;
};

/// Noise-free samples of a head history at the given wells, taken after
/// every stride-th step.
WellRecord sample_wells(const AquiferProblem& problem, const HeadHistory& history,
                        VertexOnlyMeshPtr wells, double sigma, std::size_t stride = 1);

/// sum_n sum_w (phi^n(X_w) - d_nw)^2 / (2 sigma^2) as a function of the three
/// zonal transmissivities. Gradients come from forward sensitivities: one
/// tangent solve per zone per step.
class GroundwaterFunctional {
 public:
  GroundwaterFunctional(const AquiferProblem& problem, WellRecord record);

  double evaluate(const std::array<double, kZones>& transmissivity) const;
  double gradient(const std::array<double, kZones>& transmissivity,
                  std::array<double, kZones>& grad) const;

 private:
  const AquiferProblem* problem_;
  WellRecord record_;
  PointInterpolator interp_;
};

/// Taylor remainders |J(x + h d) - J(x) - h <g, d>| for each h and the
/// observed convergence rates between consecutive h.
struct TaylorResult {
  std::vector<double> steps;
  std::vector<double> remainders;
  std::vector<double> rates;
  double min_rate() const;
};

using ScalarFunction = std::function<double(std::span<const double>)>;

inline constexpr std::array<double, 4> kDefaultTaylorSteps{1e-2, 1e-3, 1e-4, 1e-5};

TaylorResult taylor_test(const ScalarFunction& j, std::span<const double> x, std::span<const double> g,
                         std::span<const double> direction,
                         std::span<const double> steps = kDefaultTaylorSteps);
/// (J(x + h d) - J(x - h d)) / (2 h)
double central_difference(const ScalarFunction& j, std::span<const double> x,
                          std::span<const double> direction, double h);

struct MinimizeOptions {
  std::size_t memory = 10;
  /// Stop when |g| <= gradient_tolerance * |g_0|.
  double gradient_tolerance = 1e-8;
  std::size_t max_iterations = 200;
  double armijo = 1e-4;
  std::size_t max_backtracks = 50;
};

struct TraceEntry {
  std::size_t iteration = 0;
  double value = 0.0;
  double gradient_norm = 0.0;
  double step = 0.0;
};

struct MinimizeResult {
  linalg::Vector x;
  double value = 0.0;
  linalg::Vector gradient;
  std::vector<TraceEntry> trace;
  std::size_t evaluations = 0;
  bool converged = false;
};

/// Value-and-gradient callback: returns J(x) and writes dJ/dx into grad.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

/// Raised when the line search cannot decrease the objective. Carries the
/// last accepted iterate alongside the trace.
class StagnationError : public std::runtime_error {
 public:
  StagnationError(const std::string& what, MinimizeResult last)
      : std::runtime_error(what), last_(std::move(last)) {}
  const std::vector<TraceEntry>& trace() const { return last_.trace; }
  const MinimizeResult& last() const { return last_; }

 private:
  MinimizeResult last_;
};

/// L-BFGS with Armijo backtracking. Trial points whose evaluation throws a
/// SolverError or ModelingError count as failed and trigger a backtrack.
MinimizeResult minimize(const Objective& objective, linalg::Vector x0, const MinimizeOptions& options = {});

/// CSV with columns iteration,J,gradient_norm,step.
void write_trace_csv(std::ostream& out, std::span<const TraceEntry> trace);

}  // namespace vomfem
