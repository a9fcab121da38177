#include "vomfem/assimilate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <ostream>

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

double quadratic_form(const linalg::SparseMatrix& a, std::span<const double> w) {
  return linalg::dot(w, linalg::spmv(a, w));
}

}  // namespace

Observations make_observations(VertexOnlyMeshPtr points, std::vector<double> values,
                               std::vector<double> sigmas) {
  if (!points) throw InvalidArgument("observations need a vertex-only mesh");
  if (values.size() != points->size()) throw InvalidArgument("one observed value per point required");
  if (!sigmas.empty()) {
    if (sigmas.size() != values.size()) throw InvalidArgument("one sigma per observation required");
    for (double s : sigmas) {
      if (!(s > 0.0)) throw InvalidArgument("observation sigmas must be positive");
    }
  }
  return Observations{std::move(points), std::move(values), std::move(sigmas)};
}

Observations select_observations(const Observations& obs, std::span<const std::size_t> indices) {
  std::vector<Point2> points;
  std::vector<double> values;
  std::vector<double> sigmas;
  for (auto i : indices) {
    if (i >= obs.size()) throw InvalidArgument("observation index out of range");
    points.push_back(obs.points->points()[i]);
    values.push_back(obs.values[i]);
    if (!obs.sigmas.empty()) sigmas.push_back(obs.sigmas[i]);
  }
  std::vector<LocatedPoint> locations;
  for (auto i : indices) locations.push_back(obs.points->locations()[i]);
  auto vom = std::make_shared<const VertexOnlyMesh>(obs.points->parent_ptr(), std::move(points),
                                                    std::move(locations));
  return make_observations(std::move(vom), std::move(values), std::move(sigmas));
}

double misfit_point(const Field& u, const Observations& obs, const PointInterpolator& interp,
                    bool weighted) {
  if (interp.vom_ptr() != obs.points) throw InvalidArgument("interpolator and observations disagree");
  if (weighted && obs.sigmas.size() != obs.size()) throw InvalidArgument("weighted misfit needs sigmas");
  P0DGField residual = interp.apply(u);
  auto r = residual.values();
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = r[i] - obs.values[i];
    r[i] = weighted ? d * d / (2.0 * obs.sigmas[i] * obs.sigmas[i]) : d * d;
  }
  return integrate_p0dg(residual);
}

double misfit_field(const Field& u, const Field& u_rec) {
  if (&u.space() != &u_rec.space()) throw InvalidArgument("misfit fields live in different spaces");
  std::vector<double> diff(u.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = u_rec.coefficients()[i] - u.coefficients()[i];
  return quadratic_form(assemble_mass(u.space()), diff);
}

double regularisation(const Field& q, double alpha) {
  if (alpha < 0.0) throw InvalidArgument("alpha must be non-negative");
  return alpha * alpha * quadratic_form(assemble_stiffness(q.space()), q.coefficients());
}

ConductivityFunctional::ConductivityFunctional(const ConductivityProblem& problem, FunctionalSpec spec,
                                               Observations obs)
    : problem_(&problem), spec_(spec) {
  if (spec_.misfit != MisfitKind::Point) throw InvalidArgument("observations given for a field misfit");
  if (spec_.alpha < 0.0) throw InvalidArgument("alpha must be non-negative");
  if (spec_.sigma_weighted && obs.sigmas.size() != obs.size()) {
    throw InvalidArgument("weighted misfit needs sigmas");
  }
  interp_.emplace(problem.state_space, obs.points);
  obs_ = std::move(obs);
  unit_stiffness_ = assemble_stiffness(*problem.control_space);
}

ConductivityFunctional::ConductivityFunctional(const ConductivityProblem& problem, FunctionalSpec spec,
                                               Field reconstruction)
    : problem_(&problem), spec_(spec) {
  if (spec_.misfit != MisfitKind::Field) throw InvalidArgument("reconstruction given for a point misfit");
  if (spec_.alpha < 0.0) throw InvalidArgument("alpha must be non-negative");
  if (&reconstruction.space() != problem.state_space.get()) {
    throw InvalidArgument("reconstruction must live in the state space");
  }
  reconstruction_ = std::move(reconstruction);
  mass_ = assemble_mass(*problem.state_space);
  unit_stiffness_ = assemble_stiffness(*problem.control_space);
}

double ConductivityFunctional::misfit_of_state(const Field& u) const {
  if (obs_) return misfit_point(u, *obs_, *interp_, spec_.sigma_weighted);
  std::vector<double> diff(u.size());
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff[i] = reconstruction_->coefficients()[i] - u.coefficients()[i];
  }
  return quadratic_form(mass_, diff);
}

linalg::Vector ConductivityFunctional::misfit_derivative(const Field& u) const {
  if (obs_) {
    auto r = interp_->apply(u.coefficients());
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double d = r[i] - obs_->values[i];
      r[i] = spec_.sigma_weighted ? d / (obs_->sigmas[i] * obs_->sigmas[i]) : 2.0 * d;
    }
    return interp_->apply_adjoint(r);
  }
  std::vector<double> diff(u.size());
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff[i] = u.coefficients()[i] - reconstruction_->coefficients()[i];
  }
  auto out = linalg::spmv(mass_, diff);
  for (double& v : out) v *= 2.0;
  return out;
}

GradientReport ConductivityFunctional::evaluate(std::span<const double> q) const {
  const Field control(problem_->control_space, {q.begin(), q.end()});
  const auto u = solve_conductivity(*problem_, control);
  GradientReport report;
  report.misfit = misfit_of_state(u);
  report.regularisation = spec_.regularisation_scale * spec_.alpha * spec_.alpha *
                          quadratic_form(unit_stiffness_, q);
  report.value = report.misfit + report.regularisation;
  return report;
}

GradientReport ConductivityFunctional::gradient(std::span<const double> q) const {
  const auto& problem = *problem_;
  const Field control(problem.control_space, {q.begin(), q.end()});
  const auto state = solve_conductivity_state(problem, control);
  GradientReport report;
  report.misfit = misfit_of_state(state.u);
  const double weight = spec_.regularisation_scale * spec_.alpha * spec_.alpha;
  const auto a1q = linalg::spmv(unit_stiffness_, q);
  report.regularisation = weight * linalg::dot(q, a1q);
  report.value = report.misfit + report.regularisation;

  // Adjoint: A mu = dJ/du on free dofs, mu = 0 on the boundary. Then
  // dJ/dq_l = -mu^T (dA/dq_l) u, with dA/dq_l weighted by k psi_l.
  auto rhs = misfit_derivative(state.u);
  for (auto d : problem.boundary_dofs) rhs[d] = 0.0;
  Field mu(problem.state_space);
  const auto adjoint_report = linalg::cg_solve(state.matrix, rhs, mu.coefficients(), problem.solver);
  require_converged(adjoint_report, "conductivity adjoint solve");

  report.gradient.assign(q.size(), 0.0);
  const auto& state_space = *problem.state_space;
  const auto& control_space = *problem.control_space;
  const bool shared = problem.state_space == problem.control_space;
  const auto u = state.u.coefficients();
  const auto m = mu.coefficients();
  for (std::size_t c = 0; c < problem.mesh->num_cells(); ++c) {
    const auto sq = cell_quadrature(state_space, c);
    const auto cq = shared ? sq : cell_quadrature(control_space, c);
    const auto sdofs = state_space.cell_dofs(c);
    const auto cdofs = control_space.cell_dofs(c);
    for (std::size_t p = 0; p < CellQuadrature::kPoints; ++p) {
      double gu[2] = {0.0, 0.0};
      double gm[2] = {0.0, 0.0};
      for (std::size_t i = 0; i < sdofs.size(); ++i) {
        gu[0] += u[sdofs[i]] * sq.gradients[p][i][0];
        gu[1] += u[sdofs[i]] * sq.gradients[p][i][1];
        gm[0] += m[sdofs[i]] * sq.gradients[p][i][0];
        gm[1] += m[sdofs[i]] * sq.gradients[p][i][1];
      }
      const double s = sq.weights[p] * state.k_at_quadrature[c * CellQuadrature::kPoints + p] *
                       (gu[0] * gm[0] + gu[1] * gm[1]);
      for (std::size_t l = 0; l < cdofs.size(); ++l) report.gradient[cdofs[l]] -= s * cq.values[p][l];
    }
  }
  linalg::axpy(2.0 * weight, a1q, report.gradient);
  return report;
}

WellRecord sample_wells(const AquiferProblem& problem, const HeadHistory& history,
                        VertexOnlyMeshPtr wells, double sigma, std::size_t stride) {
  if (!(sigma > 0.0)) throw InvalidArgument("well noise sigma must be positive");
  if (stride == 0 || problem.steps % stride != 0) {
    throw InvalidArgument("sampling stride must divide the number of time steps");
  }
  const PointInterpolator interp(problem.space, wells);
  WellRecord record{std::move(wells), {}, sigma, stride};
  for (std::size_t n = stride; n < history.heads.size(); n += stride) {
    record.values.push_back(interp.apply(history.heads[n].coefficients()));
  }
  return record;
}

GroundwaterFunctional::GroundwaterFunctional(const AquiferProblem& problem, WellRecord record)
    : problem_(&problem), record_(std::move(record)), interp_(problem.space, record_.wells) {
  if (record_.stride == 0 || record_.values.size() * record_.stride != problem.steps) {
    throw InvalidArgument("well record must hold one sample per sampling interval");
  }
  for (const auto& row : record_.values) {
    if (row.size() != record_.wells->size()) throw InvalidArgument("one head per well per sample required");
  }
  if (!(record_.sigma > 0.0)) throw InvalidArgument("well noise sigma must be positive");
}

double GroundwaterFunctional::evaluate(const std::array<double, kZones>& transmissivity) const {
  const auto history = solve_groundwater(*problem_, transmissivity);
  std::vector<double> terms;
  const double scale = 1.0 / (2.0 * record_.sigma * record_.sigma);
  for (std::size_t n = 0; n < record_.values.size(); ++n) {
    const auto modelled = interp_.apply(history.heads[(n + 1) * record_.stride].coefficients());
    for (std::size_t w = 0; w < modelled.size(); ++w) {
      const double d = modelled[w] - record_.values[n][w];
      terms.push_back(scale * d * d);
    }
  }
  return compensated_sum(terms);
}

double GroundwaterFunctional::gradient(const std::array<double, kZones>& transmissivity,
                                       std::array<double, kZones>& grad) const {
  const auto& problem = *problem_;
  const auto history = solve_groundwater(problem, transmissivity);
  linalg::SparseMatrix k = aquifer_step_matrix(problem, transmissivity);
  linalg::Vector unused(k.rows(), 0.0);
  apply_dirichlet(k, unused, problem.fixed_dofs, 0.0);
  const linalg::CholeskyFactor factor(k);
  const double scale = problem.storativity / problem.dt;
  const double inv_var = 1.0 / (record_.sigma * record_.sigma);

  std::array<linalg::Vector, kZones> sensitivity;
  for (auto& s : sensitivity) s.assign(k.rows(), 0.0);
  std::vector<double> terms;
  std::array<std::vector<double>, kZones> grad_terms;
  for (std::size_t n = 0; n < problem.steps; ++n) {
    const auto& head = history.heads[n + 1].coefficients();
    const bool sampled = (n + 1) % record_.stride == 0;
    std::vector<double> weighted;
    if (sampled) {
      const auto modelled = interp_.apply(head);
      const auto& data = record_.values[(n + 1) / record_.stride - 1];
      weighted.resize(modelled.size());
      for (std::size_t w = 0; w < modelled.size(); ++w) {
        const double d = modelled[w] - data[w];
        terms.push_back(0.5 * inv_var * d * d);
        weighted[w] = inv_var * d;
      }
    }
    for (std::size_t z = 0; z < kZones; ++z) {
      // K s^{n+1} = S/dt M s^n - A_z phi^{n+1}, zero on the fixed-head boundary.
      auto rhs = linalg::spmv(problem.mass, sensitivity[z]);
      const auto az_phi = linalg::spmv(problem.zone_stiffness[z], head);
      for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = scale * rhs[i] - az_phi[i];
      for (auto d : problem.fixed_dofs) rhs[d] = 0.0;
      factor.solve(rhs, sensitivity[z]);
      if (sampled) grad_terms[z].push_back(linalg::dot(weighted, interp_.apply(sensitivity[z])));
    }
  }
  for (std::size_t z = 0; z < kZones; ++z) grad[z] = compensated_sum(grad_terms[z]);
  return compensated_sum(terms);
}

double TaylorResult::min_rate() const {
  if (rates.empty()) return std::numeric_limits<double>::quiet_NaN();
  return *std::min_element(rates.begin(), rates.end());
}

TaylorResult taylor_test(const ScalarFunction& j, std::span<const double> x, std::span<const double> g,
                         std::span<const double> direction, std::span<const double> steps) {
  if (x.size() != g.size() || x.size() != direction.size()) {
    throw InvalidArgument("taylor test: vector lengths differ");
  }
  const double j0 = j(x);
  const double slope = linalg::dot(g, direction);
  TaylorResult result;
  std::vector<double> trial(x.size());
  for (double h : steps) {
    for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] + h * direction[i];
    result.steps.push_back(h);
    result.remainders.push_back(std::abs(j(trial) - j0 - h * slope));
  }
  for (std::size_t i = 0; i + 1 < result.steps.size(); ++i) {
    result.rates.push_back(std::log(result.remainders[i] / result.remainders[i + 1]) /
                           std::log(result.steps[i] / result.steps[i + 1]));
  }
  return result;
}

double central_difference(const ScalarFunction& j, std::span<const double> x,
                          std::span<const double> direction, double h) {
  std::vector<double> plus(x.begin(), x.end());
  std::vector<double> minus(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    plus[i] += h * direction[i];
    minus[i] -= h * direction[i];
  }
  return (j(plus) - j(minus)) / (2.0 * h);
}

MinimizeResult minimize(const Objective& objective, linalg::Vector x0, const MinimizeOptions& options) {
  const std::size_t n = x0.size();
  MinimizeResult result;
  result.x = std::move(x0);
  result.gradient.assign(n, 0.0);
  result.value = objective(result.x, result.gradient);
  result.evaluations = 1;
  if (!std::isfinite(result.value)) throw SolverError("objective is not finite at the initial point");
  const double g0 = linalg::norm2(result.gradient);
  result.trace.push_back({0, result.value, g0, 0.0});
  if (g0 == 0.0) {
    result.converged = true;
    return result;
  }

  std::deque<linalg::Vector> s_hist;
  std::deque<linalg::Vector> y_hist;
  std::deque<double> rho_hist;
  linalg::Vector direction(n);
  linalg::Vector trial(n);
  linalg::Vector trial_gradient(n);
  std::vector<double> alphas;

  for (std::size_t iteration = 1; iteration <= options.max_iterations; ++iteration) {
    // Two-loop recursion for d = -H g.
    for (std::size_t i = 0; i < n; ++i) direction[i] = -result.gradient[i];
    alphas.assign(s_hist.size(), 0.0);
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alphas[k] = rho_hist[k] * linalg::dot(s_hist[k], direction);
      linalg::axpy(-alphas[k], y_hist[k], direction);
    }
    double initial_step = 1.0;
    if (!s_hist.empty()) {
      const double gamma = linalg::dot(s_hist.back(), y_hist.back()) / linalg::dot(y_hist.back(), y_hist.back());
      for (double& d : direction) d *= gamma;
    } else {
      initial_step = 1.0 / linalg::norm2(result.gradient);
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * linalg::dot(y_hist[k], direction);
      linalg::axpy(alphas[k] - beta, s_hist[k], direction);
    }
    double slope = linalg::dot(result.gradient, direction);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t i = 0; i < n; ++i) direction[i] = -result.gradient[i];
      slope = linalg::dot(result.gradient, direction);
      initial_step = 1.0 / linalg::norm2(result.gradient);
    }

    double step = initial_step;
    double value = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (std::size_t backtrack = 0; backtrack <= options.max_backtracks; ++backtrack) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = result.x[i] + step * direction[i];
      try {
        value = objective(trial, trial_gradient);
      } catch (const SolverError&) {
        value = std::numeric_limits<double>::infinity();
      } catch (const ModelingError&) {
        value = std::numeric_limits<double>::infinity();
      }
      ++result.evaluations;
      const bool moved = !std::equal(trial.begin(), trial.end(), result.x.begin());
      if (moved && std::isfinite(value) && value <= result.value + options.armijo * step * slope) {
        accepted = true;
        break;
      }
      // Minimizer of the quadratic through f(0), f'(0) and f(step), kept in [0.1, 0.5] * step.
      double next = 0.5 * step;
      if (std::isfinite(value)) {
        const double curvature = value - result.value - slope * step;
        if (curvature > 0.0) next = std::clamp(-slope * step * step / (2.0 * curvature), 0.1 * step, 0.5 * step);
      }
      step = next;
    }
    if (accepted && s_hist.empty()) {
      // Steepest-descent steps carry no curvature information, so refine the
      // step once with the quadratic model through f(0), f'(0) and f(step).
      const double curvature = value - result.value - slope * step;
      if (curvature > 0.0) {
        const double refined = -slope * step * step / (2.0 * curvature);
        if (std::abs(refined - step) > 1e-3 * step) {
          linalg::Vector refined_x(n);
          linalg::Vector refined_gradient(n);
          for (std::size_t i = 0; i < n; ++i) refined_x[i] = result.x[i] + refined * direction[i];
          double refined_value = std::numeric_limits<double>::infinity();
          try {
            refined_value = objective(refined_x, refined_gradient);
          } catch (const SolverError&) {
          } catch (const ModelingError&) {
          }
          ++result.evaluations;
          if (std::isfinite(refined_value) && refined_value < value &&
              refined_value <= result.value + options.armijo * refined * slope) {
            step = refined;
            value = refined_value;
            trial = std::move(refined_x);
            trial_gradient = std::move(refined_gradient);
          }
        }
      }
    }
    if (!accepted) {
      throw StagnationError("line search failed after " + std::to_string(options.max_backtracks) +
                                " backtracks at iteration " + std::to_string(iteration),
                            result);
    }

    linalg::Vector s(n);
    linalg::Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial[i] - result.x[i];
      y[i] = trial_gradient[i] - result.gradient[i];
    }
    const double sy = linalg::dot(s, y);
    if (sy > 0.0) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > options.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    result.x = trial;
    result.gradient = trial_gradient;
    result.value = value;
    const double gnorm = linalg::norm2(result.gradient);
    result.trace.push_back({iteration, value, gnorm, step});
    if (gnorm <= options.gradient_tolerance * g0) {
      result.converged = true;
      break;
    }
  }
  return result;
}

void write_trace_csv(std::ostream& out, std::span<const TraceEntry> trace) {
  out << "iteration,J,gradient_norm,step\n";
  char buffer[128];
  for (const auto& t : trace) {
    std::snprintf(buffer, sizeof buffer, "%zu,%.17g,%.17g,%.17g\n", t.iteration, t.value, t.gradient_norm,
                  t.step);
    out << buffer;
  }
}

}  // namespace vomfem
