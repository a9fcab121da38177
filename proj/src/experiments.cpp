#include "vomfem/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>

#include "vomfem/errors.hpp"
#include "vomfem/pointeval.hpp"
#include "vomfem/random.hpp"
#include "vomfem/reconstruct.hpp"
#include "vomfem/vom.hpp"

namespace vomfem {

// ---------------------------------------------------------------------------
// ResultTable

ResultTable::ResultTable(std::string table_name, std::vector<std::string> column_names)
    : name(std::move(table_name)), columns(std::move(column_names)) {}

void ResultTable::add_row(std::vector<TableCell> row) {
  if (row.size() != columns.size()) {
    throw InvalidArgument("table '" + name + "': row has " + std::to_string(row.size()) + " cells, expected " +
                          std::to_string(columns.size()));
  }
  rows.push_back(std::move(row));
}

void ResultTable::set_metadata(const std::string& key, const std::string& value) {
  for (auto& [k, v] : metadata) {
    if (k == key) {
      v = value;
      return;
    }
  }
  metadata.emplace_back(key, value);
}

std::optional<std::string> ResultTable::metadata_value(const std::string& key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::size_t ResultTable::column(const std::string& column_name) const {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == column_name) return c;
  }
  throw InvalidArgument("table '" + name + "' has no column '" + column_name + "'");
}

const TableCell& ResultTable::at(std::size_t row, const std::string& column_name) const {
  return rows.at(row).at(column(column_name));
}

double ResultTable::number(std::size_t row, const std::string& column_name) const {
  const auto& cell = at(row, column_name);
  if (const auto* d = std::get_if<double>(&cell)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return static_cast<double>(*i);
  throw InvalidArgument("column '" + column_name + "' holds text");
}

const std::string& ResultTable::text(std::size_t row, const std::string& column_name) const {
  const auto& cell = at(row, column_name);
  if (const auto* s = std::get_if<std::string>(&cell)) return *s;
  throw InvalidArgument("column '" + column_name + "' is numeric");
}

std::string format_cell(const TableCell& cell) {
  if (const auto* d = std::get_if<double>(&cell)) {
    if (std::isnan(*d)) return "nan";
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", *d);
    return buffer;
  }
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  const auto& s = std::get<std::string>(cell);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char ch : s) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  return quoted + "\"";
}

void ResultTable::write_csv(std::ostream& out) const {
  for (const auto& [k, v] : metadata) out << "# " << k << " = " << v << '\n';
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_cell(row[c]);
    out << '\n';
  }
}

std::size_t default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream indices for derive_seed, one per independent random draw.
enum Stream : std::uint64_t {
  kTruthStream = 1,
  kPosteriorObservations = 2,
  kLcurveObservations = 3,
  kXvalObservations = 4,
  kXvalSplit = 5,
  kWellPlacement = 10,
  kWellNoise = 20,
  kTaylorStream = 30,
};

std::int64_t as_int(std::size_t v) { return static_cast<std::int64_t>(v); }

Field difference(const Field& a, const Field& b) {
  Field out(a.space_ptr());
  for (std::size_t i = 0; i < a.size(); ++i) out.coefficients()[i] = a.coefficients()[i] - b.coefficients()[i];
  return out;
}

double l2_distance(const Field& a, const Field& b) { return norm_L2(difference(a, b)); }

void stamp(ResultTable& table, const ExperimentConfig& config) {
  table.set_metadata("table", table.name);
  table.set_metadata("seed", std::to_string(config.seed));
  table.set_metadata("config_hash", config_hash(config));
}

MinimizeOptions minimize_options(const ExperimentConfig& config) {
  MinimizeOptions options;
  options.max_iterations = config.max_iterations;
  options.gradient_tolerance = config.gradient_tolerance;
  return options;
}

std::string describe(const std::exception& e) { return std::string("failed: ") + e.what(); }

}  // namespace

// ---------------------------------------------------------------------------
// Conductivity problem

GroundTruth make_ground_truth(std::size_t mesh_cells, std::uint64_t seed, double k0) {
  auto problem = std::make_shared<ConductivityProblem>(
      make_conductivity_problem(mesh_cells, [](Point2) { return 1.0; }, k0));
  Rng rng(derive_seed(seed, kTruthStream));

  std::vector<std::array<int, 2>> all;
  for (int a = 1; a <= 3; ++a) {
    for (int b = 1; b <= 3; ++b) all.push_back({a, b});
  }
  for (std::size_t i = all.size() - 1; i > 0; --i) std::swap(all[i], all[rng.below(i + 1)]);
  std::vector<std::array<int, 2>> modes(all.begin(), all.begin() + 6);
  std::vector<double> coefficients(modes.size());
  for (double& c : coefficients) c = rng.uniform(-1.0, 1.0);

  const auto raw = [&](Point2 p) {
    double v = 0.0;
    for (std::size_t m = 0; m < modes.size(); ++m) {
      v += coefficients[m] * std::sin(modes[m][0] * std::numbers::pi * p.x) *
           std::sin(modes[m][1] * std::numbers::pi * p.y);
    }
    return v;
  };
  Field q = interpolate_callable(problem->control_space, raw);
  double peak = 0.0;
  for (double v : q.coefficients()) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : q.coefficients()) v /= peak;
    for (double& c : coefficients) c /= peak;
  }
  Field u = solve_conductivity(*problem, q);
  return GroundTruth{std::move(problem), std::move(modes), std::move(coefficients), std::move(q), std::move(u)};
}

Observations sample_observations(const Field& u_true, std::size_t count, double sigma, std::uint64_t seed) {
  if (count == 0) throw InvalidArgument("at least one observation is required");
  if (sigma < 0.0) throw InvalidArgument("noise sigma must be non-negative");
  const auto [lx, ly] = u_true.space().mesh().extent();
  Rng rng(seed);
  std::vector<Point2> points(count);
  for (auto& p : points) {
    p.x = lx * rng.uniform_open();
    p.y = ly * rng.uniform_open();
  }
  auto vom = build_vertex_only_mesh(u_true.space().mesh_ptr(), std::move(points));
  const PointInterpolator interp(u_true.space_ptr(), vom);
  auto values = interp.apply(u_true.coefficients());
  if (sigma > 0.0) {
    for (double& v : values) v += sigma * rng.normal();
  }
  // A zero sigma is stored as 1 so that weighted functionals stay defined.
  std::vector<double> sigmas(count, sigma > 0.0 ? sigma : 1.0);
  return make_observations(std::move(vom), std::move(values), std::move(sigmas));
}

InversionOutcome run_inversion(const ConductivityProblem& problem, const Observations& obs,
                               const std::string& method, const FunctionalSpec& spec,
                               const MinimizeOptions& options) {
  InversionOutcome out;
  out.method = method;
  try {
    std::optional<ConductivityFunctional> functional;
    if (method == "point") {
      FunctionalSpec s = spec;
      s.misfit = MisfitKind::Point;
      functional.emplace(problem, s, obs);
    } else {
      Field rec = reconstruct(obs, problem.state_space, parse_reconstruction_method(method));
      out.u_reconstruction = rec;
      FunctionalSpec s = spec;
      s.misfit = MisfitKind::Field;
      functional.emplace(problem, s, std::move(rec));
    }
    const Objective objective = [&](std::span<const double> x, std::span<double> grad) {
      auto report = functional->gradient(x);
      std::copy(report.gradient.begin(), report.gradient.end(), grad.begin());
      return report.value;
    };
    MinimizeResult result;
    try {
      result = minimize(objective, linalg::Vector(problem.control_space->ndofs(), 0.0), options);
      out.status = result.converged ? "converged" : "max_iterations";
    } catch (const StagnationError& e) {
      result = e.last();
      out.status = "stagnated";
    }
    const auto final_report = functional->evaluate(result.x);
    out.functional = final_report.value;
    out.misfit = final_report.misfit;
    out.regularisation = final_report.regularisation;
    out.iterations = result.trace.empty() ? 0 : result.trace.back().iteration;
    out.evaluations = result.evaluations;
    Field q(problem.control_space, std::move(result.x));
    out.seminorm = regularisation(q, 1.0);
    out.q_estimate = std::move(q);
  } catch (const std::exception& e) {
    out.status = describe(e);
    out.q_estimate.reset();
  }
  return out;
}

PosteriorConsistencyResult run_posterior_consistency(const ExperimentConfig& config, std::size_t workers) {
  validate_config(config);
  const auto truth = make_ground_truth(config.mesh_cells, config.seed, config.k0);
  double u_max = 0.0;
  for (double v : truth.u_true.coefficients()) u_max = std::max(u_max, std::abs(v));
  const double sigma = config.noise_relative * u_max;

  std::vector<Observations> observation_sets;
  for (std::size_t n : config.n_list) {
    observation_sets.push_back(sample_observations(
        truth.u_true, n, sigma, derive_seed(derive_seed(config.seed, kPosteriorObservations), n)));
  }

  FunctionalSpec spec;
  spec.alpha = config.alpha;
  const auto options = minimize_options(config);
  const std::size_t methods = config.methods.size();
  const std::function<InversionOutcome(std::size_t)> job = [&](std::size_t index) {
    return run_inversion(*truth.problem, observation_sets[index / methods], config.methods[index % methods], spec,
                         options);
  };
  const auto outcomes = run_jobs(config.n_list.size() * methods, workers, job);

  PosteriorConsistencyResult result{
      ResultTable("posterior_consistency", {"n", "method", "status", "q_error_l2", "u_reconstruction_error_l2",
                                            "J", "misfit", "regularisation", "iterations", "evaluations"}),
      {}};
  stamp(result.table, config);
  result.table.set_metadata("alpha", format_cell(config.alpha));
  result.table.set_metadata("sigma", format_cell(sigma));
  result.table.set_metadata("q_true_l2", format_cell(norm_L2(truth.q_true)));
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    const double q_error = o.has_estimate() ? l2_distance(*o.q_estimate, truth.q_true) : kNaN;
    const double u_error = o.u_reconstruction ? l2_distance(*o.u_reconstruction, truth.u_true) : kNaN;
    result.table.add_row({as_int(config.n_list[i / methods]), o.method, o.status, q_error, u_error,
                          o.has_estimate() ? o.functional : kNaN, o.has_estimate() ? o.misfit : kNaN,
                          o.has_estimate() ? o.regularisation : kNaN, as_int(o.iterations), as_int(o.evaluations)});
  }

  if (config.snapshots) {
    auto& snap = result.snapshot;
    snap.fields.push_back(truth.q_true);
    snap.names.push_back("q_true");
    snap.fields.push_back(truth.u_true);
    snap.names.push_back("u_true");
    const std::size_t last = (config.n_list.size() - 1) * methods;
    for (std::size_t m = 0; m < methods; ++m) {
      const auto& o = outcomes[last + m];
      if (o.u_reconstruction) {
        snap.fields.push_back(*o.u_reconstruction);
        snap.names.push_back("u_rec_" + o.method);
      }
      if (o.has_estimate()) {
        snap.fields.push_back(*o.q_estimate);
        snap.names.push_back("q_est_" + o.method);
        snap.fields.push_back(difference(*o.q_estimate, truth.q_true));
        snap.names.push_back("q_error_" + o.method);
      }
    }
  }
  return result;
}

std::vector<double> geometric_sweep(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0 && hi > lo) || count < 2) throw InvalidArgument("geometric sweep needs 0 < lo < hi and two points");
  std::vector<double> out(count);
  const double ratio = std::log(hi / lo);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = lo * std::exp(ratio * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

ResultTable run_lcurve(const ExperimentConfig& config, std::size_t workers) {
  validate_config(config);
  const auto truth = make_ground_truth(config.mesh_cells, config.seed, config.k0);
  double u_max = 0.0;
  for (double v : truth.u_true.coefficients()) u_max = std::max(u_max, std::abs(v));
  const double sigma = config.noise_relative * u_max;
  const auto obs = sample_observations(truth.u_true, config.lcurve_n, sigma,
                                       derive_seed(config.seed, kLcurveObservations));
  const auto alphas = geometric_sweep(config.lcurve_alpha_min, config.lcurve_alpha_max, config.alpha_count);
  const auto options = minimize_options(config);

  const std::function<InversionOutcome(std::size_t)> job = [&](std::size_t i) {
    FunctionalSpec spec;
    spec.alpha = alphas[i];
    return run_inversion(*truth.problem, obs, "point", spec, options);
  };
  const auto outcomes = run_jobs(alphas.size(), workers, job);

  ResultTable table("lcurve", {"alpha", "status", "misfit", "regularisation", "seminorm", "q_error_l2", "iterations"});
  stamp(table, config);
  table.set_metadata("n", std::to_string(config.lcurve_n));
  table.set_metadata("sigma", format_cell(sigma));
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const auto& o = outcomes[i];
    const bool ok = o.has_estimate();
    table.add_row({alphas[i], o.status, ok ? o.misfit : kNaN, ok ? o.regularisation : kNaN, ok ? o.seminorm : kNaN,
                   ok ? l2_distance(*o.q_estimate, truth.q_true) : kNaN, as_int(o.iterations)});
  }
  return table;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_training(std::size_t n, double fraction,
                                                                           std::uint64_t seed) {
  if (n < 2) throw InvalidArgument("a split needs at least two observations");
  if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidArgument("training fraction must lie in (0, 1)");
  const auto train_count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n - 1);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < train_count; ++i) std::swap(order[i], order[i + rng.below(n - i)]);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_count));
  std::vector<std::size_t> held(order.begin() + static_cast<std::ptrdiff_t>(train_count), order.end());
  std::sort(train.begin(), train.end());
  std::sort(held.begin(), held.end());
  return {std::move(train), std::move(held)};
}

ResultTable run_crossvalidation(const ExperimentConfig& config, std::size_t workers) {
  validate_config(config);
  const auto truth = make_ground_truth(config.mesh_cells, config.seed, config.k0);
  double u_max = 0.0;
  for (double v : truth.u_true.coefficients()) u_max = std::max(u_max, std::abs(v));
  const double sigma = config.noise_relative * u_max;
  if (!(sigma > 0.0)) throw ConfigError("cross-validation needs positive observation noise");
  const auto all = sample_observations(truth.u_true, config.xval_n, sigma, derive_seed(config.seed, kXvalObservations));
  const auto [train_idx, held_idx] = split_training(all.size(), config.xval_train_fraction,
                                                    derive_seed(config.seed, kXvalSplit));
  const auto train = select_observations(all, train_idx);
  const auto held = select_observations(all, held_idx);
  const PointInterpolator held_interp(truth.problem->state_space, held.points);
  const auto alphas = geometric_sweep(config.xval_alpha_min, config.xval_alpha_max, config.alpha_count);
  const auto options = minimize_options(config);

  struct Cell {
    InversionOutcome outcome;
    double heldout = kNaN;
  };
  const std::function<Cell(std::size_t)> job = [&](std::size_t i) {
    FunctionalSpec spec;
    spec.alpha = alphas[i] / sigma;
    spec.sigma_weighted = true;
    spec.regularisation_scale = 0.5;
    Cell cell{run_inversion(*truth.problem, train, "point", spec, options)};
    if (cell.outcome.has_estimate()) {
      try {
        const Field u = solve_conductivity(*truth.problem, *cell.outcome.q_estimate);
        cell.heldout = misfit_point(u, held, held_interp, true);
      } catch (const SolverError& e) {
        cell.outcome.status = describe(e);
      }
    }
    return cell;
  };
  const auto cells = run_jobs(alphas.size(), workers, job);

  ResultTable table("crossvalidation", {"alpha", "alpha_weighted", "status", "train_misfit", "heldout_misfit", "normalized_heldout",
                                        "q_error_l2", "iterations"});
  stamp(table, config);
  table.set_metadata("sigma", format_cell(sigma));
  table.set_metadata("train_count", std::to_string(train.size()));
  table.set_metadata("heldout_count", std::to_string(held.size()));
  const double m = static_cast<double>(held.size());
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const auto& c = cells[i];
    const bool ok = c.outcome.has_estimate() && std::isfinite(c.heldout);
    table.add_row({alphas[i], alphas[i] / sigma, c.outcome.status, ok ? c.outcome.misfit : kNaN, ok ? c.heldout : kNaN,
                   ok ? 2.0 * c.heldout / m : kNaN, ok ? l2_distance(*c.outcome.q_estimate, truth.q_true) : kNaN,
                   as_int(c.outcome.iterations)});
    if (ok && (!best || c.heldout < cells[*best].heldout)) best = i;
  }
  if (best) {
    table.set_metadata("best_alpha", format_cell(alphas[*best]));
    table.set_metadata("best_index", std::to_string(*best));
    table.set_metadata("best_normalized_heldout", format_cell(2.0 * cells[*best].heldout / m));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Groundwater problem

AquiferSettings aquifer_settings(const ExperimentConfig& config) {
  AquiferSettings s;
  s.length_x = config.aquifer_length_x;
  s.length_y = config.aquifer_length_y;
  s.cells_x = config.aquifer_cells_x;
  s.cells_y = config.aquifer_cells_y;
  s.storativity = config.storativity;
  std::copy(config.transmissivity.begin(), config.transmissivity.end(), s.transmissivity.begin());
  s.rates = {config.pumping_rate};
  s.dt = config.aquifer_dt;
  s.horizon = config.horizon;
  return s;
}

std::size_t sampling_stride(const ExperimentConfig& config, double interval) {
  return static_cast<std::size_t>(std::llround(interval / config.aquifer_dt));
}

std::vector<Point2> observation_wells(const ExperimentConfig& config, std::size_t cols, std::size_t rows,
                                      std::uint64_t seed) {
  if (cols == 0 || rows == 0) throw InvalidArgument("well grid needs at least one row and column");
  Rng rng(seed);
  const double zone_width = config.aquifer_length_x / static_cast<double>(kZones);
  const double dx = zone_width / static_cast<double>(cols);
  const double dy = config.aquifer_length_y / static_cast<double>(rows);
  std::vector<Point2> wells;
  for (std::size_t z = 0; z < kZones; ++z) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double jx = rng.uniform(-0.25, 0.25);
        const double jy = rng.uniform(-0.25, 0.25);
        wells.push_back({static_cast<double>(z) * zone_width + (static_cast<double>(c) + 0.5 + jx) * dx,
                         (static_cast<double>(r) + 0.5 + jy) * dy});
      }
    }
  }
  return wells;
}

TransmissivityEstimate estimate_transmissivity(const AquiferProblem& problem, const WellRecord& record,
                                               double initial, const MinimizeOptions& options) {
  TransmissivityEstimate out;
  out.transmissivity.fill(kNaN);
  try {
    const GroundwaterFunctional functional(problem, record);
    const Objective objective = [&](std::span<const double> p, std::span<double> grad) {
      std::array<double, kZones> t{};
      for (std::size_t z = 0; z < kZones; ++z) t[z] = std::exp(p[z]);
      std::array<double, kZones> g{};
      const double value = functional.gradient(t, g);
      for (std::size_t z = 0; z < kZones; ++z) grad[z] = g[z] * t[z];
      return value;
    };
    MinimizeResult result;
    try {
      result = minimize(objective, linalg::Vector(kZones, std::log(initial)), options);
      out.status = result.converged ? "converged" : "max_iterations";
    } catch (const StagnationError& e) {
      result = e.last();
      out.status = "stagnated";
    }
    for (std::size_t z = 0; z < kZones; ++z) out.transmissivity[z] = std::exp(result.x[z]);
    out.misfit = result.value;
    out.iterations = result.trace.empty() ? 0 : result.trace.back().iteration;
  } catch (const std::exception& e) {
    out.status = describe(e);
  }
  return out;
}

HydrologyResult run_hydrology_ensemble(const ExperimentConfig& config, std::size_t workers) {
  validate_config(config);
  struct Scenario {
    std::string name;
    double interval;
    std::size_t cols;
    std::size_t rows;
  };
  const std::array<Scenario, 2> scenarios{
      Scenario{"A", config.scenario_a_interval, config.scenario_a_grid[0], config.scenario_a_grid[1]},
      Scenario{"B", config.scenario_b_interval, config.scenario_b_grid[0], config.scenario_b_grid[1]}};

  HydrologyResult result{
      ResultTable("hydrology_replicates", {"scenario", "replicate", "status", "T0", "T1", "T2", "misfit", "iterations"}),
      ResultTable("hydrology_summary", {"scenario", "zone", "true_T", "mean_T", "std_T", "standard_error", "successes",
                                        "failures"}),
      ResultTable("hydrology_wells", {"scenario", "well", "zone", "x", "y"})};
  stamp(result.replicates, config);
  stamp(result.summary, config);
  stamp(result.wells, config);

  MinimizeOptions options = minimize_options(config);
  const std::size_t replicates = config.ensemble_size;
  const auto problem = make_aquifer_problem(aquifer_settings(config));
  const auto truth = solve_groundwater(problem);
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const auto& scenario = scenarios[s];
    const auto points = observation_wells(config, scenario.cols, scenario.rows,
                                          derive_seed(config.seed, kWellPlacement + s));
    const std::size_t per_zone = scenario.cols * scenario.rows;
    for (std::size_t w = 0; w < points.size(); ++w) {
      result.wells.add_row({scenario.name, as_int(w), as_int(w / per_zone), points[w].x, points[w].y});
    }
    const auto wells = build_vertex_only_mesh(problem.mesh, points);
    const auto clean = sample_wells(problem, truth, wells, config.well_noise,
                                    sampling_stride(config, scenario.interval));

    // Index 0 is the noise-free replicate; 1..R carry independent noise.
    const std::function<TransmissivityEstimate(std::size_t)> job = [&](std::size_t r) {
      WellRecord record = clean;
      if (r > 0) {
        Rng rng(derive_seed(derive_seed(config.seed, kWellNoise + s), r));
        for (auto& row : record.values) {
          for (double& v : row) v += config.well_noise * rng.normal();
        }
      }
      return estimate_transmissivity(problem, record, config.initial_transmissivity, options);
    };
    const auto estimates = run_jobs(replicates + 1, workers, job);

    std::array<std::vector<double>, kZones> samples;
    std::size_t failures = 0;
    for (std::size_t r = 0; r < estimates.size(); ++r) {
      const auto& e = estimates[r];
      result.replicates.add_row({scenario.name, static_cast<std::int64_t>(r) - 1, e.status, e.transmissivity[0],
                                 e.transmissivity[1], e.transmissivity[2], e.misfit, as_int(e.iterations)});
      if (r == 0) continue;
      if (e.status.starts_with("failed")) {
        ++failures;
        continue;
      }
      for (std::size_t z = 0; z < kZones; ++z) samples[z].push_back(e.transmissivity[z]);
    }
    for (std::size_t z = 0; z < kZones; ++z) {
      const auto& v = samples[z];
      const double n = static_cast<double>(v.size());
      double mean = kNaN;
      double sd = kNaN;
      if (!v.empty()) {
        mean = compensated_sum(v) / n;
        if (v.size() > 1) {
          std::vector<double> sq;
          for (double x : v) sq.push_back((x - mean) * (x - mean));
          sd = std::sqrt(compensated_sum(sq) / (n - 1.0));
        }
      }
      result.summary.add_row({scenario.name, as_int(z), config.transmissivity[z], mean, sd,
                              v.size() > 1 ? sd / std::sqrt(n) : kNaN, as_int(v.size()), as_int(failures)});
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Gradient verification

ResultTable run_taylor_suite(const ExperimentConfig& config) {
  validate_config(config);
  ResultTable table("taylor", {"functional", "rate_1", "rate_2", "rate_3", "min_rate", "directional_derivative",
                               "central_difference", "fd_relative_error"});
  stamp(table, config);

  const auto record = [&](const std::string& name, const ScalarFunction& j, std::span<const double> x,
                          std::span<const double> g, std::span<const double> direction, double h) {
    const auto taylor = taylor_test(j, x, g, direction);
    const double slope = linalg::dot(g, direction);
    const double fd = central_difference(j, x, direction, h);
    std::vector<TableCell> row{name};
    for (std::size_t i = 0; i < 3; ++i) row.push_back(i < taylor.rates.size() ? taylor.rates[i] : kNaN);
    row.push_back(taylor.min_rate());
    row.push_back(slope);
    row.push_back(fd);
    row.push_back(std::abs(fd - slope) / std::abs(slope));
    table.add_row(std::move(row));
  };

  auto truth = make_ground_truth(config.taylor_mesh_cells, derive_seed(config.seed, kTaylorStream), config.k0);
  ConductivityProblem problem = *truth.problem;
  problem.solver.tolerance = 1e-13;
  double u_max = 0.0;
  for (double v : truth.u_true.coefficients()) u_max = std::max(u_max, std::abs(v));
  const double sigma = config.noise_relative * u_max;
  const auto obs = sample_observations(truth.u_true, config.taylor_n, sigma,
                                       derive_seed(config.seed, kTaylorStream + 1));

  Rng rng(derive_seed(config.seed, kTaylorStream + 2));
  const std::size_t n = problem.control_space->ndofs();
  linalg::Vector q(n);
  linalg::Vector direction(n);
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = 0.5 * truth.q_true.coefficients()[i] + 0.1 * rng.uniform(-1.0, 1.0);
    direction[i] = rng.uniform(-1.0, 1.0);
  }

  const auto check = [&](const std::string& name, const ConductivityFunctional& f) {
    const auto report = f.gradient(q);
    record(name, [&](std::span<const double> x) { return f.evaluate(x).value; }, q, report.gradient, direction, 1e-4);
  };

  FunctionalSpec spec;
  spec.alpha = config.alpha;
  check("J_point", ConductivityFunctional(problem, spec, obs));
  for (const std::string method : {"nearest", "linear", "rbf"}) {
    FunctionalSpec field_spec = spec;
    field_spec.misfit = MisfitKind::Field;
    check("J_field_" + method,
          ConductivityFunctional(problem, field_spec,
                                 reconstruct(obs, problem.state_space, parse_reconstruction_method(method))));
  }
  FunctionalSpec weighted = spec;
  weighted.sigma_weighted = true;
  weighted.regularisation_scale = 0.5;
  check("E_weighted", ConductivityFunctional(problem, weighted, obs));

  // Groundwater misfit in log-transmissivity coordinates.
  const auto aquifer = make_aquifer_problem(aquifer_settings(config));
  const auto wells = build_vertex_only_mesh(
      aquifer.mesh, observation_wells(config, config.scenario_a_grid[0], config.scenario_a_grid[1],
                                      derive_seed(config.seed, kWellPlacement)));
  auto well_record = sample_wells(aquifer, solve_groundwater(aquifer), wells, config.well_noise,
                                 sampling_stride(config, config.scenario_a_interval));
  for (auto& row : well_record.values) {
    for (double& v : row) v += config.well_noise * rng.normal();
  }
  const GroundwaterFunctional gw(aquifer, well_record);
  const auto to_t = [](std::span<const double> p) {
    std::array<double, kZones> t{};
    for (std::size_t z = 0; z < kZones; ++z) t[z] = std::exp(p[z]);
    return t;
  };
  const linalg::Vector p{std::log(0.7 * config.transmissivity[0]), std::log(1.2 * config.transmissivity[1]),
                         std::log(0.9 * config.transmissivity[2])};
  const linalg::Vector p_direction{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  std::array<double, kZones> g_t{};
  const auto t0 = to_t(p);
  gw.gradient(t0, g_t);
  linalg::Vector g_p(kZones);
  for (std::size_t z = 0; z < kZones; ++z) g_p[z] = g_t[z] * t0[z];
  record("groundwater", [&](std::span<const double> x) { return gw.evaluate(to_t(x)); }, p, g_p, p_direction, 1e-4);
  return table;
}

}  // namespace vomfem
