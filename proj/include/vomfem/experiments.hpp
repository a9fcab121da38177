#pragma once

// Experiment drivers for the conductivity and groundwater studies, with the
// table type they report into and a small work queue that runs independent
// sweep cells concurrently.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "vomfem/assimilate.hpp"
#include "vomfem/config.hpp"
#include "vomfem/fem.hpp"
#include "vomfem/forward.hpp"

namespace vomfem {

using TableCell = std::variant<double, std::int64_t, std::string>;

/// Named columns, rows of scalars, and key/value metadata written as leading
/// '#' comment lines. Doubles are written with 17 significant digits.
struct ResultTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<TableCell>> rows;
  std::vector<std::pair<std::string, std::string>> metadata;

  ResultTable(std::string table_name, std::vector<std::string> column_names);

  void add_row(std::vector<TableCell> row);
  void set_metadata(const std::string& key, const std::string& value);
  std::optional<std::string> metadata_value(const std::string& key) const;

  std::size_t column(const std::string& column_name) const;
  const TableCell& at(std::size_t row, const std::string& column_name) const;
  /// Numeric cell as double; throws InvalidArgument for strings.
  double number(std::size_t row, const std::string& column_name) const;
  const std::string& text(std::size_t row, const std::string& column_name) const;

  void write_csv(std::ostream& out) const;
};

std::string format_cell(const TableCell& cell);

/// Runs task(0) .. task(count - 1) on up to `workers` threads and returns the
/// results in index order. If tasks throw, the exception of the lowest failing
/// index is rethrown after all workers have finished.
template <typename Result>
std::vector<Result> run_jobs(std::size_t count, std::size_t workers,
                             const std::function<Result(std::size_t)>& task) {
  std::vector<std::optional<Result>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        slots[i].emplace(task(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(workers, count));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  std::vector<Result> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

/// Worker count used when none is given: the hardware concurrency, at least 1.
std::size_t default_workers();

// ---------------------------------------------------------------------------
// Conductivity problem

struct GroundTruth {
  std::shared_ptr<const ConductivityProblem> problem;
  /// The six (a, b) mode pairs and their normalized coefficients.
  std::vector<std::array<int, 2>> modes;
  std::vector<double> coefficients;
  Field q_true;
  Field u_true;
};

/// q_true = sum over six distinct modes sin(a pi x) sin(b pi y), a, b in
/// {1, 2, 3}, with uniform [-1, 1] coefficients scaled so that the largest
/// nodal |q_true| is 1. u_true solves the forward problem for q_true.
GroundTruth make_ground_truth(std::size_t mesh_cells, std::uint64_t seed, double k0 = 0.5);

/// N points uniform in the open unit square, values u_true(X_i) plus
/// Gaussian noise of standard deviation sigma; all sigmas recorded as sigma.
Observations sample_observations(const Field& u_true, std::size_t count, double sigma, std::uint64_t seed);

/// Point-misfit or reconstruction-based estimate of q from one observation set.
struct InversionOutcome {
  std::string method;
  std::string status;  // "converged", "max_iterations", "stagnated" or "failed: ..."
  std::optional<Field> q_estimate;
  std::optional<Field> u_reconstruction;
  double functional = 0.0;
  double misfit = 0.0;
  double regularisation = 0.0;
  double seminorm = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;

  bool has_estimate() const { return q_estimate.has_value(); }
};

/// Minimizes the conductivity functional from q = 0. `method` is "point" or a
/// reconstruction name. Failures are captured in `status`.
InversionOutcome run_inversion(const ConductivityProblem& problem, const Observations& obs,
                               const std::string& method, const FunctionalSpec& spec,
                               const MinimizeOptions& options);

/// Named P2 fields on the conductivity mesh for a VTK snapshot.
struct FieldSnapshot {
  std::vector<Field> fields;
  std::vector<std::string> names;
};

struct PosteriorConsistencyResult {
  ResultTable table;
  /// Truth, reconstructions, estimates and errors at the largest N.
  FieldSnapshot snapshot;
};

/// Sweeps N over config.n_list and the misfit methods over config.methods.
/// Columns: n, method, status, q_error_l2, u_reconstruction_error_l2, J,
/// misfit, regularisation, iterations, evaluations.
PosteriorConsistencyResult run_posterior_consistency(const ExperimentConfig& config, std::size_t workers = 1);

/// Geometric sweep from lo to hi with count points; the endpoints are exact.
std::vector<double> geometric_sweep(double lo, double hi, std::size_t count);

/// Point-misfit optimum for each alpha of the L-curve sweep. Columns: alpha,
/// status, misfit, regularisation (alpha^2 int |grad q|^2), seminorm
/// (int |grad q|^2), q_error_l2, iterations.
ResultTable run_lcurve(const ExperimentConfig& config, std::size_t workers = 1);

/// Training and held-out index sets: a seeded uniformly random training subset
/// of round(fraction * n) indices (at least one, at most n - 1), both sorted.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_training(std::size_t n, double fraction,
                                                                           std::uint64_t seed);

/// Trains the sigma-weighted functional on the training subset for each alpha
/// of the sweep and scores sum over held-out points (u - d)^2 / (2 sigma^2).
/// Sweep values are in the units of the unweighted point functional: a sweep
/// value alpha trains with alpha / sigma, which gives the same minimizer as the
/// unweighted misfit regularised with alpha.
/// Columns: alpha, alpha_weighted, status, train_misfit, heldout_misfit,
/// normalized_heldout (2 E' / M), q_error_l2, iterations. The minimizing alpha
/// is in the metadata.
ResultTable run_crossvalidation(const ExperimentConfig& config, std::size_t workers = 1);

// ---------------------------------------------------------------------------
// Groundwater problem

/// Aquifer settings of the config, with the model time step aquifer_dt.
AquiferSettings aquifer_settings(const ExperimentConfig& config);
/// Number of model steps between measurements for a sampling interval.
std::size_t sampling_stride(const ExperimentConfig& config, double interval);

/// Observation wells on a jittered grid: in each of the three zones, cols x rows
/// cells with one well per cell displaced by up to a quarter cell in each
/// direction. Wells are ordered by zone, then row, then column.
std::vector<Point2> observation_wells(const ExperimentConfig& config, std::size_t cols, std::size_t rows,
                                      std::uint64_t seed);

struct TransmissivityEstimate {
  std::string status;
  std::array<double, kZones> transmissivity{};
  double misfit = 0.0;
  std::size_t iterations = 0;
};

/// Minimizes the groundwater misfit over log transmissivity, starting from
/// `initial` in every zone.
TransmissivityEstimate estimate_transmissivity(const AquiferProblem& problem, const WellRecord& record,
                                               double initial, const MinimizeOptions& options);

struct HydrologyResult {
  /// One row per replicate: scenario, replicate, status, T0, T1, T2, misfit, iterations.
  /// Replicate -1 is the noise-free identifiability check.
  ResultTable replicates;
  /// One row per scenario and zone: scenario, zone, true_T, mean_T, std_T,
  /// standard_error, successes, failures.
  ResultTable summary;
  /// Well placement: scenario, well, zone, x, y.
  ResultTable wells;
};

HydrologyResult run_hydrology_ensemble(const ExperimentConfig& config, std::size_t workers = 1);

// ---------------------------------------------------------------------------
// Gradient verification

/// Taylor remainder rates and central-difference agreement for the point
/// misfit functional, the field misfit against each reconstruction, the
/// sigma-weighted cross-validation functional, and the groundwater misfit.
/// Columns: functional, rate_1, rate_2, rate_3, min_rate, directional_derivative,
/// central_difference, fd_relative_error.
ResultTable run_taylor_suite(const ExperimentConfig& config);

}  // namespace vomfem
