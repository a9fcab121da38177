#pragma once

// Flat key = value experiment configuration with typed validation.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace vomfem {

struct ExperimentConfig {
  std::uint64_t seed = 20240607;

  // Conductivity problem.
  std::size_t mesh_cells = 32;
  double k0 = 0.5;
  double noise_relative = 0.01;
  double alpha = 0.02;
  std::vector<std::size_t> n_list{64, 256, 1024, 4096};
  std::vector<std::string> methods{"point", "nearest", "linear", "rbf"};
  std::size_t max_iterations = 200;
  double gradient_tolerance = 1e-8;
  bool snapshots = true;

  // Regularisation sweeps.
  std::size_t alpha_count = 13;
  std::size_t lcurve_n = 256;
  double lcurve_alpha_min = 1e-4;
  double lcurve_alpha_max = 1.0;
  std::size_t xval_n = 4096;
  double xval_train_fraction = 0.05;
  double xval_alpha_min = 1e-4;
  double xval_alpha_max = 1.0;

  // Gradient verification.
  std::size_t taylor_mesh_cells = 8;
  std::size_t taylor_n = 64;

  // Aquifer and well ensemble.
  double aquifer_length_x = 1000.0;
  double aquifer_length_y = 500.0;
  std::size_t aquifer_cells_x = 36;
  std::size_t aquifer_cells_y = 18;
  double storativity = 1e-4;
  std::vector<double> transmissivity{50.0, 150.0, 300.0};
  double pumping_rate = -2000.0;
  double horizon = 10.0;
  /// Model time step shared by both well scenarios (days).
  double aquifer_dt = 0.125;
  double initial_transmissivity = 100.0;
  double well_noise = 0.01;
  std::size_t ensemble_size = 30;
  double scenario_a_interval = 0.5;
  std::vector<std::size_t> scenario_a_grid{2, 3};
  double scenario_b_interval = 0.125;
  std::vector<std::size_t> scenario_b_grid{1, 2};
};

/// Parses "key = value" lines; '#' starts a comment. Unknown keys, malformed
/// values and repeated keys raise ConfigError naming the line.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

/// Checks cross-field invariants (positive counts, 0 < fraction < 1, ...).
void validate_config(const ExperimentConfig& config);

/// Every key with its value in canonical text form, in a fixed order.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& config);
/// Writes config_entries in the input format.
void write_config(std::ostream& out, const ExperimentConfig& config);
/// 64-bit FNV-1a of the canonical form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

}  // namespace vomfem
