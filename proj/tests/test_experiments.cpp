#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "vomfem/config.hpp"
#include "vomfem/errors.hpp"
#include "vomfem/experiments.hpp"
#include "vomfem/pointeval.hpp"
#include "vomfem/vom.hpp"

using namespace vomfem;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string config_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string csv(const ResultTable& table) {
  std::ostringstream out;
  table.write_csv(out);
  return out.str();
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.mesh_cells = 8;
  c.n_list = {16, 64};
  c.max_iterations = 25;
  c.alpha_count = 3;
  c.lcurve_n = 32;
  c.xval_n = 80;
  c.xval_train_fraction = 0.25;
  return c;
}

}  // namespace

TEST_CASE("config: defaults survive a write and parse round trip") {
  const ExperimentConfig defaults;
  std::ostringstream text;
  write_config(text, defaults);
  const auto parsed = parse(text.str());
  CHECK(config_hash(parsed) == config_hash(defaults));
  CHECK(config_hash(defaults).size() == 16);
}

TEST_CASE("config: values, lists and comments are read") {
  const auto c = parse(
      "# comment line\n"
      "seed = 7   # trailing comment\n"
      "\n"
      "n_list = 10, 20,30\n"
      "methods = point, rbf\n"
      "alpha = 0.5\n"
      "snapshots = false\n"
      "transmissivity = 1, 2, 3\n");
  CHECK(c.seed == 7);
  CHECK(c.n_list == std::vector<std::size_t>{10, 20, 30});
  CHECK(c.methods == std::vector<std::string>{"point", "rbf"});
  CHECK(c.alpha == 0.5);
  CHECK_FALSE(c.snapshots);
  CHECK(c.transmissivity == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(config_hash(c) != config_hash(ExperimentConfig{}));
}

TEST_CASE("config: errors name the offending line") {
  CHECK(config_error("seed = 1\nalhpa = 0.1\n").find("line 2") != std::string::npos);
  CHECK(config_error("seed = 1\nalhpa = 0.1\n").find("unknown key 'alhpa'") != std::string::npos);
  CHECK(config_error("\n\nalpha = fast\n").find("line 3") != std::string::npos);
  CHECK(config_error("seed = -4\n").find("line 1") != std::string::npos);
  CHECK(config_error("seed\n").find("key = value") != std::string::npos);
  CHECK(config_error("seed = 1\nseed = 2\n").find("given twice") != std::string::npos);
  CHECK(config_error("methods = point, cubic\n").find("unknown method") != std::string::npos);
  CHECK(config_error("alpha =\n").find("missing value") != std::string::npos);
}

TEST_CASE("config: cross-field validation") {
  CHECK_FALSE(config_error("xval_train_fraction = 1\n").empty());
  CHECK_FALSE(config_error("xval_train_fraction = 0\n").empty());
  CHECK_FALSE(config_error("n_list = 0, 4\n").empty());
  CHECK_FALSE(config_error("transmissivity = 1, 2\n").empty());
  CHECK_FALSE(config_error("aquifer_dt = 0.3\n").empty());
  CHECK_FALSE(config_error("scenario_b_interval = 0.2\n").empty());
  CHECK_FALSE(config_error("lcurve_alpha_min = 2\n").empty());
  CHECK_THROWS_AS(load_config("/nonexistent/config.txt"), ConfigError);
}

TEST_CASE("table: csv layout, quoting and lookups") {
  ResultTable t("demo", {"a", "b", "c"});
  t.set_metadata("seed", "3");
  t.set_metadata("seed", "4");
  t.add_row({1.0 / 3.0, std::int64_t{-2}, std::string("x,y")});
  t.add_row({std::nan(""), std::int64_t{5}, std::string("plain")});
  CHECK(csv(t) ==
        "# seed = 4\n"
        "a,b,c\n"
        "0.33333333333333331,-2,\"x,y\"\n"
        "nan,5,plain\n");
  CHECK(t.number(0, "b") == -2.0);
  CHECK(t.text(1, "c") == "plain");
  CHECK(t.metadata_value("seed") == "4");
  CHECK_FALSE(t.metadata_value("hash").has_value());
  CHECK_THROWS_AS(t.number(0, "c"), InvalidArgument);
  CHECK_THROWS_AS(t.column("d"), InvalidArgument);
  CHECK_THROWS_AS(t.add_row({1.0}), InvalidArgument);
}

TEST_CASE("work queue: results in index order for any worker count") {
  const std::function<std::size_t(std::size_t)> square = [](std::size_t i) { return i * i; };
  const auto serial = run_jobs(37, 1, square);
  for (std::size_t workers : {2u, 3u, 8u, 100u}) CHECK(run_jobs(37, workers, square) == serial);
  CHECK(serial[6] == 36);
  CHECK(run_jobs(0, 4, square).empty());
  CHECK(default_workers() >= 1);
}

TEST_CASE("work queue: lowest failing index is rethrown") {
  const std::function<int(std::size_t)> task = [](std::size_t i) -> int {
    if (i == 5 || i == 9) throw std::runtime_error("job " + std::to_string(i));
    return static_cast<int>(i);
  };
  for (std::size_t workers : {1u, 4u}) {
    try {
      run_jobs(12, workers, task);
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()) == "job 5");
    }
  }
}

TEST_CASE("ground truth: normalized, reproducible, six distinct modes") {
  const auto a = make_ground_truth(8, 11);
  const auto b = make_ground_truth(8, 11);
  const auto c = make_ground_truth(8, 12);
  CHECK(std::equal(a.q_true.coefficients().begin(), a.q_true.coefficients().end(), b.q_true.coefficients().begin()));
  CHECK(std::equal(a.u_true.coefficients().begin(), a.u_true.coefficients().end(), b.u_true.coefficients().begin()));
  CHECK_FALSE(std::equal(a.q_true.coefficients().begin(), a.q_true.coefficients().end(),
                         c.q_true.coefficients().begin()));

  double peak = 0.0;
  for (double v : a.q_true.coefficients()) peak = std::max(peak, std::abs(v));
  CHECK(peak == 1.0);

  REQUIRE(a.modes.size() == 6);
  std::set<std::array<int, 2>> distinct(a.modes.begin(), a.modes.end());
  CHECK(distinct.size() == 6);
  for (const auto& m : a.modes) {
    CHECK(m[0] >= 1);
    CHECK(m[0] <= 3);
    CHECK(m[1] >= 1);
    CHECK(m[1] <= 3);
  }

  // The stored modes and coefficients reproduce the nodal values.
  const auto coords = a.q_true.space().dof_coordinates();
  for (std::size_t i = 0; i < coords.size(); i += 7) {
    double v = 0.0;
    for (std::size_t m = 0; m < 6; ++m) {
      v += a.coefficients[m] * std::sin(a.modes[m][0] * std::numbers::pi * coords[i].x) *
           std::sin(a.modes[m][1] * std::numbers::pi * coords[i].y);
    }
    CHECK(std::abs(v - a.q_true.coefficients()[i]) < 1e-14);
  }

  // Positive forcing with a zero boundary gives a positive interior state.
  const auto boundary = a.problem->state_space->boundary_dofs();
  const std::set<std::size_t> on_boundary(boundary.begin(), boundary.end());
  for (std::size_t i = 0; i < a.u_true.size(); ++i) {
    if (!on_boundary.contains(i)) CHECK(a.u_true.coefficients()[i] > 0.0);
  }
}

TEST_CASE("observations: exact without noise and unbiased with it") {
  const auto truth = make_ground_truth(8, 3);
  const auto clean = sample_observations(truth.u_true, 200, 0.0, 99);
  const auto pts = clean.points->points();
  for (std::size_t i = 0; i < clean.size(); ++i) {
    CHECK(pts[i].x > 0.0);
    CHECK(pts[i].x < 1.0);
    CHECK(pts[i].y > 0.0);
    CHECK(pts[i].y < 1.0);
    CHECK(std::abs(clean.values[i] - truth.u_true.evaluate(pts[i])) < 1e-14);
  }

  const auto again = sample_observations(truth.u_true, 200, 0.0, 99);
  CHECK(again.values == clean.values);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(again.points->points()[i] == pts[i]);

  const double sigma = 0.05;
  const std::size_t n = 32768;
  const auto noisy = sample_observations(truth.u_true, n, sigma, 5);
  const PointInterpolator interp(truth.u_true.space_ptr(), noisy.points);
  const auto exact = interp.apply(truth.u_true.coefficients());
  std::vector<double> eta(n);
  for (std::size_t i = 0; i < n; ++i) eta[i] = noisy.values[i] - exact[i];
  const double mean = compensated_sum(eta) / static_cast<double>(n);
  CHECK(std::abs(mean) < 4.0 * sigma / std::sqrt(static_cast<double>(n)));
  double var = 0.0;
  for (double e : eta) var += (e - mean) * (e - mean);
  CHECK(std::abs(std::sqrt(var / (n - 1)) / sigma - 1.0) < 0.03);
  CHECK(noisy.sigmas.front() == sigma);
  CHECK_THROWS_AS(sample_observations(truth.u_true, 0, 0.1, 1), InvalidArgument);
}

TEST_CASE("sweeps and splits") {
  const auto s = geometric_sweep(1e-4, 1.0, 13);
  REQUIRE(s.size() == 13);
  CHECK(s.front() == 1e-4);
  CHECK(s.back() == 1.0);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(std::abs(s[i] / s[i - 1] - std::pow(1e4, 1.0 / 12.0)) < 1e-12);
  CHECK_THROWS_AS(geometric_sweep(1.0, 1.0, 3), InvalidArgument);

  const auto [train, held] = split_training(4096, 0.05, 8);
  CHECK(train.size() == 205);
  CHECK(held.size() == 4096 - 205);
  CHECK(std::is_sorted(train.begin(), train.end()));
  std::vector<std::size_t> all(train);
  all.insert(all.end(), held.begin(), held.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(4096);
  std::iota(expected.begin(), expected.end(), 0);
  CHECK(all == expected);
  CHECK(split_training(4096, 0.05, 8).first == train);
  CHECK(split_training(4096, 0.05, 9).first != train);
  CHECK(split_training(10, 0.01, 1).first.size() == 1);
  CHECK(split_training(10, 0.99, 1).second.size() == 1);
}

TEST_CASE("held-out misfit on the training set repeats the training misfit") {
  const auto truth = make_ground_truth(8, 4);
  const auto obs = sample_observations(truth.u_true, 60, 0.002, 6);
  const auto [train_idx, held_idx] = split_training(obs.size(), 0.3, 2);
  const auto train = select_observations(obs, train_idx);
  FunctionalSpec spec;
  spec.sigma_weighted = true;
  spec.regularisation_scale = 0.5;
  const ConductivityFunctional j(*truth.problem, spec, train);
  Field q(truth.problem->control_space);
  for (std::size_t i = 0; i < q.size(); ++i) q.coefficients()[i] = 0.3 * truth.q_true.coefficients()[i];
  const auto report = j.evaluate(q.coefficients());
  const auto u = solve_conductivity(*truth.problem, q);
  const PointInterpolator interp(truth.problem->state_space, train.points);
  CHECK(misfit_point(u, train, interp, true) == doctest::Approx(report.misfit).epsilon(1e-14));
  // Weighted and unweighted misfits differ by exactly 1 / (2 sigma^2).
  CHECK(misfit_point(u, train, interp, true) ==
        doctest::Approx(misfit_point(u, train, interp, false) / (2.0 * 0.002 * 0.002)).epsilon(1e-12));
}

TEST_CASE("observation wells: jittered grid inside each zone") {
  const ExperimentConfig c;
  const auto wells = observation_wells(c, 2, 3, 17);
  REQUIRE(wells.size() == 18);
  const double zone_width = c.aquifer_length_x / 3.0;
  for (std::size_t w = 0; w < wells.size(); ++w) {
    const std::size_t zone = w / 6;
    const std::size_t row = (w % 6) / 2;
    const std::size_t col = w % 2;
    const double cx = zone * zone_width + (col + 0.5) * zone_width / 2.0;
    const double cy = (row + 0.5) * c.aquifer_length_y / 3.0;
    CHECK(std::abs(wells[w].x - cx) <= 0.25 * zone_width / 2.0);
    CHECK(std::abs(wells[w].y - cy) <= 0.25 * c.aquifer_length_y / 3.0);
  }
  CHECK(observation_wells(c, 2, 3, 17) == wells);
  CHECK(observation_wells(c, 2, 3, 18) != wells);
  CHECK(sampling_stride(c, c.scenario_a_interval) == 4);
  CHECK(sampling_stride(c, c.scenario_b_interval) == 1);
}

TEST_CASE("transmissivity estimate recovers the truth from noise-free heads") {
  ExperimentConfig c;
  c.aquifer_cells_x = 12;
  c.aquifer_cells_y = 6;
  c.horizon = 2.0;
  const auto problem = make_aquifer_problem(aquifer_settings(c));
  const auto wells = build_vertex_only_mesh(problem.mesh, observation_wells(c, 2, 3, 1));
  const auto record = sample_wells(problem, solve_groundwater(problem), wells, 0.01, 4);
  CHECK(record.values.size() == 4);
  const auto estimate = estimate_transmissivity(problem, record, 100.0, {});
  CHECK(estimate.status == "converged");
  for (std::size_t z = 0; z < kZones; ++z) {
    CHECK(std::abs(estimate.transmissivity[z] / c.transmissivity[z] - 1.0) < 1e-6);
  }
}

TEST_CASE("posterior consistency driver: layout and worker independence") {
  const auto c = small_config();
  const auto serial = run_posterior_consistency(c, 1);
  const auto parallel = run_posterior_consistency(c, 3);
  CHECK(csv(serial.table) == csv(parallel.table));
  REQUIRE(serial.table.rows.size() == c.n_list.size() * c.methods.size());
  CHECK(serial.table.text(0, "method") == "point");
  CHECK(serial.table.number(7, "n") == 64.0);
  CHECK(std::isnan(serial.table.number(0, "u_reconstruction_error_l2")));
  CHECK(serial.table.number(1, "u_reconstruction_error_l2") > 0.0);
  CHECK(serial.table.metadata_value("seed") == std::to_string(c.seed));
  CHECK(serial.table.metadata_value("config_hash") == config_hash(c));
  const auto& names = serial.snapshot.names;
  CHECK(names.front() == "q_true");
  CHECK(std::find(names.begin(), names.end(), "q_est_point") != names.end());
  CHECK(std::find(names.begin(), names.end(), "u_rec_linear") != names.end());
  CHECK(std::find(names.begin(), names.end(), "q_error_rbf") != names.end());
}

TEST_CASE("noise-free point inversion keeps a nonzero regularisation bias") {
  auto c = small_config();
  c.noise_relative = 0.0;
  c.n_list = {1024};
  c.methods = {"point"};
  c.max_iterations = 60;
  c.snapshots = false;
  const auto result = run_posterior_consistency(c);
  const double error = result.table.number(0, "q_error_l2");
  CHECK(std::isfinite(error));
  CHECK(error > 0.0);
  CHECK(result.snapshot.fields.empty());
}

TEST_CASE("sweep drivers: tables are reproducible") {
  const auto c = small_config();
  const auto lcurve = run_lcurve(c, 2);
  CHECK(lcurve.rows.size() == c.alpha_count);
  CHECK(csv(lcurve) == csv(run_lcurve(c, 1)));
  for (std::size_t i = 0; i < lcurve.rows.size(); ++i) {
    CHECK(lcurve.number(i, "regularisation") ==
          doctest::Approx(lcurve.number(i, "alpha") * lcurve.number(i, "alpha") * lcurve.number(i, "seminorm")));
  }

  const auto xval = run_crossvalidation(c, 2);
  CHECK(xval.rows.size() == c.alpha_count);
  CHECK(xval.metadata_value("train_count") == "20");
  CHECK(xval.metadata_value("heldout_count") == "60");
  CHECK(xval.metadata_value("best_alpha").has_value());
  CHECK(csv(xval) == csv(run_crossvalidation(c, 1)));
  const double sigma = std::stod(*xval.metadata_value("sigma"));
  CHECK(xval.number(0, "alpha_weighted") == doctest::Approx(xval.number(0, "alpha") / sigma));
}

TEST_CASE("hydrology driver: small ensemble layout") {
  ExperimentConfig c;
  c.aquifer_cells_x = 12;
  c.aquifer_cells_y = 6;
  c.horizon = 1.0;
  c.ensemble_size = 3;
  const auto r = run_hydrology_ensemble(c, 2);
  CHECK(r.replicates.rows.size() == 2 * (c.ensemble_size + 1));
  CHECK(r.replicates.number(0, "replicate") == -1.0);
  CHECK(r.summary.rows.size() == 6);
  CHECK(r.wells.rows.size() == 18 + 6);
  CHECK(r.summary.number(0, "successes") == 3.0);
  CHECK(csv(r.summary) == csv(run_hydrology_ensemble(c, 1).summary));
}

TEST_CASE("taylor suite: second-order remainders for every functional") {
  const auto t = run_taylor_suite(ExperimentConfig{});
  REQUIRE(t.rows.size() == 6);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    names.push_back(t.text(i, "functional"));
    CHECK(t.number(i, "min_rate") >= 1.9);
    CHECK(t.number(i, "fd_relative_error") < 1e-6);
  }
  CHECK(names == std::vector<std::string>{"J_point", "J_field_nearest", "J_field_linear", "J_field_rbf", "E_weighted",
                                          "groundwater"});
}
