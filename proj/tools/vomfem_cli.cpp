// Command-line driver: runs one experiment from a config file and writes its
// tables, field snapshots and a manifest into an output directory.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vomfem/config.hpp"
#include "vomfem/errors.hpp"
#include "vomfem/experiments.hpp"
#include "vomfem/version.hpp"
#include "vomfem/vom.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace vomfem;

namespace {

enum ExitCode { kOk = 0, kGateFailed = 1, kConfigFailure = 2, kRunFailure = 3, kUsage = 64 };

struct Options {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = default_workers();
  std::string points_path;
};

/// Output file name and contents, held in memory until the run has succeeded.
using Artifacts = std::vector<std::pair<std::string, std::string>>;

class RunError : public std::runtime_error {
 public:
  RunError(std::string type, const std::string& message, int code)
      : std::runtime_error(message), type_(std::move(type)), code_(code) {}
  const std::string& type() const { return type_; }
  int code() const { return code_; }

 private:
  std::string type_;
  int code_;
};

void report_error(const std::string& command, const std::string& type, const std::string& message) {
  json record;
  record["status"] = "error";
  record["command"] = command;
  record["error"] = {{"type", type}, {"message", message}};
  std::cerr << record.dump() << '\n';
}

std::string table_csv(const ResultTable& table) {
  std::ostringstream out;
  table.write_csv(out);
  return out.str();
}

ExperimentConfig resolve_config(const Options& options) {
  ExperimentConfig config;
  if (!options.config_path.empty()) config = load_config(options.config_path);
  if (options.seed) config.seed = *options.seed;
  return config;
}

json manifest(const std::string& command, const Options& options, const ExperimentConfig& config,
              const Artifacts& artifacts) {
  json m;
  m["command"] = command;
  m["seed"] = config.seed;
  m["config_hash"] = config_hash(config);
  m["config_source"] = options.config_path.empty() ? "defaults" : options.config_path;
  json echo = json::object();
  for (const auto& [key, value] : config_entries(config)) echo[key] = value;
  m["config"] = echo;
  json versions = json::object();
  for (const auto& [name, version] : build_versions()) versions[name] = version;
  m["versions"] = versions;
  json files = json::array();
  for (const auto& [name, contents] : artifacts) files.push_back({{"name", name}, {"bytes", contents.size()}});
  m["files"] = files;
  m["rerun"] = "vomfem " + command + " --config config.txt --out <dir>";
  return m;
}

Artifacts run_conductivity(const ExperimentConfig& config, const Options& options) {
  const auto result = run_posterior_consistency(config, options.jobs);
  Artifacts out{{"posterior_consistency.csv", table_csv(result.table)}};
  if (!result.snapshot.fields.empty()) {
    std::vector<const Field*> fields;
    for (const auto& f : result.snapshot.fields) fields.push_back(&f);
    std::ostringstream vtk;
    write_fields_vtk(vtk, fields, result.snapshot.names);
    out.emplace_back("fields_largest_n.vtk", vtk.str());
  }
  return out;
}

Artifacts run_hydrology(const ExperimentConfig& config, const Options& options) {
  const auto result = run_hydrology_ensemble(config, options.jobs);
  return {{"hydrology_replicates.csv", table_csv(result.replicates)},
          {"hydrology_summary.csv", table_csv(result.summary)},
          {"hydrology_wells.csv", table_csv(result.wells)}};
}

Artifacts run_locate(const ExperimentConfig& config, const Options& options) {
  if (options.points_path.empty()) throw RunError("InvalidArgument", "locate needs --points", kUsage);
  std::ifstream in(options.points_path);
  if (!in) throw RunError("InvalidArgument", "cannot read points file '" + options.points_path + "'", kRunFailure);
  const auto cloud = read_point_csv(in);
  const auto mesh = std::make_shared<const TriangleMesh>(build_rectangle_mesh(config.mesh_cells, config.mesh_cells, 1.0, 1.0));
  const PointLocator locator(mesh);
  ResultTable table("locate", {"index", "x", "y", "status", "cell", "xi", "eta"});
  table.set_metadata("table", "locate");
  table.set_metadata("seed", std::to_string(config.seed));
  table.set_metadata("config_hash", config_hash(config));
  table.set_metadata("mesh_cells", std::to_string(config.mesh_cells));
  std::size_t outside = 0;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto p = cloud.points[i];
    const auto hit = locator.locate(p);
    if (hit) {
      table.add_row({static_cast<std::int64_t>(i), p.x, p.y, std::string("located"),
                     static_cast<std::int64_t>(hit->cell), hit->ref.x, hit->ref.y});
    } else {
      ++outside;
      table.add_row({static_cast<std::int64_t>(i), p.x, p.y, std::string("outside"), std::int64_t{-1},
                     std::nan(""), std::nan("")});
    }
  }
  table.set_metadata("outside", std::to_string(outside));
  return {{"located.csv", table_csv(table)}};
}

void write_artifacts(const fs::path& dir, const Artifacts& artifacts) {
  fs::create_directories(dir);
  for (const auto& [name, contents] : artifacts) {
    std::ofstream file(dir / name, std::ios::binary);
    file << contents;
    if (!file) throw RunError("IOError", "failed to write " + (dir / name).string(), kRunFailure);
  }
}

int execute(const std::string& command, const Options& options) {
  ExperimentConfig config;
  try {
    config = resolve_config(options);
    validate_config(config);
  } catch (const ConfigError& e) {
    throw RunError("ConfigError", e.what(), kConfigFailure);
  } catch (const InvalidArgument& e) {
    throw RunError("ConfigError", e.what(), kConfigFailure);
  }
  if (options.jobs == 0) throw RunError("InvalidArgument", "--jobs must be at least 1", kUsage);

  Artifacts artifacts;
  int code = kOk;
  try {
    if (command == "conductivity") {
      artifacts = run_conductivity(config, options);
    } else if (command == "lcurve") {
      artifacts = {{"lcurve.csv", table_csv(run_lcurve(config, options.jobs))}};
    } else if (command == "xval") {
      artifacts = {{"crossvalidation.csv", table_csv(run_crossvalidation(config, options.jobs))}};
    } else if (command == "hydrology") {
      artifacts = run_hydrology(config, options);
    } else if (command == "taylor-test") {
      const auto table = run_taylor_suite(config);
      bool pass = true;
      for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const double rate = table.number(i, "min_rate");
        pass = pass && rate >= 1.9;
        std::printf("%-18s rates %.4f %.4f %.4f  fd_relative_error %.3e\n", table.text(i, "functional").c_str(),
                    table.number(i, "rate_1"), table.number(i, "rate_2"), table.number(i, "rate_3"),
                    table.number(i, "fd_relative_error"));
      }
      std::printf("%s\n", pass ? "all rates >= 1.9" : "some rates below 1.9");
      artifacts = {{"taylor.csv", table_csv(table)}};
      code = pass ? kOk : kGateFailed;
    } else if (command == "locate") {
      artifacts = run_locate(config, options);
    }
  } catch (const RunError&) {
    throw;
  } catch (const std::exception& e) {
    throw RunError("ExperimentError", command + ": " + e.what(), kRunFailure);
  }

  std::ostringstream echo;
  write_config(echo, config);
  artifacts.emplace_back("config.txt", echo.str());
  const auto m = manifest(command, options, config, artifacts);
  artifacts.emplace_back("manifest.json", m.dump(2) + "\n");
  write_artifacts(options.out_dir, artifacts);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-observation data assimilation experiments"};
  app.require_subcommand(1);
  Options options;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"conductivity", "Posterior consistency sweep over N and misfit methods"},
      {"lcurve", "Regularisation sweep of the point-misfit functional"},
      {"xval", "Cross-validation choice of the regularisation weight"},
      {"hydrology", "Transmissivity ensembles for two well layouts"},
      {"taylor-test", "Gradient verification; exit status 0 iff every rate is at least 1.9"},
      {"locate", "Locate points from a CSV file in the unit-square mesh"},
  };
  for (const auto& [name, description] : commands) {
    auto* sub = app.add_subcommand(name, description);
    sub->add_option("--config", options.config_path, "Experiment config file (key = value)");
    sub->add_option("--out", options.out_dir, "Output directory")->required();
    sub->add_option("--seed", options.seed, "Override the config seed");
    sub->add_option("--jobs", options.jobs, "Worker threads")->capture_default_str();
    if (name == "locate") sub->add_option("--points", options.points_path, "CSV with header x,y")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("", "UsageError", e.what());
    return kUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return execute(command, options);
  } catch (const RunError& e) {
    report_error(command, e.type(), e.what());
    return e.code();
  } catch (const std::exception& e) {
    report_error(command, "InternalError", e.what());
    return kRunFailure;
  }
}
