#include "vomfem/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "vomfem/errors.hpp"

namespace vomfem {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::stringstream stream(value);
  std::string item;
  while (std::getline(stream, item, ',')) items.push_back(trim(item));
  return items;
}

// Parsers throw std::invalid_argument with a description; the caller adds the line.
double parse_double(const std::string& text) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(v)) {
    throw std::invalid_argument("expected a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t parse_unsigned(const std::string& text) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw std::invalid_argument("expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw std::invalid_argument("expected true or false, got '" + text + "'");
}

std::string format_double(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", v);
  return buffer;
}

template <typename T, typename Format>
std::string format_list(const std::vector<T>& values, Format format) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ", ";
    out += format(values[i]);
  }
  return out;
}

struct Key {
  std::function<void(ExperimentConfig&, const std::string&)> parse;
  std::function<std::string(const ExperimentConfig&)> format;
};

template <typename T>
Key number_key(T ExperimentConfig::*member) {
  if constexpr (std::is_floating_point_v<T>) {
    return {[member](ExperimentConfig& c, const std::string& v) { c.*member = parse_double(v); },
            [member](const ExperimentConfig& c) { return format_double(c.*member); }};
  } else {
    return {[member](ExperimentConfig& c, const std::string& v) { c.*member = static_cast<T>(parse_unsigned(v)); },
            [member](const ExperimentConfig& c) { return std::to_string(c.*member); }};
  }
}

Key size_list_key(std::vector<std::size_t> ExperimentConfig::*member) {
  return {[member](ExperimentConfig& c, const std::string& v) {
            std::vector<std::size_t> out;
            for (const auto& item : split_list(v)) out.push_back(static_cast<std::size_t>(parse_unsigned(item)));
            c.*member = out;
          },
          [member](const ExperimentConfig& c) {
            return format_list(c.*member, [](std::size_t x) { return std::to_string(x); });
          }};
}

Key double_list_key(std::vector<double> ExperimentConfig::*member) {
  return {[member](ExperimentConfig& c, const std::string& v) {
            std::vector<double> out;
            for (const auto& item : split_list(v)) out.push_back(parse_double(item));
            c.*member = out;
          },
          [member](const ExperimentConfig& c) { return format_list(c.*member, format_double); }};
}

const std::vector<std::pair<std::string, Key>>& schema() {
  using C = ExperimentConfig;
  static const std::vector<std::pair<std::string, Key>> keys = {
      {"seed", number_key(&C::seed)},
      {"mesh_cells", number_key(&C::mesh_cells)},
      {"k0", number_key(&C::k0)},
      {"noise_relative", number_key(&C::noise_relative)},
      {"alpha", number_key(&C::alpha)},
      {"n_list", size_list_key(&C::n_list)},
      {"methods",
       {[](C& c, const std::string& v) {
          c.methods = split_list(v);
          const std::set<std::string> known{"point", "nearest", "linear", "rbf"};
          for (const auto& m : c.methods) {
            if (!known.contains(m)) throw std::invalid_argument("unknown method '" + m + "'");
          }
        },
        [](const C& c) { return format_list(c.methods, [](const std::string& s) { return s; }); }}},
      {"max_iterations", number_key(&C::max_iterations)},
      {"gradient_tolerance", number_key(&C::gradient_tolerance)},
      {"snapshots",
       {[](C& c, const std::string& v) { c.snapshots = parse_bool(v); },
        [](const C& c) { return std::string(c.snapshots ? "true" : "false"); }}},
      {"alpha_count", number_key(&C::alpha_count)},
      {"lcurve_n", number_key(&C::lcurve_n)},
      {"lcurve_alpha_min", number_key(&C::lcurve_alpha_min)},
      {"lcurve_alpha_max", number_key(&C::lcurve_alpha_max)},
      {"xval_n", number_key(&C::xval_n)},
      {"xval_train_fraction", number_key(&C::xval_train_fraction)},
      {"xval_alpha_min", number_key(&C::xval_alpha_min)},
      {"xval_alpha_max", number_key(&C::xval_alpha_max)},
      {"taylor_mesh_cells", number_key(&C::taylor_mesh_cells)},
      {"taylor_n", number_key(&C::taylor_n)},
      {"aquifer_length_x", number_key(&C::aquifer_length_x)},
      {"aquifer_length_y", number_key(&C::aquifer_length_y)},
      {"aquifer_cells_x", number_key(&C::aquifer_cells_x)},
      {"aquifer_cells_y", number_key(&C::aquifer_cells_y)},
      {"storativity", number_key(&C::storativity)},
      {"transmissivity", double_list_key(&C::transmissivity)},
      {"pumping_rate", number_key(&C::pumping_rate)},
      {"horizon", number_key(&C::horizon)},
      {"aquifer_dt", number_key(&C::aquifer_dt)},
      {"initial_transmissivity", number_key(&C::initial_transmissivity)},
      {"well_noise", number_key(&C::well_noise)},
      {"ensemble_size", number_key(&C::ensemble_size)},
      {"scenario_a_interval", number_key(&C::scenario_a_interval)},
      {"scenario_a_grid", size_list_key(&C::scenario_a_grid)},
      {"scenario_b_interval", number_key(&C::scenario_b_interval)},
      {"scenario_b_grid", size_list_key(&C::scenario_b_grid)},
  };
  return keys;
}

const Key* find_key(const std::string& name) {
  for (const auto& [key, handler] : schema()) {
    if (key == name) return &handler;
  }
  return nullptr;
}

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::set<std::string> seen;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = "config line " + std::to_string(number) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const Key* handler = find_key(key);
    if (handler == nullptr) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "key '" + key + "' given twice");
    if (value.empty()) throw ConfigError(where + "missing value for '" + key + "'");
    try {
      handler->parse(config, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  try {
    validate_config(config);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  return parse_config(in);
}

void validate_config(const ExperimentConfig& c) {
  const auto require = [](bool ok, const char* message) {
    if (!ok) throw InvalidArgument(message);
  };
  require(c.mesh_cells >= 1, "mesh_cells must be positive");
  require(c.k0 > 0.0, "k0 must be positive");
  require(c.noise_relative >= 0.0, "noise_relative must be non-negative");
  require(c.alpha >= 0.0, "alpha must be non-negative");
  require(!c.n_list.empty(), "n_list must not be empty");
  for (auto n : c.n_list) require(n >= 1, "n_list values must be positive");
  require(!c.methods.empty(), "methods must not be empty");
  require(c.max_iterations >= 1, "max_iterations must be positive");
  require(c.gradient_tolerance > 0.0, "gradient_tolerance must be positive");
  require(c.alpha_count >= 2, "alpha_count must be at least 2");
  require(c.lcurve_n >= 1 && c.xval_n >= 2, "observation counts must be positive");
  require(c.lcurve_alpha_min > 0.0 && c.lcurve_alpha_max > c.lcurve_alpha_min, "invalid lcurve alpha range");
  require(c.xval_alpha_min > 0.0 && c.xval_alpha_max > c.xval_alpha_min, "invalid xval alpha range");
  require(c.xval_train_fraction > 0.0 && c.xval_train_fraction < 1.0, "xval_train_fraction must lie in (0, 1)");
  require(c.taylor_mesh_cells >= 1 && c.taylor_n >= 1, "taylor sizes must be positive");
  require(c.aquifer_length_x > 0.0 && c.aquifer_length_y > 0.0, "aquifer lengths must be positive");
  require(c.aquifer_cells_x >= 3 && c.aquifer_cells_y >= 1, "aquifer mesh too coarse");
  require(c.storativity > 0.0, "storativity must be positive");
  require(c.transmissivity.size() == 3, "transmissivity needs three values");
  for (double t : c.transmissivity) require(t > 0.0, "transmissivity values must be positive");
  require(c.horizon > 0.0, "horizon must be positive");
  require(c.initial_transmissivity > 0.0, "initial_transmissivity must be positive");
  require(c.well_noise >= 0.0, "well_noise must be non-negative");
  require(c.ensemble_size >= 2, "ensemble_size must be at least 2");
  const auto whole_steps = [&](double span) {
    const double ratio = span / c.aquifer_dt;
    return ratio >= 1.0 - 1e-9 && std::abs(ratio - std::round(ratio)) <= 1e-9 * ratio;
  };
  require(c.aquifer_dt > 0.0, "aquifer_dt must be positive");
  require(whole_steps(c.horizon), "horizon must be a whole number of aquifer_dt steps");
  require(whole_steps(c.scenario_a_interval) && whole_steps(c.scenario_b_interval),
          "sampling intervals must be whole numbers of aquifer_dt steps");
  require(whole_steps(c.horizon / c.scenario_a_interval * c.aquifer_dt) &&
              whole_steps(c.horizon / c.scenario_b_interval * c.aquifer_dt),
          "horizon must be a whole number of sampling intervals");
  require(c.scenario_a_grid.size() == 2 && c.scenario_b_grid.size() == 2, "scenario grids need two counts");
  for (auto g : c.scenario_a_grid) require(g >= 1, "scenario grid counts must be positive");
  for (auto g : c.scenario_b_grid) require(g >= 1, "scenario grid counts must be positive");
}

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [key, handler] : schema()) out.emplace_back(key, handler.format(config));
  return out;
}

void write_config(std::ostream& out, const ExperimentConfig& config) {
  for (const auto& [key, value] : config_entries(config)) out << key << " = " << value << '\n';
}

std::string config_hash(const ExperimentConfig& config) {
  std::ostringstream text;
  write_config(text, config);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text.str()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(h));
  return buffer;
}

}  // namespace vomfem
