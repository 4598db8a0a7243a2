#include "stsopro/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

#include "stsopro/errors.hpp"

namespace stsopro {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParameterError("bad value \"" + std::string(text) + "\" for key " + std::string(key));
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ParameterError("bad boolean \"" + std::string(text) + "\" for key " + std::string(key));
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

struct Field {
  std::function<void(ExperimentConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field number_field(T ExperimentConfig::*member) {
  return {[member](ExperimentConfig& c, std::string_view k, std::string_view v) {
            c.*member = parse_number<T>(k, v);
          },
          [member](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          }};
}

template <typename T>
Field run_number_field(T RunConfig::*member) {
  return {[member](ExperimentConfig& c, std::string_view k, std::string_view v) {
            c.run.*member = parse_number<T>(k, v);
          },
          [member](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.run.*member);
            } else {
              return std::to_string(c.run.*member);
            }
          }};
}

Field string_field(std::string ExperimentConfig::*member) {
  return {[member](ExperimentConfig& c, std::string_view, std::string_view v) {
            c.*member = std::string(v);
          },
          [member](const ExperimentConfig& c) { return c.*member; }};
}

Field bool_field(bool ExperimentConfig::*member) {
  return {[member](ExperimentConfig& c, std::string_view k, std::string_view v) {
            c.*member = parse_bool(k, v);
          },
          [member](const ExperimentConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"dataset", string_field(&ExperimentConfig::dataset)},
      {"min_dim", number_field(&ExperimentConfig::min_dim)},
      {"synthetic_samples", number_field(&ExperimentConfig::synthetic_samples)},
      {"synthetic_dim", number_field(&ExperimentConfig::synthetic_dim)},
      {"synthetic_separation", number_field(&ExperimentConfig::synthetic_separation)},
      {"synthetic_noise", number_field(&ExperimentConfig::synthetic_noise)},
      {"synthetic_groups", number_field(&ExperimentConfig::synthetic_groups)},
      {"synthetic_categories", number_field(&ExperimentConfig::synthetic_categories)},
      {"synthetic_signal", number_field(&ExperimentConfig::synthetic_signal)},
      {"synthetic_concentration", number_field(&ExperimentConfig::synthetic_concentration)},
      {"data_seed", number_field(&ExperimentConfig::data_seed)},
      {"n_agents", number_field(&ExperimentConfig::n_agents)},
      {"avg_degree", number_field(&ExperimentConfig::avg_degree)},
      {"per_agent", number_field(&ExperimentConfig::per_agent)},
      {"lambda", number_field(&ExperimentConfig::lambda)},
      {"topology_file", string_field(&ExperimentConfig::topology_file)},
      {"edge_weight", number_field(&ExperimentConfig::edge_weight)},
      {"problem_seed", number_field(&ExperimentConfig::problem_seed)},
      {"algorithm",
       {[](ExperimentConfig& c, std::string_view, std::string_view v) {
          c.run.algorithm = parse_algorithm(v);
        },
        [](const ExperimentConfig& c) { return std::string(to_string(c.run.algorithm)); }}},
      {"beta", run_number_field(&RunConfig::beta)},
      {"mu", run_number_field(&RunConfig::mu)},
      {"eta_s", run_number_field(&RunConfig::eta_s)},
      {"c1", number_field(&ExperimentConfig::c1)},
      {"batch_g", run_number_field(&RunConfig::batch_g)},
      {"batch_s", run_number_field(&RunConfig::batch_s)},
      {"max_iters", run_number_field(&RunConfig::max_iters)},
      {"seed", run_number_field(&RunConfig::seed)},
      {"init",
       {[](ExperimentConfig& c, std::string_view, std::string_view v) {
          c.run.init = parse_init_mode(v);
        },
        [](const ExperimentConfig& c) { return std::string(to_string(c.run.init)); }}},
      {"step_size", run_number_field(&RunConfig::step_size)},
      {"step_schedule",
       {[](ExperimentConfig& c, std::string_view, std::string_view v) {
          c.run.schedule = parse_step_schedule(v);
        },
        [](const ExperimentConfig& c) { return std::string(to_string(c.run.schedule)); }}},
      {"step_decay", run_number_field(&RunConfig::step_decay)},
      {"execution",
       {[](ExperimentConfig& c, std::string_view k, std::string_view v) {
          if (v == "serial") {
            c.run.execution = ExecutionPolicy::serial;
          } else if (v == "parallel") {
            c.run.execution = ExecutionPolicy::parallel;
          } else {
            throw ParameterError("bad value \"" + std::string(v) + "\" for key " + std::string(k));
          }
        },
        [](const ExperimentConfig& c) {
          return std::string(c.run.execution == ExecutionPolicy::serial ? "serial" : "parallel");
        }}},
      {"seeds", number_field(&ExperimentConfig::seeds)},
      {"target", number_field(&ExperimentConfig::target)},
      {"stop_at_target", bool_field(&ExperimentConfig::stop_at_target)},
      {"out", string_field(&ExperimentConfig::out_dir)},
      {"allow_uncertified", bool_field(&ExperimentConfig::allow_uncertified)},
      {"record_wall_time", bool_field(&ExperimentConfig::record_wall_time)},
      {"q_error", bool_field(&ExperimentConfig::q_error)},
  };
  return table;
}

}  // namespace

void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(config, key, value);
      return;
    }
  }
  throw ParameterError("unknown config key \"" + std::string(key) + "\"");
}

std::vector<std::pair<std::string, std::string>> read_key_values(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    std::string_view line = text;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(line_no, "empty key");
    out.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base) {
  for (const auto& [key, value] : read_key_values(in)) apply_setting(base, key, value);
  return base;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open config file " + path);
  return parse_config(in, std::move(base));
}

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, field] : fields()) out.emplace_back(name, field.get(config));
  return out;
}

}  // namespace stsopro
