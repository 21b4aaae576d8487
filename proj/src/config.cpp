#include "qkd4/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace qkd4 {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& what) { throw ConfigError(what); }

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail("'" + path + "' must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool known = false;
    for (const char* name : allowed) {
      if (key == name) {
        known = true;
        break;
      }
    }
    if (!known) fail("unknown key '" + path + key + "'");
  }
}

double get_number(const json& j, const std::string& path, double lo, double hi,
                  bool hi_inclusive = true) {
  if (!j.is_number()) fail("'" + path + "' must be a number");
  const double value = j.get<double>();
  const bool in_range = value >= lo && (hi_inclusive ? value <= hi : value < hi);
  if (!std::isfinite(value) || !in_range) {
    std::ostringstream msg;
    msg << "'" << path << "' must lie in [" << lo << ", " << hi
        << (hi_inclusive ? "]" : ")");
    fail(msg.str());
  }
  return value;
}

std::uint64_t get_count(const json& j, const std::string& path, std::uint64_t minimum) {
  if (!j.is_number_unsigned()) fail("'" + path + "' must be a non-negative integer");
  const auto value = j.get<std::uint64_t>();
  if (value < minimum) {
    fail("'" + path + "' must be at least " + std::to_string(minimum));
  }
  return value;
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail("'" + path + "' must be a string");
  return j.get<std::string>();
}

void parse_source(const json& j, RunConfig& config) {
  check_keys(j, "source.",
             {"pol_visibility", "spatial_visibility_x", "spatial_visibility_p",
              "background"});
  double v_pol = 1.0, v_x = 1.0, v_p = 1.0, bg = 0.0;
  if (auto it = j.find("pol_visibility"); it != j.end()) {
    v_pol = get_number(*it, "source.pol_visibility", 0.0, 1.0);
  }
  if (auto it = j.find("spatial_visibility_x"); it != j.end()) {
    v_x = get_number(*it, "source.spatial_visibility_x", 0.0, 1.0);
  }
  if (auto it = j.find("spatial_visibility_p"); it != j.end()) {
    v_p = get_number(*it, "source.spatial_visibility_p", 0.0, 1.0);
  }
  if (auto it = j.find("background"); it != j.end()) {
    bg = get_number(*it, "source.background", 0.0, 1.0);
  }
  config.source = PairSource(PolarizationModel{v_pol}, SpatialModel{v_x, v_p}, bg);
}

void parse_eve(const json& j, RunConfig& config) {
  check_keys(j, "eve.", {"intercept_fraction", "basis_policy"});
  if (auto it = j.find("intercept_fraction"); it != j.end()) {
    config.eve.intercept_fraction = get_number(*it, "eve.intercept_fraction", 0.0, 1.0);
  }
  if (auto it = j.find("basis_policy"); it != j.end()) {
    if (it->is_string()) {
      if (it->get<std::string>() != "uniform") {
        fail("'eve.basis_policy' must be \"uniform\" or an array of weighted settings");
      }
      // Empty policy means uniform over the protocol's setting set; it is
      // materialized once the protocol is known.
      config.eve.basis_policy.clear();
    } else if (it->is_array()) {
      config.eve.basis_policy.clear();
      for (const auto& entry : *it) {
        check_keys(entry, "eve.basis_policy[].", {"setting", "weight"});
        if (!entry.contains("setting") || !entry.contains("weight")) {
          fail("'eve.basis_policy' entries need 'setting' and 'weight'");
        }
        const MeasurementSetting setting =
            setting_from_label(get_string(entry["setting"], "eve.basis_policy[].setting"));
        const double weight =
            get_number(entry["weight"], "eve.basis_policy[].weight", 0.0, 1.0);
        config.eve.basis_policy.push_back(
            {setting, Rational::from_double_exact(weight)});
      }
      try {
        config.eve.validate();
      } catch (const std::invalid_argument& err) {
        fail(std::string("'eve.basis_policy': ") + err.what());
      }
    } else {
      fail("'eve.basis_policy' must be \"uniform\" or an array");
    }
  }
}

void parse_transport(const json& j, RunConfig& config) {
  check_keys(j, "transport.", {"kind", "host", "port"});
  if (auto it = j.find("kind"); it != j.end()) {
    config.transport.kind = get_string(*it, "transport.kind");
    if (config.transport.kind != "memory" && config.transport.kind != "tcp") {
      fail("'transport.kind' must be \"memory\" or \"tcp\"");
    }
  }
  if (auto it = j.find("host"); it != j.end()) {
    config.transport.host = get_string(*it, "transport.host");
  }
  if (auto it = j.find("port"); it != j.end()) {
    const std::uint64_t port = get_count(*it, "transport.port", 0);
    if (port > 65535) fail("'transport.port' must be at most 65535");
    config.transport.port = static_cast<std::uint16_t>(port);
  }
}

void parse_output(const json& j, RunConfig& config) {
  check_keys(j, "output.", {"directory", "format"});
  if (auto it = j.find("directory"); it != j.end()) {
    config.output.directory = get_string(*it, "output.directory");
  }
  if (auto it = j.find("format"); it != j.end()) {
    config.output.format = get_string(*it, "output.format");
    if (config.output.format != "csv" && config.output.format != "json") {
      fail("'output.format' must be \"csv\" or \"json\"");
    }
  }
}

void parse_scan(const json& j, RunConfig& config) {
  check_keys(j, "scan.", {"fixed_theta_deg", "angles_deg", "n_per_point", "analytic"});
  if (auto it = j.find("fixed_theta_deg"); it != j.end()) {
    config.scan.fixed_theta_deg = get_number(*it, "scan.fixed_theta_deg", -360.0, 360.0);
  }
  if (auto it = j.find("angles_deg"); it != j.end()) {
    if (!it->is_array()) fail("'scan.angles_deg' must be an array of numbers");
    config.scan.angles_deg.clear();
    for (const auto& angle : *it) {
      config.scan.angles_deg.push_back(
          get_number(angle, "scan.angles_deg[]", -360.0, 360.0));
    }
  }
  if (auto it = j.find("n_per_point"); it != j.end()) {
    config.scan.n_per_point = get_count(*it, "scan.n_per_point", 1);
  }
  if (auto it = j.find("analytic"); it != j.end()) {
    if (!it->is_boolean()) fail("'scan.analytic' must be a boolean");
    config.scan.analytic = it->get<bool>();
  }
}

void parse_table(const json& j, RunConfig& config) {
  check_keys(j, "table.", {"n"});
  if (auto it = j.find("n"); it != j.end()) {
    config.table.n = get_count(*it, "table.n", 1);
  }
}

} // namespace

MeasurementSetting setting_from_label(const std::string& label) {
  for (int id = 0; id < 4; ++id) {
    const MeasurementSetting setting = MeasurementSetting::from_id(id);
    if (setting.label() == label) return setting;
  }
  fail("unknown measurement setting '" + label +
       "' (expected HV:X, HV:P, DA:X or DA:P)");
}

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& err) {
    fail(std::string("config is not valid JSON: ") + err.what());
  }
  check_keys(j, "",
             {"protocol", "seed", "n_pairs", "disclose_fraction", "abort_threshold",
              "source", "eve", "transport", "output", "scan", "table"});

  RunConfig config;
  try {
    if (auto it = j.find("protocol"); it != j.end()) {
      config.protocol = protocol_from_name(get_string(*it, "protocol"));
    }
    if (auto it = j.find("seed"); it != j.end()) {
      config.seed = get_count(*it, "seed", 0);
    }
    if (auto it = j.find("n_pairs"); it != j.end()) {
      config.n_pairs = get_count(*it, "n_pairs", 1);
    }
    if (auto it = j.find("disclose_fraction"); it != j.end()) {
      config.disclose_fraction =
          get_number(*it, "disclose_fraction", 0.0, 1.0, /*hi_inclusive=*/false);
    }
    if (auto it = j.find("abort_threshold"); it != j.end()) {
      config.abort_threshold = get_number(*it, "abort_threshold", 0.0, 1.0);
    }
    if (auto it = j.find("source"); it != j.end()) parse_source(*it, config);
    if (auto it = j.find("eve"); it != j.end()) parse_eve(*it, config);
    if (auto it = j.find("transport"); it != j.end()) parse_transport(*it, config);
    if (auto it = j.find("output"); it != j.end()) parse_output(*it, config);
    if (auto it = j.find("scan"); it != j.end()) parse_scan(*it, config);
    if (auto it = j.find("table"); it != j.end()) parse_table(*it, config);
  } catch (const std::invalid_argument& err) {
    fail(err.what());
  } catch (const std::domain_error& err) {
    fail(err.what());
  }
  return config;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::optional<std::uint64_t> resolve_seed(std::optional<std::uint64_t> flag_seed,
                                          std::optional<std::uint64_t> config_seed,
                                          const char* env_value) {
  if (flag_seed) return flag_seed;
  if (config_seed) return config_seed;
  if (env_value != nullptr && *env_value != '\0') {
    std::uint64_t parsed = 0;
    const char* end = env_value;
    while (*end != '\0') ++end;
    const auto [ptr, ec] = std::from_chars(env_value, end, parsed, 10);
    if (ec != std::errc() || ptr != end) {
      fail(std::string("QKD4_SEED must be a decimal non-negative integer, got '") +
           env_value + "'");
    }
    return parsed;
  }
  return std::nullopt;
}

SessionConfig RunConfig::session_config() const {
  if (!protocol) fail("no protocol selected (config key 'protocol' or --protocol)");
  if (!seed) {
    fail("no seed available (--seed flag, config key 'seed', or QKD4_SEED)");
  }
  SessionConfig session;
  session.protocol = *protocol;
  session.source = source;
  session.eve = eve;
  session.n_pairs = n_pairs;
  session.disclose_fraction = disclose_fraction;
  session.abort_threshold = abort_threshold;
  session.master_seed = *seed;
  return session;
}

} // namespace qkd4
