#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkd4/session.hpp"

namespace qkd4 {

/// Raised on unreadable files, malformed JSON, unknown keys, missing
/// required keys, or out-of-range values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TransportConfig {
  std::string kind = "memory"; // "memory" | "tcp"
  std::string host = "127.0.0.1";
  std::uint16_t port = 0; // 0 = ephemeral
};

struct OutputConfig {
  std::string directory = ".";
  std::string format = "csv"; // "csv" | "json"
};

struct ScanConfig {
  double fixed_theta_deg = -45.0;
  std::vector<double> angles_deg; // empty = default 13 angles over 180°
  std::uint64_t n_per_point = 10000;
  bool analytic = false;
};

struct TableConfig {
  std::uint64_t n = 10000;
};

/// Everything a command needs, parsed and validated. The session seed and
/// protocol stay optional here because command-line flags and the QKD4_SEED
/// environment variable may supply them.
struct RunConfig {
  std::optional<ProtocolKind> protocol;
  std::optional<std::uint64_t> seed;
  std::uint64_t n_pairs = 10000;
  double disclose_fraction = 0.1;
  std::optional<double> abort_threshold;
  PairSource source;
  EveStrategy eve;
  TransportConfig transport;
  OutputConfig output;
  ScanConfig scan;
  TableConfig table;

  /// Builds the session config; throws ConfigError if protocol or seed is
  /// still unresolved.
  SessionConfig session_config() const;
};

/// Parses and validates a config document. Unknown keys anywhere in the
/// document are rejected.
RunConfig parse_config(const std::string& json_text);

/// Reads and parses a config file; a missing or unreadable file is a
/// ConfigError.
RunConfig load_config_file(const std::string& path);

/// Seed precedence: --seed flag, then the config file, then QKD4_SEED.
/// Returns nullopt when none is set.
std::optional<std::uint64_t> resolve_seed(std::optional<std::uint64_t> flag_seed,
                                          std::optional<std::uint64_t> config_seed,
                                          const char* env_value);

/// Parses a setting label such as "HV:X" or "DA:P" (see
/// MeasurementSetting::label).
MeasurementSetting setting_from_label(const std::string& label);

} // namespace qkd4
