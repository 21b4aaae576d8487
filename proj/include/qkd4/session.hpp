#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qkd4/adversary.hpp"
#include "qkd4/channel.hpp"
#include "qkd4/model.hpp"
#include "qkd4/protocols.hpp"
#include "qkd4/sampler.hpp"

namespace qkd4 {

/// Raised when the peer's messages violate the agreed protocol flow
/// (unexpected type, inconsistent sift set, bogus disclosure).
class ProtocolViolationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SessionConfig {
  ProtocolKind protocol = ProtocolKind::ParallelBBM;
  PairSource source;
  EveStrategy eve;
  std::uint64_t n_pairs = 1;
  double disclose_fraction = 0.1;
  std::optional<double> abort_threshold;
  std::uint64_t master_seed = 0;

  void validate() const;
};

/// One simulated pair plus the eavesdropper's view of it (if intercepted).
struct SimulatedRound {
  RoundRecord record;
  std::optional<MeasurementSetting> eve_setting;
  std::optional<PartyOutcome> eve_outcome;
};

/// Deterministically expands the master seed into the full physical record
/// of a session: both parties' setting choices, the eavesdropper's actions,
/// and the measured outcomes. Both endpoints of a run call this with the
/// same config and obtain bit-identical histories; the protocol state
/// machines then act only on their own party's slice plus received messages.
std::vector<SimulatedRound> simulate_rounds(const SessionConfig& config);

struct RunReport {
  std::string party;
  ProtocolKind protocol = ProtocolKind::ParallelBBM;
  std::uint64_t master_seed = 0;
  std::uint64_t n_pairs = 0;

  std::uint64_t kept_rounds = 0;
  std::uint64_t kept_bits = 0;
  std::uint64_t kept_pol_bits = 0;
  std::uint64_t kept_spa_bits = 0;
  std::uint64_t kept_both_rounds = 0;
  double sifted_bits_per_pair = 0.0;

  std::uint64_t disclosed_rounds = 0;
  std::uint64_t final_key_bits = 0;
  std::vector<std::uint8_t> final_key;

  // Estimated from the disclosed sample only (what the parties can see).
  std::optional<double> est_pol_qber;
  std::optional<double> est_spa_qber;
  std::optional<double> est_symbol_error;

  // Computed from the full simulated history (not available to a real
  // deployment; kept for validation against the exact oracles).
  std::optional<double> true_pol_qber;
  std::optional<double> true_spa_qber;
  std::optional<double> true_symbol_error;
  std::optional<double> true_qber_hv;
  std::optional<double> true_qber_da;
  std::optional<double> true_qber_x;
  std::optional<double> true_qber_p;

  /// Fraction of sifted bits whose value the eavesdropper holds with
  /// certainty (intercepted round, matching basis in that DOF). A
  /// bookkeeping proxy, not an information-theoretic bound.
  double eve_known_fraction = 0.0;

  std::uint64_t messages_sent = 0;
  std::uint64_t messages_received = 0;
  bool aborted = false;

  /// Stable JSON rendering ("spec_version" field, fields only ever added).
  /// The key itself is deliberately excluded; it goes to a separate file.
  std::string to_json_string(int indent = 2) const;
};

/// Runs one party's half of the classical protocol over the channel.
/// `rounds` must come from simulate_rounds on the same config.
RunReport run_party(const SessionConfig& config, Party party,
                    const std::vector<SimulatedRound>& rounds, DuplexChannel& channel);

/// Convenience driver: simulates the physics once, then runs Bob on a worker
/// thread and Alice on the calling thread over the given channel ends.
std::pair<RunReport, RunReport> run_session(const SessionConfig& config,
                                            DuplexChannel& alice_end, DuplexChannel& bob_end);

/// Same, over a fresh in-memory channel pair.
std::pair<RunReport, RunReport> run_session(const SessionConfig& config);

} // namespace qkd4
