#include "qkd4/session.hpp"

#include <algorithm>
#include <array>
#include <exception>
#include <thread>

#include <json.hpp>

#include "qkd4/rng.hpp"
#include "qkd4/wire.hpp"

namespace qkd4 {

namespace {

using nlohmann::json;

// Named sub-streams of the master seed. Both endpoints derive the same
// streams, which is what lets two separate processes agree on the physics
// and on the disclosure sample without extra coordination messages.
constexpr const char* kStreamAlice = "alice_basis";
constexpr const char* kStreamBob = "bob_bases";
constexpr const char* kStreamSource = "source";
constexpr const char* kStreamEve = "eve";
constexpr const char* kStreamDisclosure = "disclosure";

int own_pol_key_bit(Party party, PolBasis sifted_basis, int raw_bit) {
  // Anti-correlated diagonal basis: Bob flips so that agreeing keys mean a
  // correct transmission. Same table as extract_bits.
  if (party == Party::Bob && sifted_basis == PolBasis::DA) return raw_bit ^ 1;
  return raw_bit;
}

struct KeptRound {
  std::uint64_t index = 0;
  SiftDecision decision;
  std::optional<int> own_pol_bit;
  std::optional<int> own_spa_bit;
};

double ratio(std::uint64_t num, std::uint64_t den) {
  return static_cast<double>(num) / static_cast<double>(den);
}

json optional_to_json(const std::optional<double>& value) {
  return value ? json(*value) : json(nullptr);
}

bool should_abort(const SessionConfig& config, const QberReport& report) {
  if (!config.abort_threshold) return false;
  const double limit = *config.abort_threshold;
  return (report.pol_qber && *report.pol_qber > limit) ||
         (report.spa_qber && *report.spa_qber > limit);
}

/// Counts one error category as (kept, errored) pairs.
struct Tally {
  std::uint64_t kept = 0;
  std::uint64_t err = 0;

  void add(bool is_error) {
    ++kept;
    if (is_error) ++err;
  }

  std::optional<double> rate() const {
    if (kept == 0) return std::nullopt;
    return ratio(err, kept);
  }
};

} // namespace

void SessionConfig::validate() const {
  if (n_pairs < 1) throw std::invalid_argument("n_pairs must be at least 1");
  if (!(disclose_fraction >= 0.0 && disclose_fraction < 1.0)) {
    throw std::invalid_argument("disclose_fraction must lie in [0, 1)");
  }
  if (abort_threshold && !(*abort_threshold >= 0.0 && *abort_threshold <= 1.0)) {
    throw std::invalid_argument("abort_threshold must lie in [0, 1]");
  }
  eve.validate();
}

std::vector<SimulatedRound> simulate_rounds(const SessionConfig& config) {
  config.validate();
  const ProtocolSpec spec = ProtocolSpec::make(config.protocol);
  EveStrategy eve = config.eve;
  if (eve.intercept_fraction > 0.0 && eve.basis_policy.empty()) {
    eve = EveStrategy::uniform_for(spec, eve.intercept_fraction);
  }

  RngStream alice_rng = derive_stream(config.master_seed, kStreamAlice);
  RngStream bob_rng = derive_stream(config.master_seed, kStreamBob);
  RngStream source_rng = derive_stream(config.master_seed, kStreamSource);
  RngStream eve_rng = derive_stream(config.master_seed, kStreamEve);

  std::vector<SimulatedRound> rounds;
  rounds.reserve(config.n_pairs);
  for (std::uint64_t i = 0; i < config.n_pairs; ++i) {
    const MeasurementSetting set_a = choose_setting(spec, Party::Alice, alice_rng);
    const MeasurementSetting set_b = choose_setting(spec, Party::Bob, bob_rng);

    SimulatedRound round;
    const auto touched = eve_process_round(config.source, eve, eve_rng);
    if (!touched) {
      round.record = sample_round(config.source, set_a, set_b, source_rng, i);
    } else {
      round.eve_setting = touched->eve_setting;
      round.eve_outcome = touched->eve_outcome;
      round.record.round_id = i;
      round.record.setting_a = set_a;
      round.record.setting_b = set_b;
      round.record.eve_touched = true;

      const Eigen::Vector4d alice_dist = touched->alice_conditional.distribution(set_a);
      const std::array<double, 4> pa{alice_dist(0), alice_dist(1), alice_dist(2),
                                     alice_dist(3)};
      round.record.outcome_a =
          PartyOutcome::from_index4(static_cast<int>(source_rng.categorical(pa)));

      const Eigen::Vector4d bob_dist = measure_resent(touched->resent, set_b);
      const std::array<double, 4> pb{bob_dist(0), bob_dist(1), bob_dist(2), bob_dist(3)};
      round.record.outcome_b =
          PartyOutcome::from_index4(static_cast<int>(source_rng.categorical(pb)));
    }
    rounds.push_back(round);
  }
  return rounds;
}

RunReport run_party(const SessionConfig& config, Party party,
                    const std::vector<SimulatedRound>& rounds, DuplexChannel& channel) {
  config.validate();
  if (rounds.size() != config.n_pairs) {
    throw std::invalid_argument("rounds do not match config.n_pairs");
  }
  const ProtocolSpec spec = ProtocolSpec::make(config.protocol);

  RunReport report;
  report.party = party == Party::Alice ? "alice" : "bob";
  report.protocol = config.protocol;
  report.master_seed = config.master_seed;
  report.n_pairs = config.n_pairs;

  const auto send = [&](const ClassicalMessage& msg) {
    channel.send_frame(encode_message(msg));
    ++report.messages_sent;
  };
  const auto recv = [&]<typename T>(std::in_place_type_t<T>) -> T {
    const ClassicalMessage msg = decode_message(channel.recv_frame());
    ++report.messages_received;
    if (!std::holds_alternative<T>(msg)) {
      throw ProtocolViolationError("unexpected message type '" + message_type_name(msg) +
                                   "'");
    }
    return std::get<T>(msg);
  };

  // --- Basis announcement (batched, Alice first) -------------------------
  BasisAnnounce own_announce;
  own_announce.first_round = 0;
  own_announce.setting_ids.reserve(rounds.size());
  for (const auto& r : rounds) {
    const MeasurementSetting& own =
        party == Party::Alice ? r.record.setting_a : r.record.setting_b;
    own_announce.setting_ids.push_back(static_cast<std::uint8_t>(own.id()));
  }

  BasisAnnounce peer_announce;
  if (party == Party::Alice) {
    send(own_announce);
    peer_announce = recv(std::in_place_type<BasisAnnounce>);
  } else {
    peer_announce = recv(std::in_place_type<BasisAnnounce>);
    send(own_announce);
  }
  if (peer_announce.first_round != 0 || peer_announce.setting_ids.size() != rounds.size()) {
    throw ProtocolViolationError("basis announcement does not cover the session rounds");
  }

  // --- Sifting ------------------------------------------------------------
  const Party peer = party == Party::Alice ? Party::Bob : Party::Alice;
  std::vector<KeptRound> kept;
  for (std::uint64_t i = 0; i < rounds.size(); ++i) {
    const MeasurementSetting peer_setting =
        MeasurementSetting::from_id(peer_announce.setting_ids[i]);
    if (!spec.allows(peer, peer_setting)) {
      throw ProtocolViolationError("peer announced a setting outside the protocol");
    }
    const MeasurementSetting own_setting =
        MeasurementSetting::from_id(own_announce.setting_ids[i]);
    const MeasurementSetting& set_a = party == Party::Alice ? own_setting : peer_setting;
    const MeasurementSetting& set_b = party == Party::Alice ? peer_setting : own_setting;
    const SiftDecision decision = sift(spec, set_a, set_b);
    if (decision.bits_kept() == 0) continue;

    const PartyOutcome& outcome =
        party == Party::Alice ? rounds[i].record.outcome_a : rounds[i].record.outcome_b;
    KeptRound keep;
    keep.index = i;
    keep.decision = decision;
    if (decision.keep_pol) {
      keep.own_pol_bit = own_pol_key_bit(party, set_a.pol, outcome.pol_bit);
    }
    if (decision.keep_spa) keep.own_spa_bit = outcome.spa_bit;
    kept.push_back(keep);
  }

  SiftIndices sift_msg;
  sift_msg.indices.reserve(kept.size());
  for (const auto& k : kept) sift_msg.indices.push_back(k.index);
  if (party == Party::Alice) {
    send(sift_msg);
  } else {
    const SiftIndices peer_sift = recv(std::in_place_type<SiftIndices>);
    if (peer_sift.indices != sift_msg.indices) {
      throw ProtocolViolationError("sift sets disagree");
    }
  }

  // --- Error-estimation sample --------------------------------------------
  // Both parties draw the same per-kept-round selection from the shared
  // disclosure stream, so the sample needs no negotiation round-trip.
  RngStream disclosure_rng = derive_stream(config.master_seed, kStreamDisclosure);
  std::vector<std::size_t> selected;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    if (disclosure_rng.bernoulli(config.disclose_fraction)) selected.push_back(k);
  }
  report.disclosed_rounds = selected.size();

  QberReport estimate;
  estimate.disclosed_rounds = selected.size();
  if (party == Party::Alice) {
    SampleDisclosure disclosure;
    disclosure.rounds.reserve(selected.size());
    for (const std::size_t k : selected) {
      DisclosedRound entry;
      entry.index = kept[k].index;
      entry.pol_bit = kept[k].own_pol_bit;
      entry.spa_bit = kept[k].own_spa_bit;
      disclosure.rounds.push_back(entry);
    }
    send(disclosure);
    estimate = recv(std::in_place_type<QberReport>);
    if (estimate.disclosed_rounds != selected.size()) {
      throw ProtocolViolationError("peer estimated from a different sample size");
    }
  } else {
    const SampleDisclosure disclosure = recv(std::in_place_type<SampleDisclosure>);
    if (disclosure.rounds.size() != selected.size()) {
      throw ProtocolViolationError("disclosure does not match the derived sample");
    }
    Tally pol, spa, symbol;
    for (std::size_t j = 0; j < selected.size(); ++j) {
      const KeptRound& mine = kept[selected[j]];
      const DisclosedRound& theirs = disclosure.rounds[j];
      if (theirs.index != mine.index ||
          theirs.pol_bit.has_value() != mine.own_pol_bit.has_value() ||
          theirs.spa_bit.has_value() != mine.own_spa_bit.has_value()) {
        throw ProtocolViolationError("disclosure does not match the derived sample");
      }
      bool any_error = false;
      if (theirs.pol_bit) {
        const bool is_error = *theirs.pol_bit != *mine.own_pol_bit;
        pol.add(is_error);
        any_error = any_error || is_error;
      }
      if (theirs.spa_bit) {
        const bool is_error = *theirs.spa_bit != *mine.own_spa_bit;
        spa.add(is_error);
        any_error = any_error || is_error;
      }
      if (theirs.pol_bit && theirs.spa_bit) symbol.add(any_error);
    }
    estimate.pol_qber = pol.rate();
    estimate.spa_qber = spa.rate();
    if (config.protocol == ProtocolKind::QuQuart) estimate.symbol_error = symbol.rate();
    send(estimate);
  }

  report.est_pol_qber = estimate.pol_qber;
  report.est_spa_qber = estimate.spa_qber;
  report.est_symbol_error = estimate.symbol_error;

  // --- Abort rule (deterministic from the report both sides hold) ---------
  if (should_abort(config, estimate)) {
    report.aborted = true;
    if (party == Party::Bob) {
      send(AbortMessage{"estimated error rate above the abort threshold"});
    } else {
      recv(std::in_place_type<AbortMessage>);
    }
  }

  // --- Final key ------------------------------------------------------------
  std::vector<bool> disclosed_flag(kept.size(), false);
  for (const std::size_t k : selected) disclosed_flag[k] = true;
  report.kept_rounds = kept.size();
  for (std::size_t k = 0; k < kept.size(); ++k) {
    report.kept_bits += static_cast<std::uint64_t>(kept[k].decision.bits_kept());
    if (report.aborted || disclosed_flag[k]) continue;
    if (kept[k].own_pol_bit) {
      report.final_key.push_back(static_cast<std::uint8_t>(*kept[k].own_pol_bit));
    }
    if (kept[k].own_spa_bit) {
      report.final_key.push_back(static_cast<std::uint8_t>(*kept[k].own_spa_bit));
    }
  }
  report.final_key_bits = report.final_key.size();
  report.sifted_bits_per_pair = ratio(report.kept_bits, report.n_pairs);

  // --- Ground-truth metrics (full history, for oracle comparison) ---------
  Tally true_pol, true_spa, true_symbol, hv, da, x, p;
  std::uint64_t eve_known_bits = 0;
  for (const auto& k : kept) {
    const SimulatedRound& r = rounds[k.index];
    const ExtractedBits bits =
        extract_bits(spec, k.decision, r.record.outcome_a, r.record.outcome_b,
                     r.record.setting_a, r.record.setting_b);
    bool any_error = false;
    if (bits.pol) {
      const bool is_error = bits.pol->first != bits.pol->second;
      true_pol.add(is_error);
      (r.record.setting_a.pol == PolBasis::HV ? hv : da).add(is_error);
      any_error = any_error || is_error;
      if (r.eve_setting && r.eve_setting->pol == r.record.setting_a.pol) ++eve_known_bits;
    }
    if (bits.spa) {
      const bool is_error = bits.spa->first != bits.spa->second;
      true_spa.add(is_error);
      (r.record.setting_a.spatial == SpatialBasis::X ? x : p).add(is_error);
      any_error = any_error || is_error;
      if (r.eve_setting && r.eve_setting->spatial == r.record.setting_a.spatial) {
        ++eve_known_bits;
      }
    }
    if (bits.pol && bits.spa) true_symbol.add(any_error);
  }
  report.kept_pol_bits = true_pol.kept;
  report.kept_spa_bits = true_spa.kept;
  report.kept_both_rounds = true_symbol.kept;
  report.true_pol_qber = true_pol.rate();
  report.true_spa_qber = true_spa.rate();
  if (config.protocol == ProtocolKind::QuQuart) {
    report.true_symbol_error = true_symbol.rate();
  }
  report.true_qber_hv = hv.rate();
  report.true_qber_da = da.rate();
  report.true_qber_x = x.rate();
  report.true_qber_p = p.rate();
  report.eve_known_fraction =
      report.kept_bits == 0 ? 0.0 : ratio(eve_known_bits, report.kept_bits);

  return report;
}

std::pair<RunReport, RunReport> run_session(const SessionConfig& config,
                                            DuplexChannel& alice_end, DuplexChannel& bob_end) {
  const std::vector<SimulatedRound> rounds = simulate_rounds(config);

  RunReport report_b;
  std::exception_ptr bob_error;
  std::thread bob([&] {
    try {
      report_b = run_party(config, Party::Bob, rounds, bob_end);
    } catch (...) {
      bob_error = std::current_exception();
      bob_end.close(); // unblock Alice if she is waiting on us
    }
  });

  RunReport report_a;
  try {
    report_a = run_party(config, Party::Alice, rounds, alice_end);
  } catch (...) {
    alice_end.close();
    bob.join();
    if (bob_error) std::rethrow_exception(bob_error);
    throw;
  }
  bob.join();
  if (bob_error) std::rethrow_exception(bob_error);
  return {std::move(report_a), std::move(report_b)};
}

std::pair<RunReport, RunReport> run_session(const SessionConfig& config) {
  MemoryChannelPair pair;
  return run_session(config, pair.end_a(), pair.end_b());
}

std::string RunReport::to_json_string(int indent) const {
  json j;
  j["spec_version"] = "1";
  j["party"] = party;
  j["protocol"] = name(protocol);
  j["master_seed"] = master_seed;
  j["n_pairs"] = n_pairs;
  j["kept_rounds"] = kept_rounds;
  j["kept_bits"] = kept_bits;
  j["kept_pol_bits"] = kept_pol_bits;
  j["kept_spa_bits"] = kept_spa_bits;
  j["kept_both_rounds"] = kept_both_rounds;
  j["sifted_bits_per_pair"] = sifted_bits_per_pair;
  j["disclosed_rounds"] = disclosed_rounds;
  j["final_key_bits"] = final_key_bits;
  j["estimated"] = {
      {"pol_qber", optional_to_json(est_pol_qber)},
      {"spa_qber", optional_to_json(est_spa_qber)},
      {"symbol_error", optional_to_json(est_symbol_error)},
  };
  j["true"] = {
      {"pol_qber", optional_to_json(true_pol_qber)},
      {"spa_qber", optional_to_json(true_spa_qber)},
      {"symbol_error", optional_to_json(true_symbol_error)},
      {"qber_hv", optional_to_json(true_qber_hv)},
      {"qber_da", optional_to_json(true_qber_da)},
      {"qber_x", optional_to_json(true_qber_x)},
      {"qber_p", optional_to_json(true_qber_p)},
  };
  j["eve_known_fraction"] = eve_known_fraction;
  j["messages"] = {{"sent", messages_sent}, {"received", messages_received}};
  j["aborted"] = aborted;
  return j.dump(indent);
}

} // namespace qkd4
