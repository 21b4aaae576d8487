#pragma once

#include <optional>
#include <vector>

#include "qkd4/model.hpp"
#include "qkd4/protocols.hpp"

namespace qkd4 {

/// Intercept-resend eavesdropper on Bob's arm. Each round is intercepted
/// with probability intercept_fraction; the measurement setting is drawn
/// from basis_policy (probabilities sum to 1). Both DOFs are measured on
/// every intercepted round.
struct EveStrategy {
  double intercept_fraction = 0.0;
  std::vector<WeightedSetting> basis_policy;

  static EveStrategy off() { return {}; }

  /// Uniform policy over Bob's allowed setting set for the given protocol
  /// (Eve sits on Bob's arm and mimics his measurement choices).
  static EveStrategy uniform_for(const ProtocolSpec& spec, double fraction);

  void validate() const;
};

struct InterceptedRound {
  MeasurementSetting eve_setting;
  PartyOutcome eve_outcome;
  ResentState resent;
  AliceConditional alice_conditional;
};

/// With probability intercept_fraction, measure Bob's photon and prepare a
/// resend; otherwise leave the round untouched (nullopt = passthrough).
/// The rng is Eve's own stream; passthrough rounds consume exactly one draw
/// so the source stream is never perturbed by Eve's presence.
std::optional<InterceptedRound> eve_process_round(const PairSource& source,
                                                  const EveStrategy& strategy,
                                                  RngStream& rng);

} // namespace qkd4
