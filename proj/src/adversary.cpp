#include "qkd4/adversary.hpp"

#include <cmath>
#include <stdexcept>

namespace qkd4 {

EveStrategy EveStrategy::uniform_for(const ProtocolSpec& spec, double fraction) {
  EveStrategy eve;
  eve.intercept_fraction = fraction;
  const auto& bob = spec.settings(Party::Bob);
  const Rational weight(1, static_cast<std::int64_t>(bob.size()));
  eve.basis_policy.reserve(bob.size());
  for (const auto& ws : bob) eve.basis_policy.push_back({ws.setting, weight});
  return eve;
}

void EveStrategy::validate() const {
  if (!(intercept_fraction >= 0.0 && intercept_fraction <= 1.0)) {
    throw std::invalid_argument("intercept_fraction must lie in [0, 1]");
  }
  if (intercept_fraction > 0.0 && !basis_policy.empty()) {
    Rational total(0);
    for (const auto& ws : basis_policy) {
      if (ws.probability < Rational(0)) {
        throw std::invalid_argument("basis policy weights must be non-negative");
      }
      total = total + ws.probability;
    }
    if (total != Rational(1)) {
      throw std::invalid_argument("basis policy weights must sum to 1");
    }
  }
}

std::optional<InterceptedRound> eve_process_round(const PairSource& source,
                                                  const EveStrategy& strategy,
                                                  RngStream& rng) {
  // One bernoulli draw per round regardless of the branch taken, so a
  // strategy with fraction 0 leaves every other stream untouched and the
  // run is bit-identical to one with no eavesdropper at all.
  const bool intercept = rng.bernoulli(strategy.intercept_fraction);
  if (!intercept) return std::nullopt;

  if (strategy.basis_policy.empty()) {
    throw std::invalid_argument("intercepting strategy requires a basis policy");
  }
  std::vector<double> weights;
  weights.reserve(strategy.basis_policy.size());
  for (const auto& ws : strategy.basis_policy) weights.push_back(ws.probability.to_double());
  const std::size_t choice = rng.categorical(weights);
  const MeasurementSetting setting = strategy.basis_policy[choice].setting;

  CollapseResult collapse = collapse_and_resend(source, setting, rng);
  return InterceptedRound{setting, collapse.eve_outcome, collapse.resent,
                          AliceConditional(source, setting, collapse.eve_outcome)};
}

} // namespace qkd4
