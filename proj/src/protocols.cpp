#include "qkd4/protocols.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

#include "qkd4/adversary.hpp"

namespace qkd4 {

const char* name(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::ParallelBBM: return "parallel_bbm";
    case ProtocolKind::QuQuart: return "ququart";
    case ProtocolKind::SkewedQuQuart: return "skewed_ququart";
  }
  return "?";
}

ProtocolKind protocol_from_name(const std::string& s) {
  if (s == "parallel_bbm") return ProtocolKind::ParallelBBM;
  if (s == "ququart") return ProtocolKind::QuQuart;
  if (s == "skewed_ququart") return ProtocolKind::SkewedQuQuart;
  throw std::invalid_argument("unknown protocol: " + s);
}

namespace {

const MeasurementSetting kRoman{PolBasis::HV, SpatialBasis::X};
const MeasurementSetting kGreek{PolBasis::DA, SpatialBasis::P};

std::vector<WeightedSetting> uniform_over(std::vector<MeasurementSetting> settings) {
  std::vector<WeightedSetting> out;
  const Rational p(1, static_cast<std::int64_t>(settings.size()));
  for (const auto& s : settings) out.push_back({s, p});
  return out;
}

} // namespace

ProtocolSpec ProtocolSpec::make(ProtocolKind kind) {
  ProtocolSpec spec;
  spec.kind_ = kind;
  switch (kind) {
    case ProtocolKind::ParallelBBM: {
      std::vector<MeasurementSetting> all;
      for (int id = 0; id < 4; ++id) all.push_back(MeasurementSetting::from_id(id));
      spec.alice_ = uniform_over(all);
      spec.bob_ = uniform_over(all);
      break;
    }
    case ProtocolKind::QuQuart:
      spec.alice_ = uniform_over({kRoman, kGreek});
      spec.bob_ = uniform_over({kRoman, kGreek});
      break;
    case ProtocolKind::SkewedQuQuart:
      spec.alice_ = uniform_over({kRoman, kGreek});
      spec.bob_ = uniform_over({{PolBasis::HV, SpatialBasis::P}, {PolBasis::DA, SpatialBasis::X}});
      break;
  }
  return spec;
}

bool ProtocolSpec::allows(Party p, const MeasurementSetting& s) const {
  const auto& set = settings(p);
  return std::any_of(set.begin(), set.end(),
                     [&](const WeightedSetting& w) { return w.setting == s; });
}

MeasurementSetting choose_setting(const ProtocolSpec& spec, Party party, RngStream& rng) {
  const auto& set = spec.settings(party);
  std::vector<double> weights;
  weights.reserve(set.size());
  for (const auto& w : set) weights.push_back(w.probability.to_double());
  return set[rng.categorical(weights)].setting;
}

SiftDecision sift(const ProtocolSpec& spec, const MeasurementSetting& settingA,
                  const MeasurementSetting& settingB) {
  if (!spec.allows(Party::Alice, settingA)) {
    throw std::invalid_argument("sift: Alice setting " + settingA.label() +
                                " not allowed by protocol");
  }
  if (!spec.allows(Party::Bob, settingB)) {
    throw std::invalid_argument("sift: Bob setting " + settingB.label() +
                                " not allowed by protocol");
  }
  return {settingA.pol == settingB.pol, settingA.spatial == settingB.spatial};
}

ExtractedBits extract_bits(const ProtocolSpec&, const SiftDecision& decision,
                           const PartyOutcome& outcomeA, const PartyOutcome& outcomeB,
                           const MeasurementSetting& settingA,
                           const MeasurementSetting&) {
  ExtractedBits out;
  if (decision.keep_pol) {
    const int flip = settingA.pol == PolBasis::DA ? 1 : 0;
    out.pol = {outcomeA.pol_bit, outcomeB.pol_bit ^ flip};
  }
  if (decision.keep_spa) {
    out.spa = {outcomeA.spa_bit, outcomeB.spa_bit};
  }
  return out;
}

const char* QuartSymbol::name() const {
  static constexpr std::array<const char*, 4> roman{"a", "b", "c", "d"};
  static constexpr std::array<const char*, 4> greek{"alpha", "beta", "gamma", "delta"};
  return alphabet == QuartAlphabet::Roman ? roman[index] : greek[index];
}

QuartSymbol quart_encode(int pol_bit, int spa_bit, QuartAlphabet alphabet) {
  if ((pol_bit & ~1) || (spa_bit & ~1)) {
    throw std::domain_error("quart_encode: bits must be 0 or 1");
  }
  return {alphabet, pol_bit * 2 + spa_bit};
}

std::pair<int, int> quart_decode(const QuartSymbol& symbol) {
  if (symbol.index < 0 || symbol.index > 3) {
    throw std::domain_error("quart_decode: symbol index out of range");
  }
  return {(symbol.index >> 1) & 1, symbol.index & 1};
}

Rational analytic_rate(const ProtocolSpec& spec) {
  Rational rate(0);
  for (const auto& a : spec.settings(Party::Alice)) {
    for (const auto& b : spec.settings(Party::Bob)) {
      const SiftDecision dec = sift(spec, a.setting, b.setting);
      rate += a.probability * b.probability * Rational(dec.bits_kept());
    }
  }
  return rate;
}

double rate_variance(const ProtocolSpec& spec) {
  double mean = 0.0, second = 0.0;
  for (const auto& a : spec.settings(Party::Alice)) {
    for (const auto& b : spec.settings(Party::Bob)) {
      const double p = (a.probability * b.probability).to_double();
      const int k = sift(spec, a.setting, b.setting).bits_kept();
      mean += p * k;
      second += p * k * k;
    }
  }
  return second - mean * mean;
}

namespace {

// Exact-arithmetic building blocks for the enumeration oracle. Angles live
// on a 45-degree integer lattice where cos^2(k*45deg) cycles through
// {1, 1/2, 0, 1/2}; every probability the canonical bases can produce is
// dyadic.
const std::array<Rational, 4> kCos2{Rational(1), Rational(1, 2), Rational(0), Rational(1, 2)};

int port_units(PolBasis basis, int bit) {
  // analyzer port angle in 45-degree units
  return (basis == PolBasis::DA ? 1 : 0) + 2 * bit;
}

// P(alice port a | eve port e) for the ideal |phi-> source: cos^2 of the
// *sum* of the two port angles.
Rational pol_conditional(PolBasis aBasis, int a, PolBasis eBasis, int e) {
  return kCos2[(port_units(aBasis, a) + port_units(eBasis, e)) % 4];
}

// Malus law for Bob measuring Eve's re-emitted pure state: cos^2 of the
// angle *difference*.
Rational pol_resent(PolBasis eBasis, int e, PolBasis bBasis, int b) {
  return kCos2[((port_units(eBasis, e) - port_units(bBasis, b)) % 4 + 4) % 4];
}

Rational spa_conditional(SpatialBasis aBasis, int a, SpatialBasis eBasis, int e) {
  if (aBasis != eBasis) return Rational(1, 2);
  return a == e ? Rational(1) : Rational(0); // matched labels, ideal visibility
}

Rational spa_resent(SpatialBasis eBasis, int e, SpatialBasis bBasis, int b) {
  if (eBasis != bBasis) return Rational(1, 2);
  return b == e ? Rational(1) : Rational(0);
}

} // namespace

OracleErrorRates analytic_error_rates(const ProtocolSpec& spec, const EveStrategy& eve) {
  if (eve.intercept_fraction != 1.0) {
    throw std::invalid_argument(
        "analytic_error_rates: exact oracle requires full interception (f = 1)");
  }
  std::vector<WeightedSetting> policy = eve.basis_policy;
  if (policy.empty()) policy = EveStrategy::uniform_for(spec, 1.0).basis_policy;

  Rational pol_kept(0), pol_err(0), spa_kept(0), spa_err(0);
  Rational sym_rounds(0), sym_err(0);

  for (const auto& wa : spec.settings(Party::Alice)) {
    for (const auto& wb : spec.settings(Party::Bob)) {
      const SiftDecision dec = sift(spec, wa.setting, wb.setting);
      if (dec.bits_kept() == 0) continue;
      const Rational w_setting = wa.probability * wb.probability;
      for (const auto& we : policy) {
        const Rational w_eve = w_setting * we.probability;
        for (int ei = 0; ei < 4; ++ei) {
          const PartyOutcome e = PartyOutcome::from_index4(ei);
          const Rational w_e = w_eve * Rational(1, 4); // uniform marginal
          for (int ai = 0; ai < 4; ++ai) {
            const PartyOutcome a = PartyOutcome::from_index4(ai);
            const Rational p_a =
                pol_conditional(wa.setting.pol, a.pol_bit, we.setting.pol, e.pol_bit) *
                spa_conditional(wa.setting.spatial, a.spa_bit, we.setting.spatial, e.spa_bit);
            if (p_a.num == 0) continue;
            for (int bi = 0; bi < 4; ++bi) {
              const PartyOutcome b = PartyOutcome::from_index4(bi);
              const Rational p_b =
                  pol_resent(we.setting.pol, e.pol_bit, wb.setting.pol, b.pol_bit) *
                  spa_resent(we.setting.spatial, e.spa_bit, wb.setting.spatial, b.spa_bit);
              if (p_b.num == 0) continue;
              const Rational w = w_e * p_a * p_b;

              const ExtractedBits bits =
                  extract_bits(spec, dec, a, b, wa.setting, wb.setting);
              bool any_err = false;
              if (bits.pol) {
                pol_kept += w;
                if (bits.pol->first != bits.pol->second) {
                  pol_err += w;
                  any_err = true;
                }
              }
              if (bits.spa) {
                spa_kept += w;
                if (bits.spa->first != bits.spa->second) {
                  spa_err += w;
                  any_err = true;
                }
              }
              if (bits.pol && bits.spa) {
                sym_rounds += w;
                if (any_err) sym_err += w;
              }
            }
          }
        }
      }
    }
  }

  OracleErrorRates out;
  out.per_bit_qber = (pol_err + spa_err) / (pol_kept + spa_kept);
  out.qber_pol = pol_kept.num == 0 ? Rational(0) : pol_err / pol_kept;
  out.qber_spa = spa_kept.num == 0 ? Rational(0) : spa_err / spa_kept;
  if (spec.kind() == ProtocolKind::QuQuart) {
    out.symbol_error = sym_err / sym_rounds;
  }
  return out;
}

ExpectedErrorRates expected_error_rates(const ProtocolSpec& spec, const PairSource& source,
                                        const EveStrategy& eve) {
  eve.validate();
  const double f = eve.intercept_fraction;
  std::vector<WeightedSetting> policy = eve.basis_policy;
  if (policy.empty() && f > 0.0) policy = EveStrategy::uniform_for(spec, f).basis_policy;

  double pol_kept = 0, pol_err = 0, spa_kept = 0, spa_err = 0;
  double sym_rounds = 0, sym_err = 0;
  double hv_kept = 0, hv_err = 0, da_kept = 0, da_err = 0;
  double x_kept = 0, x_err = 0, p_kept = 0, p_err = 0;

  for (const auto& wa : spec.settings(Party::Alice)) {
    for (const auto& wb : spec.settings(Party::Bob)) {
      const SiftDecision dec = sift(spec, wa.setting, wb.setting);
      if (dec.bits_kept() == 0) continue;
      const double w_setting = (wa.probability * wb.probability).to_double();

      // Effective joint table over (Alice, Bob) for this setting pair:
      // untouched rounds follow the source distribution, intercepted rounds
      // follow the Eve-conditioned resend chain.
      Eigen::Matrix4d table =
          (1.0 - f) * joint_outcome_distribution(source, wa.setting, wb.setting).table();
      if (f > 0.0) {
        for (const auto& we : policy) {
          Eigen::Matrix4d chain = Eigen::Matrix4d::Zero();
          for (int ei = 0; ei < 4; ++ei) {
            const PartyOutcome e = PartyOutcome::from_index4(ei);
            const AliceConditional cond(source, we.setting, e);
            const Eigen::Vector4d alice = cond.distribution(wa.setting);
            const ResentState resent{we.setting.pol_port(e.pol_bit), we.setting.spatial,
                                     e.spa_bit + 1};
            const Eigen::Vector4d bob = measure_resent(resent, wb.setting);
            chain += 0.25 * alice * bob.transpose(); // P(e) = 1/4
          }
          table += f * we.probability.to_double() * chain;
        }
      }

      for (int ai = 0; ai < 4; ++ai) {
        for (int bi = 0; bi < 4; ++bi) {
          const double w = w_setting * table(ai, bi);
          if (w == 0.0) continue;
          const PartyOutcome a = PartyOutcome::from_index4(ai);
          const PartyOutcome b = PartyOutcome::from_index4(bi);
          const ExtractedBits bits = extract_bits(spec, dec, a, b, wa.setting, wb.setting);
          bool any_err = false;
          if (bits.pol) {
            const bool err = bits.pol->first != bits.pol->second;
            pol_kept += w;
            pol_err += err ? w : 0;
            any_err |= err;
            if (wa.setting.pol == PolBasis::HV) {
              hv_kept += w;
              hv_err += err ? w : 0;
            } else {
              da_kept += w;
              da_err += err ? w : 0;
            }
          }
          if (bits.spa) {
            const bool err = bits.spa->first != bits.spa->second;
            spa_kept += w;
            spa_err += err ? w : 0;
            any_err |= err;
            if (wa.setting.spatial == SpatialBasis::X) {
              x_kept += w;
              x_err += err ? w : 0;
            } else {
              p_kept += w;
              p_err += err ? w : 0;
            }
          }
          if (bits.pol && bits.spa && any_err) sym_err += w;
          if (bits.pol && bits.spa) sym_rounds += w;
        }
      }
    }
  }

  auto ratio = [](double e, double k) { return k > 0.0 ? e / k : 0.0; };
  ExpectedErrorRates out;
  out.per_bit_qber = ratio(pol_err + spa_err, pol_kept + spa_kept);
  out.qber_pol = ratio(pol_err, pol_kept);
  out.qber_spa = ratio(spa_err, spa_kept);
  out.qber_pol_hv = ratio(hv_err, hv_kept);
  out.qber_pol_da = ratio(da_err, da_kept);
  out.qber_spa_x = ratio(x_err, x_kept);
  out.qber_spa_p = ratio(p_err, p_kept);
  if (spec.kind() == ProtocolKind::QuQuart) out.symbol_error = ratio(sym_err, sym_rounds);
  return out;
}

} // namespace qkd4
