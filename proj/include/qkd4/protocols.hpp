#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qkd4/model.hpp"
#include "qkd4/rational.hpp"
#include "qkd4/rng.hpp"

namespace qkd4 {

enum class ProtocolKind { ParallelBBM, QuQuart, SkewedQuQuart };
enum class Party { Alice, Bob };
enum class Dof { Polarization, Spatial };

const char* name(ProtocolKind k);
ProtocolKind protocol_from_name(const std::string& s);
inline const char* name(Party p) { return p == Party::Alice ? "A" : "B"; }

struct WeightedSetting {
  MeasurementSetting setting;
  Rational probability;
};

/// Per-party basis-choice distributions plus the sifting rule identity.
///   ParallelBBM:   both parties uniform over all four settings.
///   QuQuart:       both parties choose roman (HV:X) or greek (DA:P).
///   SkewedQuQuart: Alice in {HV:X, DA:P}, Bob in {HV:P, DA:X}, so exactly
///                  one DOF agrees every round.
class ProtocolSpec {
 public:
  static ProtocolSpec make(ProtocolKind kind);

  ProtocolKind kind() const { return kind_; }
  const std::vector<WeightedSetting>& settings(Party p) const {
    return p == Party::Alice ? alice_ : bob_;
  }
  bool allows(Party p, const MeasurementSetting& s) const;

 private:
  ProtocolKind kind_ = ProtocolKind::ParallelBBM;
  std::vector<WeightedSetting> alice_, bob_;
};

/// Which DOFs of a round survive sifting.
struct SiftDecision {
  bool keep_pol = false;
  bool keep_spa = false;

  int bits_kept() const { return (keep_pol ? 1 : 0) + (keep_spa ? 1 : 0); }
};

MeasurementSetting choose_setting(const ProtocolSpec& spec, Party party, RngStream& rng);

/// Per-DOF basis comparison. The allowed setting sets make this realize each
/// protocol's rule: ParallelBBM keeps DOFs independently, QuQuart keeps two
/// bits or none, SkewedQuQuart keeps exactly one. Throws std::invalid_argument
/// for settings outside the spec's allowed sets.
SiftDecision sift(const ProtocolSpec& spec, const MeasurementSetting& settingA,
                  const MeasurementSetting& settingB);

/// Key bits extracted from one sifted round, as (alice_bit, bob_bit) per kept
/// DOF. Bit-value conventions (the single source of truth, all tests
/// reference this table):
///   polarization bit: 0 = first analyzer port (H or +), 1 = second (V or -)
///   spatial bit:      0 = detector index 1,             1 = detector index 2
///   Alice's key bit   = her raw outcome bit
///   Bob's key bit     = raw bit XOR 1 when the sifted polarization basis is
///                       DA (the source anti-correlates DA outcomes); raw
///                       otherwise (HV and both spatial bases correlate).
struct ExtractedBits {
  std::optional<std::pair<int, int>> pol;
  std::optional<std::pair<int, int>> spa;
};

ExtractedBits extract_bits(const ProtocolSpec& spec, const SiftDecision& decision,
                           const PartyOutcome& outcomeA, const PartyOutcome& outcomeB,
                           const MeasurementSetting& settingA,
                           const MeasurementSetting& settingB);

/// Four-letter alphabets over (polarization bit, spatial bit):
///   roman: a=(H,X1) b=(H,X2) c=(V,X1) d=(V,X2)
///   greek: alpha=(+,P1) beta=(+,P2) gamma=(-,P1) delta=(-,P2)
enum class QuartAlphabet { Roman, Greek };

struct QuartSymbol {
  QuartAlphabet alphabet = QuartAlphabet::Roman;
  int index = 0; // pol_bit*2 + spa_bit

  const char* name() const;
  friend bool operator==(const QuartSymbol&, const QuartSymbol&) = default;
};

QuartSymbol quart_encode(int pol_bit, int spa_bit, QuartAlphabet alphabet);
std::pair<int, int> quart_decode(const QuartSymbol& symbol);

/// Exact sifted bits per pair, enumerated over both parties' basis choices.
Rational analytic_rate(const ProtocolSpec& spec);

/// Variance of kept-bits-per-round (for z-scores on empirical rates).
double rate_variance(const ProtocolSpec& spec);

struct EveStrategy; // adversary.hpp

/// per_bit_qber treats every kept bit alike: the fraction of sifted bits that
/// disagree, pooled across both degrees of freedom. symbol_error (set only
/// for the protocol whose rounds carry a full two-bit letter) is the fraction
/// of kept rounds where *either* bit disagrees, so symbol_error >=
/// per_bit_qber always.
struct OracleErrorRates {
  Rational per_bit_qber;
  Rational qber_pol;
  Rational qber_spa;
  std::optional<Rational> symbol_error; // two-bit letters only
};

/// Brute-force enumeration over (Alice basis, Bob basis, Eve basis, Eve
/// outcome, Alice outcome, Bob outcome) in exact arithmetic, for the ideal
/// source under full interception. This is the independent oracle the Monte
/// Carlo runs are checked against; it shares only the sifting rule and bit
/// conventions with the sampled path, never its probability code. Throws
/// std::invalid_argument unless eve.intercept_fraction == 1.
OracleErrorRates analytic_error_rates(const ProtocolSpec& spec, const EveStrategy& eve);

struct ExpectedErrorRates {
  double per_bit_qber = 0.0;
  double qber_pol = 0.0;
  double qber_spa = 0.0;
  std::optional<double> symbol_error;
  // per-basis breakdown of the polarization / spatial DOFs
  double qber_pol_hv = 0.0, qber_pol_da = 0.0;
  double qber_spa_x = 0.0, qber_spa_p = 0.0;
};

/// Exact-distribution error rates for an arbitrary source and Eve strategy,
/// as double-precision averages over the model's conditional tables (no
/// sampling). With Eve off this is the intrinsic-noise oracle: DA-basis
/// polarization bits err at (1-v_pol)/2, HV at 0, spatial at (1-v_b)/2,
/// background folded in exactly.
ExpectedErrorRates expected_error_rates(const ProtocolSpec& spec, const PairSource& source,
                                        const EveStrategy& eve);

} // namespace qkd4
