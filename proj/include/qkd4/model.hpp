#pragma once

#include <Eigen/Dense>

#include "qkd4/angles.hpp"
#include "qkd4/rng.hpp"

namespace qkd4 {

/// Polarization statistics of the pair source. The source emits the
/// maximally entangled state |phi-> = (|HH> - |VV>)/sqrt(2); visibility v
/// mixes it with the classically HV-correlated mixture
/// (|HH><HH| + |VV><VV|)/2, which keeps HV correlations perfect while DA
/// interference degrades — the behaviour of a two-crystal source.
struct PolarizationModel {
  double visibility = 1.0;

  PolarizationModel() = default;
  explicit PolarizationModel(double v) : visibility(v) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::domain_error("PolarizationModel: visibility must lie in [0,1]");
    }
  }
};

/// Two-outcome spatial statistics per basis. Detector labels follow the
/// matched-index convention: the physical momentum anti-correlation is
/// absorbed into the labeling (A_p1 pairs with B_p1, A_x1 with B_x1), so
/// matched indices coincide in both bases. Cross-basis joint statistics are
/// exactly flat.
struct SpatialModel {
  double visibility_x = 1.0;
  double visibility_p = 1.0;

  SpatialModel() = default;
  SpatialModel(double vx, double vp) : visibility_x(vx), visibility_p(vp) {
    if (!(vx >= 0.0 && vx <= 1.0) || !(vp >= 0.0 && vp <= 1.0)) {
      throw std::domain_error("SpatialModel: visibilities must lie in [0,1]");
    }
  }

  double visibility(SpatialBasis b) const {
    return b == SpatialBasis::X ? visibility_x : visibility_p;
  }
};

/// Full joint-outcome model: polarization part x spatial part, then a
/// background fraction of rounds replaced by uniform accidental
/// coincidences.
struct PairSource {
  PolarizationModel pol;
  SpatialModel spatial;
  double background = 0.0;

  PairSource() = default;
  PairSource(PolarizationModel p, SpatialModel s, double bg)
      : pol(p), spatial(s), background(bg) {
    if (!(bg >= 0.0 && bg <= 1.0)) {
      throw std::domain_error("PairSource: background must lie in [0,1]");
    }
  }

  static PairSource ideal() { return {}; }
};

/// Probability that Alice's analyzer at thetaA fires port a while Bob's at
/// thetaB fires port b. Closed form of the projector expectation on
/// rho = v |phi-><phi-| + (1-v)(|HH><HH| + |VV><VV|)/2:
///   P(0,0) = [ v cos^2(tA+tB) + (1-v)(cos^2 tA cos^2 tB + sin^2 tA sin^2 tB) ] / 2
/// with other ports reached by substituting theta+90 per reflected bit.
double pol_coincidence_prob(const PolarizationModel& m, AnalyzerAngle thetaA,
                            AnalyzerAngle thetaB, int a, int b);

/// 2x2 table of pol_coincidence_prob, row = Alice's bit, col = Bob's.
Eigen::Matrix2d pol_joint_table(const PolarizationModel& m, AnalyzerAngle thetaA,
                                AnalyzerAngle thetaB);

/// Joint probability of spatial detector indices (1 or 2). Same basis b:
/// (1+v_b)/4 on matched labels, (1-v_b)/4 otherwise; different bases: exactly
/// 1/4 per cell.
double spatial_joint_prob(const SpatialModel& m, SpatialBasis basisA,
                          SpatialBasis basisB, int indexA, int indexB);

/// 2x2 table of spatial_joint_prob, row/col = index - 1.
Eigen::Matrix2d spatial_joint_table(const SpatialModel& m, SpatialBasis basisA,
                                    SpatialBasis basisB);

/// Kronecker product of two 2x2 blocks; index (i1*2+i2, j1*2+j2) = a(i1,j1)*b(i2,j2).
Eigen::Matrix4d kron2(const Eigen::Matrix2d& a, const Eigen::Matrix2d& b);

/// Exact 16-entry joint distribution over ((a_pol,a_spa),(b_pol,b_spa)).
/// Row index = Alice's outcome a_pol*2 + a_spa, column = Bob's likewise;
/// bit 0 means first analyzer port / index-1 detector.
class OutcomeDistribution {
 public:
  explicit OutcomeDistribution(const Eigen::Matrix4d& table) : table_(table) {}

  double entry(int a_pol, int a_spa, int b_pol, int b_spa) const {
    return table_(a_pol * 2 + a_spa, b_pol * 2 + b_spa);
  }
  const Eigen::Matrix4d& table() const { return table_; }

  double sum() const { return table_.sum(); }
  Eigen::Vector4d alice_marginal() const { return table_.rowwise().sum(); }
  Eigen::Vector4d bob_marginal() const { return table_.colwise().sum().transpose(); }

  double alice_pol_marginal(int bit) const { return table_.middleRows<2>(bit * 2).sum(); }
  double alice_spa_marginal(int bit) const {
    return table_.row(bit).sum() + table_.row(2 + bit).sum();
  }
  double bob_pol_marginal(int bit) const { return table_.middleCols<2>(bit * 2).sum(); }
  double bob_spa_marginal(int bit) const {
    return table_.col(bit).sum() + table_.col(2 + bit).sum();
  }

  OutcomeDistribution transposed() const { return OutcomeDistribution(table_.transpose()); }

 private:
  Eigen::Matrix4d table_;
};

/// Joint distribution for one setting pair: polarization table (x) spatial
/// table, then background mixing D' = (1-bg) D + bg/16.
OutcomeDistribution joint_outcome_distribution(const PairSource& source,
                                               const MeasurementSetting& settingA,
                                               const MeasurementSetting& settingB);

/// One party's (polarization bit, spatial bit) result for a round.
struct PartyOutcome {
  int pol_bit = 0;
  int spa_bit = 0;

  int index4() const { return pol_bit * 2 + spa_bit; }
  static PartyOutcome from_index4(int i) { return {(i >> 1) & 1, i & 1}; }
  friend bool operator==(const PartyOutcome&, const PartyOutcome&) = default;
};

/// What Eve re-emits towards Bob after an intercept: a pure linear
/// polarization at her observed port angle plus a definite detector index in
/// her spatial basis.
struct ResentState {
  AnalyzerAngle pol_angle;
  SpatialBasis spatial_basis = SpatialBasis::X;
  int spatial_index = 1;
};

/// Alice's side of the pair after Eve measured Bob's photon: queried with any
/// Alice setting, yields the normalized 4-entry conditional distribution over
/// her (pol bit, spa bit). Backed by the exact joint table between Alice's
/// setting and Eve's, sliced on Eve's outcome.
class AliceConditional {
 public:
  AliceConditional(const PairSource& source, const MeasurementSetting& eve_setting,
                   PartyOutcome eve_outcome)
      : source_(source), eve_setting_(eve_setting), eve_outcome_(eve_outcome) {}

  /// Distribution over Alice's outcomes (index = pol_bit*2 + spa_bit).
  Eigen::Vector4d distribution(const MeasurementSetting& alice_setting) const;

  PartyOutcome eve_outcome() const { return eve_outcome_; }

 private:
  PairSource source_;
  MeasurementSetting eve_setting_;
  PartyOutcome eve_outcome_;
};

struct CollapseResult {
  PartyOutcome eve_outcome;
  ResentState resent;
  AliceConditional alice_conditional;
};

/// Intercept-resend primitive: Eve measures Bob's photon with her setting
/// (outcomes drawn from the uniform single-party marginal), Alice's photon
/// collapses to the conditional state, and Eve re-emits the eigenstate she
/// observed.
CollapseResult collapse_and_resend(const PairSource& source,
                                   const MeasurementSetting& eve_setting,
                                   RngStream& rng);

/// Bob's outcome distribution (index = pol_bit*2 + spa_bit) when he measures
/// Eve's re-emitted photon: Malus-law cos^2 of the analyzer-angle difference
/// for polarization; deterministic index in the same spatial basis, uniform
/// across bases.
Eigen::Vector4d measure_resent(const ResentState& resent,
                               const MeasurementSetting& bob_setting);

} // namespace qkd4
