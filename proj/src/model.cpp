#include "qkd4/model.hpp"

namespace qkd4 {

namespace {

void check_bit(int b, const char* what) {
  if (b != 0 && b != 1) throw std::domain_error(std::string(what) + " must be 0 or 1");
}

void check_index(int i) {
  if (i != 1 && i != 2) throw std::domain_error("spatial detector index must be 1 or 2");
}

double sq(double x) { return x * x; }

} // namespace

double pol_coincidence_prob(const PolarizationModel& m, AnalyzerAngle thetaA,
                            AnalyzerAngle thetaB, int a, int b) {
  check_bit(a, "polarization bit a");
  check_bit(b, "polarization bit b");
  const double ta = thetaA.port(a).radians();
  const double tb = thetaB.port(b).radians();
  const double entangled = sq(std::cos(ta + tb));
  const double classical = sq(std::cos(ta)) * sq(std::cos(tb)) + sq(std::sin(ta)) * sq(std::sin(tb));
  const double v = m.visibility;
  return 0.5 * (v * entangled + (1.0 - v) * classical);
}

Eigen::Matrix2d pol_joint_table(const PolarizationModel& m, AnalyzerAngle thetaA,
                                AnalyzerAngle thetaB) {
  Eigen::Matrix2d t;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      t(a, b) = pol_coincidence_prob(m, thetaA, thetaB, a, b);
    }
  }
  return t;
}

double spatial_joint_prob(const SpatialModel& m, SpatialBasis basisA,
                          SpatialBasis basisB, int indexA, int indexB) {
  check_index(indexA);
  check_index(indexB);
  if (basisA != basisB) return 0.25;
  const double v = m.visibility(basisA);
  return indexA == indexB ? (1.0 + v) / 4.0 : (1.0 - v) / 4.0;
}

Eigen::Matrix2d spatial_joint_table(const SpatialModel& m, SpatialBasis basisA,
                                    SpatialBasis basisB) {
  Eigen::Matrix2d t;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      t(a, b) = spatial_joint_prob(m, basisA, basisB, a + 1, b + 1);
    }
  }
  return t;
}

Eigen::Matrix4d kron2(const Eigen::Matrix2d& a, const Eigen::Matrix2d& b) {
  Eigen::Matrix4d out;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    }
  }
  return out;
}

OutcomeDistribution joint_outcome_distribution(const PairSource& source,
                                               const MeasurementSetting& settingA,
                                               const MeasurementSetting& settingB) {
  const Eigen::Matrix2d pol =
      pol_joint_table(source.pol, settingA.pol_port(0), settingB.pol_port(0));
  const Eigen::Matrix2d spa =
      spatial_joint_table(source.spatial, settingA.spatial, settingB.spatial);
  Eigen::Matrix4d table = kron2(pol, spa);
  const double bg = source.background;
  if (bg > 0.0) {
    table = (1.0 - bg) * table + Eigen::Matrix4d::Constant(bg / 16.0);
  }
  return OutcomeDistribution(table);
}

Eigen::Vector4d AliceConditional::distribution(const MeasurementSetting& alice_setting) const {
  const OutcomeDistribution joint =
      joint_outcome_distribution(source_, alice_setting, eve_setting_);
  const Eigen::Vector4d column = joint.table().col(eve_outcome_.index4());
  return column / column.sum();
}

CollapseResult collapse_and_resend(const PairSource& source,
                                   const MeasurementSetting& eve_setting,
                                   RngStream& rng) {
  // Single-party marginals are uniform for every setting, so Eve's own
  // result is two fair bits.
  const PartyOutcome eve = PartyOutcome::from_index4(static_cast<int>(rng.index(4)));
  ResentState resent{eve_setting.pol_port(eve.pol_bit), eve_setting.spatial,
                     eve.spa_bit + 1};
  return CollapseResult{eve, resent, AliceConditional(source, eve_setting, eve)};
}

Eigen::Vector4d measure_resent(const ResentState& resent,
                               const MeasurementSetting& bob_setting) {
  Eigen::Vector2d pol;
  for (int b = 0; b < 2; ++b) {
    const double delta = resent.pol_angle.radians() - bob_setting.pol_port(b).radians();
    pol(b) = sq(std::cos(delta));
  }
  Eigen::Vector2d spa;
  if (resent.spatial_basis == bob_setting.spatial) {
    spa << (resent.spatial_index == 1 ? 1.0 : 0.0), (resent.spatial_index == 2 ? 1.0 : 0.0);
  } else {
    spa << 0.5, 0.5;
  }
  Eigen::Vector4d out;
  for (int p = 0; p < 2; ++p) {
    for (int s = 0; s < 2; ++s) {
      out(p * 2 + s) = pol(p) * spa(s);
    }
  }
  return out;
}

} // namespace qkd4
