#include "qkd4/sampler.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace qkd4 {

RoundRecord sample_round(const PairSource& source, const MeasurementSetting& setting_a,
                         const MeasurementSetting& setting_b, RngStream& rng,
                         std::uint64_t round_id) {
  const OutcomeDistribution dist = joint_outcome_distribution(source, setting_a, setting_b);
  std::array<double, 16> flat{};
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) flat[static_cast<std::size_t>(a * 4 + b)] = dist.table()(a, b);
  }
  const std::size_t cell = rng.categorical(flat);
  RoundRecord rec;
  rec.round_id = round_id;
  rec.setting_a = setting_a;
  rec.setting_b = setting_b;
  rec.outcome_a = PartyOutcome::from_index4(static_cast<int>(cell / 4));
  rec.outcome_b = PartyOutcome::from_index4(static_cast<int>(cell % 4));
  return rec;
}

namespace {

double scan_probability(const PairSource& source, AnalyzerAngle fixed_theta, double theta_deg) {
  const double signal =
      pol_coincidence_prob(source.pol, fixed_theta, AnalyzerAngle(theta_deg), 0, 0);
  return (1.0 - source.background) * signal + source.background / 4.0;
}

std::uint64_t sample_binomial(std::uint64_t n, double p, RngStream& rng) {
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < n; ++i) hits += rng.bernoulli(p) ? 1 : 0;
  return hits;
}

} // namespace

ScanCurve interference_scan(const PairSource& source, AnalyzerAngle fixed_theta,
                            const std::vector<double>& thetas_deg, std::uint64_t n_per_point,
                            RngStream& rng) {
  if (n_per_point < 1) throw std::invalid_argument("n_per_point must be at least 1");
  ScanCurve curve;
  curve.points.reserve(thetas_deg.size());
  for (double theta : thetas_deg) {
    const double p = scan_probability(source, fixed_theta, theta);
    curve.points.push_back({theta, sample_binomial(n_per_point, p, rng), n_per_point});
  }
  return curve;
}

ScanCurve expected_scan_curve(const PairSource& source, AnalyzerAngle fixed_theta,
                              const std::vector<double>& thetas_deg,
                              std::uint64_t n_per_point) {
  if (n_per_point < 1) throw std::invalid_argument("n_per_point must be at least 1");
  ScanCurve curve;
  curve.points.reserve(thetas_deg.size());
  for (double theta : thetas_deg) {
    const double p = scan_probability(source, fixed_theta, theta);
    const auto mean = static_cast<std::uint64_t>(
        std::llround(p * static_cast<double>(n_per_point)));
    curve.points.push_back({theta, std::min(mean, n_per_point), n_per_point});
  }
  return curve;
}

VisibilityFit fit_visibility(const ScanCurve& curve) {
  std::vector<double> distinct;
  for (const auto& pt : curve.points) {
    if (std::none_of(distinct.begin(), distinct.end(),
                     [&](double d) { return std::abs(d - pt.theta_deg) < 1e-9; })) {
      distinct.push_back(pt.theta_deg);
    }
  }
  if (distinct.size() < 4) {
    throw std::invalid_argument("visibility fit needs at least 4 distinct angles");
  }
  const auto [lo, hi] = std::minmax_element(distinct.begin(), distinct.end());
  if (*hi - *lo < 90.0 - 1e-9) {
    throw std::invalid_argument("visibility fit needs angles spanning at least 90 degrees");
  }

  // Least squares for rate(θ) = B + C·cos2θ + S·sin2θ on per-point rates.
  Eigen::MatrixXd design(static_cast<Eigen::Index>(curve.points.size()), 3);
  Eigen::VectorXd rate(static_cast<Eigen::Index>(curve.points.size()));
  bool any_hit = false;
  for (Eigen::Index i = 0; i < rate.size(); ++i) {
    const auto& pt = curve.points[static_cast<std::size_t>(i)];
    const double two_theta = 2.0 * pt.theta_deg * std::numbers::pi / 180.0;
    design(i, 0) = 1.0;
    design(i, 1) = std::cos(two_theta);
    design(i, 2) = std::sin(two_theta);
    rate(i) = static_cast<double>(pt.coincidences) / static_cast<double>(pt.total);
    any_hit = any_hit || pt.coincidences > 0;
  }
  if (!any_hit) throw FitError("interference curve is identically zero");

  const Eigen::Vector3d coef = design.colPivHouseholderQr().solve(rate);
  const double offset = coef(0);
  const double amplitude = std::hypot(coef(1), coef(2));
  if (!(offset > 0.0)) throw FitError("interference curve has non-positive mean rate");

  VisibilityFit fit;
  fit.visibility = std::clamp(amplitude / offset, 0.0, 1.0);
  // rate = B[1 − v·cos(2(θ−θ0))] means C = −Bv·cos2θ0, S = −Bv·sin2θ0.
  fit.phase_deg = AnalyzerAngle(std::atan2(-coef(2), -coef(1)) * 90.0 / std::numbers::pi).deg;
  return fit;
}

Eigen::Matrix2d spatial_probability_table(const PairSource& source, SpatialBasis basis_a,
                                          SpatialBasis basis_b) {
  const Eigen::Matrix2d signal = spatial_joint_table(source.spatial, basis_a, basis_b);
  return (1.0 - source.background) * signal +
         source.background * Eigen::Matrix2d::Constant(0.25);
}

Eigen::Matrix<std::uint64_t, 2, 2> correlation_table(const PairSource& source,
                                                     SpatialBasis basis_a, SpatialBasis basis_b,
                                                     std::uint64_t n, RngStream& rng) {
  if (n < 1) throw std::invalid_argument("correlation table needs at least 1 round");
  const Eigen::Matrix2d probs = spatial_probability_table(source, basis_a, basis_b);
  const std::array<double, 4> flat = {probs(0, 0), probs(0, 1), probs(1, 0), probs(1, 1)};
  Eigen::Matrix<std::uint64_t, 2, 2> counts = Eigen::Matrix<std::uint64_t, 2, 2>::Zero();
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::size_t cell = rng.categorical(flat);
    counts(static_cast<Eigen::Index>(cell / 2), static_cast<Eigen::Index>(cell % 2)) += 1;
  }
  return counts;
}

std::vector<double> default_scan_angles() {
  std::vector<double> angles;
  angles.reserve(13);
  for (int i = 0; i <= 12; ++i) angles.push_back(15.0 * i);
  return angles;
}

std::string scan_curve_csv(const ScanCurve& curve) {
  std::ostringstream out;
  out << "theta_deg,coincidences,total\n";
  for (const auto& pt : curve.points) {
    out << pt.theta_deg << ',' << pt.coincidences << ',' << pt.total << '\n';
  }
  return out.str();
}

std::string correlation_table_csv(const Eigen::Matrix<std::uint64_t, 2, 2>& table) {
  std::ostringstream out;
  out << "slit_a,slit_b,count\n";
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) out << (a + 1) << ',' << (b + 1) << ',' << table(a, b) << '\n';
  }
  return out.str();
}

} // namespace qkd4
