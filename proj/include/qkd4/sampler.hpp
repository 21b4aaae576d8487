#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qkd4/model.hpp"
#include "qkd4/rng.hpp"

namespace qkd4 {

/// One simulated coincidence round as both parties would log it.
struct RoundRecord {
  std::uint64_t round_id = 0;
  MeasurementSetting setting_a;
  MeasurementSetting setting_b;
  PartyOutcome outcome_a;
  PartyOutcome outcome_b;
  bool eve_touched = false;
};

/// Polarization interference curve: coincidence counts vs analyzer angle.
struct ScanPoint {
  double theta_deg = 0.0;
  std::uint64_t coincidences = 0;
  std::uint64_t total = 0;
};

struct ScanCurve {
  std::vector<ScanPoint> points;
};

struct VisibilityFit {
  double visibility = 0.0;
  double phase_deg = 0.0;
};

/// Raised when an interference curve cannot support a visibility fit
/// (e.g. every point is zero).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Draw one outcome pair from the exact joint distribution for the given
/// settings. Consumes exactly one categorical draw from rng.
RoundRecord sample_round(const PairSource& source, const MeasurementSetting& setting_a,
                         const MeasurementSetting& setting_b, RngStream& rng,
                         std::uint64_t round_id = 0);

/// Sweep Bob's polarization analyzer with Alice's fixed, counting (0,0)-port
/// coincidences out of n_per_point pairs at each angle. Accidental
/// coincidences (source.background) spread uniformly over the four port pairs.
ScanCurve interference_scan(const PairSource& source, AnalyzerAngle fixed_theta,
                            const std::vector<double>& thetas_deg, std::uint64_t n_per_point,
                            RngStream& rng);

/// Noise-free counterpart of interference_scan: counts are the rounded
/// expected values, so a fit recovers the model visibility exactly.
ScanCurve expected_scan_curve(const PairSource& source, AnalyzerAngle fixed_theta,
                              const std::vector<double>& thetas_deg,
                              std::uint64_t n_per_point);

/// Least-squares fit of rate(θ) = B + C·cos2θ + S·sin2θ, reported as
/// visibility √(C²+S²)/B and the phase θ0 of the fringe minimum, i.e. the
/// (max−min)/(max+min) of the fitted curve.
/// Requires ≥ 4 distinct angles spanning ≥ 90°; throws FitError when the
/// curve is identically zero.
VisibilityFit fit_visibility(const ScanCurve& curve);

/// Sample n rounds of spatial-only coincidences and bin them into a 2×2
/// count table indexed by (Alice slit/region − 1, Bob slit/region − 1).
Eigen::Matrix<std::uint64_t, 2, 2> correlation_table(const PairSource& source,
                                                     SpatialBasis basis_a, SpatialBasis basis_b,
                                                     std::uint64_t n, RngStream& rng);

/// Exact 2×2 spatial coincidence probabilities for the same binning,
/// including the uniform background share.
Eigen::Matrix2d spatial_probability_table(const PairSource& source, SpatialBasis basis_a,
                                          SpatialBasis basis_b);

/// Thirteen equally spaced angles covering a half turn (0°, 15°, …, 180°).
std::vector<double> default_scan_angles();

/// CSV with header "theta_deg,coincidences,total".
std::string scan_curve_csv(const ScanCurve& curve);

/// CSV with header "slit_a,slit_b,count" (slit labels are 1-based).
std::string correlation_table_csv(const Eigen::Matrix<std::uint64_t, 2, 2>& table);

} // namespace qkd4
