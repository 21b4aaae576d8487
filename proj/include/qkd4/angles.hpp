#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace qkd4 {

/// Linear-polarization analyzer orientation, normalized to [0, 180) degrees.
/// A two-port analyzer at theta transmits |theta> on port 0 and |theta+90>
/// on port 1; every probability below is pi-periodic, so the normalization
/// never changes a result.
struct AnalyzerAngle {
  double deg = 0.0;

  AnalyzerAngle() = default;
  explicit AnalyzerAngle(double degrees) : deg(normalize(degrees)) {
    if (!std::isfinite(degrees)) {
      throw std::domain_error("AnalyzerAngle: angle must be finite");
    }
  }

  static double normalize(double d) {
    double r = std::fmod(d, 180.0);
    if (r < 0.0) r += 180.0;
    // fmod can return 180.0 - eps rounding artifacts; -0.0 folds to 0.0
    return r == 180.0 ? 0.0 : r;
  }

  double radians() const { return deg * std::numbers::pi / 180.0; }

  /// Orientation of analyzer port `bit` (0 = transmitted, 1 = reflected).
  AnalyzerAngle port(int bit) const { return AnalyzerAngle(deg + 90.0 * bit); }
};

/// Polarization measurement basis. HV analyzes at {0, 90} degrees,
/// DA (diagonal/antidiagonal, written +/-) at {45, 135}.
enum class PolBasis { HV, DA };

/// Spatial measurement basis: X = position (image plane),
/// P = momentum (Fourier plane). Each has two detector labels, index 1 and 2.
enum class SpatialBasis { X, P };

inline AnalyzerAngle basis_angle(PolBasis b) {
  return AnalyzerAngle(b == PolBasis::HV ? 0.0 : 45.0);
}

inline const char* name(PolBasis b) { return b == PolBasis::HV ? "HV" : "DA"; }
inline const char* name(SpatialBasis b) { return b == SpatialBasis::X ? "X" : "P"; }

/// One party's basis choice for a round: a polarization basis (carrying its
/// analyzer angle pair, 90 degrees apart) plus a spatial basis.
struct MeasurementSetting {
  PolBasis pol = PolBasis::HV;
  SpatialBasis spatial = SpatialBasis::X;

  /// Analyzer orientation of polarization port `bit`.
  AnalyzerAngle pol_port(int bit) const { return basis_angle(pol).port(bit); }

  /// Stable id in [0, 4): HV:X=0, HV:P=1, DA:X=2, DA:P=3.
  int id() const {
    return (pol == PolBasis::DA ? 2 : 0) + (spatial == SpatialBasis::P ? 1 : 0);
  }

  static MeasurementSetting from_id(int id) {
    if (id < 0 || id > 3) throw std::domain_error("MeasurementSetting id out of range");
    return {id >= 2 ? PolBasis::DA : PolBasis::HV,
            (id & 1) ? SpatialBasis::P : SpatialBasis::X};
  }

  std::string label() const {
    return std::string(qkd4::name(pol)) + ":" + qkd4::name(spatial);
  }

  friend bool operator==(const MeasurementSetting&, const MeasurementSetting&) = default;
};

} // namespace qkd4
