#pragma once

// Independent reference for the polarization model: builds the two-qubit
// density matrix explicitly and evaluates analyzer-port projectors on it.
// Shares no code with the closed-form production path.

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "qkd4/angles.hpp"

namespace qkd4::testing {

/// Two-photon polarization state in the |HH>, |HV>, |VH>, |VV> basis:
/// a (|HH> - |VV>)/sqrt(2) singlet-like component with visibility v, mixed
/// with the classically correlated (|HH><HH| + |VV><VV|)/2 background.
inline Eigen::Matrix4cd polarization_density(double v) {
  Eigen::Vector4cd phi_minus;
  phi_minus << 1.0 / std::sqrt(2.0), 0.0, 0.0, -1.0 / std::sqrt(2.0);
  Eigen::Vector4cd hh;
  hh << 1.0, 0.0, 0.0, 0.0;
  Eigen::Vector4cd vv;
  vv << 0.0, 0.0, 0.0, 1.0;
  Eigen::Matrix4cd rho = v * (phi_minus * phi_minus.adjoint());
  rho += (1.0 - v) * 0.5 * (hh * hh.adjoint() + vv * vv.adjoint());
  return rho;
}

/// <p_a p_b| rho |p_a p_b> for analyzer orientations thetaA/thetaB and exit
/// ports a/b (port 1 is the +90 degree orientation).
inline double coincidence_expectation(const Eigen::Matrix4cd& rho, AnalyzerAngle thetaA,
                                      AnalyzerAngle thetaB, int port_a, int port_b) {
  const auto ket = [](AnalyzerAngle t) {
    Eigen::Vector2cd k;
    k << std::cos(t.radians()), std::sin(t.radians());
    return k;
  };
  const Eigen::Vector2cd a = ket(thetaA.port(port_a));
  const Eigen::Vector2cd b = ket(thetaB.port(port_b));
  Eigen::Vector4cd ab;
  ab << a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1);
  return std::real((ab.adjoint() * rho * ab)(0, 0));
}

} // namespace qkd4::testing
