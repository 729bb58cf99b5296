#pragma once

#include "btltrack/core.hpp"

namespace btltrack {

/// Planar coordinated-turn motion with the turn rate as fifth state entry.
struct CtModelConfig {
  double ts = 1.0;      // sampling period [s]
  double q1 = 0.1;      // acceleration noise intensity [m^2/s^4]
  double q2 = 1.75e-2;  // turn-rate noise intensity [rad^2/s^3]
  double omega_epsilon = 1e-8;

  void validate() const;
};

/// Range/bearing sensor at the origin with Q_w = intensity * diag(sigma_r^2, sigma_zeta^2).
struct SensorModel {
  double sigma_r = 10.0;
  double sigma_zeta = 3.1622776601683794e-3;  // sqrt(10) mrad
  double intensity = 1.0;

  void validate() const;
};

inline constexpr int kCtStateDim = 5;
inline constexpr int kRangeBearingDim = 2;
/// Index of the bearing entry in a range/bearing measurement.
inline constexpr int kBearingIndex = 1;

/// Deterministic part F(omega) * x of the coordinated-turn transition.
StateVec ct_transition(const StateVec& x, const CtModelConfig& cfg);

/// 5x5 process-noise covariance Q_v.
CovMatrix ct_process_cov(const CtModelConfig& cfg);

/// [sqrt(x^2 + y^2), atan2(y, x)] for a sensor at the origin.
MeasVec range_bearing(const StateVec& x);

CovMatrix meas_cov(const SensorModel& sensor);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

/// (a - b) wrapped into (-pi, pi].
double wrap_angle_residual(double a, double b);

}  // namespace btltrack
