#include "btltrack/models.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace btltrack {

void CtModelConfig::validate() const {
  if (!(ts > 0.0) || !std::isfinite(ts)) {
    throw Error(ErrorCode::InvalidConfig, "model.ts must be > 0");
  }
  if (!(q1 >= 0.0) || !(q2 >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "model.q1 and model.q2 must be >= 0");
  }
  if (!(omega_epsilon > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "model.omega_epsilon must be > 0");
  }
}

void SensorModel::validate() const {
  if (!(sigma_r > 0.0) || !(sigma_zeta > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "sensor sigma_r and sigma_zeta must be > 0");
  }
  if (!(intensity > 0.0) || !std::isfinite(intensity)) {
    throw Error(ErrorCode::InvalidConfig, "sensor intensity must be > 0");
  }
}

StateVec ct_transition(const StateVec& x, const CtModelConfig& cfg) {
  if (x.size() != kCtStateDim) {
    throw Error(ErrorCode::DimensionMismatch, "coordinated-turn state must have 5 entries");
  }
  if (!x.allFinite()) {
    throw Error(ErrorCode::NonFinite, "coordinated-turn state is not finite");
  }
  const double t = cfg.ts;
  const double omega = x[4];
  double s_over_w = t;      // sin(wT)/w
  double c_over_w = 0.0;    // (1 - cos(wT))/w
  double c = 1.0;
  double s = 0.0;
  if (std::abs(omega) >= cfg.omega_epsilon) {
    const double wt = omega * t;
    s = std::sin(wt);
    c = std::cos(wt);
    s_over_w = s / omega;
    c_over_w = (1.0 - c) / omega;
  }
  StateVec out(kCtStateDim);
  out[0] = x[0] + s_over_w * x[1] - c_over_w * x[3];
  out[1] = c * x[1] - s * x[3];
  out[2] = x[2] + c_over_w * x[1] + s_over_w * x[3];
  out[3] = s * x[1] + c * x[3];
  out[4] = omega;
  return out;
}

CovMatrix ct_process_cov(const CtModelConfig& cfg) {
  const double t = cfg.ts;
  const double t2 = t * t;
  Eigen::Matrix2d block;
  block << t2 * t2 / 4.0, t2 * t / 2.0,
           t2 * t / 2.0, t2;
  block *= cfg.q1;
  CovMatrix q = CovMatrix::Zero(kCtStateDim, kCtStateDim);
  q.block<2, 2>(0, 0) = block;
  q.block<2, 2>(2, 2) = block;
  q(4, 4) = cfg.q2 * t;
  return q;
}

MeasVec range_bearing(const StateVec& x) {
  if (x.size() < 3) {
    throw Error(ErrorCode::DimensionMismatch, "range/bearing needs x at 0 and y at 2");
  }
  const double px = x[0];
  const double py = x[2];
  const double r = std::hypot(px, py);
  if (!std::isfinite(r)) {
    throw Error(ErrorCode::NonFinite, "range is not finite");
  }
  if (r < 1e-9) {
    std::ostringstream os;
    os << "range " << r << " m too close to the sensor";
    throw Error(ErrorCode::OriginSingularity, os.str());
  }
  MeasVec z(kRangeBearingDim);
  z[0] = r;
  z[1] = wrap_angle(std::atan2(py, px));
  return z;
}

CovMatrix meas_cov(const SensorModel& sensor) {
  CovMatrix r = CovMatrix::Zero(kRangeBearingDim, kRangeBearingDim);
  r(0, 0) = sensor.intensity * sensor.sigma_r * sensor.sigma_r;
  r(1, 1) = sensor.intensity * sensor.sigma_zeta * sensor.sigma_zeta;
  return r;
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

double wrap_angle_residual(double a, double b) { return wrap_angle(a - b); }

}  // namespace btltrack
