#pragma once

#include "btltrack/core.hpp"
#include "btltrack/sigma_rules.hpp"

#include <functional>
#include <string>
#include <vector>

namespace btltrack {

/// Which points represent the predicted belief in the measurement update.
/// Redraw: fresh points from (x_k|k-1, P_k|k-1), so the additive process
/// noise reaches P_zz and P_xz. Reuse: the propagated points f(X_j) as is;
/// their scatter omits q.
enum class PredictedPoints { Redraw, Reuse };

const char* to_string(PredictedPoints p);
/// Parses "redraw" or "reuse"; throws InvalidConfig otherwise.
PredictedPoints parse_predicted_points(const std::string& s);

/// x_k = f(x_{k-1}) + v, v ~ N(0, q).
struct ProcessModel {
  std::function<StateVec(const StateVec&)> f;
  CovMatrix q;
  PredictedPoints points = PredictedPoints::Redraw;
};

/// z = h(x) + w. Entries listed in `angular` are angles and get wrapped
/// residuals in every moment computation.
struct MeasurementFunction {
  std::function<MeasVec(const StateVec&)> h;
  std::vector<int> angular;
};

/// Predicted measurement-space moments of a point set.
struct MomentSet {
  MeasVec pred_meas_mean;  // z_hat or eta_hat
  CovMatrix innov_cov;     // P_zz or P_eta_eta, noise/transfer term included
  Matrix cross_cov;        // P_xz or P_x_eta
};

/// Predicted-observation moments produced by a source filter at step
/// `produced_at` for consumption at `valid_for = produced_at + 1`.
struct TransferPacket {
  MeasVec eta_mean;
  CovMatrix eta_cov;
  int produced_at = 0;
  int valid_for = 1;
};

struct Prediction {
  GaussianBelief belief;     // k|k-1
  WeightedPointSet points;   // f(X_j) or a redraw, per ProcessModel::points
  int repairs = 0;
};

struct Correction {
  GaussianBelief belief;
  MomentSet moments;
  int repairs = 0;
};

struct ObservationPrediction {
  TransferPacket packet;
  int repairs = 0;
};

/// Weighted mean of the columns of `values`; rows listed in `angular` are
/// averaged as residuals about the first column and re-wrapped.
Vector weighted_mean(const Matrix& values, const Vector& weights, const std::vector<int>& angular);

/// Wraps the listed entries of a residual vector into (-pi, pi].
void wrap_entries(Vector& residual, const std::vector<int>& angular);

/// Propagates every point of `belief` through the process model.
Prediction predict(const GaussianBelief& belief, const SigmaRule& rule, const ProcessModel& process);

/// Measurement-space moments of `points` around `state_mean`, with
/// `noise_cov` added to the scatter.
MomentSet observation_moments(const WeightedPointSet& points, const StateVec& state_mean,
                              const MeasurementFunction& meas, const CovMatrix& noise_cov);

/// Gain step: mean += K (target - pred_meas_mean), cov -= K P_zz K^T with
/// K = P_xz P_zz^-1. `target` is a measurement or a transferred mean.
Correction kalman_correct(const GaussianBelief& prior, const MomentSet& moments,
                          const MeasVec& target, const std::vector<int>& angular, Stage out_stage);

/// Standard update of a predicted (or tl-updated) belief with measurement z,
/// reusing the already propagated/drawn points.
Correction measurement_update(const GaussianBelief& pred, const WeightedPointSet& pred_points,
                              const MeasurementFunction& meas, const CovMatrix& r,
                              const MeasVec& z);

/// Redraws points from a posterior, predicts them through the process model
/// (honouring ProcessModel::points), maps them through h and adds q_w: the
/// parameters the same filter would predict for z_{k+1}.
ObservationPrediction predict_observation(const GaussianBelief& post, const SigmaRule& rule,
                                          const ProcessModel& process,
                                          const MeasurementFunction& meas, const CovMatrix& q_w);

/// Condition number above which an innovation covariance counts as singular.
inline constexpr double kMaxInnovationCondition = 1e12;

}  // namespace btltrack
