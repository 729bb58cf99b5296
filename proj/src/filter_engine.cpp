#include "btltrack/filter_engine.hpp"

#include "btltrack/models.hpp"

#include <sstream>

namespace btltrack {

namespace {

Matrix weighted_scatter(const Matrix& deviations, const Vector& weights) {
  return deviations * weights.asDiagonal() * deviations.transpose();
}

Matrix apply_columns(const std::function<Vector(const StateVec&)>& fn, const Matrix& points) {
  Matrix out;
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    Vector y = fn(points.col(j));
    if (j == 0) out.resize(y.size(), points.cols());
    out.col(j) = y;
  }
  return out;
}

}  // namespace

const char* to_string(PredictedPoints p) {
  return p == PredictedPoints::Redraw ? "redraw" : "reuse";
}

PredictedPoints parse_predicted_points(const std::string& s) {
  if (s == "redraw") return PredictedPoints::Redraw;
  if (s == "reuse") return PredictedPoints::Reuse;
  throw Error(ErrorCode::InvalidConfig, "predicted points must be redraw or reuse, got '" + s + "'");
}

void wrap_entries(Vector& residual, const std::vector<int>& angular) {
  for (int i : angular) residual[i] = wrap_angle(residual[i]);
}

Vector weighted_mean(const Matrix& values, const Vector& weights, const std::vector<int>& angular) {
  Vector mean = values * weights;
  for (int i : angular) {
    const double ref = values(i, 0);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      acc += weights[j] * wrap_angle_residual(values(i, j), ref);
    }
    mean[i] = wrap_angle(ref + acc);
  }
  return mean;
}

Prediction predict(const GaussianBelief& belief, const SigmaRule& rule, const ProcessModel& process) {
  validate(belief);
  if (belief.stage != Stage::Posterior) {
    throw Error(ErrorCode::InvalidStage, std::string("predict needs a posterior belief, got ") +
                                             to_string(belief.stage));
  }
  const WeightedPointSet drawn = rule.draw(belief.mean, belief.cov);
  Prediction out;
  out.points.weights = drawn.weights;
  out.points.points = apply_columns(process.f, drawn.points);
  const Vector mean = out.points.points * drawn.weights;
  const Matrix dev = out.points.points.colwise() - mean;
  auto repaired = psd_repair(weighted_scatter(dev, drawn.weights) + process.q);
  out.belief = GaussianBelief{mean, std::move(repaired.cov), belief.step + 1, Stage::Predicted};
  out.repairs = repaired.repairs;
  if (!out.belief.mean.allFinite()) {
    throw Error(ErrorCode::NonFinite, "predicted mean is not finite");
  }
  if (process.points == PredictedPoints::Redraw) out.points = rule.draw(out.belief.mean, out.belief.cov);
  return out;
}

MomentSet observation_moments(const WeightedPointSet& points, const StateVec& state_mean,
                              const MeasurementFunction& meas, const CovMatrix& noise_cov) {
  const Matrix y = apply_columns(meas.h, points.points);
  if (noise_cov.rows() != y.rows() || noise_cov.cols() != y.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "noise covariance does not match measurement size");
  }
  MomentSet m;
  m.pred_meas_mean = weighted_mean(y, points.weights, meas.angular);
  Matrix dz = y.colwise() - m.pred_meas_mean;
  for (int i : meas.angular) {
    for (Eigen::Index j = 0; j < dz.cols(); ++j) dz(i, j) = wrap_angle(dz(i, j));
  }
  const Matrix dx = points.points.colwise() - state_mean;
  m.innov_cov = weighted_scatter(dz, points.weights) + noise_cov;
  m.innov_cov = 0.5 * (m.innov_cov + m.innov_cov.transpose()).eval();
  m.cross_cov = dx * points.weights.asDiagonal() * dz.transpose();
  return m;
}

Correction kalman_correct(const GaussianBelief& prior, const MomentSet& moments,
                          const MeasVec& target, const std::vector<int>& angular, Stage out_stage) {
  if (target.size() != moments.pred_meas_mean.size()) {
    throw Error(ErrorCode::DimensionMismatch, "measurement size does not match the model");
  }
  if (!moments.innov_cov.allFinite() || !moments.cross_cov.allFinite()) {
    throw Error(ErrorCode::NonFinite, "innovation moments are not finite");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(moments.innov_cov, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxInnovationCondition) {
    std::ostringstream os;
    os << "innovation covariance eigenvalues [" << lo << ", " << hi << "]";
    throw Error(ErrorCode::SingularInnovation, os.str());
  }
  Eigen::LLT<Matrix> llt(moments.innov_cov);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularInnovation, "innovation covariance factorization failed");
  }
  // K = P_xz P_zz^-1, solved as P_zz K^T = P_xz^T.
  const Matrix gain = llt.solve(moments.cross_cov.transpose()).transpose();
  Vector innovation = target - moments.pred_meas_mean;
  wrap_entries(innovation, angular);

  Correction out;
  out.moments = moments;
  out.belief.mean = prior.mean + gain * innovation;
  auto repaired = psd_repair(prior.cov - gain * moments.innov_cov * gain.transpose());
  out.belief.cov = std::move(repaired.cov);
  out.belief.step = prior.step;
  out.belief.stage = out_stage;
  out.repairs = repaired.repairs;
  if (!out.belief.mean.allFinite()) {
    throw Error(ErrorCode::NonFinite, "updated mean is not finite");
  }
  return out;
}

Correction measurement_update(const GaussianBelief& pred, const WeightedPointSet& pred_points,
                              const MeasurementFunction& meas, const CovMatrix& r,
                              const MeasVec& z) {
  if (pred.stage == Stage::Posterior) {
    throw Error(ErrorCode::InvalidStage, "measurement update needs a predicted belief");
  }
  const MomentSet m = observation_moments(pred_points, pred.mean, meas, r);
  return kalman_correct(pred, m, z, meas.angular, Stage::Posterior);
}

ObservationPrediction predict_observation(const GaussianBelief& post, const SigmaRule& rule,
                                          const ProcessModel& process,
                                          const MeasurementFunction& meas, const CovMatrix& q_w) {
  if (post.stage != Stage::Posterior) {
    throw Error(ErrorCode::InvalidStage, "predict-observation needs a posterior belief");
  }
  const Prediction pred = predict(post, rule, process);
  const MomentSet m = observation_moments(pred.points, pred.belief.mean, meas, q_w);
  ObservationPrediction out;
  auto repaired = psd_repair(m.innov_cov);
  out.packet = TransferPacket{m.pred_meas_mean, std::move(repaired.cov), post.step, post.step + 1};
  out.repairs = pred.repairs + repaired.repairs;
  return out;
}

}  // namespace btltrack
