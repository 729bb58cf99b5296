#include "btltrack/fusion_mvf.hpp"

#include <sstream>

namespace btltrack {

namespace {

Matrix spd_inverse(const CovMatrix& m, const char* what) {
  Eigen::LLT<Matrix> llt(0.5 * (m + m.transpose()));
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularSum, std::string(what) + " is not positive definite");
  }
  return llt.solve(Matrix::Identity(m.rows(), m.cols()));
}

}  // namespace

FusedMeasurement fuse(const MeasVec& z, const CovMatrix& q_w, const MeasVec& eta_star,
                      const CovMatrix& eta_cov, const std::vector<int>& angular) {
  const Eigen::Index n = z.size();
  if (eta_star.size() != n || q_w.rows() != n || q_w.cols() != n || eta_cov.rows() != n ||
      eta_cov.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "fusion inputs have inconsistent sizes");
  }
  const Matrix sum = q_w + eta_cov;
  Eigen::LLT<Matrix> llt(0.5 * (sum + sum.transpose()));
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularSum, "Q_w + eta_cov is not invertible");
  }
  Vector diff = eta_star - z;
  wrap_entries(diff, angular);
  FusedMeasurement out;
  out.z_tilde = z + q_w * llt.solve(diff);
  wrap_entries(out.z_tilde, angular);
  const Matrix info = spd_inverse(q_w, "Q_w") + spd_inverse(eta_cov, "eta_cov");
  out.q_tilde = spd_inverse(info, "fused information");
  out.q_tilde = 0.5 * (out.q_tilde + out.q_tilde.transpose()).eval();
  return out;
}

const char* to_string(MvfCovariance c) { return c == MvfCovariance::Fused ? "fused" : "sensor"; }

MvfCovariance parse_mvf_covariance(const std::string& s) {
  if (s == "fused") return MvfCovariance::Fused;
  if (s == "sensor") return MvfCovariance::Sensor;
  throw Error(ErrorCode::InvalidConfig, "mvf covariance must be fused or sensor, got '" + s + "'");
}

MvfFilter::MvfFilter(const RuleSpec& rule, FilterModels models, GaussianBelief init,
                     MvfCovariance covariance)
    : filter_(rule, std::move(models), std::move(init)), covariance_(covariance) {}

void MvfFilter::deliver(const TransferPacket& packet) {
  if (packet.valid_for != next_step() || packet.produced_at + 1 != packet.valid_for) {
    std::ostringstream os;
    os << "packet valid for " << packet.valid_for << ", next step is " << next_step();
    throw Error(ErrorCode::StalePacket, os.str());
  }
  pending_ = packet;
}

const GaussianBelief& MvfFilter::step(const MeasVec& z, const TransferPacket& packet) {
  deliver(packet);
  return step(z);
}

const GaussianBelief& MvfFilter::step(const MeasVec& z) {
  if (!pending_) return filter_.step(z);
  const TransferPacket packet = std::move(*pending_);
  pending_.reset();
  const FilterModels& m = filter_.models();
  const FusedMeasurement fused = fuse(z, m.q_w, packet.eta_mean, packet.eta_cov, m.meas.angular);
  return filter_.step(fused.z_tilde,
                      covariance_ == MvfCovariance::Fused ? fused.q_tilde : m.q_w);
}

}  // namespace btltrack
