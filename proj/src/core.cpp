#include "btltrack/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace btltrack {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotRepairable: return "NotRepairable";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::OriginSingularity: return "OriginSingularity";
    case ErrorCode::DegenerateRule: return "DegenerateRule";
    case ErrorCode::CovarianceFailure: return "CovarianceFailure";
    case ErrorCode::SingularInnovation: return "SingularInnovation";
    case ErrorCode::StalePacket: return "StalePacket";
    case ErrorCode::SingularSum: return "SingularSum";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidStage: return "InvalidStage";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::Posterior: return "posterior";
    case Stage::Predicted: return "predicted";
    case Stage::TransferUpdated: return "tl-updated";
  }
  return "unknown";
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

void validate(const GaussianBelief& belief) {
  if (belief.mean.size() < 1) {
    throw Error(ErrorCode::DimensionMismatch, "belief has empty mean");
  }
  if (belief.cov.rows() != belief.mean.size() || belief.cov.cols() != belief.mean.size()) {
    std::ostringstream os;
    os << "covariance is " << belief.cov.rows() << "x" << belief.cov.cols() << ", mean has "
       << belief.mean.size() << " entries";
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
  if (!belief.mean.allFinite() || !belief.cov.allFinite()) {
    throw Error(ErrorCode::NonFinite, "belief contains non-finite entries");
  }
}

double asymmetry(const Matrix& p) {
  const double norm = p.norm();
  if (norm == 0.0) return 0.0;
  return (p - p.transpose()).norm() / norm;
}

bool is_psd(const Matrix& p, double eps) {
  if (p.rows() != p.cols() || !p.allFinite()) return false;
  const Matrix sym = 0.5 * (p + p.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -eps;
}

namespace {

void require_square_finite(const Matrix& p) {
  if (p.rows() != p.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "covariance is not square");
  }
  if (!p.allFinite()) {
    throw Error(ErrorCode::NonFinite, "covariance contains non-finite entries");
  }
}

// Floor below which a negative eigenvalue cannot be clamped.
double repair_floor(const Matrix& sym, const Tolerances& tol) {
  return -tol.repair * std::max(sym.trace(), 0.0);
}

}  // namespace

Matrix matrix_sqrt_psd(const CovMatrix& p, const Tolerances& tol) {
  require_square_finite(p);
  if (asymmetry(p) > tol.symmetry) {
    throw Error(ErrorCode::NotSymmetric, "matrix asymmetry exceeds tolerance");
  }
  const Matrix sym = 0.5 * (p + p.transpose());
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) {
    return llt.matrixL();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::CovarianceFailure, "eigen-decomposition failed");
  }
  const Vector& d = es.eigenvalues();
  if (d.minCoeff() < repair_floor(sym, tol)) {
    throw Error(ErrorCode::NotRepairable, "most negative eigenvalue below repair floor");
  }
  return es.eigenvectors() * d.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

RepairResult psd_repair(const CovMatrix& p, const Tolerances& tol) {
  require_square_finite(p);
  Matrix sym = 0.5 * (p + p.transpose());
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) {
    return {std::move(sym), 0};
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::NotRepairable, "eigen-decomposition failed");
  }
  const Vector& d = es.eigenvalues();
  const double min_eig = d.minCoeff();
  if (min_eig >= 0.0) {
    // Singular but PSD, e.g. a degenerate process-noise block.
    return {std::move(sym), 0};
  }
  if (min_eig < repair_floor(sym, tol)) {
    std::ostringstream os;
    os << "eigenvalue " << min_eig << " below floor " << repair_floor(sym, tol);
    throw Error(ErrorCode::NotRepairable, os.str());
  }
  const double jitter = tol.jitter * sym.trace();
  Matrix fixed = es.eigenvectors() * d.cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
  fixed = 0.5 * (fixed + fixed.transpose()).eval();
  fixed.diagonal().array() += jitter;
  return {std::move(fixed), 1};
}

}  // namespace btltrack
