#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace btltrack {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// State-space vector x_k. For the tracking model the layout is [x, vx, y, vy, omega].
using StateVec = Vector;
/// Measurement-space vector z_k. For the tracking model the layout is [range, bearing].
using MeasVec = Vector;
/// Symmetric positive semi-definite covariance.
using CovMatrix = Matrix;

enum class ErrorCode {
  NotSymmetric,
  NotRepairable,
  NonFinite,
  OriginSingularity,
  DegenerateRule,
  CovarianceFailure,
  SingularInnovation,
  StalePacket,
  SingularSum,
  DimensionMismatch,
  InvalidStage,
  InvalidConfig,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Numerical tolerances used by the covariance helpers.
struct Tolerances {
  /// Relative asymmetry accepted by matrix_sqrt_psd.
  double symmetry = 1e-10;
  /// Eigenvalue floor used when validating a covariance (absolute).
  double psd = 1e-9;
  /// Most negative eigenvalue that may be clamped, as a fraction of the trace.
  double repair = 1e-6;
  /// Diagonal jitter added after clamping, as a fraction of the trace.
  double jitter = 1e-12;
};

inline constexpr Tolerances kDefaultTolerances{};

/// Conditioning stage of a belief within one filter cycle.
enum class Stage {
  Posterior,       // k|k
  Predicted,       // k|k-1
  TransferUpdated  // k|k-1 given the transferred predicted observation
};

const char* to_string(Stage stage);

/// Gaussian state density N(mean, cov) at time index `step`.
struct GaussianBelief {
  StateVec mean;
  CovMatrix cov;
  int step = 0;
  Stage stage = Stage::Posterior;

  Eigen::Index dim() const { return mean.size(); }
};

/// Throws DimensionMismatch / NonFinite when the belief is malformed.
void validate(const GaussianBelief& belief);

bool all_finite(const Matrix& m);

/// Relative asymmetry ||P - P^T||_F / ||P||_F (0 for the zero matrix).
double asymmetry(const Matrix& p);

bool is_psd(const Matrix& p, double eps = kDefaultTolerances.psd);

/// Column-oriented square-root factor S with S * S^T = P.
///
/// Lower-triangular Cholesky factor of the symmetrized matrix; falls back to
/// V * sqrt(max(D, 0)) from an eigen-decomposition when the factorization
/// fails (singular PSD input, tiny negative eigenvalues).
Matrix matrix_sqrt_psd(const CovMatrix& p, const Tolerances& tol = kDefaultTolerances);

struct RepairResult {
  CovMatrix cov;
  int repairs = 0;
};

/// Symmetrizes P and, if it is indefinite, clamps negative eigenvalues and
/// adds trace-scaled jitter. repairs == 1 iff clamping happened.
RepairResult psd_repair(const CovMatrix& p, const Tolerances& tol = kDefaultTolerances);

}  // namespace btltrack
