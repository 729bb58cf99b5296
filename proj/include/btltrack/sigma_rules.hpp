#pragma once

#include "btltrack/core.hpp"

#include <string>

namespace btltrack {

enum class RuleKind { UT, CKF3, CKF5 };

const char* to_string(RuleKind kind);

/// Deterministic integration rule for Gaussian-weighted integrals.
struct RuleSpec {
  RuleKind kind = RuleKind::CKF3;
  double alpha = 1.0;  // UT only
  double kappa = 0.0;  // UT only
  int n_x = 5;

  static RuleSpec ut(int n_x, double kappa, double alpha = 1.0) {
    return {RuleKind::UT, alpha, kappa, n_x};
  }
  static RuleSpec ckf3(int n_x) { return {RuleKind::CKF3, 1.0, 0.0, n_x}; }
  static RuleSpec ckf5(int n_x) { return {RuleKind::CKF5, 1.0, 0.0, n_x}; }

  /// lambda = alpha^2 (n_x + kappa) - n_x (UT only).
  double lambda() const { return alpha * alpha * (n_x + kappa) - n_x; }

  /// Short label such as "ukf(k=2)", "ckf3", "ckf5".
  std::string label() const;

  /// Throws DegenerateRule if n_x < 1 or n_x + lambda == 0 for UT.
  void validate() const;
};

inline bool operator==(const RuleSpec& a, const RuleSpec& b) {
  return a.kind == b.kind && a.alpha == b.alpha && a.kappa == b.kappa && a.n_x == b.n_x;
}

/// Points are stored column-wise; weights are signed and sum to one.
struct WeightedPointSet {
  Matrix points;   // n_x x count
  Vector weights;  // count

  Eigen::Index size() const { return weights.size(); }
};

Eigen::Index point_count(const RuleSpec& rule);

/// Weights of the rule in the generation order below.
Vector rule_weights(const RuleSpec& rule);

/// Unit point set for N(0, I): points in the generation order, scaled but
/// not yet mapped through a covariance factor.
///
/// Ordering:
///   UT   center, +e_j * sqrt(n + lambda), -e_j * sqrt(n + lambda)
///   CKF3 +e_j * sqrt(n), -e_j * sqrt(n)
///   CKF5 center, +gamma e_j, -gamma e_j, then for pairs (a, b), a < b,
///        lexicographic: +gamma (e_a + e_b)/sqrt2, -gamma (e_a + e_b)/sqrt2,
///        +gamma (e_a - e_b)/sqrt2, -gamma (e_a - e_b)/sqrt2 (each family
///        as a contiguous block), gamma = sqrt(n + 2).
WeightedPointSet unit_points(const RuleSpec& rule);

/// Points mean + S * u_j with S the column square-root factor of cov.
WeightedPointSet generate(const RuleSpec& rule, const StateVec& mean, const CovMatrix& cov);

WeightedPointSet generate(const RuleSpec& rule, const GaussianBelief& belief);

/// A rule with its unit point set precomputed, for repeated draws.
class SigmaRule {
 public:
  SigmaRule(const RuleSpec& spec);  // NOLINT(google-explicit-constructor)

  const RuleSpec& spec() const { return spec_; }
  const Vector& weights() const { return unit_.weights; }
  Eigen::Index size() const { return unit_.size(); }

  WeightedPointSet draw(const StateVec& mean, const CovMatrix& cov) const;

 private:
  RuleSpec spec_;
  WeightedPointSet unit_;
};

/// Sum of absolute weights, closed form. 1 means fully stable.
double stability_measure(const RuleSpec& rule);

}  // namespace btltrack
