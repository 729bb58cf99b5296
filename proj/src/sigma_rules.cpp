#include "btltrack/sigma_rules.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace btltrack {

const char* to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::UT: return "ut";
    case RuleKind::CKF3: return "ckf3";
    case RuleKind::CKF5: return "ckf5";
  }
  return "unknown";
}

std::string RuleSpec::label() const {
  std::ostringstream os;
  switch (kind) {
    case RuleKind::UT:
      os << "ukf(k=" << kappa;
      if (alpha != 1.0) os << ",a=" << alpha;
      os << ")";
      break;
    case RuleKind::CKF3: os << "ckf3"; break;
    case RuleKind::CKF5: os << "ckf5"; break;
  }
  return os.str();
}

void RuleSpec::validate() const {
  if (n_x < 1) {
    throw Error(ErrorCode::DegenerateRule, "state dimension must be >= 1");
  }
  if (kind == RuleKind::UT) {
    if (!std::isfinite(alpha) || !std::isfinite(kappa)) {
      throw Error(ErrorCode::DegenerateRule, "UT alpha/kappa must be finite");
    }
    if (n_x + lambda() == 0.0) {
      std::ostringstream os;
      os << "n_x + lambda = 0 for n_x=" << n_x << ", kappa=" << kappa << ", alpha=" << alpha;
      throw Error(ErrorCode::DegenerateRule, os.str());
    }
  }
}

Eigen::Index point_count(const RuleSpec& rule) {
  const Eigen::Index n = rule.n_x;
  switch (rule.kind) {
    case RuleKind::UT: return 2 * n + 1;
    case RuleKind::CKF3: return 2 * n;
    case RuleKind::CKF5: return 2 * n * n + 1;
  }
  return 0;
}

Vector rule_weights(const RuleSpec& rule) {
  rule.validate();
  const double n = rule.n_x;
  Vector w(point_count(rule));
  switch (rule.kind) {
    case RuleKind::UT: {
      const double scale = n + rule.lambda();
      w.setConstant(1.0 / (2.0 * scale));
      w[0] = rule.lambda() / scale;
      break;
    }
    case RuleKind::CKF3:
      w.setConstant(1.0 / (2.0 * n));
      break;
    case RuleKind::CKF5: {
      const double d = (n + 2.0) * (n + 2.0);
      w.setConstant(1.0 / d);
      w[0] = 2.0 / (n + 2.0);
      w.segment(1, 2 * rule.n_x).setConstant((4.0 - n) / (2.0 * d));
      break;
    }
  }
  return w;
}

WeightedPointSet unit_points(const RuleSpec& rule) {
  WeightedPointSet set;
  set.weights = rule_weights(rule);
  const Eigen::Index n = rule.n_x;
  set.points = Matrix::Zero(n, set.weights.size());
  const Matrix eye = Matrix::Identity(n, n);
  switch (rule.kind) {
    case RuleKind::UT: {
      const double scale = n + rule.lambda();
      if (scale < 0.0) {
        throw Error(ErrorCode::CovarianceFailure, "UT spread n_x + lambda is negative");
      }
      const double r = std::sqrt(scale);
      set.points.block(0, 1, n, n) = r * eye;
      set.points.block(0, 1 + n, n, n) = -r * eye;
      break;
    }
    case RuleKind::CKF3: {
      const double r = std::sqrt(static_cast<double>(n));
      set.points.block(0, 0, n, n) = r * eye;
      set.points.block(0, n, n, n) = -r * eye;
      break;
    }
    case RuleKind::CKF5: {
      const double gamma = std::sqrt(static_cast<double>(n) + 2.0);
      set.points.block(0, 1, n, n) = gamma * eye;
      set.points.block(0, 1 + n, n, n) = -gamma * eye;
      const Eigen::Index pairs = n * (n - 1) / 2;
      const Eigen::Index plus_pos = 1 + 2 * n;
      const Eigen::Index plus_neg = plus_pos + pairs;
      const Eigen::Index minus_pos = plus_neg + pairs;
      const Eigen::Index minus_neg = minus_pos + pairs;
      const double g = gamma / std::numbers::sqrt2;
      Eigen::Index j = 0;
      for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = a + 1; b < n; ++b, ++j) {
          const Vector sum = g * (eye.col(a) + eye.col(b));
          const Vector diff = g * (eye.col(a) - eye.col(b));
          set.points.col(plus_pos + j) = sum;
          set.points.col(plus_neg + j) = -sum;
          set.points.col(minus_pos + j) = diff;
          set.points.col(minus_neg + j) = -diff;
        }
      }
      break;
    }
  }
  return set;
}

SigmaRule::SigmaRule(const RuleSpec& spec) : spec_(spec), unit_(unit_points(spec)) {}

WeightedPointSet SigmaRule::draw(const StateVec& mean, const CovMatrix& cov) const {
  if (mean.size() != spec_.n_x || cov.rows() != spec_.n_x || cov.cols() != spec_.n_x) {
    throw Error(ErrorCode::DimensionMismatch, "belief dimension does not match the rule");
  }
  const Matrix s = matrix_sqrt_psd(cov);
  WeightedPointSet out;
  out.points = s * unit_.points;
  out.points.colwise() += mean;
  out.weights = unit_.weights;
  return out;
}

WeightedPointSet generate(const RuleSpec& rule, const StateVec& mean, const CovMatrix& cov) {
  return SigmaRule(rule).draw(mean, cov);
}

WeightedPointSet generate(const RuleSpec& rule, const GaussianBelief& belief) {
  return generate(rule, belief.mean, belief.cov);
}

double stability_measure(const RuleSpec& rule) {
  rule.validate();
  const double n = rule.n_x;
  switch (rule.kind) {
    case RuleKind::UT: {
      const double lambda = rule.lambda();
      return (n + std::abs(lambda)) / std::abs(n + lambda);
    }
    case RuleKind::CKF3: return 1.0;
    case RuleKind::CKF5:
      return (n * std::abs(4.0 - n) + 2.0 * n * n + 4.0) / ((n + 2.0) * (n + 2.0));
  }
  return 1.0;
}

}  // namespace btltrack
