#pragma once

#include "btltrack/btl.hpp"

#include <string>
#include <vector>

namespace btltrack {

/// Minimum-mean-square combination of two measurement-space estimates.
struct FusedMeasurement {
  MeasVec z_tilde;
  CovMatrix q_tilde;
};

/// z~ = z + Q_w (Q_w + S)^-1 (eta - z), Q~ = (Q_w^-1 + S^-1)^-1, with S the
/// transferred covariance. Angular entries use wrapped differences.
FusedMeasurement fuse(const MeasVec& z, const CovMatrix& q_w, const MeasVec& eta_star,
                      const CovMatrix& eta_cov, const std::vector<int>& angular = {});

/// Covariance the MVF filter assigns to the fused vector: Q~ (Fused) or the
/// sensor's own Q_w (Sensor).
enum class MvfCovariance { Fused, Sensor };

const char* to_string(MvfCovariance c);
/// Parses "fused" or "sensor"; throws InvalidConfig otherwise.
MvfCovariance parse_mvf_covariance(const std::string& s);

/// Measurement-vector-fusion baseline: fuses z with the delayed predicted
/// observation and tracks the fused vector with R = Q~ (or Q_w).
class MvfFilter {
 public:
  MvfFilter(const RuleSpec& rule, FilterModels models, GaussianBelief init,
            MvfCovariance covariance = MvfCovariance::Fused);

  void deliver(const TransferPacket& packet);
  const GaussianBelief& step(const MeasVec& z);
  const GaussianBelief& step(const MeasVec& z, const TransferPacket& packet);

  const GaussianBelief& belief() const { return filter_.belief(); }
  int next_step() const { return filter_.belief().step + 1; }
  int repairs() const { return filter_.repairs(); }

 private:
  IsolatedFilter filter_;
  MvfCovariance covariance_;
  std::optional<TransferPacket> pending_;
};

}  // namespace btltrack
