#pragma once

#include "btltrack/filter_engine.hpp"

#include <optional>
#include <vector>

namespace btltrack {

/// Process/measurement bindings of one filter.
struct FilterModels {
  ProcessModel process;
  MeasurementFunction meas;
  CovMatrix q_w;  // measurement noise of this filter's own sensor
};

/// Baseline predict + update filter with no transfer.
class IsolatedFilter {
 public:
  IsolatedFilter(const RuleSpec& rule, FilterModels models, GaussianBelief init);

  /// One predict/update cycle with the filter's own Q_w.
  const GaussianBelief& step(const MeasVec& z);
  /// One predict/update cycle with a caller-supplied measurement covariance.
  const GaussianBelief& step(const MeasVec& z, const CovMatrix& r);

  const GaussianBelief& belief() const { return belief_; }
  const SigmaRule& rule() const { return rule_; }
  const FilterModels& models() const { return models_; }
  int repairs() const { return repairs_; }

 private:
  SigmaRule rule_;
  FilterModels models_;
  GaussianBelief belief_;
  int repairs_ = 0;
};

struct SourceStep {
  GaussianBelief posterior;
  TransferPacket packet;
};

/// Source side: predict, update with z*, then predict the next observation.
class SourceFilter {
 public:
  SourceFilter(const RuleSpec& rule, FilterModels models, GaussianBelief init);

  SourceStep step(const MeasVec& z_star);

  const GaussianBelief& belief() const { return filter_.belief(); }
  int repairs() const { return filter_.repairs() + repairs_; }

 private:
  IsolatedFilter filter_;
  int repairs_ = 0;
};

/// Conditions a prediction on a transferred predicted observation.
///
/// eta_hat and P_x_eta come from the propagated points; the transferred
/// covariance takes the place of the noise term in P_eta_eta. The result is
/// tagged Stage::TransferUpdated.
Correction transfer_update(const Prediction& pred, const MeasurementFunction& meas,
                           const TransferPacket& packet);

/// Primary side: two-likelihood update with a one-step-delayed packet.
class PrimaryFilter {
 public:
  PrimaryFilter(const RuleSpec& rule, FilterModels models, GaussianBelief init);

  /// Queues a packet for the next step. Throws StalePacket unless
  /// packet.valid_for equals the next step index.
  void deliver(const TransferPacket& packet);

  /// Runs one cycle, consuming the queued packet if there is one. Without a
  /// packet this is a plain isolated cycle.
  const GaussianBelief& step(const MeasVec& z);

  /// deliver(packet) followed by step(z).
  const GaussianBelief& step(const MeasVec& z, const TransferPacket& packet);

  const GaussianBelief& belief() const { return belief_; }
  /// Belief after the transfer stage of the last cycle, if one ran.
  const std::optional<GaussianBelief>& last_transfer_belief() const { return last_tl_; }
  bool has_pending() const { return pending_.has_value(); }
  int next_step() const { return belief_.step + 1; }
  int repairs() const { return repairs_; }

 private:
  SigmaRule rule_;
  FilterModels models_;
  GaussianBelief belief_;
  std::optional<TransferPacket> pending_;
  std::optional<GaussianBelief> last_tl_;
  int repairs_ = 0;
};

struct PairRun {
  std::vector<GaussianBelief> source;   // posteriors k = 1..K
  std::vector<GaussianBelief> primary;  // posteriors k = 1..K
  int source_repairs = 0;
  int primary_repairs = 0;
};

/// Runs a source/primary pair in lockstep. The primary's first step has no
/// packet; step k >= 2 consumes the packet the source produced at k - 1.
PairRun run_pair(SourceFilter source, PrimaryFilter primary, const std::vector<MeasVec>& z_star,
                 const std::vector<MeasVec>& z);

}  // namespace btltrack
