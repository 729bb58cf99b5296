#include "btltrack/btl.hpp"

#include <sstream>

namespace btltrack {

IsolatedFilter::IsolatedFilter(const RuleSpec& rule, FilterModels models, GaussianBelief init)
    : rule_(rule), models_(std::move(models)), belief_(std::move(init)) {
  validate(belief_);
  if (belief_.dim() != rule_.spec().n_x) {
    throw Error(ErrorCode::DimensionMismatch, "initial belief does not match the rule dimension");
  }
  belief_.stage = Stage::Posterior;
}

const GaussianBelief& IsolatedFilter::step(const MeasVec& z) { return step(z, models_.q_w); }

const GaussianBelief& IsolatedFilter::step(const MeasVec& z, const CovMatrix& r) {
  Prediction pred = predict(belief_, rule_, models_.process);
  Correction post = measurement_update(pred.belief, pred.points, models_.meas, r, z);
  repairs_ += pred.repairs + post.repairs;
  belief_ = std::move(post.belief);
  return belief_;
}

SourceFilter::SourceFilter(const RuleSpec& rule, FilterModels models, GaussianBelief init)
    : filter_(rule, std::move(models), std::move(init)) {}

SourceStep SourceFilter::step(const MeasVec& z_star) {
  const GaussianBelief& post = filter_.step(z_star);
  const FilterModels& m = filter_.models();
  ObservationPrediction obs = predict_observation(post, filter_.rule(), m.process, m.meas, m.q_w);
  repairs_ += obs.repairs;
  return {post, std::move(obs.packet)};
}

Correction transfer_update(const Prediction& pred, const MeasurementFunction& meas,
                           const TransferPacket& packet) {
  if (pred.belief.stage != Stage::Predicted) {
    throw Error(ErrorCode::InvalidStage, "transfer update needs a predicted belief");
  }
  const MomentSet m = observation_moments(pred.points, pred.belief.mean, meas, packet.eta_cov);
  return kalman_correct(pred.belief, m, packet.eta_mean, meas.angular, Stage::TransferUpdated);
}

PrimaryFilter::PrimaryFilter(const RuleSpec& rule, FilterModels models, GaussianBelief init)
    : rule_(rule), models_(std::move(models)), belief_(std::move(init)) {
  validate(belief_);
  if (belief_.dim() != rule_.spec().n_x) {
    throw Error(ErrorCode::DimensionMismatch, "initial belief does not match the rule dimension");
  }
  belief_.stage = Stage::Posterior;
}

void PrimaryFilter::deliver(const TransferPacket& packet) {
  if (packet.valid_for != next_step() || packet.produced_at + 1 != packet.valid_for) {
    std::ostringstream os;
    os << "packet produced at " << packet.produced_at << " valid for " << packet.valid_for
       << ", next step is " << next_step();
    throw Error(ErrorCode::StalePacket, os.str());
  }
  pending_ = packet;
}

const GaussianBelief& PrimaryFilter::step(const MeasVec& z, const TransferPacket& packet) {
  deliver(packet);
  return step(z);
}

const GaussianBelief& PrimaryFilter::step(const MeasVec& z) {
  Prediction pred = predict(belief_, rule_, models_.process);
  int repairs = pred.repairs;
  Correction post;
  if (pending_) {
    const TransferPacket packet = std::move(*pending_);
    pending_.reset();
    Correction tl = transfer_update(pred, models_.meas, packet);
    repairs += tl.repairs;
    const WeightedPointSet redrawn = rule_.draw(tl.belief.mean, tl.belief.cov);
    post = measurement_update(tl.belief, redrawn, models_.meas, models_.q_w, z);
    last_tl_ = std::move(tl.belief);
  } else {
    post = measurement_update(pred.belief, pred.points, models_.meas, models_.q_w, z);
    last_tl_.reset();
  }
  repairs_ += repairs + post.repairs;
  belief_ = std::move(post.belief);
  return belief_;
}

PairRun run_pair(SourceFilter source, PrimaryFilter primary, const std::vector<MeasVec>& z_star,
                 const std::vector<MeasVec>& z) {
  if (z_star.size() != z.size()) {
    throw Error(ErrorCode::DimensionMismatch, "source and primary sequences differ in length");
  }
  PairRun out;
  out.source.reserve(z.size());
  out.primary.reserve(z.size());
  std::optional<TransferPacket> in_flight;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (in_flight) primary.deliver(*in_flight);
    out.primary.push_back(primary.step(z[k]));
    SourceStep s = source.step(z_star[k]);
    out.source.push_back(std::move(s.posterior));
    in_flight = std::move(s.packet);
  }
  out.source_repairs = source.repairs();
  out.primary_repairs = primary.repairs();
  return out;
}

}  // namespace btltrack
