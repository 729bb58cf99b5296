#pragma once

#include "btltrack/btl.hpp"
#include "btltrack/fusion_mvf.hpp"
#include "btltrack/models.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace btltrack {

enum class FilterMode { Isolated, Btlf, Mvf };
enum class InitMode { Exact, Sampled };

const char* to_string(FilterMode mode);
const char* to_string(InitMode mode);

struct Variant {
  RuleSpec rule;
  FilterMode mode = FilterMode::Isolated;

  /// e.g. "ukf(k=2).btlf"
  std::string name() const;
};

struct ExperimentConfig {
  CtModelConfig model;
  StateVec x0;
  CovMatrix p0;
  int k_steps = 100;
  int mc_runs = 1000;
  std::uint64_t seed = 1;
  SensorModel source_sensor;
  SensorModel primary_sensor;
  std::vector<Variant> variants;
  InitMode init_mode = InitMode::Sampled;
  /// Off: truth follows F(omega) x exactly; filters still model Q_v.
  bool process_noise = true;
  /// Off: measurements equal h(x_k) exactly; filters still model Q_w.
  bool measurement_noise = true;
  /// Points used by every filter's measurement update after a prediction.
  PredictedPoints predicted_points = PredictedPoints::Redraw;
  /// Update covariance of the MVF baseline's fused measurement.
  MvfCovariance mvf_covariance = MvfCovariance::Fused;
  /// Position error [m] beyond which a run counts as diverged.
  double divergence_m = 1e6;

  void validate() const;
};

/// Coordinated-turn tracking scenario (x0, P0, Ts = 1 s, K = 100, q1, q2, sigma_r, sigma_zeta)
/// with the given intensities and no variants.
ExperimentConfig reference_scenario(double iw_primary, double iw_source = 1.0);

/// Canonical text form of a config; two configs run identically iff equal.
std::string canonical_string(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

/// Counter-based substream seeding: each (run, stream) pair gets a seed
/// derived from the root seed alone, so runs and streams are independent of
/// how many variants or threads are in play.
enum class Stream : std::uint64_t { Truth = 0, SourceMeas = 1, PrimaryMeas = 2, Init = 3 };
std::uint64_t substream_seed(std::uint64_t root, std::uint64_t run, Stream stream);

using Rng = std::mt19937_64;

/// Sample from N(0, cov) with a fixed square-root factor.
class GaussianSampler {
 public:
  explicit GaussianSampler(const CovMatrix& cov);
  Vector operator()(Rng& rng) const;

 private:
  Matrix factor_;
};

/// x_0 = cfg.x0, x_k = F(omega_{k-1}) x_{k-1} + v_{k-1}. Length K + 1.
std::vector<StateVec> gen_truth(const ExperimentConfig& cfg, std::uint64_t run_seed);

/// z_k = h(x_k) + w_k for k = 1..K (truth[0] is the initial state and gets
/// no measurement). A zero noise_cov gives exact measurements.
std::vector<MeasVec> gen_measurements(const std::vector<StateVec>& truth,
                                      const CovMatrix& noise_cov, std::uint64_t stream_seed);

/// Everything one Monte Carlo replica is evaluated on.
struct RunData {
  std::vector<StateVec> truth;  // k = 0..K
  std::vector<MeasVec> z_star;  // source, k = 1..K
  std::vector<MeasVec> z;       // primary, k = 1..K
  StateVec init_mean;           // x_hat_0 shared by all filters
};

RunData make_run_data(const ExperimentConfig& cfg, std::uint64_t run);

std::uint64_t hash_run_data(const RunData& data);

/// Bindings for the coordinated-turn / range-bearing filters.
FilterModels tracking_models(const CtModelConfig& model, const SensorModel& sensor,
                             PredictedPoints points = PredictedPoints::Redraw);

/// Per-step position errors of one variant on one replica, or nullopt when
/// the filter diverged or failed.
struct VariantRun {
  std::vector<double> sq_pos_err;  // k = 1..K
  bool diverged = false;
  int repairs = 0;
};

VariantRun run_variant(const ExperimentConfig& cfg, const Variant& variant, const RunData& data);

struct VariantReport {
  Variant variant;
  std::vector<double> rmse_curve;  // k = 1..K
  double time_avg_rmse = 0.0;
  int diverged_runs = 0;
  long repairs = 0;
  double runtime_s = 0.0;
  std::uint64_t stream_hash = 0;
};

struct McReport {
  std::vector<VariantReport> variants;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  int mc_runs = 0;
  int k_steps = 0;

  const VariantReport& find(const std::string& name) const;
};

struct RunOptions {
  unsigned threads = 0;  // 0: hardware concurrency
};

McReport run_mc(const ExperimentConfig& cfg, const RunOptions& options = {});

}  // namespace btltrack
