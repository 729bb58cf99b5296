#include "btltrack/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>

namespace btltrack {

const char* to_string(FilterMode mode) {
  switch (mode) {
    case FilterMode::Isolated: return "isolated";
    case FilterMode::Btlf: return "btlf";
    case FilterMode::Mvf: return "mvf";
  }
  return "unknown";
}

const char* to_string(InitMode mode) {
  return mode == InitMode::Exact ? "exact" : "sampled";
}

std::string Variant::name() const { return rule.label() + "." + to_string(mode); }

void ExperimentConfig::validate() const {
  model.validate();
  source_sensor.validate();
  primary_sensor.validate();
  if (k_steps < 1) throw Error(ErrorCode::InvalidConfig, "mc.k_steps must be >= 1");
  if (mc_runs < 1) throw Error(ErrorCode::InvalidConfig, "mc.mc must be >= 1");
  if (x0.size() != kCtStateDim) throw Error(ErrorCode::InvalidConfig, "model.x0 needs 5 entries");
  if (!x0.allFinite()) throw Error(ErrorCode::InvalidConfig, "model.x0 is not finite");
  if (p0.rows() != kCtStateDim || p0.cols() != kCtStateDim || !is_psd(p0)) {
    throw Error(ErrorCode::InvalidConfig, "model.p0 must be a 5x5 PSD matrix");
  }
  if (variants.empty()) throw Error(ErrorCode::InvalidConfig, "no filter variants configured");
  for (const Variant& v : variants) {
    if (v.rule.n_x != kCtStateDim) {
      throw Error(ErrorCode::InvalidConfig, "filter state dimension must be 5");
    }
    try {
      v.rule.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidConfig, std::string("filter ") + v.name() + ": " + e.what());
    }
  }
  if (!(divergence_m > 0.0)) throw Error(ErrorCode::InvalidConfig, "mc.divergence_m must be > 0");
}

ExperimentConfig reference_scenario(double iw_primary, double iw_source) {
  ExperimentConfig cfg;
  cfg.x0 = StateVec(kCtStateDim);
  cfg.x0 << 1000.0, 300.0, 1000.0, 0.0, -3.0 * std::numbers::pi / 180.0;
  cfg.p0 = CovMatrix::Zero(kCtStateDim, kCtStateDim);
  cfg.p0.diagonal() << 100.0, 10.0, 100.0, 10.0, 100e-3;
  cfg.source_sensor.intensity = iw_source;
  cfg.primary_sensor.intensity = iw_primary;
  return cfg;
}

std::string canonical_string(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "ts=" << cfg.model.ts << ";q1=" << cfg.model.q1 << ";q2=" << cfg.model.q2
     << ";omega_eps=" << cfg.model.omega_epsilon << ";x0=";
  for (Eigen::Index i = 0; i < cfg.x0.size(); ++i) os << cfg.x0[i] << ",";
  os << ";p0=";
  for (Eigen::Index i = 0; i < cfg.p0.size(); ++i) os << cfg.p0.data()[i] << ",";
  os << ";k=" << cfg.k_steps << ";mc=" << cfg.mc_runs << ";seed=" << cfg.seed;
  for (const SensorModel* s : {&cfg.source_sensor, &cfg.primary_sensor}) {
    os << ";sensor=" << s->sigma_r << "," << s->sigma_zeta << "," << s->intensity;
  }
  os << ";init=" << to_string(cfg.init_mode) << ";pn=" << cfg.process_noise
     << ";mn=" << cfg.measurement_noise << ";div=" << cfg.divergence_m
     << ";points=" << to_string(cfg.predicted_points) << ";mvf=" << to_string(cfg.mvf_covariance);
  for (const Variant& v : cfg.variants) {
    os << ";variant=" << to_string(v.rule.kind) << "," << v.rule.alpha << "," << v.rule.kappa
       << "," << to_string(v.mode);
  }
  return os.str();
}

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t hash_vector(std::uint64_t h, const Vector& v) {
  return fnv1a(h, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string s = canonical_string(cfg);
  return fnv1a(kFnvOffset, s.data(), s.size());
}

std::uint64_t substream_seed(std::uint64_t root, std::uint64_t run, Stream stream) {
  // seed = mix(mix(mix(root) ^ run) ^ stream)
  std::uint64_t h = splitmix64(root);
  h = splitmix64(h ^ run);
  return splitmix64(h ^ static_cast<std::uint64_t>(stream));
}

GaussianSampler::GaussianSampler(const CovMatrix& cov) : factor_(matrix_sqrt_psd(cov)) {}

Vector GaussianSampler::operator()(Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector xi(factor_.cols());
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = normal(rng);
  return factor_ * xi;
}

std::vector<StateVec> gen_truth(const ExperimentConfig& cfg, std::uint64_t run_seed) {
  Rng rng(run_seed);
  const GaussianSampler noise(ct_process_cov(cfg.model));
  std::vector<StateVec> truth;
  truth.reserve(static_cast<std::size_t>(cfg.k_steps) + 1);
  truth.push_back(cfg.x0);
  for (int k = 1; k <= cfg.k_steps; ++k) {
    StateVec next = ct_transition(truth.back(), cfg.model);
    if (cfg.process_noise) next += noise(rng);
    truth.push_back(std::move(next));
  }
  return truth;
}

std::vector<MeasVec> gen_measurements(const std::vector<StateVec>& truth,
                                      const CovMatrix& noise_cov, std::uint64_t stream_seed) {
  Rng rng(stream_seed);
  const GaussianSampler noise(noise_cov);
  std::vector<MeasVec> z;
  if (truth.empty()) return z;
  z.reserve(truth.size() - 1);
  for (std::size_t k = 1; k < truth.size(); ++k) {
    MeasVec m = range_bearing(truth[k]) + noise(rng);
    m[kBearingIndex] = wrap_angle(m[kBearingIndex]);
    z.push_back(std::move(m));
  }
  return z;
}

RunData make_run_data(const ExperimentConfig& cfg, std::uint64_t run) {
  RunData d;
  d.truth = gen_truth(cfg, substream_seed(cfg.seed, run, Stream::Truth));
  const auto noise = [&](const SensorModel& s) {
    return cfg.measurement_noise ? meas_cov(s) : CovMatrix::Zero(kRangeBearingDim, kRangeBearingDim);
  };
  d.z_star = gen_measurements(d.truth, noise(cfg.source_sensor),
                              substream_seed(cfg.seed, run, Stream::SourceMeas));
  d.z = gen_measurements(d.truth, noise(cfg.primary_sensor),
                         substream_seed(cfg.seed, run, Stream::PrimaryMeas));
  d.init_mean = cfg.x0;
  if (cfg.init_mode == InitMode::Sampled) {
    Rng rng(substream_seed(cfg.seed, run, Stream::Init));
    d.init_mean += GaussianSampler(cfg.p0)(rng);
  }
  return d;
}

std::uint64_t hash_run_data(const RunData& data) {
  std::uint64_t h = kFnvOffset;
  for (const auto& x : data.truth) h = hash_vector(h, x);
  for (const auto& z : data.z_star) h = hash_vector(h, z);
  for (const auto& z : data.z) h = hash_vector(h, z);
  return hash_vector(h, data.init_mean);
}

FilterModels tracking_models(const CtModelConfig& model, const SensorModel& sensor,
                             PredictedPoints points) {
  FilterModels m;
  m.process.f = [model](const StateVec& x) { return ct_transition(x, model); };
  m.process.q = ct_process_cov(model);
  m.process.points = points;
  m.meas.h = [](const StateVec& x) { return range_bearing(x); };
  m.meas.angular = {kBearingIndex};
  m.q_w = meas_cov(sensor);
  return m;
}

namespace {

GaussianBelief initial_belief(const ExperimentConfig& cfg, const RunData& data) {
  return GaussianBelief{data.init_mean, cfg.p0, 0, Stage::Posterior};
}

struct SourceOutput {
  std::vector<TransferPacket> packets;  // packets[k-1] produced at step k
  int repairs = 0;
  bool failed = false;
};

SourceOutput run_source(const ExperimentConfig& cfg, const RuleSpec& rule, const RunData& data) {
  SourceOutput out;
  try {
    SourceFilter source(rule, tracking_models(cfg.model, cfg.source_sensor, cfg.predicted_points),
                        initial_belief(cfg, data));
    out.packets.reserve(data.z_star.size());
    for (const auto& z : data.z_star) out.packets.push_back(source.step(z).packet);
    out.repairs = source.repairs();
  } catch (const Error&) {
    out.failed = true;
  }
  return out;
}

double sq_position_error(const StateVec& est, const StateVec& truth) {
  const double dx = est[0] - truth[0];
  const double dy = est[2] - truth[2];
  return dx * dx + dy * dy;
}

// Runs the primary-side filter of a variant; source packets come from the
// caller so that btlf and mvf variants sharing a rule share one source run.
VariantRun run_primary(const ExperimentConfig& cfg, const Variant& variant, const RunData& data,
                       const SourceOutput* source) {
  VariantRun out;
  const std::size_t k_steps = data.z.size();
  out.sq_pos_err.reserve(k_steps);
  if (source && source->failed) {
    out.diverged = true;
    return out;
  }
  const double limit = cfg.divergence_m * cfg.divergence_m;
  const auto record = [&](const GaussianBelief& b, std::size_t k) {
    const double e = sq_position_error(b.mean, data.truth[k + 1]);
    if (!std::isfinite(e) || e > limit) out.diverged = true;
    out.sq_pos_err.push_back(e);
  };
  try {
    FilterModels models = tracking_models(cfg.model, cfg.primary_sensor, cfg.predicted_points);
    const GaussianBelief init = initial_belief(cfg, data);
    switch (variant.mode) {
      case FilterMode::Isolated: {
        IsolatedFilter f(variant.rule, std::move(models), init);
        for (std::size_t k = 0; k < k_steps && !out.diverged; ++k) record(f.step(data.z[k]), k);
        out.repairs = f.repairs();
        break;
      }
      case FilterMode::Btlf: {
        PrimaryFilter f(variant.rule, std::move(models), init);
        for (std::size_t k = 0; k < k_steps && !out.diverged; ++k) {
          if (k > 0) f.deliver(source->packets[k - 1]);
          record(f.step(data.z[k]), k);
        }
        out.repairs = f.repairs() + source->repairs;
        break;
      }
      case FilterMode::Mvf: {
        MvfFilter f(variant.rule, std::move(models), init, cfg.mvf_covariance);
        for (std::size_t k = 0; k < k_steps && !out.diverged; ++k) {
          if (k > 0) f.deliver(source->packets[k - 1]);
          record(f.step(data.z[k]), k);
        }
        out.repairs = f.repairs() + source->repairs;
        break;
      }
    }
  } catch (const Error&) {
    out.diverged = true;
  }
  return out;
}

}  // namespace

VariantRun run_variant(const ExperimentConfig& cfg, const Variant& variant, const RunData& data) {
  if (variant.mode == FilterMode::Isolated) return run_primary(cfg, variant, data, nullptr);
  const SourceOutput source = run_source(cfg, variant.rule, data);
  return run_primary(cfg, variant, data, &source);
}

const VariantReport& McReport::find(const std::string& name) const {
  for (const auto& v : variants) {
    if (v.variant.name() == name) return v;
  }
  throw Error(ErrorCode::InvalidConfig, "no variant named " + name);
}

namespace {

struct RunResult {
  std::vector<VariantRun> variants;
  std::vector<double> seconds;
  std::uint64_t data_hash = 0;
};

RunResult evaluate_run(const ExperimentConfig& cfg, std::uint64_t run) {
  using Clock = std::chrono::steady_clock;
  const RunData data = make_run_data(cfg, run);
  RunResult r;
  r.data_hash = hash_run_data(data);
  r.variants.resize(cfg.variants.size());
  r.seconds.assign(cfg.variants.size(), 0.0);

  // One source run per distinct rule, shared by that rule's btlf/mvf variants.
  std::vector<std::pair<RuleSpec, SourceOutput>> sources;
  for (std::size_t i = 0; i < cfg.variants.size(); ++i) {
    const Variant& v = cfg.variants[i];
    const auto t0 = Clock::now();
    const SourceOutput* src = nullptr;
    if (v.mode != FilterMode::Isolated) {
      auto it = std::find_if(sources.begin(), sources.end(),
                             [&](const auto& s) { return s.first == v.rule; });
      if (it == sources.end()) {
        sources.emplace_back(v.rule, run_source(cfg, v.rule, data));
        it = std::prev(sources.end());
      }
      src = &it->second;
    }
    r.variants[i] = run_primary(cfg, v, data, src);
    r.seconds[i] = std::chrono::duration<double>(Clock::now() - t0).count();
  }
  return r;
}

}  // namespace

McReport run_mc(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const std::size_t nv = cfg.variants.size();
  const std::size_t k_steps = static_cast<std::size_t>(cfg.k_steps);

  std::vector<std::vector<double>> sum_sq(nv, std::vector<double>(k_steps, 0.0));
  std::vector<int> ok(nv, 0);

  McReport report;
  report.config_hash = config_hash(cfg);
  report.seed = cfg.seed;
  report.mc_runs = cfg.mc_runs;
  report.k_steps = cfg.k_steps;
  report.variants.resize(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    report.variants[i].variant = cfg.variants[i];
    report.variants[i].stream_hash = kFnvOffset;
  }

  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, threads);
  const std::size_t runs = static_cast<std::size_t>(cfg.mc_runs);
  const std::size_t block = std::max<std::size_t>(64, 8 * threads);

  std::vector<RunResult> results;
  for (std::size_t start = 0; start < runs; start += block) {
    const std::size_t count = std::min(block, runs - start);
    results.assign(count, RunResult{});
    const auto worker = [&](unsigned t) {
      for (std::size_t i = t; i < count; i += threads) results[i] = evaluate_run(cfg, start + i);
    };
    if (threads == 1) {
      worker(0);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    }
    // Ordered reduction over run index.
    for (const RunResult& r : results) {
      for (std::size_t i = 0; i < nv; ++i) {
        VariantReport& rep = report.variants[i];
        const VariantRun& vr = r.variants[i];
        rep.stream_hash = fnv1a(rep.stream_hash, &r.data_hash, sizeof(r.data_hash));
        rep.runtime_s += r.seconds[i];
        rep.repairs += vr.repairs;
        if (vr.diverged) {
          ++rep.diverged_runs;
          continue;
        }
        ++ok[i];
        for (std::size_t k = 0; k < k_steps; ++k) sum_sq[i][k] += vr.sq_pos_err[k];
      }
    }
  }

  for (std::size_t i = 0; i < nv; ++i) {
    VariantReport& rep = report.variants[i];
    rep.rmse_curve.assign(k_steps, std::numeric_limits<double>::quiet_NaN());
    if (ok[i] == 0) {
      rep.time_avg_rmse = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < k_steps; ++k) {
      rep.rmse_curve[k] = std::sqrt(sum_sq[i][k] / ok[i]);
      acc += rep.rmse_curve[k];
    }
    rep.time_avg_rmse = acc / static_cast<double>(k_steps);
  }
  return report;
}

}  // namespace btltrack
