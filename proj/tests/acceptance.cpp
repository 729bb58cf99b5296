// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include "btltrack/btl.hpp"
#include "btltrack/cli.hpp"
#include "btltrack/harness.hpp"
#include "btltrack/sigma_rules.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace btltrack;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      if (!pass) detail << "; ";
      detail << what;
      pass = false;
    }
  }
};

std::vector<RuleSpec> valid_rules(int n) {
  std::vector<RuleSpec> out{RuleSpec::ckf3(n), RuleSpec::ckf5(n)};
  for (double kappa : {-2.0, -1.0, 0.0, 1.0, 2.0, 3.0 - n, 5.0, 10.0}) {
    const RuleSpec r = RuleSpec::ut(n, kappa);
    if (std::abs(n + r.lambda()) > 1e-12) out.push_back(r);
  }
  return out;
}

GaussianBelief posterior(const Vector& m, const Matrix& p) { return {m, p, 0, Stage::Posterior}; }

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// 1. Weight sums, mean/scatter reproduction and CKF5 fourth moments.
Outcome rule_correctness() {
  Outcome o;
  std::mt19937_64 rng(101);
  double worst_sum = 0.0, worst_mean = 0.0, worst_cov = 0.0, worst_m4 = 0.0;
  for (int n = 2; n <= 8; ++n) {
    for (const RuleSpec& r : valid_rules(n)) {
      for (int trial = 0; trial < 20; ++trial) {
        const Vector m = oracle::random_vector(rng, n);
        const Matrix p = oracle::random_spd(rng, n);
        const WeightedPointSet s = generate(r, m, p);
        worst_sum = std::max(worst_sum, std::abs(s.weights.sum() - 1.0));
        const Vector mean = s.points * s.weights;
        const Matrix dev = s.points.colwise() - m;
        const Matrix cov = dev * s.weights.asDiagonal() * dev.transpose();
        worst_mean = std::max(worst_mean, oracle::rel_err(mean, m));
        worst_cov = std::max(worst_cov, oracle::rel_err(cov, p));
      }
    }
    const WeightedPointSet u = unit_points(RuleSpec::ckf5(n));
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        const double expected = i == j ? 3.0 : 1.0;
        const Vector a = u.points.row(i).transpose(), b = u.points.row(j).transpose();
        const double got = (a.array().square() * b.array().square() * u.weights.array()).sum();
        worst_m4 = std::max(worst_m4, std::abs(got - expected));
      }
    }
  }
  o.expect(worst_sum < 1e-12, "weight sum err " + std::to_string(worst_sum));
  o.expect(worst_mean < 1e-10, "mean rel err " + std::to_string(worst_mean));
  o.expect(worst_cov < 1e-9, "scatter rel err " + std::to_string(worst_cov));
  o.expect(worst_m4 < 1e-8, "ckf5 4th moment err " + std::to_string(worst_m4));
  o.detail << (o.pass ? "" : "; ") << "max |sum-1|=" << worst_sum << " mean=" << worst_mean
           << " scatter=" << worst_cov << " m4=" << worst_m4;
  return o;
}

// 2. Closed-form stability values and brute-force agreement.
Outcome stability() {
  Outcome o;
  auto close = [&](const RuleSpec& r, double expected, const std::string& what) {
    const double s = stability_measure(r);
    o.expect(std::abs(s - expected) < 1e-12, what + " = " + std::to_string(s));
  };
  close(RuleSpec::ut(5, -2.0), 7.0 / 3.0, "UT(n=5,k=-2)");
  for (int k = 0; k <= 10; ++k) close(RuleSpec::ut(5, k), 1.0, "UT(n=5,k=" + std::to_string(k) + ")");
  close(RuleSpec::ckf5(4), 1.0, "CKF5(n=4)");
  close(RuleSpec::ckf5(5), 59.0 / 49.0, "CKF5(n=5)");
  double worst = 0.0;
  std::mt19937_64 rng(102);
  for (int n = 1; n <= 10; ++n) {
    std::vector<RuleSpec> rs{RuleSpec::ckf3(n), RuleSpec::ckf5(n)};
    for (int k = -2; k <= 10; ++k) {
      const RuleSpec r = RuleSpec::ut(n, k);
      if (n + r.lambda() > 0.0) rs.push_back(r);  // point generation needs a real spread
    }
    for (const RuleSpec& r : rs) {
      const WeightedPointSet s = generate(r, oracle::random_vector(rng, n), oracle::random_spd(rng, n));
      worst = std::max(worst, std::abs(s.weights.cwiseAbs().sum() - stability_measure(r)));
    }
  }
  o.expect(worst < 1e-12, "brute force mismatch " + std::to_string(worst));
  o.detail << (o.pass ? "" : "; ") << "max |closed - brute|=" << worst;
  return o;
}

// 3. UT(kappa = 0) and CKF3 track identically, isolated and transfer modes.
Outcome ut0_equals_ckf3() {
  Outcome o;
  ExperimentConfig cfg = reference_scenario(4.0);
  const RunData data = make_run_data(cfg, 0);
  const FilterModels src = tracking_models(cfg.model, cfg.source_sensor);
  const FilterModels prim = tracking_models(cfg.model, cfg.primary_sensor);
  const GaussianBelief init = posterior(data.init_mean, cfg.p0);
  const RuleSpec ut = RuleSpec::ut(5, 0.0), ckf = RuleSpec::ckf3(5);

  double worst = 0.0;
  auto compare = [&](const GaussianBelief& a, const GaussianBelief& b) {
    worst = std::max(worst, (a.mean - b.mean).norm() / (1.0 + b.mean.norm()));
    worst = std::max(worst, (a.cov - b.cov).norm() / (1.0 + b.cov.norm()));
  };
  IsolatedFilter iso_a(ut, prim, init), iso_b(ckf, prim, init);
  for (const MeasVec& z : data.z) compare(iso_a.step(z), iso_b.step(z));
  const PairRun pa = run_pair(SourceFilter(ut, src, init), PrimaryFilter(ut, prim, init),
                              data.z_star, data.z);
  const PairRun pb = run_pair(SourceFilter(ckf, src, init), PrimaryFilter(ckf, prim, init),
                              data.z_star, data.z);
  for (std::size_t k = 0; k < pa.primary.size(); ++k) compare(pa.primary[k], pb.primary[k]);
  o.expect(worst <= 1e-9, "difference above 1e-9");
  o.detail << (o.pass ? "" : "; ") << data.z.size() << " steps, max rel diff=" << worst;
  return o;
}

// 4. Linear-Gaussian oracle: isolated vs KF, transfer vs stacked KF.
Outcome linear_oracle() {
  Outcome o;
  std::mt19937_64 rng(104);
  const oracle::LinearModel lm = oracle::random_linear_model(rng, 4, 2);
  const Vector x0 = oracle::random_vector(rng, 4);
  const oracle::LinearData data = oracle::simulate(rng, lm, x0, 50);
  const oracle::Gaussian init{x0, Matrix::Identity(4, 4)};
  const auto kf = oracle::kalman(lm, init, lm.r_primary, data.z);
  const auto packets = oracle::source_packets(lm, init, data.z_star);
  const auto stacked = oracle::stacked_kalman(lm, init, packets, data.z);
  double worst_iso = 0.0, worst_tl = 0.0;
  for (const RuleSpec& r : {RuleSpec::ut(4, 2.0), RuleSpec::ckf3(4), RuleSpec::ckf5(4)}) {
    IsolatedFilter iso(r, lm.filter_models(lm.r_primary), posterior(x0, init.cov));
    for (std::size_t k = 0; k < data.z.size(); ++k) {
      const GaussianBelief& b = iso.step(data.z[k]);
      worst_iso = std::max({worst_iso, oracle::rel_err(b.mean, kf[k].mean),
                            oracle::rel_err(b.cov, kf[k].cov)});
    }
    const PairRun pr =
        run_pair(SourceFilter(r, lm.filter_models(lm.r_source), posterior(x0, init.cov)),
                 PrimaryFilter(r, lm.filter_models(lm.r_primary), posterior(x0, init.cov)),
                 data.z_star, data.z);
    for (std::size_t k = 0; k < stacked.size(); ++k) {
      worst_tl = std::max({worst_tl, oracle::rel_err(pr.primary[k].mean, stacked[k].mean),
                           oracle::rel_err(pr.primary[k].cov, stacked[k].cov)});
    }
  }
  o.expect(worst_iso < 1e-6, "isolated vs KF above 1e-6");
  o.expect(worst_tl < 1e-6, "transfer vs stacked KF above 1e-6");
  o.detail << (o.pass ? "" : "; ") << "50 steps, max rel err isolated=" << worst_iso
           << " transfer=" << worst_tl;
  return o;
}

McReport run(double iw, int mc, const std::vector<Variant>& variants) {
  ExperimentConfig cfg = reference_scenario(iw);
  cfg.mc_runs = mc;
  cfg.variants = variants;
  return run_mc(cfg);
}

double avg(const McReport& rep, const Variant& v) { return rep.find(v.name()).time_avg_rmse; }

const RuleSpec kUt2 = RuleSpec::ut(5, 2.0);
const RuleSpec kUtM2 = RuleSpec::ut(5, -2.0);
const RuleSpec kCkf3 = RuleSpec::ckf3(5);
const RuleSpec kCkf5 = RuleSpec::ckf5(5);

Variant iso(const RuleSpec& r) { return {r, FilterMode::Isolated}; }
Variant btlf(const RuleSpec& r) { return {r, FilterMode::Btlf}; }
Variant mvf(const RuleSpec& r) { return {r, FilterMode::Mvf}; }

// 5. Desk-scale time-averaged RMSE against the reference values.
Outcome desk_table(const McReport& iw4) {
  Outcome o;
  auto within = [&](double got, double ref, const std::string& what) {
    o.detail << (o.detail.tellp() > 0 ? " " : "") << what << "=" << fmt(got) << "(ref " << ref << ")";
    if (rel(got, ref) > 0.05) o.pass = false;
  };
  within(avg(iw4, iso(kUt2)), 17.9451, "ukf2.iso@4");
  within(avg(iw4, mvf(kUt2)), 15.4398, "ukf2.mvf@4");
  within(avg(iw4, btlf(kUt2)), 15.4299, "ukf2.btlf@4");
  const McReport iw8 = run(8.0, 1000, {iso(kCkf5), btlf(kCkf5)});
  within(avg(iw8, iso(kCkf5)), 24.7675, "ckf5.iso@8");
  within(avg(iw8, btlf(kCkf5)), 18.6989, "ckf5.btlf@8");
  const McReport iw1 = run(1.0, 1000, {iso(kUtM2), btlf(kUtM2)});
  const double a = avg(iw1, iso(kUtM2)), b = avg(iw1, btlf(kUtM2));
  o.detail << " ukf-2@1 iso=" << fmt(a) << " btlf=" << fmt(b) << " (btlf must be worse)";
  if (!(b > a)) o.pass = false;
  return o;
}

// 6. Single-step spot check at k = 62.
Outcome spot_k62(const McReport& iw4) {
  Outcome o;
  struct Ref {
    RuleSpec rule;
    double btlf, iso;
  };
  for (const Ref& r : {Ref{kCkf3, 16.68, 18.03}, Ref{kUt2, 14.39, 17.03}, Ref{kCkf5, 13.56, 16.87}}) {
    const double b = iw4.find(btlf(r.rule).name()).rmse_curve[61];
    const double i = iw4.find(iso(r.rule).name()).rmse_curve[61];
    o.detail << (o.detail.tellp() > 0 ? " " : "") << r.rule.label() << " btlf=" << fmt(b) << "(ref "
             << r.btlf << ") iso=" << fmt(i) << "(ref " << r.iso << ")";
    if (!(b < i) || rel(b, r.btlf) > 0.10 || rel(i, r.iso) > 0.10) o.pass = false;
  }
  return o;
}

// 7. Transfer gain grows with the primary noise; UKF beats CKF5 for large kappa.
Outcome trends() {
  Outcome o;
  for (const RuleSpec& r : {kUt2, kCkf3, kCkf5}) {
    double prev = -1e300;
    o.detail << (o.detail.tellp() > 0 ? " " : "") << r.label() << " gap:";
    for (double iw : {1.0, 2.0, 4.0, 8.0}) {
      const McReport rep = run(iw, 2000, {iso(r), btlf(r)});
      const double gap = avg(rep, iso(r)) - avg(rep, btlf(r));
      o.detail << " " << fmt(gap);
      if (gap < prev) o.pass = false;
      prev = gap;
    }
  }
  std::vector<Variant> sweep{btlf(kCkf5)};
  for (double k : {6.0, 8.0, 10.0}) sweep.push_back(btlf(RuleSpec::ut(5, k)));
  const McReport rep = run(2.0, 2000, sweep);
  const double c5 = avg(rep, sweep[0]);
  o.detail << "; iw=2 tl-ckf5=" << fmt(c5);
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    const double u = avg(rep, sweep[i]);
    o.detail << " " << sweep[i].rule.label() << "=" << fmt(u);
    if (!(u < c5)) o.pass = false;
  }
  return o;
}

// 8. Transfer vs fusion, kappa >= 1, large Monte Carlo.
Outcome btlf_vs_mvf() {
  Outcome o;
  int cells = 0, violations = 0;
  double worst = -1e300;
  for (double iw : {1.0, 4.0, 8.0}) {
    std::vector<Variant> vs;
    for (int k = 1; k <= 10; ++k) {
      vs.push_back(mvf(RuleSpec::ut(5, k)));
      vs.push_back(btlf(RuleSpec::ut(5, k)));
    }
    const McReport rep = run(iw, 10000, vs);
    for (int k = 1; k <= 10; ++k) {
      const RuleSpec r = RuleSpec::ut(5, k);
      const double d = avg(rep, btlf(r)) - avg(rep, mvf(r));
      ++cells;
      worst = std::max(worst, d);
      if (d > 0.0 || std::abs(d) >= 0.02) {
        ++violations;
        o.detail << (violations > 1 ? " " : "") << r.label() << "@" << iw
                 << " btlf-mvf=" << fmt(d);
      }
    }
  }
  o.pass = violations == 0;
  o.detail << (violations ? "; " : "") << violations << "/" << cells
           << " cells violate, max btlf-mvf=" << fmt(worst);
  return o;
}

// 9. Covariance repairs over 1e5 update cycles.
Outcome hygiene() {
  Outcome o;
  const std::vector<RuleSpec> nonneg{RuleSpec::ut(5, 0.0), kUt2, RuleSpec::ut(5, 10.0), kCkf3};
  std::vector<Variant> vs;
  for (const RuleSpec& r : nonneg) {
    vs.push_back(iso(r));
    vs.push_back(btlf(r));
  }
  vs.push_back(iso(kUtM2));
  vs.push_back(btlf(kUtM2));
  const McReport rep = run(4.0, 1000, vs);  // 1000 runs x 100 steps = 1e5 cycles each
  for (const VariantReport& v : rep.variants) {
    const bool negative = v.variant.rule == kUtM2;
    if (!negative && v.repairs != 0) o.pass = false;
    if (!negative && v.repairs == 0) continue;
    o.detail << (o.detail.tellp() > 0 ? " " : "") << v.variant.name() << " repairs=" << v.repairs
             << " diverged=" << v.diverged_runs;
  }
  o.detail << "; nonnegative-weight variants: " << (o.pass ? "0 repairs" : "repairs found");
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 10. Two identical table2 invocations give byte-identical tables.
Outcome determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "btltrack_acceptance";
  fs::remove_all(root);
  std::ostringstream out, err;
  for (const char* sub : {"a", "b"}) {
    const int code = run_cli({"table2", "--mc", "100", "--seed", "42", "--out", (root / sub).string()},
                             out, err);
    o.expect(code == kExitOk || code == kExitDivergence, "exit code " + std::to_string(code));
  }
  for (const char* file : {"table2.tsv", "table2_curves.tsv", "table2_wide.txt"}) {
    const std::string a = slurp(root / "a" / file), b = slurp(root / "b" / file);
    o.expect(!a.empty() && a == b, std::string(file) + " differs");
  }
  if (o.pass) o.detail << "table2.tsv, table2_curves.tsv, table2_wide.txt identical";
  fs::remove_all(root);
  return o;
}

}  // namespace

int main() {
  using Clock = std::chrono::steady_clock;
  int failed = 0;
  auto report = [&](int id, const char* title, const std::function<Outcome()>& fn) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::printf("criterion %2d: %s  %s [%.1fs] %s\n", id, o.pass ? "PASS" : "FAIL", title, secs,
                o.detail.str().c_str());
    std::fflush(stdout);
  };

  report(1, "rule correctness", rule_correctness);
  report(2, "stability measure", stability);
  report(3, "UKF(kappa=0) == CKF3", ut0_equals_ckf3);
  report(4, "linear-Gaussian oracle", linear_oracle);
  McReport iw4;
  report(5, "desk-scale time-averaged RMSE", [&] {
    iw4 = run(4.0, 1000,
              {iso(kUt2), mvf(kUt2), btlf(kUt2), iso(kCkf3), btlf(kCkf3), iso(kCkf5), btlf(kCkf5)});
    return desk_table(iw4);
  });
  report(6, "RMSE at k=62", [&] { return spot_k62(iw4); });
  report(7, "trend properties", trends);
  report(8, "BTLF <= MVF at MC=10000", btlf_vs_mvf);
  report(9, "numerical hygiene", hygiene);
  report(10, "determinism", determinism);
  std::printf("%d of 10 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
