#include "btltrack/fusion_mvf.hpp"
#include "btltrack/harness.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <numbers>

using namespace btltrack;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }
Matrix scalar_cov(double v) { return Matrix::Constant(1, 1, v); }

double min_eig(const Matrix& m) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (m + m.transpose())).eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("fuse: scalar cases") {
  FusedMeasurement f = fuse(scalar(2), scalar_cov(4), scalar(0), scalar_cov(4));
  CHECK(f.z_tilde[0] == doctest::Approx(1.0));
  CHECK(f.q_tilde(0, 0) == doctest::Approx(2.0));

  f = fuse(scalar(1), scalar_cov(2), scalar(4), scalar_cov(1));
  CHECK(f.z_tilde[0] == doctest::Approx(3.0));
  CHECK(f.q_tilde(0, 0) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("fuse: uninformative source") {
  std::mt19937_64 rng(1);
  const Vector z = oracle::random_vector(rng, 2);
  const Matrix q = oracle::random_spd(rng, 2);
  const FusedMeasurement f = fuse(z, q, oracle::random_vector(rng, 2), 1e12 * oracle::random_spd(rng, 2));
  CHECK(oracle::rel_err(f.z_tilde, z) < 1e-9);
  CHECK(oracle::rel_err(f.q_tilde, q) < 1e-9);
}

TEST_CASE("fuse: singular sum and wrapped bearings") {
  try {
    fuse(scalar(0), scalar_cov(0), scalar(1), scalar_cov(0));
    FAIL("expected SingularSum");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularSum);
  }
  using std::numbers::pi;
  Vector z(2), eta(2);
  z << 100.0, pi - 0.01;
  eta << 100.0, -pi + 0.01;
  const FusedMeasurement f = fuse(z, Matrix::Identity(2, 2), eta, Matrix::Identity(2, 2), {1});
  CHECK(std::abs(std::abs(f.z_tilde[1]) - pi) < 1e-12);
}

TEST_CASE("property: fusion is symmetric and never loses information") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + trial % 4;
    const Vector a = oracle::random_vector(rng, n), b = oracle::random_vector(rng, n);
    const Matrix pa = oracle::random_spd(rng, n, 0.05), pb = oracle::random_spd(rng, n, 0.05);
    const FusedMeasurement ab = fuse(a, pa, b, pb);
    const FusedMeasurement ba = fuse(b, pb, a, pa);
    CHECK((ab.z_tilde - ba.z_tilde).norm() < 1e-12 * (1.0 + ab.z_tilde.norm()) * 10);
    CHECK((ab.q_tilde - ba.q_tilde).norm() < 1e-12 * (1.0 + ab.q_tilde.norm()) * 10);
    CHECK(min_eig(ab.q_tilde) > 0.0);
    CHECK(min_eig(pa - ab.q_tilde) >= -1e-12 * pa.norm());
    CHECK(min_eig(pb - ab.q_tilde) >= -1e-12 * pb.norm());
  }
}

TEST_CASE("MVF filter: first step is isolated, later steps track the fused vector") {
  const ExperimentConfig cfg = reference_scenario(4.0);
  const RunData data = make_run_data(cfg, 2);
  const FilterModels src_m = tracking_models(cfg.model, cfg.source_sensor);
  const FilterModels prim_m = tracking_models(cfg.model, cfg.primary_sensor);
  const GaussianBelief init{data.init_mean, cfg.p0, 0, Stage::Posterior};
  const RuleSpec r = RuleSpec::ut(5, 2.0);

  MvfFilter mvf(r, prim_m, init);
  IsolatedFilter iso(r, prim_m, init);
  IsolatedFilter shadow(r, prim_m, init);
  SourceFilter src(r, src_m, init);

  TransferPacket packet = src.step(data.z_star[0]).packet;
  CHECK(mvf.step(data.z[0]).mean == iso.step(data.z[0]).mean);
  shadow.step(data.z[0]);
  for (std::size_t k = 1; k < data.z.size(); ++k) {
    const FusedMeasurement f =
        fuse(data.z[k], prim_m.q_w, packet.eta_mean, packet.eta_cov, prim_m.meas.angular);
    const GaussianBelief& b = mvf.step(data.z[k], packet);
    const GaussianBelief& ref = shadow.step(f.z_tilde, f.q_tilde);
    CHECK(b.mean == ref.mean);
    CHECK(b.cov == ref.cov);
    packet = src.step(data.z_star[k]).packet;
  }
  MvfFilter keep_r(r, prim_m, init, MvfCovariance::Sensor);
  IsolatedFilter keep_shadow(r, prim_m, init);
  TransferPacket p2 = SourceFilter(r, src_m, init).step(data.z_star[0]).packet;
  keep_r.step(data.z[0]);
  keep_shadow.step(data.z[0]);
  const FusedMeasurement f1 =
      fuse(data.z[1], prim_m.q_w, p2.eta_mean, p2.eta_cov, prim_m.meas.angular);
  CHECK(keep_r.step(data.z[1], p2).mean == keep_shadow.step(f1.z_tilde, prim_m.q_w).mean);

  TransferPacket stale = packet;
  stale.valid_for += 5;
  stale.produced_at += 5;
  CHECK_THROWS_AS(mvf.deliver(stale), Error);
}

TEST_CASE("MVF filter matches a Kalman filter on the fused pseudo-measurement") {
  std::mt19937_64 rng(3);
  const oracle::LinearModel lm = oracle::random_linear_model(rng, 4, 2);
  const Vector x0 = oracle::random_vector(rng, 4);
  const oracle::LinearData data = oracle::simulate(rng, lm, x0, 40);
  const oracle::Gaussian init{x0, Matrix::Identity(4, 4)};
  const auto packets = oracle::source_packets(lm, init, data.z_star);

  // Closed form: z~ = z + R (R + S)^-1 (eta - z), Q~ = (R^-1 + S^-1)^-1.
  std::vector<oracle::Gaussian> ref;
  oracle::Gaussian g = init;
  for (std::size_t k = 0; k < data.z.size(); ++k) {
    const oracle::Gaussian pred = oracle::kf_predict(g, lm.a, lm.q);
    if (k == 0) {
      g = oracle::kf_update(pred, lm.h, lm.r_primary, data.z[k]);
    } else {
      const Matrix& s = packets[k - 1].eta_cov;
      const Matrix& r = lm.r_primary;
      const Vector zt = data.z[k] + r * (r + s).inverse() * (packets[k - 1].eta - data.z[k]);
      const Matrix qt = (r.inverse() + s.inverse()).inverse();
      g = oracle::kf_update(pred, lm.h, qt, zt);
    }
    ref.push_back(g);
  }

  for (const RuleSpec& r : {RuleSpec::ut(4, 2.0), RuleSpec::ckf3(4), RuleSpec::ckf5(4)}) {
    MvfFilter mvf(r, lm.filter_models(lm.r_primary), {x0, init.cov, 0, Stage::Posterior});
    for (std::size_t k = 0; k < data.z.size(); ++k) {
      const oracle::SourcePacket& sp = packets[k == 0 ? 0 : k - 1];
      const GaussianBelief& b =
          k == 0 ? mvf.step(data.z[k])
                 : mvf.step(data.z[k], TransferPacket{sp.eta, sp.eta_cov, static_cast<int>(k),
                                                      static_cast<int>(k) + 1});
      CHECK(oracle::rel_err(b.mean, ref[k].mean) < 1e-6);
      CHECK(oracle::rel_err(b.cov, ref[k].cov) < 1e-6);
    }
  }
}
