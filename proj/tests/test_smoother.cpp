#include "oracle/joint_oracle.hpp"
#include "ssm/error.hpp"
#include "ssm/smoother.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace ssm;

namespace {

LgssmSpec scalar_stationary(double f, double q, double r) {
  LgssmSpec s;
  s.base = {Matrix::Constant(1, 1, f), Matrix::Zero(1, 0), Matrix::Constant(1, 1, 1.0),
            Matrix::Constant(1, 1, q), Matrix::Constant(1, 1, r), Vector::Zero(1), Vector::Zero(1)};
  s.init = Gaussian(Vector::Zero(1), Matrix::Constant(1, 1, q / (1.0 - f * f)));
  return s;
}

}  // namespace

TEST_CASE("RTS smoother matches the stacked joint oracle") {
  std::mt19937_64 rng(55);
  for (int model = 1; model <= 4; ++model) {
    for (int rep = 0; rep < 8; ++rep) {
      const LgssmSpec s = build_model(support::random_table_params(model, rng));
      const std::size_t T = 2 + rep % 4;
      const Trajectory traj = simulate(s, T, 10 + rep);
      const auto smooth = rts_smooth(filter(s, traj.observations), s);
      const auto joint = oracle::stack(s, T);
      for (std::size_t t = 1; t <= T; ++t) {
        const Gaussian ref = oracle::state_given(joint, t, T, traj.observations);
        CHECK((smooth[t - 1].x_smooth - ref.mean).norm() < 1e-8 * std::max(1.0, ref.mean.norm()));
        CHECK((smooth[t - 1].p_smooth - ref.cov).norm() < 1e-8 * std::max(1.0, ref.cov.norm()));
      }
      for (std::size_t t = 1; t < T; ++t) {
        const Matrix ref = oracle::lag_one_cov(joint, t, traj.observations);
        CHECK((smoothed_cross_cov(smooth, t) - ref).norm() < 1e-8 * std::max(1.0, ref.norm()));
      }
    }
  }
}

TEST_CASE("smoother gain from forward quantities") {
  std::mt19937_64 rng(3);
  const LgssmSpec s = support::random_spec(2, 1, rng);
  const FilterResult fwd = filter(s, simulate(s, 4, 1).observations);
  const auto smooth = rts_smooth(fwd, s);
  const Matrix l = fwd.steps[1].p_post * s.base.f.transpose() * fwd.steps[2].p_pred.inverse();
  CHECK((smoother_gain(fwd, s, 2) - l).norm() < 1e-10);
  CHECK((smooth[1].l_gain - l).norm() < 1e-10);
  CHECK((smooth.back().x_smooth - fwd.steps.back().x_post).norm() == 0.0);
}

TEST_CASE("inverse dynamics reproduce the reversed joint") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    const LgssmSpec s = support::random_spec(2, 1, rng);
    const Matrix p_prev = support::random_spd(2, rng);
    const Matrix p_now = s.base.f * p_prev * s.base.f.transpose() + s.base.q;
    const InverseDynamics inv = inverse_dynamics(s, p_now, 2);
    CHECK_FALSE(inv.perturbed);
    // Cov(x_{t-1}, x_t) = P_{t-1} F^T must equal F~ P_t.
    CHECK((inv.f_tilde * p_now - p_prev * s.base.f.transpose()).norm() < 1e-9);
    // Var(x_{t-1}) = F~ P_t F~^T + Q~
    const Matrix back = inv.f_tilde * p_now * inv.f_tilde.transpose() + inv.q_tilde;
    CHECK((back - p_prev).norm() < 1e-8);
    CHECK((inv.b_tilde + s.base.f.inverse() * s.base.b).norm() < 1e-12);
  }
}

TEST_CASE("near-singular transition is perturbed and flagged") {
  LgssmSpec s = scalar_stationary(0.5, 1.0, 1.0);
  s.base.f(0, 0) = 1e-12;
  const InverseDynamics inv = inverse_dynamics(s, Matrix::Constant(1, 1, 1.0), 2);
  CHECK(inv.perturbed);
}

TEST_CASE("two-filter fusion matches RTS on stationary scalar models") {
  std::mt19937_64 rng(19);
  for (int rep = 0; rep < 20; ++rep) {
    const double f = support::uniform(rng, -0.95, 0.95);
    const LgssmSpec s = scalar_stationary(f, support::uniform(rng, 0.2, 2.0), support::uniform(rng, 0.2, 2.0));
    const std::size_t T = 2 + static_cast<std::size_t>(rep) % 19;
    const Trajectory traj = simulate(s, T, rep);
    const auto rts = rts_smooth(filter(s, traj.observations), s);
    const auto fused = two_filter_smooth(s, traj.observations);
    for (std::size_t t = 0; t < T; ++t) {
      CHECK(std::abs(fused[t].mean(0) - rts[t].x_smooth(0)) < 1e-6);
      CHECK(std::abs(fused[t].cov(0, 0) - rts[t].p_smooth(0, 0)) < 1e-6);
    }
  }
}

TEST_CASE("two-filter fusion on a multivariate model with offsets") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 10; ++rep) {
    const LgssmSpec s = support::random_spec(2, 1, rng);
    const Trajectory traj = simulate(s, 6, rep);
    const auto rts = rts_smooth(filter(s, traj.observations), s);
    const auto fused = two_filter_smooth(s, traj.observations);
    for (std::size_t t = 0; t < 6; ++t) {
      CHECK((fused[t].mean - rts[t].x_smooth).norm() < 1e-6 * std::max(1.0, rts[t].x_smooth.norm()));
      CHECK((fused[t].cov - rts[t].p_smooth).norm() < 1e-6 * std::max(1.0, rts[t].p_smooth.norm()));
    }
  }
}

TEST_CASE("backward information terminal condition") {
  const LgssmSpec s = scalar_stationary(0.8, 1.0, 0.5);
  const Trajectory traj = simulate(s, 5, 4);
  const auto uncond = unconditional_moments(s, 5);
  const auto back = mbf_smooth(s, traj.observations, uncond);
  CHECK(back.back().lambda_pred(0, 0) == doctest::Approx(1.0 / uncond.back().cov(0, 0)));
  CHECK(back.back().lambda_post(0, 0) == doctest::Approx(1.0 / uncond.back().cov(0, 0) + 2.0));
}

TEST_CASE("fusion failure is reported with its step") {
  const LgssmSpec s = scalar_stationary(0.8, 1.0, 0.5);
  FilterStep fwd;
  fwd.x_post = Vector::Zero(1);
  fwd.p_post = Matrix::Constant(1, 1, 10.0);
  BackwardInfoStep back;
  back.eta_pred = Vector::Zero(1);
  back.lambda_pred = Matrix::Constant(1, 1, 0.0);
  const Gaussian prior(Vector::Zero(1), Matrix::Constant(1, 1, 1.0));
  try {
    fuse_posterior(fwd, back, prior, 4);
    FAIL("expected FusionFailure");
  } catch (const FusionFailure& e) {
    CHECK(e.step() == 4);
  }
}
