#include "ssm/em.hpp"

#include "ssm/error.hpp"
#include "ssm/kalman.hpp"
#include "ssm/smoother.hpp"

#include <cmath>

namespace ssm {

LgssmSpec scalar_spec(const ScalarTheta& theta, const EmOptions& opts) {
  LgssmSpec spec;
  auto scalar = [](double v) { return Matrix::Constant(1, 1, v); };
  spec.base.f = scalar(theta.f);
  spec.base.b = Matrix::Zero(1, 0);
  spec.base.h = scalar(opts.h);
  spec.base.q = scalar(theta.q);
  spec.base.r = scalar(theta.r);
  spec.base.c = Vector::Constant(1, opts.c);
  spec.base.d = Vector::Constant(1, opts.d);
  spec.init = opts.prior;
  return spec;
}

namespace {

struct Posterior {
  std::vector<double> mean;
  std::vector<double> var;
  std::vector<double> lag_cov;  // Cov(x_{k+1}, x_k), size N-1
};

Posterior posterior_moments(const LgssmSpec& spec, const FilterResult& fwd, EStepSource source) {
  const std::size_t n = fwd.steps.size();
  Posterior post;
  post.mean.resize(n);
  post.var.resize(n);
  post.lag_cov.assign(n > 0 ? n - 1 : 0, 0.0);
  if (source == EStepSource::smoothed) {
    const auto smooth = rts_smooth(fwd, spec);
    for (std::size_t k = 0; k < n; ++k) {
      post.mean[k] = smooth[k].x_smooth(0);
      post.var[k] = smooth[k].p_smooth(0, 0);
    }
    for (std::size_t k = 0; k + 1 < n; ++k) post.lag_cov[k] = smoothed_cross_cov(smooth, k + 1)(0, 0);
  } else {
    // Filtered moments; the lag-one term uses Cov(x_{k+1}, x_k | z_1..z_{k+1}).
    for (std::size_t k = 0; k < n; ++k) {
      post.mean[k] = fwd.steps[k].x_post(0);
      post.var[k] = fwd.steps[k].p_post(0, 0);
    }
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const double f = spec.base.f(0, 0);
      const auto& next = fwd.steps[k + 1];
      const double pk = fwd.steps[k].p_post(0, 0);
      const double one_minus_kh = 1.0 - next.gain(0, 0) * spec.base.h(0, 0);
      post.lag_cov[k] = one_minus_kh * f * pk;
    }
  }
  return post;
}

}  // namespace

EmState em_fit(std::span<const double> data, const ScalarTheta& init, const EmOptions& opts) {
  if (data.size() < 2) throw Error("em_fit: need at least two observations");
  const std::size_t n = data.size();
  const double h = opts.h;
  const bool exact = opts.mstep == MStepForm::exact;

  EmState state;
  state.theta = init;
  for (std::size_t it = 0;; ++it) {
    const LgssmSpec spec = scalar_spec(state.theta, opts);
    const FilterResult fwd = filter(spec, data);
    const double ll = fwd.total_loglik;
    if (!state.loglik_history.empty()) {
      const double prev = state.loglik_history.back();
      if (ll < prev - opts.monotone_tolerance) state.monotone = false;
    }
    state.loglik_history.push_back(ll);
    state.theta_history.push_back(state.theta);
    if (state.loglik_history.size() > 1 &&
        std::abs(ll - state.loglik_history[state.loglik_history.size() - 2]) < opts.tol) {
      state.converged = true;
      break;
    }
    if (it >= opts.max_iter) break;

    const Posterior post = posterior_moments(spec, fwd, opts.source);
    const double use_var = exact ? 1.0 : 0.0;

    double sxx = 0.0;  // sum E[x_k^2], k < N
    double sx1x = 0.0; // sum E[x_{k+1} x_k] - c E[x_k]
    for (std::size_t k = 0; k + 1 < n; ++k) {
      sxx += post.mean[k] * post.mean[k] + use_var * post.var[k];
      sx1x += post.mean[k + 1] * post.mean[k] + use_var * post.lag_cov[k] - opts.c * post.mean[k];
    }
    ScalarTheta next = state.theta;
    if (sxx > 0.0) next.f = sx1x / sxx;

    double sw = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const double resid = post.mean[k + 1] - opts.c - next.f * post.mean[k];
      sw += resid * resid +
            use_var * (post.var[k + 1] - 2.0 * next.f * post.lag_cov[k] +
                       next.f * next.f * post.var[k]);
    }
    next.q = sw / static_cast<double>(n - 1);

    double sv = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double resid = data[k] - opts.d - h * post.mean[k];
      sv += resid * resid + use_var * h * h * post.var[k];
    }
    next.r = sv / static_cast<double>(n);

    if (!(next.q > opts.variance_floor)) {
      next.q = opts.variance_floor;
      state.degenerate = true;
    }
    if (!(next.r > opts.variance_floor)) {
      next.r = opts.variance_floor;
      state.degenerate = true;
    }
    state.theta = next;
    state.iteration = it + 1;
  }
  return state;
}

EmState em_fit(const LgssmSpec& spec, std::span<const Vector> observations, EmOptions opts) {
  if (spec.state_dim() != 1 || spec.obs_dim() != 1) {
    throw UnsupportedModel("em_fit supports scalar state and measurement only (got state dim " +
                           std::to_string(spec.state_dim()) + ", measurement dim " +
                           std::to_string(spec.obs_dim()) + ")");
  }
  if (spec.time_varying || spec.gain_feedback) {
    throw UnsupportedModel("em_fit supports time-invariant models only");
  }
  opts.h = spec.base.h(0, 0);
  opts.c = spec.base.c(0) + (spec.base.b.cols() > 0 ? spec.base.b.sum() : 0.0);
  opts.d = spec.base.d(0);
  opts.prior = spec.init;
  std::vector<double> z;
  z.reserve(observations.size());
  for (const auto& v : observations) z.push_back(v(0));
  return em_fit(z, ScalarTheta{spec.base.f(0, 0), spec.base.q(0, 0), spec.base.r(0, 0)}, opts);
}

}  // namespace ssm
