#include "ssm/smoother.hpp"

#include "ssm/error.hpp"

#include <cmath>

namespace ssm {

Matrix smoother_gain(const FilterResult& forward, const LgssmSpec& spec, std::size_t t) {
  const FilterStep& now = forward.steps[t - 1];
  const FilterStep& next = forward.steps[t];
  const Matrix f_next = spec.at(t + 1).f;
  Matrix p_next_inv;
  try {
    p_next_inv = invert_symmetric(next.p_pred, "predicted covariance");
  } catch (const SingularMatrix&) {
    throw StepError("rts_smooth: singular predicted covariance P_{t+1|t}", t);
  }
  return now.p_post * f_next.transpose() * p_next_inv;
}

std::vector<SmoothStep> rts_smooth(const FilterResult& forward, const LgssmSpec& spec) {
  const std::size_t horizon = forward.steps.size();
  std::vector<SmoothStep> out(horizon);
  if (horizon == 0) return out;
  out[horizon - 1] = {forward.steps.back().x_post, forward.steps.back().p_post, Matrix()};
  for (std::size_t t = horizon - 1; t >= 1; --t) {
    const FilterStep& now = forward.steps[t - 1];
    const FilterStep& next = forward.steps[t];
    const SmoothStep& later = out[t];
    SmoothStep s;
    s.l_gain = smoother_gain(forward, spec, t);
    s.x_smooth = now.x_post + s.l_gain * (later.x_smooth - next.x_pred);
    s.p_smooth =
        symmetrize(now.p_post + s.l_gain * (later.p_smooth - next.p_pred) * s.l_gain.transpose());
    out[t - 1] = std::move(s);
  }
  return out;
}

Matrix smoothed_cross_cov(const std::vector<SmoothStep>& smooth, std::size_t t) {
  return smooth[t].p_smooth * smooth[t - 1].l_gain.transpose();
}

namespace {

// Nudges `f` in place when it is numerically singular and returns its inverse.
Matrix checked_transition_inverse(Matrix& f, bool& perturbed) {
  perturbed = false;
  if (std::abs(f.determinant()) < kSingularTransitionDet) {
    f += kTransitionPerturbation * Matrix::Identity(f.rows(), f.cols());
    perturbed = true;
  }
  try {
    return invert(f, "F");
  } catch (const SingularMatrix&) {
    throw SingularTransition("transition matrix F is singular beyond the perturbation tolerance");
  }
}

}  // namespace

InverseDynamics inverse_dynamics(const LgssmSpec& spec, const Matrix& p_uncond, std::size_t t) {
  const SystemMatrices m = spec.at(t);
  InverseDynamics inv;
  Matrix f = m.f;
  const Matrix f_inv = checked_transition_inverse(f, inv.perturbed);
  const Matrix p_inv = invert_symmetric(p_uncond, "unconditional covariance");
  const Matrix eye = Matrix::Identity(f.rows(), f.cols());
  inv.f_tilde = f_inv * (eye - m.q * p_inv);
  inv.b_tilde = -f_inv * m.b;
  inv.q_tilde = symmetrize(f_inv * m.q * (eye - p_inv * m.q) * f_inv.transpose());
  return inv;
}

std::vector<BackwardInfoStep> mbf_smooth(const LgssmSpec& spec,
                                         std::span<const Vector> observations,
                                         const std::vector<Gaussian>& uncond) {
  const std::size_t horizon = observations.size();
  if (uncond.size() != horizon) {
    throw Error("mbf_smooth: need one unconditional marginal per observation");
  }
  const LgssmSpec model = resolve_gain_feedback(spec, horizon);
  std::vector<BackwardInfoStep> out(horizon);
  if (horizon == 0) return out;

  auto fold_in = [&](BackwardInfoStep& s, std::size_t t) {
    const SystemMatrices m = model.at(t);
    Matrix r_inv;
    try {
      r_inv = invert_symmetric(m.r, "R");
    } catch (const SingularMatrix&) {
      throw StepError("mbf_smooth: singular measurement noise R", t);
    }
    const Matrix ht_rinv = m.h.transpose() * r_inv;
    s.eta_post = s.eta_pred + ht_rinv * (observations[t - 1] - m.d);
    s.lambda_post = symmetrize(s.lambda_pred + ht_rinv * m.h);
  };
  auto inv_or_throw = [](const Matrix& a, const char* name, std::size_t t) {
    try {
      return invert_symmetric(a, name);
    } catch (const SingularMatrix&) {
      throw StepError(std::string("mbf_smooth: singular ") + name, t);
    }
  };

  {
    BackwardInfoStep& last = out[horizon - 1];
    last.lambda_pred = inv_or_throw(uncond.back().cov, "Sigma_T", horizon);
    last.eta_pred = last.lambda_pred * uncond.back().mean;
    fold_in(last, horizon);
  }

  for (std::size_t t = horizon - 1; t >= 1; --t) {
    // Reverse the transition x_t -> x_{t+1}.
    const SystemMatrices m = model.at(t + 1);
    const Gaussian& prior_now = uncond[t - 1];
    const Gaussian& prior_next = uncond[t];
    const BackwardInfoStep& later = out[t];

    bool perturbed = false;
    Matrix f_used = m.f;
    const Matrix f_inv = checked_transition_inverse(f_used, perturbed);
    const Matrix q_inv = inv_or_throw(m.q, "Q", t);
    const Matrix p_inv = inv_or_throw(prior_next.cov, "Sigma_{t+1}", t);
    const Matrix back_precision =
        f_used.transpose() * inv_or_throw(m.q - m.q * p_inv * m.q, "Q - Q Sigma^-1 Q", t) * f_used;

    BackwardInfoStep s;
    s.m_tilde = f_used.transpose() * q_inv *
                inv_or_throw(later.lambda_post + q_inv - p_inv, "Lambda + Q^-1 - Sigma^-1", t);
    s.lambda_pred = symmetrize(back_precision - s.m_tilde * q_inv * f_used);

    // Affine term of the reverse transition: mu_t - F~ mu_{t+1}. It reduces
    // to -F^-1 B u when the unconditional means vanish.
    const Matrix f_tilde = f_inv * (Matrix::Identity(f_used.rows(), f_used.cols()) - m.q * p_inv);
    const Vector back_offset = prior_now.mean - f_tilde * prior_next.mean;
    s.eta_pred = s.m_tilde * later.eta_post + s.lambda_pred * back_offset;
    fold_in(s, t);
    out[t - 1] = std::move(s);
  }
  return out;
}

std::vector<BackwardInfoStep> mbf_smooth(const LgssmSpec& spec,
                                         std::span<const Vector> observations) {
  return mbf_smooth(spec, observations, unconditional_moments(spec, observations.size()));
}

Gaussian fuse_posterior(const FilterStep& forward, const BackwardInfoStep& backward,
                        const Gaussian& prior, std::size_t t) {
  Matrix fwd_precision;
  Matrix prior_precision;
  try {
    fwd_precision = invert_symmetric(forward.p_post, "filtered covariance");
    prior_precision = invert_symmetric(prior.cov, "unconditional covariance");
  } catch (const SingularMatrix& e) {
    throw FusionFailure(std::string("fuse_posterior: ") + e.what(), t);
  }
  const Matrix lambda = symmetrize(fwd_precision + backward.lambda_pred - prior_precision);
  Eigen::LLT<Matrix> llt(lambda);
  if (llt.info() != Eigen::Success) {
    throw FusionFailure("fuse_posterior: fused precision is not positive definite", t);
  }
  const Vector eta =
      fwd_precision * forward.x_post + backward.eta_pred - prior_precision * prior.mean;
  const Matrix cov = llt.solve(Matrix::Identity(lambda.rows(), lambda.cols()));
  return Gaussian(cov * eta, cov);
}

std::vector<Gaussian> two_filter_smooth(const LgssmSpec& spec,
                                        std::span<const Vector> observations) {
  const FilterResult fwd = filter(spec, observations);
  const auto uncond = unconditional_moments(spec, observations.size());
  const auto back = mbf_smooth(spec, observations, uncond);
  std::vector<Gaussian> out;
  out.reserve(observations.size());
  for (std::size_t i = 0; i < observations.size(); ++i) {
    out.push_back(fuse_posterior(fwd.steps[i], back[i], uncond[i], i + 1));
  }
  return out;
}

}  // namespace ssm
