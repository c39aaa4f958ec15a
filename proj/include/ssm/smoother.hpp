#pragma once

#include "ssm/gaussian.hpp"
#include "ssm/kalman.hpp"
#include "ssm/lgssm.hpp"

#include <span>
#include <vector>

namespace ssm {

/// Smoothed marginal of x_t given z_1..z_T. `l_gain` is
/// P_{t|t} F_{t+1}^T P_{t+1|t}^-1 (empty at t = T).
struct SmoothStep {
  Vector x_smooth;
  Matrix p_smooth;
  Matrix l_gain;
};

/// Rauch-Tung-Striebel backward pass over a completed forward pass.
std::vector<SmoothStep> rts_smooth(const FilterResult& forward, const LgssmSpec& spec);

/// The RTS gain for step t (1-based, t < T), from forward quantities only.
Matrix smoother_gain(const FilterResult& forward, const LgssmSpec& spec, std::size_t t);

/// Cov(x_{t+1}, x_t | z_1..z_T) = P_{t+1|T} L_t^T, for 1 <= t < T.
Matrix smoothed_cross_cov(const std::vector<SmoothStep>& smooth, std::size_t t);

/// Reverse-time dynamics x_{t-1} = F~ x_t + B~ u + w~ for the transition that
/// ends at step t, given the unconditional covariance P_t.
struct InverseDynamics {
  Matrix f_tilde;   // F^-1 (I - Q P^-1)
  Matrix b_tilde;   // -F^-1 B
  Matrix q_tilde;   // F^-1 Q (I - P^-1 Q) F^-T
  bool perturbed = false;  // F was nudged by 1e-8 I before inversion
};

inline constexpr double kSingularTransitionDet = 1e-10;
inline constexpr double kTransitionPerturbation = 1e-8;

/// Inverse dynamics for the transition x_{t-1} -> x_t (uses F_t, Q_t, B_t).
/// A near-singular F (|det F| < 1e-10) is perturbed by 1e-8 I; if that is
/// still singular SingularTransition is thrown.
InverseDynamics inverse_dynamics(const LgssmSpec& spec, const Matrix& p_uncond, std::size_t t);

/// Backward information filter step at time t: the prediction from the
/// future (eta_pred, lambda_pred ~ x_t | z_{t+1..T}) and the same after
/// folding in z_t (eta_post, lambda_post ~ x_t | z_{t..T}).
struct BackwardInfoStep {
  Vector eta_pred;
  Matrix lambda_pred;
  Vector eta_post;
  Matrix lambda_post;
  Matrix m_tilde;  // empty at t = T
};

/// Modified Bryson-Frazier backward pass. `uncond` holds the unconditional
/// marginals N(mu_t, Sigma_t) of x_1..x_T; the pass starts at T from
/// lambda = Sigma_T^-1, eta = Sigma_T^-1 mu_T.
std::vector<BackwardInfoStep> mbf_smooth(const LgssmSpec& spec,
                                         std::span<const Vector> observations,
                                         const std::vector<Gaussian>& uncond);

std::vector<BackwardInfoStep> mbf_smooth(const LgssmSpec& spec,
                                         std::span<const Vector> observations);

/// Two-filter fusion of the forward filtered marginal with the backward
/// prediction, removing the prior N(mu_t, Sigma_t) counted by both passes.
/// Throws FusionFailure when the fused precision is not positive definite.
Gaussian fuse_posterior(const FilterStep& forward, const BackwardInfoStep& backward,
                        const Gaussian& prior, std::size_t t = 0);

/// filter + mbf_smooth + fuse_posterior over the whole sequence.
std::vector<Gaussian> two_filter_smooth(const LgssmSpec& spec,
                                        std::span<const Vector> observations);

}  // namespace ssm
