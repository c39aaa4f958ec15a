#pragma once

#include "ssm/gaussian.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ssm {

/// System matrices for one step of
///   x_t = F x_{t-1} + B u_t + c_t + w_t,   w_t ~ N(0, Q)
///   z_t = H x_t + d_t + v_t,               v_t ~ N(0, R)
struct SystemMatrices {
  Matrix f;
  Matrix b;
  Matrix h;
  Matrix q;
  Matrix r;
  Vector c;
  Vector d;
};

/// State offset that depends on the previous step's Kalman gain:
///   c_t = c_base + scale .* (level - K_{t-1})
/// with K_{t-1} the n x 1 gain of a scalar measurement (zero at t = 1).
struct GainFeedback {
  Vector scale;
  Vector level;
};

/// Linear-Gaussian state-space model. Steps are 1-based; `init` is the prior
/// on x_1, so the first filter step updates without a prediction.
struct LgssmSpec {
  SystemMatrices base;
  /// Optional per-step override; when empty every step uses `base`.
  std::function<SystemMatrices(std::size_t t)> time_varying;
  std::optional<GainFeedback> gain_feedback;
  Gaussian init;
  /// Assembly diagnostics (clamped noise terms and the like).
  std::vector<std::string> notes;

  Eigen::Index state_dim() const { return base.f.rows(); }
  Eigen::Index obs_dim() const { return base.h.rows(); }
  Eigen::Index control_dim() const { return base.b.cols(); }

  /// Matrices for step t. The offset c excludes any gain-feedback term.
  SystemMatrices at(std::size_t t) const;

  /// c_t including the gain-feedback term. `prev_gain` may be empty.
  Vector state_offset(std::size_t t, const Matrix& prev_gain) const;

  /// Throws InvalidModel if dimensions do not conform or Q/R are not PSD.
  void validate() const;
};

/// Default control input: u_t = 1 in every coordinate.
Vector unit_control(const LgssmSpec& spec);

/// Table-of-models parameter vector.
struct ModelParams {
  int model_id = 1;
  std::vector<double> p;
  double dt = 1.0;
};

/// Number of p_i a model uses: 5, 6, 11, 15 for models 1..4.
std::size_t model_arity(int model_id);

/// Smallest measurement variance build_model will emit.
inline constexpr double kMinMeasurementVariance = 1e-8;

/// Assembles one of the four model specifications. d_t = 0, u_t = 1, B = 0.
/// Q is clamped to its PSD part and R floored at kMinMeasurementVariance;
/// both events are recorded in `notes`. The prior mean is zero.
LgssmSpec build_model(const ModelParams& params);

/// Prior mean placed on the minimum-norm solution of H x = z1.
LgssmSpec anchor_initial_state(LgssmSpec spec, const Vector& z1);

/// Gains K_1..K_T of the covariance recursion (data independent).
std::vector<Matrix> gain_sequence(const LgssmSpec& spec, std::size_t horizon);

/// Replaces gain feedback by the explicit offsets it produces over `horizon`
/// steps, leaving an ordinary time-varying model.
LgssmSpec resolve_gain_feedback(const LgssmSpec& spec, std::size_t horizon);

/// E[x_t] given x_1 (F products applied to x1 plus propagated B u + c).
Vector unconditional_mean(const LgssmSpec& spec, const Vector& x1, std::size_t t);

/// F_t P F_t^T + Q_t, symmetrized.
Matrix lyapunov_step(const LgssmSpec& spec, const Matrix& p_prev, std::size_t t);

/// Cov(x_{t+1}, x_t) = F_{t+1} P_t.
Matrix neighbor_cov(const LgssmSpec& spec, const Matrix& p_t, std::size_t t);

/// Unconditional marginals of x_1..x_T started from `init`.
std::vector<Gaussian> unconditional_moments(const LgssmSpec& spec, std::size_t horizon);

struct Trajectory {
  std::vector<Vector> states;
  std::vector<Vector> observations;
};

/// Draws one path of length `horizon`; deterministic for a given seed.
Trajectory simulate(const LgssmSpec& spec, std::size_t horizon, std::uint64_t seed);

}  // namespace ssm
