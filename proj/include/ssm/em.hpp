#pragma once

#include "ssm/gaussian.hpp"
#include "ssm/lgssm.hpp"

#include <span>
#include <vector>

namespace ssm {

/// Parameters of the scalar model
///   x_k = f x_{k-1} + c + w_k,  w_k ~ N(0, q)
///   z_k = h x_k + d + v_k,      v_k ~ N(0, r)
/// EM re-estimates f, q and r; h, c, d and the prior stay fixed.
struct ScalarTheta {
  double f = 1.0;
  double q = 1.0;
  double r = 1.0;
};

enum class EStepSource { smoothed, filtered };

enum class MStepForm {
  /// Maximizes the expected complete-data log-likelihood, using the posterior
  /// second moments (P_{k|N} and the lag-one covariance).
  exact,
  /// Plug-in form on point estimates only; F is the least-squares slope
  /// sum x_{k+1} x_k / sum x_k^2. Not guaranteed to be monotone.
  point_estimate,
};

struct EmOptions {
  std::size_t max_iter = 500;
  double tol = 1e-8;
  EStepSource source = EStepSource::smoothed;
  MStepForm mstep = MStepForm::exact;
  double h = 1.0;
  double c = 0.0;
  double d = 0.0;
  Gaussian prior = Gaussian(Vector::Zero(1), Matrix::Constant(1, 1, 10.0));
  double variance_floor = 1e-10;
  double monotone_tolerance = 1e-9;
};

struct EmState {
  ScalarTheta theta;
  std::vector<double> loglik_history;
  std::vector<ScalarTheta> theta_history;
  std::size_t iteration = 0;
  bool converged = false;
  /// Set when a variance estimate hit the floor (e.g. a constant series).
  bool degenerate = false;
  /// loglik_history non-decreasing within monotone_tolerance.
  bool monotone = true;
};

/// The scalar spec EM operates on.
LgssmSpec scalar_spec(const ScalarTheta& theta, const EmOptions& opts);

EmState em_fit(std::span<const double> data, const ScalarTheta& init, const EmOptions& opts = {});

/// Fits a 1-state, 1-measurement spec, starting from its F, Q, R. Throws
/// UnsupportedModel for any other shape.
EmState em_fit(const LgssmSpec& spec, std::span<const Vector> observations, EmOptions opts = {});

}  // namespace ssm
