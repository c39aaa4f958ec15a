#pragma once

#include "ssm/gaussian.hpp"
#include "ssm/lgssm.hpp"

#include <array>
#include <span>
#include <vector>

namespace ssm {

enum class CovarianceForm { joseph, reduced };

/// One predict/update cycle of the moment-form filter.
struct FilterStep {
  Vector x_pred;
  Matrix p_pred;
  Vector x_post;
  Matrix p_post;
  Vector innovation;         // z - (H x_pred + d)
  Matrix s;                  // H P_pred H^T + R
  Matrix gain;               // P_pred H^T S^-1
  Vector post_fit_residual;  // z - (H x_post + d)
  double loglik_increment = 0.0;
};

struct FilterResult {
  std::vector<FilterStep> steps;
  double total_loglik = 0.0;
};

/// x_pred = F x + B u + c_t, P_pred = F P F^T + Q. `prev_gain` feeds a
/// gain-dependent offset and may be empty.
Gaussian predict(const Gaussian& prior, const LgssmSpec& spec, const Vector& u, std::size_t t,
                 const Matrix& prev_gain = Matrix());

/// Measurement update with the optimal gain. Throws SingularInnovation.
FilterStep update(const Gaussian& pred, const Vector& z, const LgssmSpec& spec, std::size_t t,
                  CovarianceForm form = CovarianceForm::joseph);

/// (I - K H) P (I - K H)^T + K R K^T; valid for any gain K.
Matrix joseph_covariance(const Matrix& p_pred, const Matrix& gain, const Matrix& h,
                         const Matrix& r);

/// (I - K H) P; equals the Joseph form only for the optimal gain.
Matrix reduced_covariance(const Matrix& p_pred, const Matrix& gain, const Matrix& h);

/// The four algebraically equal gain expressions:
///   [0] P H^T (H P H^T + R)^-1
///   [1] (P^-1 + H^T R^-1 H)^-1 H^T R^-1
///   [2] (P - P H^T (H P H^T + R)^-1 H P) H^T R^-1
///   [3] P_post H^T R^-1
std::array<Matrix, 4> gain_forms(const Matrix& p_pred, const Matrix& p_post,
                                 const LgssmSpec& spec, std::size_t t);

/// Runs the recursion from spec.init (the prior on x_1). `controls` may be
/// empty (u_t = 1) or match `observations` in length.
FilterResult filter(const LgssmSpec& spec, std::span<const Vector> observations,
                    std::span<const Vector> controls = {},
                    CovarianceForm form = CovarianceForm::joseph);

/// Convenience overload for scalar observations.
FilterResult filter(const LgssmSpec& spec, std::span<const double> observations,
                    CovarianceForm form = CovarianceForm::joseph);

}  // namespace ssm
