#pragma once

#include "ssm/gaussian.hpp"
#include "ssm/lgssm.hpp"

#include <span>
#include <vector>

namespace ssm {

/// One step of the information filter. `m` is Q^-1 F (Lambda + F^T Q^-1 F)^-1
/// (empty at t = 1, where the prediction is the prior).
struct InfoStep {
  Vector eta_pred;
  Matrix lambda_pred;
  Vector eta_post;
  Matrix lambda_post;
  Matrix m;
};

struct InfoPrediction {
  Vector eta;
  Matrix lambda;
  Matrix m;
};

enum class InfoPredictForm {
  precomputed,  // through the factor M_t
  direct,       // the expanded expressions without M_t
};

struct InfoFilterOptions {
  InfoPredictForm form = InfoPredictForm::precomputed;
  /// Added to Q as q_jitter * I before inversion. Zero rejects singular Q.
  double q_jitter = 0.0;
};

/// Canonical prediction from the previous posterior (eta, lambda). The state
/// offset c_t is added to B u. Throws SingularProcessNoise when Q is singular.
InfoPrediction info_predict(const CanonicalGaussian& prev, const LgssmSpec& spec, const Vector& u,
                            std::size_t t, const InfoFilterOptions& opts = {});

/// eta + H^T R^-1 (z - d), lambda + H^T R^-1 H.
CanonicalGaussian info_update(const CanonicalGaussian& pred, const Vector& z,
                              const LgssmSpec& spec, std::size_t t);

/// Full forward pass, initialized with the canonical form of spec.init.
std::vector<InfoStep> info_filter(const LgssmSpec& spec, std::span<const Vector> observations,
                                  std::span<const Vector> controls = {},
                                  const InfoFilterOptions& opts = {});

}  // namespace ssm
