#include "ssm/info_filter.hpp"

#include "ssm/error.hpp"

namespace ssm {

namespace {

Matrix process_precision(const Matrix& q, double jitter, std::size_t t) {
  Matrix qj = q;
  if (jitter > 0.0) qj += jitter * Matrix::Identity(q.rows(), q.cols());
  try {
    return invert_symmetric(qj, "Q");
  } catch (const SingularMatrix&) {
    throw SingularProcessNoise(
        "information filter needs a non-singular process noise Q (step " + std::to_string(t) +
        "); the model has a degenerate Q, enable q_jitter to regularize");
  }
}

Matrix measurement_precision(const Matrix& r, std::size_t t) {
  try {
    return invert_symmetric(r, "R");
  } catch (const SingularMatrix&) {
    throw SingularMeasurementNoise("singular measurement noise R at step " + std::to_string(t));
  }
}

}  // namespace

InfoPrediction info_predict(const CanonicalGaussian& prev, const LgssmSpec& spec, const Vector& u,
                            std::size_t t, const InfoFilterOptions& opts) {
  const SystemMatrices sm = spec.at(t);
  const Matrix q_inv = process_precision(sm.q, opts.q_jitter, t);
  const Matrix ft_qinv = sm.f.transpose() * q_inv;
  const Matrix inner =
      invert_symmetric(prev.lambda + ft_qinv * sm.f, "Lambda + F^T Q^-1 F");
  Vector drive = spec.state_offset(t, Matrix());
  if (sm.b.cols() > 0) drive += sm.b * u;

  InfoPrediction out;
  if (opts.form == InfoPredictForm::precomputed) {
    out.m = q_inv * sm.f * inner;
    out.lambda = symmetrize(q_inv - out.m * ft_qinv);
    out.eta = out.m * prev.eta + out.lambda * drive;
  } else {
    const Matrix qf_inner = q_inv * sm.f * inner;
    out.m = qf_inner;
    out.lambda = symmetrize(q_inv - q_inv * sm.f * inner * sm.f.transpose() * q_inv);
    out.eta = qf_inner * prev.eta +
              (q_inv - q_inv * sm.f * inner * sm.f.transpose() * q_inv) * drive;
  }
  return out;
}

CanonicalGaussian info_update(const CanonicalGaussian& pred, const Vector& z,
                              const LgssmSpec& spec, std::size_t t) {
  const SystemMatrices sm = spec.at(t);
  const Matrix ht_rinv = sm.h.transpose() * measurement_precision(sm.r, t);
  return CanonicalGaussian(pred.eta + ht_rinv * (z - sm.d), pred.lambda + ht_rinv * sm.h);
}

std::vector<InfoStep> info_filter(const LgssmSpec& spec, std::span<const Vector> observations,
                                  std::span<const Vector> controls,
                                  const InfoFilterOptions& opts) {
  if (!controls.empty() && controls.size() != observations.size()) {
    throw Error("info_filter: controls and observations differ in length");
  }
  // Gain-dependent offsets are data independent; fix them up front.
  const LgssmSpec model = resolve_gain_feedback(spec, observations.size());
  const Vector default_u = unit_control(model);

  std::vector<InfoStep> steps;
  steps.reserve(observations.size());
  CanonicalGaussian belief = to_canonical(model.init);
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const std::size_t t = i + 1;
    InfoStep step;
    if (t > 1) {
      const Vector& u = controls.empty() ? default_u : controls[i];
      InfoPrediction pred = info_predict(belief, model, u, t, opts);
      step.eta_pred = std::move(pred.eta);
      step.lambda_pred = std::move(pred.lambda);
      step.m = std::move(pred.m);
    } else {
      step.eta_pred = belief.eta;
      step.lambda_pred = belief.lambda;
    }
    belief = info_update(CanonicalGaussian(step.eta_pred, step.lambda_pred), observations[i],
                         model, t);
    step.eta_post = belief.eta;
    step.lambda_post = belief.lambda;
    steps.push_back(std::move(step));
  }
  return steps;
}

}  // namespace ssm
