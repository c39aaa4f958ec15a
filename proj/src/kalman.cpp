#include "ssm/kalman.hpp"

#include "ssm/error.hpp"

#include <cmath>
#include <numbers>

namespace ssm {

Gaussian predict(const Gaussian& prior, const LgssmSpec& spec, const Vector& u, std::size_t t,
                 const Matrix& prev_gain) {
  const SystemMatrices m = spec.at(t);
  Vector mean = m.f * prior.mean + spec.state_offset(t, prev_gain);
  if (m.b.cols() > 0) mean += m.b * u;
  return Gaussian(std::move(mean), m.f * prior.cov * m.f.transpose() + m.q);
}

Matrix joseph_covariance(const Matrix& p_pred, const Matrix& gain, const Matrix& h,
                         const Matrix& r) {
  const Matrix a = Matrix::Identity(p_pred.rows(), p_pred.cols()) - gain * h;
  return symmetrize(a * p_pred * a.transpose() + gain * r * gain.transpose());
}

Matrix reduced_covariance(const Matrix& p_pred, const Matrix& gain, const Matrix& h) {
  return symmetrize((Matrix::Identity(p_pred.rows(), p_pred.cols()) - gain * h) * p_pred);
}

FilterStep update(const Gaussian& pred, const Vector& z, const LgssmSpec& spec, std::size_t t,
                  CovarianceForm form) {
  const SystemMatrices m = spec.at(t);
  FilterStep step;
  step.x_pred = pred.mean;
  step.p_pred = pred.cov;
  step.innovation = z - (m.h * pred.mean + m.d);
  step.s = symmetrize(m.h * pred.cov * m.h.transpose() + m.r);

  Eigen::LDLT<Matrix> ldlt(step.s);
  const Vector d = ldlt.vectorD();
  const double dmax = d.size() > 0 ? d.cwiseAbs().maxCoeff() : 0.0;
  if (ldlt.info() != Eigen::Success || !step.s.allFinite() || !(dmax > 0.0) ||
      d.minCoeff() <= kSingularPivot * dmax) {
    throw SingularInnovation("singular innovation covariance", t);
  }

  // K = P H^T S^-1, solved as S K^T = H P.
  step.gain = ldlt.solve(m.h * pred.cov).transpose();
  step.x_post = pred.mean + step.gain * step.innovation;
  step.p_post = form == CovarianceForm::joseph
                    ? joseph_covariance(pred.cov, step.gain, m.h, m.r)
                    : reduced_covariance(pred.cov, step.gain, m.h);
  step.post_fit_residual = z - (m.h * step.x_post + m.d);

  const double k = static_cast<double>(z.size());
  const double mahalanobis = step.innovation.dot(ldlt.solve(step.innovation));
  const double log_det = d.array().log().sum();
  step.loglik_increment = -0.5 * (k * std::log(2.0 * std::numbers::pi) + log_det + mahalanobis);
  return step;
}

std::array<Matrix, 4> gain_forms(const Matrix& p_pred, const Matrix& p_post,
                                 const LgssmSpec& spec, std::size_t t) {
  const SystemMatrices m = spec.at(t);
  const Matrix ht = m.h.transpose();
  const Matrix s_inv = invert_symmetric(m.h * p_pred * ht + m.r, "innovation covariance");
  const Matrix r_inv = invert_symmetric(m.r, "measurement noise");
  const Matrix p_inv = invert_symmetric(p_pred, "predicted covariance");

  std::array<Matrix, 4> out;
  out[0] = p_pred * ht * s_inv;
  out[1] = invert_symmetric(p_inv + ht * r_inv * m.h, "P^-1 + H^T R^-1 H") * ht * r_inv;
  out[2] = (p_pred - p_pred * ht * s_inv * m.h * p_pred) * ht * r_inv;
  out[3] = p_post * ht * r_inv;
  return out;
}

FilterResult filter(const LgssmSpec& spec, std::span<const Vector> observations,
                    std::span<const Vector> controls, CovarianceForm form) {
  if (observations.empty()) throw Error("filter: no observations");
  if (!controls.empty() && controls.size() != observations.size()) {
    throw Error("filter: controls and observations differ in length");
  }
  const Vector default_u = unit_control(spec);

  FilterResult result;
  result.steps.reserve(observations.size());
  Gaussian belief = spec.init;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const std::size_t t = i + 1;
    if (t > 1) {
      const Vector& u = controls.empty() ? default_u : controls[i];
      belief = predict(belief, spec, u, t, result.steps.back().gain);
    }
    FilterStep step = update(belief, observations[i], spec, t, form);
    belief = Gaussian(step.x_post, step.p_post);
    result.total_loglik += step.loglik_increment;
    result.steps.push_back(std::move(step));
  }
  return result;
}

FilterResult filter(const LgssmSpec& spec, std::span<const double> observations,
                    CovarianceForm form) {
  std::vector<Vector> z;
  z.reserve(observations.size());
  for (double v : observations) z.push_back(Vector::Constant(1, v));
  return filter(spec, z, {}, form);
}

}  // namespace ssm
