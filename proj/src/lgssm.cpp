#include "ssm/lgssm.hpp"

#include "ssm/error.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace ssm {

SystemMatrices LgssmSpec::at(std::size_t t) const {
  return time_varying ? time_varying(t) : base;
}

Vector LgssmSpec::state_offset(std::size_t t, const Matrix& prev_gain) const {
  Vector c = at(t).c;
  if (gain_feedback) {
    Vector k = Vector::Zero(c.size());
    if (prev_gain.size() > 0) k = prev_gain.col(0);
    c += gain_feedback->scale.cwiseProduct(gain_feedback->level - k);
  }
  return c;
}

void LgssmSpec::validate() const {
  const auto n = state_dim();
  const auto k = obs_dim();
  const auto& m = base;
  auto fail = [](const std::string& what) { throw InvalidModel("lgssm: " + what); };
  if (m.f.rows() != n || m.f.cols() != n) fail("F must be square");
  if (m.h.cols() != n) fail("H columns must match the state dimension");
  if (m.b.rows() != n) fail("B rows must match the state dimension");
  if (m.q.rows() != n || m.q.cols() != n) fail("Q must be n x n");
  if (m.r.rows() != k || m.r.cols() != k) fail("R must be k x k");
  if (m.c.size() != n) fail("c must have the state dimension");
  if (m.d.size() != k) fail("d must have the measurement dimension");
  if (init.mean.size() != n || init.cov.rows() != n) fail("prior must have the state dimension");
  if (!is_psd(m.q)) fail("Q is not positive semi-definite");
  if (!is_psd(m.r)) fail("R is not positive semi-definite");
  if (!is_psd(init.cov)) fail("prior covariance is not positive semi-definite");
  if (gain_feedback && (gain_feedback->scale.size() != n || gain_feedback->level.size() != n)) {
    fail("gain feedback must have the state dimension");
  }
}

Vector unit_control(const LgssmSpec& spec) { return Vector::Ones(spec.control_dim()); }

std::size_t model_arity(int model_id) {
  switch (model_id) {
    case 1: return 5;
    case 2: return 6;
    case 3: return 11;
    case 4: return 15;
    default: throw InvalidModel("unknown model id " + std::to_string(model_id));
  }
}

namespace {

Matrix psd_part(const Matrix& m, bool& clamped) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  Vector ev = es.eigenvalues();
  clamped = ev.minCoeff() < 0.0;
  if (!clamped) return symmetrize(m);
  ev = ev.cwiseMax(0.0);
  return symmetrize(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

LgssmSpec build_model(const ModelParams& params) {
  const std::size_t arity = model_arity(params.model_id);
  if (params.p.size() != arity) {
    std::ostringstream os;
    os << "model " << params.model_id << " takes " << arity << " parameters, got "
       << params.p.size();
    throw ParamArity(os.str());
  }
  for (double v : params.p) {
    if (!std::isfinite(v)) throw InvalidModel("non-finite model parameter");
  }
  if (!(params.dt > 0.0) || !std::isfinite(params.dt)) throw InvalidModel("dt must be positive");

  // p is 1-based in the model table.
  auto p = [&](std::size_t i) { return params.p[i - 1]; };

  LgssmSpec spec;
  SystemMatrices& m = spec.base;
  m.f.resize(2, 2);
  m.h.resize(1, 2);
  m.q.resize(2, 2);
  m.r.resize(1, 1);
  Matrix p0 = Matrix::Zero(2, 2);
  double r = 0.0;

  if (params.model_id <= 2) {
    m.f << 1.0, params.dt, 0.0, 1.0;
    m.h << 1.0, 0.0;
    m.q << p(1) * p(1), p(1) * p(2), p(1) * p(2), p(3) * p(3);
    r = p(4);
    p0(0, 0) = p(5);
    p0(1, 1) = params.model_id == 1 ? p(5) : p(6);
  } else {
    m.f << p(1), p(2), 0.0, p(3);
    m.h << p(4), p(5);
    m.q << p(6) * p(6), p(6) * p(7), p(7) * p(6), p(8) * p(8);
    r = p(9);
    p0(0, 0) = p(10);
    p0(1, 1) = p(11);
  }
  m.b = Matrix::Zero(2, 1);
  m.c = Vector::Zero(2);
  m.d = Vector::Zero(1);

  bool clamped = false;
  m.q = psd_part(m.q, clamped);
  if (clamped) spec.notes.emplace_back("Q was indefinite; negative eigenvalues clamped to 0");
  if (r < kMinMeasurementVariance) {
    spec.notes.emplace_back("R floored at the minimum measurement variance");
    r = kMinMeasurementVariance;
  }
  m.r(0, 0) = r;
  if (p0.diagonal().minCoeff() < 0.0) {
    spec.notes.emplace_back("negative prior variances clamped to 0");
    p0 = p0.cwiseMax(0.0);
  }
  spec.init = Gaussian(Vector::Zero(2), p0);

  if (params.model_id == 4) {
    GainFeedback fb;
    fb.scale = Vector(2);
    fb.level = Vector(2);
    fb.scale << p(12), p(14);
    fb.level << p(13), p(15);
    spec.gain_feedback = fb;
  }
  return spec;
}

LgssmSpec anchor_initial_state(LgssmSpec spec, const Vector& z1) {
  const Matrix& h = spec.at(1).h;
  const Vector target = z1 - spec.at(1).d;
  spec.init.mean = h.completeOrthogonalDecomposition().solve(target);
  return spec;
}

std::vector<Matrix> gain_sequence(const LgssmSpec& spec, std::size_t horizon) {
  std::vector<Matrix> gains;
  gains.reserve(horizon);
  Matrix p = spec.init.cov;
  for (std::size_t t = 1; t <= horizon; ++t) {
    const SystemMatrices m = spec.at(t);
    if (t > 1) p = symmetrize(m.f * p * m.f.transpose() + m.q);
    const Matrix s = symmetrize(m.h * p * m.h.transpose() + m.r);
    Matrix s_inv;
    try {
      s_inv = invert_symmetric(s, "innovation covariance");
    } catch (const SingularMatrix&) {
      throw SingularInnovation("singular innovation covariance", t);
    }
    const Matrix k = p * m.h.transpose() * s_inv;
    const Matrix a = Matrix::Identity(p.rows(), p.cols()) - k * m.h;
    p = symmetrize(a * p * a.transpose() + k * m.r * k.transpose());
    gains.push_back(k);
  }
  return gains;
}

LgssmSpec resolve_gain_feedback(const LgssmSpec& spec, std::size_t horizon) {
  if (!spec.gain_feedback) return spec;
  const auto gains = gain_sequence(spec, horizon);
  std::vector<Vector> offsets(horizon + 1);
  for (std::size_t t = 1; t <= horizon; ++t) {
    offsets[t] = spec.state_offset(t, t > 1 ? gains[t - 2] : Matrix());
  }
  LgssmSpec out = spec;
  out.gain_feedback.reset();
  auto inner = spec.time_varying;
  auto base = spec.base;
  out.time_varying = [inner, base, offsets](std::size_t t) {
    SystemMatrices m = inner ? inner(t) : base;
    if (t < offsets.size()) m.c = offsets[t];
    return m;
  };
  return out;
}

Vector unconditional_mean(const LgssmSpec& spec, const Vector& x1, std::size_t t) {
  const LgssmSpec resolved = resolve_gain_feedback(spec, t);
  const Vector u = unit_control(spec);
  Vector x = x1;
  for (std::size_t k = 2; k <= t; ++k) {
    const SystemMatrices m = resolved.at(k);
    x = m.f * x + m.b * u + m.c;
  }
  return x;
}

Matrix lyapunov_step(const LgssmSpec& spec, const Matrix& p_prev, std::size_t t) {
  const SystemMatrices m = spec.at(t);
  return symmetrize(m.f * p_prev * m.f.transpose() + m.q);
}

Matrix neighbor_cov(const LgssmSpec& spec, const Matrix& p_t, std::size_t t) {
  return spec.at(t + 1).f * p_t;
}

std::vector<Gaussian> unconditional_moments(const LgssmSpec& spec, std::size_t horizon) {
  const LgssmSpec resolved = resolve_gain_feedback(spec, horizon);
  const Vector u = unit_control(spec);
  std::vector<Gaussian> out;
  out.reserve(horizon);
  if (horizon == 0) return out;
  out.push_back(spec.init);
  for (std::size_t t = 2; t <= horizon; ++t) {
    const SystemMatrices m = resolved.at(t);
    const Gaussian& prev = out.back();
    out.emplace_back(m.f * prev.mean + m.b * u + m.c, lyapunov_step(resolved, prev.cov, t));
  }
  return out;
}

Trajectory simulate(const LgssmSpec& spec, std::size_t horizon, std::uint64_t seed) {
  const LgssmSpec resolved = resolve_gain_feedback(spec, horizon);
  const Vector u = unit_control(spec);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](Eigen::Index n) {
    Vector e(n);
    for (Eigen::Index i = 0; i < n; ++i) e(i) = normal(rng);
    return e;
  };

  Trajectory traj;
  traj.states.reserve(horizon);
  traj.observations.reserve(horizon);
  const Eigen::Index n = spec.state_dim();
  const Eigen::Index k = spec.obs_dim();

  Vector x = spec.init.mean + psd_sqrt(spec.init.cov) * draw(n);
  for (std::size_t t = 1; t <= horizon; ++t) {
    const SystemMatrices m = resolved.at(t);
    if (t > 1) x = m.f * x + m.b * u + m.c + psd_sqrt(m.q) * draw(n);
    traj.states.push_back(x);
    traj.observations.push_back(m.h * x + m.d + psd_sqrt(m.r) * draw(k));
  }
  return traj;
}

}  // namespace ssm
