#include "ssm/cmaes.hpp"

#include "ssm/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

namespace ssm {

double expected_norm(std::size_t n) {
  const double d = static_cast<double>(n);
  return std::sqrt(d) * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d));
}

CmaesConstants default_constants(std::size_t n, std::optional<std::size_t> lambda) {
  if (n < 1) throw Error("default_constants: dimension must be at least 1");
  const double d = static_cast<double>(n);
  CmaesConstants k;
  k.lambda = lambda ? *lambda : 4 + static_cast<std::size_t>(std::floor(3.0 * std::log(d)));
  if (k.lambda < 2) {
    throw InvalidPopulation("population size lambda must be at least 2 (got " +
                            std::to_string(k.lambda) + ")");
  }
  k.mu = k.lambda / 2;
  k.weights.resize(k.mu);
  for (std::size_t i = 0; i < k.mu; ++i) {
    k.weights[i] = std::log(static_cast<double>(k.mu) + 0.5) - std::log(static_cast<double>(i + 1));
  }
  const double total = std::accumulate(k.weights.begin(), k.weights.end(), 0.0);
  double sq = 0.0;
  for (double& w : k.weights) {
    w /= total;
    sq += w * w;
  }
  k.mu_w = 1.0 / sq;
  k.c_sigma = 3.0 / (d + 3.0);
  k.d_sigma = 1.0 + k.c_sigma;
  k.c_c = 4.0 / (d + 4.0);
  k.c_1 = 2.0 / ((d + 1.3) * (d + 1.3) + k.mu_w);
  k.c_mu = std::min(1.0 - k.c_1, k.mu_w / ((d + 2.0) * (d + 2.0) + k.mu_w));
  k.alpha = 1.5;
  k.chi_n = expected_norm(n);
  return k;
}

namespace {

// Refreshes basis/scale from c, flooring eigenvalues at 1e-14 trace.
bool refresh_eigen(CmaesState& s) {
  s.c = symmetrize(s.c);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s.c);
  Vector values = eig.eigenvalues();
  const double floor = 1e-14 * std::max(s.c.trace(), std::numeric_limits<double>::min());
  bool repaired = false;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!(values(i) >= floor)) {
      values(i) = floor;
      repaired = true;
    }
  }
  s.basis = eig.eigenvectors();
  s.scale = values.cwiseSqrt();
  if (repaired) s.c = symmetrize(s.basis * values.asDiagonal() * s.basis.transpose());
  return repaired;
}

}  // namespace

CmaesState make_state(const Vector& mean, double sigma, const CmaesConstants& constants) {
  if (!(sigma > 0.0)) throw Error("cmaes: initial sigma must be positive");
  const Eigen::Index n = mean.size();
  CmaesState s;
  s.m = mean;
  s.sigma = sigma;
  s.c = Matrix::Identity(n, n);
  s.p_sigma = Vector::Zero(n);
  s.p_c = Vector::Zero(n);
  s.constants = constants;
  s.basis = Matrix::Identity(n, n);
  s.scale = Vector::Ones(n);
  return s;
}

double csa_factor(const CmaesConstants& k, double p_sigma_norm) {
  return std::exp((k.c_sigma / k.d_sigma) * (p_sigma_norm / k.chi_n - 1.0));
}

bool cmaes_update(CmaesState& s, std::span<const Vector> sorted) {
  const CmaesConstants& k = s.constants;
  if (sorted.size() < k.mu) throw Error("cmaes_update: fewer samples than mu");
  const Eigen::Index n = s.m.size();
  const double dn = static_cast<double>(n);

  Vector m_new = Vector::Zero(n);
  for (std::size_t i = 0; i < k.mu; ++i) m_new += k.weights[i] * sorted[i];
  const Vector step = (m_new - s.m) / s.sigma;

  const Matrix c_inv_sqrt = s.basis * s.scale.cwiseInverse().asDiagonal() * s.basis.transpose();
  s.p_sigma = (1.0 - k.c_sigma) * s.p_sigma +
              std::sqrt(1.0 - (1.0 - k.c_sigma) * (1.0 - k.c_sigma)) * std::sqrt(k.mu_w) *
                  (c_inv_sqrt * step);
  const double ps_norm = s.p_sigma.norm();

  const double indicator = ps_norm <= k.alpha * std::sqrt(dn) ? 1.0 : 0.0;
  s.p_c = (1.0 - k.c_c) * s.p_c +
          indicator * std::sqrt(1.0 - (1.0 - k.c_c) * (1.0 - k.c_c)) * std::sqrt(k.mu_w) * step;
  const double c_s = (1.0 - indicator * indicator) * k.c_1 * k.c_c * (2.0 - k.c_c);

  Matrix rank_mu = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < k.mu; ++i) {
    const Vector y = (sorted[i] - s.m) / s.sigma;
    rank_mu += k.weights[i] * y * y.transpose();
  }
  s.c = (1.0 - k.c_1 - k.c_mu + c_s) * s.c + k.c_1 * s.p_c * s.p_c.transpose() + k.c_mu * rank_mu;

  s.sigma *= csa_factor(k, ps_norm);
  s.m = std::move(m_new);
  ++s.k;
  return refresh_eigen(s);
}

namespace {

Vector sample(const CmaesState& s, std::mt19937_64& rng, std::normal_distribution<double>& gauss) {
  Vector z(s.m.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = gauss(rng);
  return s.m + s.sigma * (s.basis * s.scale.cwiseProduct(z));
}

bool inside(const Vector& x, const Bounds& b) {
  return (x.array() >= b.lower.array()).all() && (x.array() <= b.upper.array()).all();
}

void evaluate(const Objective& obj, const std::vector<Vector>& xs, std::vector<double>& fs,
              std::size_t threads) {
  fs.assign(xs.size(), 0.0);
  if (threads <= 1 || xs.size() < 2) {
    for (std::size_t i = 0; i < xs.size(); ++i) fs[i] = obj.eval(xs[i]);
    return;
  }
  const std::size_t workers = std::min(threads, xs.size());
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < xs.size(); i += workers) fs[i] = obj.eval(xs[i]);
    });
  }
}

}  // namespace

CmaesResult cmaes_minimize(const Objective& obj, const Vector& init_mean, double init_sigma,
                           const CmaesOptions& opts) {
  if (obj.dim < 1 || static_cast<std::size_t>(init_mean.size()) != obj.dim) {
    throw Error("cmaes_minimize: initial mean does not match objective dimension");
  }
  if (!obj.eval) throw Error("cmaes_minimize: objective has no evaluation function");
  if (obj.bounds && (static_cast<std::size_t>(obj.bounds->lower.size()) != obj.dim ||
                     static_cast<std::size_t>(obj.bounds->upper.size()) != obj.dim)) {
    throw Error("cmaes_minimize: bounds do not match objective dimension");
  }

  CmaesState state = make_state(init_mean, init_sigma, default_constants(obj.dim, opts.lambda));
  const std::size_t lambda = state.constants.lambda;
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  CmaesResult res;
  res.best_f = std::numeric_limits<double>::infinity();
  res.best_x = init_mean;
  std::vector<Vector> xs(lambda);
  std::vector<double> fs;
  std::vector<std::size_t> order(lambda);
  std::vector<Vector> sorted(lambda);

  for (;;) {
    if (state.k >= opts.max_iter) {
      res.stop_reason = "max_iter";
      break;
    }
    if (opts.max_evals > 0 && res.evaluations + lambda > opts.max_evals) {
      res.stop_reason = "max_evals";
      break;
    }
    for (std::size_t i = 0; i < lambda; ++i) {
      Vector x = sample(state, rng, gauss);
      if (obj.bounds) {
        for (int tries = 1; tries < 100 && !inside(x, *obj.bounds); ++tries) {
          x = sample(state, rng, gauss);
        }
        x = x.cwiseMax(obj.bounds->lower).cwiseMin(obj.bounds->upper);
      }
      xs[i] = std::move(x);
    }
    evaluate(obj, xs, fs, opts.threads);
    res.evaluations += lambda;
    for (double& f : fs) {
      if (!std::isfinite(f)) {
        f = std::numeric_limits<double>::infinity();
        ++res.nonfinite_evaluations;
      }
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    for (std::size_t i = 0; i < lambda; ++i) sorted[i] = xs[order[i]];
    if (fs[order[0]] < res.best_f) {
      res.best_f = fs[order[0]];
      res.best_x = xs[order[0]];
    }

    const Vector m_old = state.m;
    if (cmaes_update(state, sorted)) ++res.covariance_repairs;
    res.trace.push_back({state.k, res.evaluations, lambda, fs[order[0]], state.sigma, state.m});
    if ((state.m - m_old).norm() < opts.tol_mean) {
      res.stop_reason = "mean_stalled";
      break;
    }
  }
  if (!std::isfinite(res.best_f)) res.best_x = state.m;
  res.final_state = std::move(state);
  return res;
}

RestartResult restart_schedule(const Objective& obj, const Vector& init_mean, double init_sigma,
                               const CmaesOptions& opts, const RestartOptions& budget) {
  RestartResult out;
  out.best_f = std::numeric_limits<double>::infinity();
  out.best_x = init_mean;
  std::size_t lambda = opts.lambda ? *opts.lambda : default_constants(obj.dim).lambda;
  std::size_t spent = 0;
  for (std::size_t r = 0; r <= budget.max_restarts; ++r) {
    CmaesOptions run = opts;
    run.lambda = lambda;
    run.seed = opts.seed + r;
    if (budget.total_evals > 0) {
      if (spent + lambda > budget.total_evals) break;
      const std::size_t remaining = budget.total_evals - spent;
      run.max_evals = run.max_evals > 0 ? std::min(run.max_evals, remaining) : remaining;
    }
    CmaesResult res = cmaes_minimize(obj, init_mean, init_sigma, run);
    spent += res.evaluations;
    out.lambdas.push_back(lambda);
    if (res.best_f < out.best_f) {
      out.best_f = res.best_f;
      out.best_x = res.best_x;
    }
    out.runs.push_back(std::move(res));
    lambda *= 2;
  }
  return out;
}

}  // namespace ssm
