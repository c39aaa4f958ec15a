#pragma once

#include "ssm/gaussian.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ssm {

struct CmaesConstants {
  std::size_t lambda = 0;
  std::size_t mu = 0;
  std::vector<double> weights;
  double mu_w = 0.0;
  double c_sigma = 0.0;
  double d_sigma = 0.0;
  double c_c = 0.0;
  double c_1 = 0.0;
  double c_mu = 0.0;
  double alpha = 1.5;
  double chi_n = 0.0;  // E||N(0, I)||
};

/// lambda = 4 + floor(3 ln n) unless given, mu = floor(lambda / 2),
/// w_i proportional to ln(mu + 1/2) - ln i. Throws InvalidPopulation when
/// lambda < 2.
CmaesConstants default_constants(std::size_t n, std::optional<std::size_t> lambda = std::nullopt);

/// sqrt(n) (1 - 1/(4n) + 1/(21 n^2))
double expected_norm(std::size_t n);

struct Bounds {
  Vector lower;
  Vector upper;
};

struct Objective {
  std::function<double(const Vector&)> eval;
  std::size_t dim = 0;
  std::optional<Bounds> bounds;
};

struct CmaesState {
  Vector m;
  double sigma = 1.0;
  Matrix c;
  Vector p_sigma;
  Vector p_c;
  std::size_t k = 0;
  CmaesConstants constants;
  // Eigendecomposition of c, refreshed after every covariance update.
  Matrix basis;
  Vector scale;  // square roots of the eigenvalues
};

CmaesState make_state(const Vector& mean, double sigma, const CmaesConstants& constants);

/// Multiplicative step-size change for a given ||p_sigma||.
double csa_factor(const CmaesConstants& constants, double p_sigma_norm);

/// One full update from samples already sorted best first (only the first
/// mu are used). Returns true when the covariance needed eigenvalue repair.
bool cmaes_update(CmaesState& state, std::span<const Vector> sorted);

struct CmaesOptions {
  std::optional<std::size_t> lambda;
  std::size_t max_iter = 1000;
  std::size_t max_evals = 0;  // 0: no limit
  double tol_mean = 1e-12;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

struct CmaesIteration {
  std::size_t k = 0;
  std::size_t evaluations = 0;
  std::size_t lambda = 0;
  double best_f = 0.0;  // best of this generation
  double sigma = 0.0;
  Vector mean;
};

struct CmaesResult {
  Vector best_x;
  double best_f = 0.0;
  std::size_t evaluations = 0;
  std::size_t nonfinite_evaluations = 0;
  std::size_t covariance_repairs = 0;
  std::string stop_reason;
  std::vector<CmaesIteration> trace;
  CmaesState final_state;
};

CmaesResult cmaes_minimize(const Objective& obj, const Vector& init_mean, double init_sigma,
                           const CmaesOptions& opts = {});

struct RestartOptions {
  std::size_t max_restarts = 0;  // 0: a single run
  std::size_t total_evals = 0;   // 0: no overall limit
};

struct RestartResult {
  Vector best_x;
  double best_f = 0.0;
  std::vector<std::size_t> lambdas;
  std::vector<CmaesResult> runs;
};

/// Repeats cmaes_minimize with the population doubled each time, each run
/// seeded from opts.seed plus the restart index, until the restart count or
/// the evaluation budget is spent.
RestartResult restart_schedule(const Objective& obj, const Vector& init_mean, double init_sigma,
                               const CmaesOptions& opts, const RestartOptions& budget);

}  // namespace ssm
