#include "ssm/cmaes.hpp"
#include "ssm/error.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace ssm;

namespace {

Objective sphere(std::size_t n) {
  return {[](const Vector& x) { return x.squaredNorm(); }, n, std::nullopt};
}

Objective rastrigin(std::size_t n) {
  return {[](const Vector& x) {
            double f = 10.0 * static_cast<double>(x.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) {
              f += x(i) * x(i) - 10.0 * std::cos(2.0 * std::numbers::pi * x(i));
            }
            return f;
          },
          n, std::nullopt};
}

}  // namespace

TEST_CASE("default constants for n = 1") {
  const CmaesConstants k = default_constants(1);
  CHECK(k.lambda == 4);
  CHECK(k.mu == 2);
}

TEST_CASE("default constants satisfy the strategy relations") {
  for (std::size_t n = 1; n <= 20; ++n) {
    const CmaesConstants k = default_constants(n);
    CHECK(k.lambda == 4 + static_cast<std::size_t>(std::floor(3.0 * std::log(static_cast<double>(n)))));
    double sum = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < k.mu; ++i) {
      CHECK(k.weights[i] > 0.0);
      if (i > 0) CHECK(k.weights[i] <= k.weights[i - 1]);
      sum += k.weights[i];
      sq += k.weights[i] * k.weights[i];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(k.mu_w == doctest::Approx(1.0 / sq).epsilon(1e-14));
    CHECK(k.mu_w >= 1.0);
    CHECK(k.mu_w <= static_cast<double>(k.mu));
    CHECK(k.c_1 + k.c_mu <= 1.0);
    CHECK(k.c_sigma < 1.0);
    CHECK(k.c_c <= 1.0);
    CHECK(k.d_sigma == doctest::Approx(1.0 + k.c_sigma));
    CHECK(k.alpha == 1.5);
  }
  for (std::size_t n : {50, 200, 1000}) CHECK(default_constants(n).c_1 + default_constants(n).c_mu <= 1.0);
}

TEST_CASE("population below two is rejected") {
  CHECK_THROWS_AS(default_constants(3, 1), InvalidPopulation);
  CHECK_NOTHROW(default_constants(3, 2));
}

TEST_CASE("expected norm approximation") {
  CHECK(expected_norm(1) == doctest::Approx(1.0 - 0.25 + 1.0 / 21.0));
  // E||N(0, I_10)|| = sqrt(2) Gamma(5.5) / Gamma(5) = 3.0843...
  CHECK(expected_norm(10) == doctest::Approx(3.0843).epsilon(1e-3));
}

TEST_CASE("step size is unchanged at the expected path length") {
  const CmaesConstants k = default_constants(5);
  CHECK(csa_factor(k, k.chi_n) == 1.0);
  CHECK(csa_factor(k, 2.0 * k.chi_n) > 1.0);
  CHECK(csa_factor(k, 0.5 * k.chi_n) < 1.0);
}

TEST_CASE("single parent sets the mean to the best sample") {
  CmaesConstants k = default_constants(3, 2);
  REQUIRE(k.mu == 1);
  CHECK(k.weights[0] == 1.0);
  CmaesState s = make_state(Vector::Zero(3), 0.5, k);
  std::vector<Vector> sorted = {Vector::Constant(3, 0.25), Vector::Constant(3, -1.0)};
  cmaes_update(s, sorted);
  CHECK((s.m - sorted[0]).norm() == 0.0);
  CHECK(s.sigma > 0.0);
  CHECK(is_symmetric(s.c, 0.0));
}

TEST_CASE("sphere converges below 1e-10 within 2000 evaluations") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    CmaesOptions opts;
    opts.seed = seed;
    opts.max_evals = 2000;
    opts.tol_mean = 0.0;
    const CmaesResult r = cmaes_minimize(sphere(5), Vector::Ones(5), 0.5, opts);
    CHECK(r.evaluations <= 2000);
    CHECK(r.best_f < 1e-10);
  }
}

TEST_CASE("only the ranking matters") {
  const Objective f = sphere(4);
  Objective g = f;
  g.eval = [](const Vector& x) { return std::exp(x.squaredNorm()) * 3.0 - 7.0; };
  CmaesOptions opts;
  opts.seed = 99;
  opts.max_iter = 60;
  const CmaesResult a = cmaes_minimize(f, Vector::Constant(4, 0.7), 0.3, opts);
  const CmaesResult b = cmaes_minimize(g, Vector::Constant(4, 0.7), 0.3, opts);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK((a.trace[i].mean - b.trace[i].mean).norm() == 0.0);
    CHECK(a.trace[i].sigma == b.trace[i].sigma);
  }
}

TEST_CASE("state stays valid after every iteration") {
  CmaesOptions opts;
  opts.max_iter = 1;
  Objective f = rastrigin(3);
  CmaesState s = make_state(Vector::Constant(3, 2.0), 1.0, default_constants(3));
  const auto weights = s.constants.weights;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int it = 0; it < 50; ++it) {
    std::vector<std::pair<double, Vector>> pop;
    for (std::size_t i = 0; i < s.constants.lambda; ++i) {
      Vector z(3);
      for (int j = 0; j < 3; ++j) z(j) = g(rng);
      const Vector x = s.m + s.sigma * (s.basis * s.scale.cwiseProduct(z));
      pop.emplace_back(f.eval(x), x);
    }
    std::stable_sort(pop.begin(), pop.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Vector> sorted;
    for (auto& p : pop) sorted.push_back(p.second);
    cmaes_update(s, sorted);
    CHECK(is_symmetric(s.c, 1e-12));
    CHECK(s.sigma > 0.0);
    CHECK(s.constants.weights == weights);
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(s.c).eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("non-finite objective values rank last and are counted") {
  Objective f{[](const Vector& x) {
                return x(0) > 0.0 ? std::numeric_limits<double>::quiet_NaN() : x.squaredNorm();
              },
              2, std::nullopt};
  CmaesOptions opts;
  opts.max_iter = 30;
  const CmaesResult r = cmaes_minimize(f, Vector::Zero(2), 1.0, opts);
  CHECK(r.nonfinite_evaluations > 0);
  CHECK(std::isfinite(r.best_f));
  CHECK(r.best_x(0) <= 0.0);
}

TEST_CASE("box bounds are respected") {
  Objective f = sphere(3);
  f.bounds = Bounds{Vector::Constant(3, 1.0), Vector::Constant(3, 2.0)};
  std::vector<Vector> seen;
  Objective spy = f;
  spy.eval = [&](const Vector& x) {
    seen.push_back(x);
    return x.squaredNorm();
  };
  CmaesOptions opts;
  opts.max_iter = 150;
  const CmaesResult r = cmaes_minimize(spy, Vector::Constant(3, 1.5), 0.5, opts);
  for (const auto& x : seen) {
    CHECK((x.array() >= 1.0).all());
    CHECK((x.array() <= 2.0).all());
  }
  CHECK(r.best_f == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("parallel evaluation gives the same run") {
  CmaesOptions opts;
  opts.seed = 4;
  opts.max_iter = 50;
  const CmaesResult a = cmaes_minimize(rastrigin(3), Vector::Constant(3, 2.0), 1.0, opts);
  opts.threads = 4;
  const CmaesResult b = cmaes_minimize(rastrigin(3), Vector::Constant(3, 2.0), 1.0, opts);
  CHECK(a.best_f == b.best_f);
  CHECK((a.best_x - b.best_x).norm() == 0.0);
}

TEST_CASE("restart schedule doubles the population") {
  CmaesOptions opts;
  opts.max_iter = 20;
  RestartOptions budget;
  budget.max_restarts = 3;
  const RestartResult r = restart_schedule(rastrigin(3), Vector::Constant(3, 3.0), 2.0, opts, budget);
  const std::size_t l0 = default_constants(3).lambda;
  REQUIRE(r.lambdas.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(r.lambdas[i] == (l0 << i));
}

TEST_CASE("a budget of one run equals a single run") {
  CmaesOptions opts;
  opts.seed = 12;
  opts.max_iter = 100;
  const CmaesResult single = cmaes_minimize(rastrigin(3), Vector::Constant(3, 3.0), 2.0, opts);
  const RestartResult r = restart_schedule(rastrigin(3), Vector::Constant(3, 3.0), 2.0, opts, {});
  CHECK(r.runs.size() == 1);
  CHECK(r.best_f == single.best_f);
  CHECK((r.best_x - single.best_x).norm() == 0.0);
}

TEST_CASE("restarts help on Rastrigin") {
  int single_hits = 0;
  int restart_hits = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    CmaesOptions opts;
    opts.seed = seed * 1000;
    opts.max_iter = 300;
    opts.tol_mean = 1e-10;
    const Vector x0 = Vector::Constant(3, 3.0);
    if (cmaes_minimize(rastrigin(3), x0, 2.0, opts).best_f < 1.0) ++single_hits;
    if (restart_schedule(rastrigin(3), x0, 2.0, opts, {.max_restarts = 4}).best_f < 1.0) ++restart_hits;
  }
  CHECK(restart_hits > single_hits);
}
