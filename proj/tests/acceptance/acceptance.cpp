// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include "oracle/joint_oracle.hpp"
#include "ssm/backtest.hpp"
#include "ssm/calibrate.hpp"
#include "ssm/cmaes.hpp"
#include "ssm/em.hpp"
#include "ssm/info_filter.hpp"
#include "ssm/kalman.hpp"
#include "ssm/report_io.hpp"
#include "ssm/smoother.hpp"
#include "ssm/strategy.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <thread>

using namespace ssm;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Worst {
  double value = 0.0;
  void add(double v) { value = std::max(value, std::isfinite(v) ? v : 1e300); }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double rel(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

LgssmSpec scalar_stationary(double f, double q, double r) {
  LgssmSpec s;
  s.base = {Matrix::Constant(1, 1, f), Matrix::Zero(1, 0), Matrix::Constant(1, 1, 1.0),
            Matrix::Constant(1, 1, q), Matrix::Constant(1, 1, r), Vector::Zero(1), Vector::Zero(1)};
  s.init = Gaussian(Vector::Zero(1), Matrix::Constant(1, 1, q / (1.0 - f * f)));
  return s;
}

// ---------------------------------------------------------------------------

Outcome ac1() {
  std::mt19937_64 rng(1001);
  Worst err;
  int instances = 0;
  for (int model = 1; model <= 4; ++model) {
    for (int rep = 0; rep < 25; ++rep) {
      const LgssmSpec s = build_model(support::random_table_params(model, rng));
      const std::size_t T = 1 + static_cast<std::size_t>(rep) % 5;
      const Trajectory traj = simulate(s, T, 7000 + static_cast<std::uint64_t>(rep));
      const FilterResult r = filter(s, traj.observations);
      const auto joint = oracle::stack(s, T);
      for (std::size_t t = 1; t <= T; ++t) {
        const Gaussian ref = oracle::state_given(joint, t, t, traj.observations);
        err.add((r.steps[t - 1].x_post - ref.mean).norm() / std::max(1.0, ref.mean.norm()));
        err.add((r.steps[t - 1].p_post - ref.cov).norm() / std::max(1.0, ref.cov.norm()));
      }
      ++instances;
    }
  }
  return {err.value < 1e-8, std::to_string(instances) + " instances, models 1-4, max err " + fmt(err.value)};
}

Outcome ac2() {
  std::mt19937_64 rng(2002);
  Worst rts_err;
  for (int model = 1; model <= 4; ++model) {
    for (int rep = 0; rep < 25; ++rep) {
      const LgssmSpec s = build_model(support::random_table_params(model, rng));
      const std::size_t T = 1 + static_cast<std::size_t>(rep) % 5;
      const Trajectory traj = simulate(s, T, 8000 + static_cast<std::uint64_t>(rep));
      const auto smooth = rts_smooth(filter(s, traj.observations), s);
      const auto joint = oracle::stack(s, T);
      for (std::size_t t = 1; t <= T; ++t) {
        const Gaussian ref = oracle::state_given(joint, t, T, traj.observations);
        rts_err.add((smooth[t - 1].x_smooth - ref.mean).norm() / std::max(1.0, ref.mean.norm()));
        rts_err.add((smooth[t - 1].p_smooth - ref.cov).norm() / std::max(1.0, ref.cov.norm()));
      }
    }
  }
  Worst fuse_err;
  for (int rep = 0; rep < 100; ++rep) {
    const LgssmSpec s = scalar_stationary(support::uniform(rng, -0.95, 0.95), support::uniform(rng, 0.1, 3.0),
                                          support::uniform(rng, 0.1, 3.0));
    const std::size_t T = 1 + static_cast<std::size_t>(rep) % 20;
    const Trajectory traj = simulate(s, T, 9000 + static_cast<std::uint64_t>(rep));
    const auto rts = rts_smooth(filter(s, traj.observations), s);
    const auto fused = two_filter_smooth(s, traj.observations);
    for (std::size_t t = 0; t < T; ++t) {
      fuse_err.add(std::abs(fused[t].mean(0) - rts[t].x_smooth(0)));
      fuse_err.add(std::abs(fused[t].cov(0, 0) - rts[t].p_smooth(0, 0)));
    }
  }
  return {rts_err.value < 1e-8 && fuse_err.value < 1e-6,
          "RTS vs oracle " + fmt(rts_err.value) + " (100 instances), fusion vs RTS " + fmt(fuse_err.value) +
              " (100 scalar instances, T <= 20)"};
}

Outcome ac3() {
  std::mt19937_64 rng(3003);
  Worst joseph, gains, info;
  int n = 0;
  for (int rep = 0; rep < 150; ++rep, ++n) {
    const LgssmSpec s = rep % 3 == 0 ? build_model(support::random_table_params(1 + rep % 4, rng))
                                     : support::random_spec(1 + rep % 3, 1 + rep % 2, rng);
    const std::size_t T = 6;
    const Trajectory traj = simulate(s, T, 10000 + static_cast<std::uint64_t>(rep));
    const FilterResult a = filter(s, traj.observations, {}, CovarianceForm::joseph);
    const FilterResult b = filter(s, traj.observations, {}, CovarianceForm::reduced);
    const auto inf = info_filter(s, traj.observations);
    for (std::size_t t = 1; t <= T; ++t) {
      const auto& st = a.steps[t - 1];
      joseph.add((st.p_post - b.steps[t - 1].p_post).cwiseAbs().maxCoeff());
      const auto forms = gain_forms(st.p_pred, st.p_post, s, t);
      for (std::size_t i = 1; i < 4; ++i) gains.add((forms[i] - forms[0]).cwiseAbs().maxCoeff());
      const Gaussian post = from_canonical(CanonicalGaussian(inf[t - 1].eta_post, inf[t - 1].lambda_post));
      info.add(rel(post.mean, st.x_post));
      info.add(rel(post.cov, st.p_post));
      const CanonicalGaussian canon = to_canonical(Gaussian(st.x_post, st.p_post));
      info.add(rel(inf[t - 1].lambda_post, canon.lambda));
      info.add(rel(inf[t - 1].eta_post, canon.eta));
    }
  }
  return {joseph.value < 1e-9 && gains.value < 1e-8 && info.value < 1e-7,
          std::to_string(n) + " instances: Joseph/reduced " + fmt(joseph.value) + ", gain forms " +
              fmt(gains.value) + ", KF/IF rel " + fmt(info.value)};
}

std::vector<double> simulate_scalar(const ScalarTheta& truth, std::size_t n, std::uint64_t seed) {
  EmOptions opts;
  opts.prior = Gaussian(Vector::Zero(1), Matrix::Constant(1, 1, truth.q / (1.0 - truth.f * truth.f)));
  const Trajectory traj = simulate(scalar_spec(truth, opts), n, seed);
  std::vector<double> z;
  for (const auto& v : traj.observations) z.push_back(v(0));
  return z;
}

Outcome ac4() {
  const ScalarTheta truth{0.9, 1.0, 1.0};
  int monotone = 0;
  double worst_drop = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto z = simulate_scalar(truth, 500, seed);
    const EmState st = em_fit(z, ScalarTheta{0.5, 2.0, 0.5}, {.max_iter = 300});
    bool ok = true;
    for (std::size_t i = 1; i < st.loglik_history.size(); ++i) {
      const double drop = st.loglik_history[i - 1] - st.loglik_history[i];
      worst_drop = std::max(worst_drop, drop);
      if (drop > 1e-9) ok = false;
    }
    if (ok) ++monotone;
  }
  const auto z = simulate_scalar(truth, 2000, 4242);
  const EmState big = em_fit(z, ScalarTheta{0.5, 2.0, 0.5}, {.max_iter = 2000, .tol = 1e-9});
  const double f_err = std::abs(big.theta.f - truth.f);
  return {monotone == 20 && f_err <= 0.05,
          std::to_string(monotone) + "/20 traces monotone (largest drop " + fmt(worst_drop) +
              "), F-hat at N=2000 " + fmt(big.theta.f) + " vs 0.9"};
}

Outcome ac5() {
  int hits = 0;
  std::size_t max_evals = 0;
  const Objective sphere{[](const Vector& x) { return x.squaredNorm(); }, 5, std::nullopt};
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    CmaesOptions opts;
    opts.seed = seed;
    opts.max_evals = 2000;
    opts.tol_mean = 0.0;
    const CmaesResult r = cmaes_minimize(sphere, Vector::Ones(5), 0.5, opts);
    max_evals = std::max(max_evals, r.evaluations);
    if (r.best_f < 1e-10 && r.evaluations <= 2000) ++hits;
  }

  Objective warped = sphere;
  warped.eval = [](const Vector& x) { return std::log1p(x.squaredNorm()) * 5.0 + 2.0; };
  CmaesOptions opts;
  opts.seed = 77;
  opts.max_iter = 80;
  const CmaesResult a = cmaes_minimize(sphere, Vector::Constant(5, 0.8), 0.4, opts);
  const CmaesResult b = cmaes_minimize(warped, Vector::Constant(5, 0.8), 0.4, opts);
  bool identical = a.trace.size() == b.trace.size();
  for (std::size_t i = 0; identical && i < a.trace.size(); ++i) {
    identical = a.trace[i].mean == b.trace[i].mean && a.trace[i].sigma == b.trace[i].sigma;
  }

  bool constants_ok = true;
  for (std::size_t n = 1; n <= 50; ++n) {
    const CmaesConstants k = default_constants(n);
    double sum = 0.0;
    for (double w : k.weights) sum += w;
    constants_ok = constants_ok && std::abs(sum - 1.0) < 1e-12 && k.c_1 + k.c_mu <= 1.0 && k.mu_w >= 1.0 &&
                   k.mu_w <= static_cast<double>(k.mu);
  }
  return {hits == 10 && identical && constants_ok,
          "sphere " + std::to_string(hits) + "/10 (max evals " + std::to_string(max_evals) +
              "), rank invariance " + (identical ? "bit-identical" : "DIFFERS") + ", constants " +
              (constants_ok ? "ok" : "violated")};
}

std::vector<Bar> random_bars(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> step(0.0, 4.0);
  std::uniform_real_distribution<double> pad(0.0, 5.0);
  std::vector<double> c{2000.0};
  while (c.size() < n) c.push_back(c.back() + step(rng));
  auto bars = support::bars_from_closes(c, 0.0);
  for (auto& b : bars) {
    b.open += std::normal_distribution<double>(0.0, 1.5)(rng);
    b.high = std::max(b.open, b.close) + pad(rng);
    b.low = std::min(b.open, b.close) - pad(rng);
  }
  return bars;
}

std::string render(const BacktestReport& r) {
  std::ostringstream os;
  write_report_csv(os, r);
  write_equity_csv(os, r);
  write_blotter_csv(os, r);
  return os.str();
}

Outcome ac6() {
  std::mt19937_64 rng(6006);
  int identity_fail = 0;
  int lookahead_fail = 0;
  int determinism_fail = 0;
  const InstrumentSpec inst{0.25, 12.5, 1.55};
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 40 + static_cast<std::size_t>(rng() % 160);
    const auto bars = random_bars(n, rng);
    std::vector<Signal> sig;
    if (rep % 3 == 0) {
      sig = ma_crossover_signals(bars, 1 + rng() % 5, 6 + rng() % 20, support::uniform(rng, -2.0, 2.0),
                                 rep % 2 ? MaRule::literal : MaRule::symmetric);
    } else if (rep % 3 == 1) {
      StrategyParams p;
      p.model = support::random_table_params(1 + rep % 4, rng);
      p.signal_offset = support::uniform(rng, 0.0, 3.0);
      sig = kf_trend_signals(bars, p);
    } else {
      for (std::size_t i = 0; i < n; ++i) sig.push_back(static_cast<Signal>(static_cast<int>(rng() % 3) - 1));
    }
    const int tgt = 1 + static_cast<int>(rng() % 60);
    const int stp = 1 + static_cast<int>(rng() % 60);
    const BacktestOptions bo{.exit_on_flip = rep % 4 == 0};
    const BacktestReport r = run_backtest(bars, sig, inst, tgt, stp, bo);

    const double lhs = r.net_profit;
    const double rhs = r.gross_profit + r.gross_loss - r.commission_total;
    double trade_sum = 0.0;
    for (const auto& t : r.trades) trade_sum += t.pnl;
    const double tol = 1e-9 * std::max(1.0, std::abs(lhs));
    bool ok = std::abs(lhs - rhs) <= tol && std::abs(lhs - trade_sum) <= tol &&
              std::abs(r.equity_curve.back() - lhs) <= tol;
    for (std::size_t i = 0; i < r.trades.size(); ++i) {
      const Trade& t = r.trades[i];
      ok = ok && t.exit_time > t.entry_time && t.entry_index >= 1 && sig[t.entry_index - 1] == t.direction;
      if (i > 0) ok = ok && t.entry_index > r.trades[i - 1].exit_index;
    }
    if (!ok) ++identity_fail;

    // Truncating the future must not change anything already decided.
    bool causal = true;
    for (std::size_t cut = 3; cut < n && causal; cut += 1 + n / 7) {
      const std::span<const Bar> head(bars.data(), cut);
      const std::span<const Signal> sig_head(sig.data(), cut);
      const BacktestReport p = run_backtest(head, sig_head, inst, tgt, stp, bo);
      for (std::size_t i = 0; i + 1 < cut; ++i) causal = causal && p.equity_curve[i] == r.equity_curve[i];
      for (const Trade& t : p.trades) {
        if (t.exit_reason == ExitReason::end_of_data) continue;
        const auto it = std::find_if(r.trades.begin(), r.trades.end(),
                                     [&](const Trade& f) { return f.entry_index == t.entry_index; });
        causal = causal && it != r.trades.end() && it->exit_index == t.exit_index && it->pnl == t.pnl;
      }
      if (rep % 3 == 1) {
        StrategyParams p2;
        p2.model = support::random_table_params(1, rng);
        const auto full = kf_trend_signals(bars, p2);
        const auto part = kf_trend_signals(head, p2);
        causal = causal && std::equal(part.begin(), part.end(), full.begin());
      }
    }
    if (!causal) ++lookahead_fail;

    if (render(run_backtest(bars, sig, inst, tgt, stp, bo)) != render(r)) ++determinism_fail;
  }
  return {identity_fail == 0 && lookahead_fail == 0 && determinism_fail == 0,
          "100 fixtures: identity failures " + std::to_string(identity_fail) + ", look-ahead failures " +
              std::to_string(lookahead_fail) + ", non-deterministic reruns " + std::to_string(determinism_fail)};
}

// Local linear trend: a level that drifts by a slowly varying slope, observed in noise.
std::vector<Bar> trending_bars(std::size_t n, std::uint64_t seed) {
  LgssmSpec s;
  s.base.f = (Matrix(2, 2) << 1.0, 1.0, 0.0, 1.0).finished();
  s.base.b = Matrix::Zero(2, 1);
  s.base.h = (Matrix(1, 2) << 1.0, 0.0).finished();
  s.base.q = (Matrix(2, 2) << 4.0, 0.0, 0.0, 1e-4).finished();
  s.base.r = Matrix::Constant(1, 1, 4.0);
  s.base.c = Vector::Zero(2);
  s.base.d = Vector::Zero(1);
  s.init = Gaussian((Vector(2) << 2000.0, 0.6).finished(), (Matrix(2, 2) << 1.0, 0.0, 0.0, 1e-4).finished());
  const Trajectory traj = simulate(s, n, seed);
  std::vector<double> closes;
  for (const auto& z : traj.observations) closes.push_back(z(0));
  auto bars = support::bars_from_closes(closes, 0.0);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::exponential_distribution<double> pad(0.5);
  for (auto& b : bars) {
    b.high = std::max(b.open, b.close) + pad(rng);
    b.low = std::min(b.open, b.close) - pad(rng);
  }
  return bars;
}

Outcome ac7() {
  const InstrumentSpec inst{0.25, 12.5, 1.55};
  const std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  int wins = 0;
  std::ostringstream rows;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto bars = trending_bars(1000, seed);
    const TrainTest split = split_train_test(bars, 0.5);

    CalibrationOptions opts;
    opts.cmaes.seed = seed;
    opts.cmaes.max_iter = 150;
    opts.cmaes.threads = threads;

    StrategyParams kf0;
    kf0.model = {1, {2.0, 0.0, 0.05, 4.0, 10.0}, 1.0};
    kf0.signal_offset = 0.5;
    kf0.profit_target_ticks = 40;
    kf0.stop_loss_ticks = 40;
    const KfCalibration kf = calibrate_kf(split.train, kf0, inst, opts);

    MaParams ma0{5, 20, 0.0, MaRule::literal, 40, 40};
    opts.cmaes.seed = seed + 1000;
    const MaCalibration ma = calibrate_ma(split.train, ma0, inst, opts);

    const auto kf_sig = kf_trend_signals(split.test, kf.params);
    const BacktestReport kf_test = run_backtest(split.test, kf_sig, inst, kf.params.profit_target_ticks,
                                                kf.params.stop_loss_ticks, opts.backtest);
    const auto ma_sig = ma_crossover_signals(split.test, ma.params.short_period, ma.params.long_period,
                                             ma.params.offset, ma.params.rule);
    const BacktestReport ma_test = run_backtest(split.test, ma_sig, inst, ma.params.profit_target_ticks,
                                                ma.params.stop_loss_ticks, opts.backtest);
    const bool win = kf_test.sharpe > 0.0 && kf_test.sharpe > ma_test.sharpe;
    if (win) ++wins;
    rows << "\n    seed " << seed << ": KF test Sharpe " << fmt(kf_test.sharpe) << " (" << kf_test.n_trades
         << " trades, net " << fmt(kf_test.net_profit) << "), MA test Sharpe " << fmt(ma_test.sharpe) << " ("
         << ma_test.n_trades << " trades, net " << fmt(ma_test.net_profit) << ")" << (win ? "" : "  <- miss");
  }
  return {wins >= 7, std::to_string(wins) + "/10 seeds with KF test Sharpe > 0 and above MA" + rows.str()};
}

Outcome ac8() {
  const std::vector<double> table2 = {24.8, 0, 11.8, 46.2, 77.5, 67, 100, 0, 0, 0, 0, 100, 0, 0, 0};
  const LgssmSpec s = build_model({4, table2, 1.0});
  s.validate();
  bool ok = is_psd(s.base.q) && is_symmetric(s.base.q) && s.base.r(0, 0) > 0.0 && is_psd(s.init.cov) &&
            s.gain_feedback.has_value();

  std::mt19937_64 rng(8008);
  std::normal_distribution<double> step(0.0, 10.0);
  std::vector<Vector> z{Vector::Constant(1, 2250.0)};
  while (z.size() < 252) z.push_back(Vector::Constant(1, z.back()(0) + step(rng)));
  const LgssmSpec anchored = anchor_initial_state(s, z.front());
  const FilterResult r = filter(anchored, z);
  ok = ok && r.steps.size() == 252 && std::isfinite(r.total_loglik);
  for (const auto& st : r.steps) {
    ok = ok && st.x_post.allFinite() && st.p_post.allFinite() && is_symmetric(st.p_post, 1e-6 * std::max(1.0, st.p_post.norm()));
  }
  std::string notes;
  for (const auto& n : s.notes) notes += (notes.empty() ? "" : "; ") + n;
  return {ok, "model 4 from the Table 2 vector validated, 252-bar filter finite, loglik " +
                  fmt(r.total_loglik) + (notes.empty() ? "" : " [notes: " + notes + "]")};
}

}  // namespace

int main() {
  struct Criterion {
    std::string name;
    std::function<Outcome()> run;
    double time_limit;  // seconds, 0 = none
  };
  const std::vector<Criterion> criteria = {
      {"AC1", ac1, 1.0}, {"AC2", ac2, 0.0},  {"AC3", ac3, 0.0},   {"AC4", ac4, 30.0},
      {"AC5", ac5, 10.0}, {"AC6", ac6, 10.0}, {"AC7", ac7, 300.0}, {"AC8", ac8, 0.0},
  };
  int failures = 0;
  for (const auto& [name, run, limit] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit > 0.0 && secs >= limit) {
      o.pass = false;
      o.detail += "  (over the " + fmt(limit) + " s budget)";
    }
    if (!o.pass) ++failures;
    std::printf("%s %s  %s  [%.2f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
