#include "ssm/calibrate.hpp"

#include "ssm/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ssm {

namespace {

int ticks_from(double x) { return std::max(1, static_cast<int>(std::lround(std::min(std::abs(x), 1e6)))); }

Vector to_search(std::span<const double> x, std::span<const double> scale) {
  Vector y(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) y(static_cast<Eigen::Index>(i)) = x[i] / scale[i];
  return y;
}

std::vector<double> from_search(const Vector& y, std::span<const double> scale) {
  std::vector<double> x(static_cast<std::size_t>(y.size()));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = y(static_cast<Eigen::Index>(i)) * scale[i];
  return x;
}

std::vector<double> resolve_scale(const std::vector<double>& x0, const CalibrationOptions& opts) {
  if (!opts.scale.empty()) {
    if (opts.scale.size() != x0.size()) throw Error("calibrate: scale has the wrong length");
    for (double s : opts.scale) {
      if (!(s > 0.0)) throw Error("calibrate: scale entries must be positive");
    }
    return opts.scale;
  }
  std::vector<double> s(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) s[i] = std::max(std::abs(x0[i]), 1.0);
  return s;
}

double score(const BacktestReport& r, double penalty, const CalibrationOptions& opts) {
  if (r.n_trades == 0) return opts.no_trade_sentinel + penalty;
  return -r.sharpe + penalty;
}

}  // namespace

std::vector<double> encode_kf(const StrategyParams& p) {
  std::vector<double> x = p.model.p;
  x.push_back(p.signal_offset);
  x.push_back(p.stop_loss_ticks);
  x.push_back(p.profit_target_ticks);
  return x;
}

StrategyParams decode_kf(std::span<const double> x, int model_id, double dt) {
  const std::size_t m = model_arity(model_id);
  if (x.size() != m + 3) throw ParamArity("calibration vector has the wrong length for this model");
  StrategyParams p;
  p.model.model_id = model_id;
  p.model.dt = dt;
  p.model.p.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(m));
  p.signal_offset = std::abs(x[m]);
  p.stop_loss_ticks = ticks_from(x[m + 1]);
  p.profit_target_ticks = ticks_from(x[m + 2]);
  return p;
}

std::vector<double> encode_ma(const MaParams& p) {
  return {static_cast<double>(p.short_period), static_cast<double>(p.long_period), p.offset,
          static_cast<double>(p.stop_loss_ticks), static_cast<double>(p.profit_target_ticks)};
}

MaParams decode_ma(std::span<const double> x, MaRule rule, std::size_t max_period) {
  if (x.size() != 5) throw ParamArity("moving-average calibration vector needs 5 entries");
  const auto period = [&](double v) {
    return static_cast<std::size_t>(std::lround(std::min(std::abs(v), static_cast<double>(max_period))));
  };
  MaParams p;
  p.rule = rule;
  p.short_period = std::clamp<std::size_t>(period(x[0]), 1, std::max<std::size_t>(max_period, 2) - 1);
  p.long_period = std::clamp<std::size_t>(period(x[1]), p.short_period + 1, std::max<std::size_t>(max_period, 2));
  p.offset = x[2];
  p.stop_loss_ticks = ticks_from(x[3]);
  p.profit_target_ticks = ticks_from(x[4]);
  return p;
}

double kf_objective(std::span<const Bar> bars, const StrategyParams& p,
                    const InstrumentSpec& instrument, const CalibrationOptions& opts) {
  double penalty = 0.0;
  for (double v : p.model.p) penalty += std::abs(v);
  penalty *= opts.penalty_weight;
  try {
    const auto signals = kf_trend_signals(bars, p);
    const auto report = run_backtest(bars, signals, instrument, p.profit_target_ticks,
                                     p.stop_loss_ticks, opts.backtest);
    return score(report, penalty, opts);
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

double ma_objective(std::span<const Bar> bars, const MaParams& p, const InstrumentSpec& instrument,
                    const CalibrationOptions& opts) {
  const auto signals = ma_crossover_signals(bars, p.short_period, p.long_period, p.offset, p.rule);
  const auto report = run_backtest(bars, signals, instrument, p.profit_target_ticks,
                                   p.stop_loss_ticks, opts.backtest);
  return score(report, 0.0, opts);
}

KfCalibration calibrate_kf(std::span<const Bar> train, const StrategyParams& start,
                           const InstrumentSpec& instrument, const CalibrationOptions& opts) {
  if (train.empty()) throw Error("calibrate: empty training window");
  const int model_id = start.model.model_id;
  const double dt = start.model.dt;
  if (start.model.p.size() != model_arity(model_id)) {
    throw ParamArity("calibrate: start parameters do not match the model arity");
  }
  const std::vector<double> x0 = encode_kf(start);
  const std::vector<double> scale = resolve_scale(x0, opts);

  Objective obj;
  obj.dim = x0.size();
  obj.eval = [&](const Vector& y) {
    return kf_objective(train, decode_kf(from_search(y, scale), model_id, dt), instrument, opts);
  };
  KfCalibration out;
  out.search = cmaes_minimize(obj, to_search(x0, scale), opts.init_sigma, opts.cmaes);
  out.params = decode_kf(from_search(out.search.best_x, scale), model_id, dt);
  out.objective = out.search.best_f;
  out.train = run_backtest(train, kf_trend_signals(train, out.params), instrument,
                           out.params.profit_target_ticks, out.params.stop_loss_ticks, opts.backtest);
  return out;
}

MaCalibration calibrate_ma(std::span<const Bar> train, const MaParams& start,
                           const InstrumentSpec& instrument, const CalibrationOptions& opts) {
  if (train.empty()) throw Error("calibrate: empty training window");
  const std::size_t max_period = std::max<std::size_t>(2, std::min(opts.max_period, train.size()));
  const std::vector<double> x0 = encode_ma(start);
  const std::vector<double> scale = resolve_scale(x0, opts);

  Objective obj;
  obj.dim = x0.size();
  obj.eval = [&](const Vector& y) {
    return ma_objective(train, decode_ma(from_search(y, scale), start.rule, max_period), instrument, opts);
  };
  MaCalibration out;
  out.search = cmaes_minimize(obj, to_search(x0, scale), opts.init_sigma, opts.cmaes);
  out.params = decode_ma(from_search(out.search.best_x, scale), start.rule, max_period);
  out.objective = out.search.best_f;
  const auto signals = ma_crossover_signals(train, out.params.short_period, out.params.long_period,
                                            out.params.offset, out.params.rule);
  out.train = run_backtest(train, signals, instrument, out.params.profit_target_ticks,
                           out.params.stop_loss_ticks, opts.backtest);
  return out;
}

}  // namespace ssm
