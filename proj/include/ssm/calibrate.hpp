#pragma once

#include "ssm/backtest.hpp"
#include "ssm/cmaes.hpp"
#include "ssm/strategy.hpp"

#include <optional>
#include <span>
#include <vector>

namespace ssm {

struct CalibrationOptions {
  /// L1 weight on the model parameters only (not offset, target or stop).
  double penalty_weight = 1e-3;
  /// Objective value for a candidate that never trades (plus its penalty).
  double no_trade_sentinel = 1e6;
  double init_sigma = 0.3;
  CmaesOptions cmaes;
  BacktestOptions backtest;
  /// Per-coordinate search scale; empty means max(|x0_i|, 1).
  std::vector<double> scale;
  std::size_t max_period = 250;
};

struct KfCalibration {
  StrategyParams params;
  double objective = 0.0;
  BacktestReport train;
  CmaesResult search;
};

struct MaCalibration {
  MaParams params;
  double objective = 0.0;
  BacktestReport train;
  CmaesResult search;
};

/// Search vector layout: [p_1..p_m, offset, stop, target]. Offset and tick
/// counts enter through their absolute values; ticks are rounded (min 1).
std::vector<double> encode_kf(const StrategyParams& p);
StrategyParams decode_kf(std::span<const double> x, int model_id, double dt);

/// Layout: [short_period, long_period, offset, stop, target].
std::vector<double> encode_ma(const MaParams& p);
MaParams decode_ma(std::span<const double> x, MaRule rule, std::size_t max_period);

/// -Sharpe(train) + penalty_weight * sum |p_i| for one candidate.
double kf_objective(std::span<const Bar> bars, const StrategyParams& p,
                    const InstrumentSpec& instrument, const CalibrationOptions& opts);
double ma_objective(std::span<const Bar> bars, const MaParams& p,
                    const InstrumentSpec& instrument, const CalibrationOptions& opts);

/// CMA-ES over the full KF strategy vector, started from `start`.
KfCalibration calibrate_kf(std::span<const Bar> train, const StrategyParams& start,
                           const InstrumentSpec& instrument, const CalibrationOptions& opts = {});

MaCalibration calibrate_ma(std::span<const Bar> train, const MaParams& start,
                           const InstrumentSpec& instrument, const CalibrationOptions& opts = {});

}  // namespace ssm
