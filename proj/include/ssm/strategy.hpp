#pragma once

#include "ssm/bars.hpp"
#include "ssm/lgssm.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace ssm {

enum class Signal : std::int8_t { sell = -1, flat = 0, buy = 1 };

std::string_view signal_name(Signal s);

struct StrategyParams {
  ModelParams model;
  double signal_offset = 0.0;  // price units
  int profit_target_ticks = 1;
  int stop_loss_ticks = 1;
};

/// One causal pass of the filter over the closes, with the prior mean
/// anchored on the first close. At bar t the one-step-ahead predicted
/// measurement zp is compared with close_t: buy when zp >= close_t + offset,
/// sell when zp <= close_t - offset, flat otherwise. A filter failure is
/// rethrown as StepError carrying the 1-based bar index.
std::vector<Signal> kf_trend_signals(std::span<const Bar> bars, const StrategyParams& params);

/// Same, from an already assembled spec (prior mean is still re-anchored).
std::vector<Signal> kf_trend_signals(std::span<const Bar> bars, const LgssmSpec& spec,
                                     double offset);

enum class MaRule {
  symmetric,  // sell when SMA(short) < SMA(long) - offset
  literal,    // sell when SMA(short) < SMA(long) + offset
};

struct MaParams {
  std::size_t short_period = 5;
  std::size_t long_period = 20;
  double offset = 0.0;
  MaRule rule = MaRule::symmetric;
  int profit_target_ticks = 1;
  int stop_loss_ticks = 1;
};

/// Buy when SMA(short) > SMA(long) + offset, sell per `rule`; flat until
/// long_period closes exist. Requires 1 <= short_period <= long_period.
std::vector<Signal> ma_crossover_signals(std::span<const Bar> bars, std::size_t short_period,
                                         std::size_t long_period, double offset,
                                         MaRule rule = MaRule::symmetric);

}  // namespace ssm
