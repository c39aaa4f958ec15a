#include "ssm/strategy.hpp"

#include "ssm/error.hpp"
#include "ssm/kalman.hpp"

#include <cmath>

namespace ssm {

std::string_view signal_name(Signal s) {
  switch (s) {
    case Signal::buy: return "long";
    case Signal::sell: return "short";
    case Signal::flat: break;
  }
  return "flat";
}

std::vector<Signal> kf_trend_signals(std::span<const Bar> bars, const LgssmSpec& base_spec,
                                     double offset) {
  std::vector<Signal> out(bars.size(), Signal::flat);
  if (bars.empty()) return out;
  if (base_spec.obs_dim() != 1) throw InvalidModel("trend signals need a scalar measurement");
  const LgssmSpec spec = anchor_initial_state(base_spec, Vector::Constant(1, bars.front().close));
  const Vector u = unit_control(spec);

  Gaussian belief = spec.init;
  Matrix gain;
  Vector z(1);
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const std::size_t t = i + 1;
    try {
      if (t > 1) belief = predict(belief, spec, u, t, gain);
      z(0) = bars[i].close;
      FilterStep step = update(belief, z, spec, t);
      belief = Gaussian(std::move(step.x_post), std::move(step.p_post));
      gain = std::move(step.gain);

      const SystemMatrices next = spec.at(t + 1);
      const Vector x_next = next.f * belief.mean + next.b * u + spec.state_offset(t + 1, gain);
      const double zp = (next.h * x_next + next.d)(0);
      if (!std::isfinite(zp)) throw Error("non-finite prediction");
      const double close = bars[i].close;
      if (zp >= close + offset) {
        out[i] = Signal::buy;
      } else if (zp <= close - offset) {
        out[i] = Signal::sell;
      }
    } catch (const StepError&) {
      throw;
    } catch (const Error& e) {
      throw StepError(std::string("kf_trend_signals: ") + e.what(), t);
    }
  }
  return out;
}

std::vector<Signal> kf_trend_signals(std::span<const Bar> bars, const StrategyParams& params) {
  return kf_trend_signals(bars, build_model(params.model), params.signal_offset);
}

std::vector<Signal> ma_crossover_signals(std::span<const Bar> bars, std::size_t short_period,
                                         std::size_t long_period, double offset, MaRule rule) {
  if (short_period < 1 || long_period < short_period) {
    throw Error("ma_crossover_signals: need 1 <= short_period <= long_period");
  }
  std::vector<Signal> out(bars.size(), Signal::flat);
  double sum_short = 0.0;
  double sum_long = 0.0;
  const double sell_offset = rule == MaRule::symmetric ? -offset : offset;
  for (std::size_t i = 0; i < bars.size(); ++i) {
    sum_short += bars[i].close;
    sum_long += bars[i].close;
    if (i >= short_period) sum_short -= bars[i - short_period].close;
    if (i >= long_period) sum_long -= bars[i - long_period].close;
    if (i + 1 < long_period) continue;
    const double sma_short = sum_short / static_cast<double>(short_period);
    const double sma_long = sum_long / static_cast<double>(long_period);
    if (sma_short > sma_long + offset) {
      out[i] = Signal::buy;
    } else if (sma_short < sma_long + sell_offset) {
      out[i] = Signal::sell;
    }
  }
  return out;
}

}  // namespace ssm
