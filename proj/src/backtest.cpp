#include "ssm/backtest.hpp"

#include "ssm/error.hpp"

#include <optional>

namespace ssm {

std::string_view exit_reason_name(ExitReason r) {
  switch (r) {
    case ExitReason::target: return "target";
    case ExitReason::stop: return "stop";
    case ExitReason::signal_flip: return "signal_flip";
    case ExitReason::end_of_data: break;
  }
  return "end_of_data";
}

namespace {

struct Position {
  double dir;
  double entry_price;
  std::size_t entry_index;
};

}  // namespace

BacktestReport run_backtest(std::span<const Bar> bars, std::span<const Signal> signals,
                            const InstrumentSpec& instrument, int target_ticks, int stop_ticks,
                            const BacktestOptions& opts) {
  if (signals.size() != bars.size()) throw Error("run_backtest: signals and bars differ in length");
  if (target_ticks <= 0 || stop_ticks <= 0) throw Error("run_backtest: target and stop must be positive");
  if (!(instrument.tick_size > 0.0) || !(instrument.tick_value > 0.0) || instrument.commission < 0.0) {
    throw Error("run_backtest: invalid instrument");
  }
  const std::size_t n = bars.size();
  const double per_point = instrument.tick_value / instrument.tick_size;
  const double target_dist = target_ticks * instrument.tick_size;
  const double stop_dist = stop_ticks * instrument.tick_size;

  std::vector<Trade> trades;
  std::vector<double> equity(n, 0.0);
  std::vector<Date> dates(n);
  std::optional<Position> pos;
  Signal pending_entry = Signal::flat;
  bool pending_flip = false;
  double realized = 0.0;

  auto close_out = [&](std::size_t i, double price, ExitReason why) {
    Trade t;
    t.direction = pos->dir > 0 ? Signal::buy : Signal::sell;
    t.entry_index = pos->entry_index;
    t.exit_index = i;
    t.entry_time = bars[pos->entry_index].timestamp;
    t.exit_time = bars[i].timestamp;
    t.entry_price = pos->entry_price;
    t.exit_price = price;
    t.exit_reason = why;
    t.gross = pos->dir * (price - pos->entry_price) * per_point;
    t.pnl = t.gross - 2.0 * instrument.commission;
    t.bars_held = i - pos->entry_index;
    realized += t.pnl;
    trades.push_back(t);
    pos.reset();
  };

  for (std::size_t i = 0; i < n; ++i) {
    const Bar& bar = bars[i];
    dates[i] = bar.timestamp;
    if (pos && pending_flip) close_out(i, bar.open, ExitReason::signal_flip);
    pending_flip = false;
    if (!pos && pending_entry != Signal::flat) {
      pos = Position{pending_entry == Signal::buy ? 1.0 : -1.0, bar.open, i};
    }
    pending_entry = Signal::flat;

    if (pos && i > pos->entry_index) {
      const double d = pos->dir;
      const double stop_px = pos->entry_price - d * stop_dist;
      const double target_px = pos->entry_price + d * target_dist;
      // Signed distances: positive means the level was reached.
      const double open_stop = d * (stop_px - bar.open);
      const double open_target = d * (bar.open - target_px);
      const double worst = d > 0 ? bar.low : bar.high;
      const double best = d > 0 ? bar.high : bar.low;
      if (open_stop >= 0.0) {
        close_out(i, bar.open, ExitReason::stop);
      } else if (open_target >= 0.0) {
        close_out(i, bar.open, ExitReason::target);
      } else if (d * (stop_px - worst) >= 0.0) {
        close_out(i, stop_px, ExitReason::stop);
      } else if (d * (best - target_px) >= 0.0) {
        close_out(i, target_px, ExitReason::target);
      }
    }
    if (pos && i + 1 == n) close_out(i, bar.close, ExitReason::end_of_data);

    if (!pos && signals[i] != Signal::flat && i + 2 < n) pending_entry = signals[i];
    if (pos && opts.exit_on_flip && i + 1 < n &&
        static_cast<double>(static_cast<int>(signals[i])) == -pos->dir) {
      pending_flip = true;
    }

    equity[i] = realized;
    if (pos) equity[i] += pos->dir * (bar.close - pos->entry_price) * per_point - instrument.commission;
  }
  return compute_stats(trades, equity, dates, opts.initial_capital);
}

}  // namespace ssm
