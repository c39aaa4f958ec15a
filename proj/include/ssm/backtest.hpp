#pragma once

#include "ssm/bars.hpp"
#include "ssm/strategy.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace ssm {

struct InstrumentSpec {
  double tick_size = 0.25;
  double tick_value = 12.5;
  double commission = 1.55;  // per side
};

enum class ExitReason { target, stop, signal_flip, end_of_data };

std::string_view exit_reason_name(ExitReason r);

struct Trade {
  Signal direction = Signal::buy;
  Date entry_time;
  Date exit_time;
  double entry_price = 0.0;
  double exit_price = 0.0;
  ExitReason exit_reason = ExitReason::end_of_data;
  double gross = 0.0;  // before commission
  double pnl = 0.0;    // after both sides of commission
  std::size_t bars_held = 0;
  std::size_t entry_index = 0;
  std::size_t exit_index = 0;
};

struct BacktestOptions {
  bool exit_on_flip = false;
  double initial_capital = 100000.0;
};

/// Performance summary. Money fields are in currency; *_pct fields and
/// annualized_vol are percentages of initial capital. Ratios with an empty
/// denominator are reported as +inf (profit_factor, recovery_factor,
/// avg_win_over_avg_loss) when the numerator is positive, else 0.
struct BacktestReport {
  double net_profit = 0.0;
  double gross_profit = 0.0;
  double gross_loss = 0.0;
  std::size_t n_trades = 0;
  double avg_trade = 0.0;
  double total_net_pct = 0.0;
  double annualized_net_pct = 0.0;
  double annualized_vol = 0.0;
  double sharpe = 0.0;
  double sortino = 0.0;
  double max_drawdown = 0.0;
  double recovery_factor = 0.0;
  double percent_profitable = 0.0;
  double profit_factor = 0.0;
  std::size_t n_winners = 0;
  double avg_winner = 0.0;
  double largest_winner = 0.0;
  std::size_t max_consec_winners = 0;
  std::size_t n_losers = 0;
  double avg_loser = 0.0;
  double largest_loser = 0.0;
  std::size_t max_consec_losers = 0;
  double avg_win_over_avg_loss = 0.0;
  double trades_per_day = 0.0;
  double avg_bars_in_trade = 0.0;
  double commission_total = 0.0;
  double time_to_recover_days = 0.0;
  /// Returns had zero variance, so sharpe (and sortino) were set to 0.
  bool sharpe_degenerate = false;
  std::size_t n_bars = 0;
  std::vector<double> equity_curve;
  std::vector<Date> dates;
  std::vector<Trade> trades;
};

/// Simulates one contract at a time. A signal on bar i enters at the open of
/// bar i+1 (never on the final bar). From the bar after entry, each bar is
/// checked for stop then target; a gap through either fills at the open.
/// A position still open on the final bar exits at its close. Equity is the
/// cumulative P&L marked to each close, with the entry commission booked at
/// entry.
BacktestReport run_backtest(std::span<const Bar> bars, std::span<const Signal> signals,
                            const InstrumentSpec& instrument, int target_ticks, int stop_ticks,
                            const BacktestOptions& opts = {});

/// Fills every statistic from the trades and a per-bar equity curve.
/// Daily returns are equity changes over (initial_capital + previous equity),
/// annualized with 252 trading days.
BacktestReport compute_stats(std::span<const Trade> trades, std::span<const double> equity_curve,
                             std::span<const Date> calendar, double initial_capital = 100000.0);

}  // namespace ssm
