#include "ssm/backtest.hpp"

#include "ssm/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ssm {

namespace {

constexpr double kTradingDays = 252.0;

double ratio_or_inf(double num, double den) {
  if (den != 0.0) return num / den;
  return num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

}  // namespace

BacktestReport compute_stats(std::span<const Trade> trades, std::span<const double> equity_curve,
                             std::span<const Date> calendar, double initial_capital) {
  if (calendar.size() != equity_curve.size()) {
    throw Error("compute_stats: calendar and equity curve differ in length");
  }
  if (!(initial_capital > 0.0)) throw Error("compute_stats: initial capital must be positive");
  BacktestReport r;
  r.n_bars = equity_curve.size();
  r.equity_curve.assign(equity_curve.begin(), equity_curve.end());
  r.dates.assign(calendar.begin(), calendar.end());
  r.trades.assign(trades.begin(), trades.end());
  r.n_trades = trades.size();

  double win_sum = 0.0;
  double loss_sum = 0.0;
  double bars_sum = 0.0;
  std::size_t run_win = 0;
  std::size_t run_loss = 0;
  for (const Trade& t : trades) {
    r.net_profit += t.pnl;
    if (t.gross > 0.0) r.gross_profit += t.gross;
    if (t.gross < 0.0) r.gross_loss += t.gross;
    r.commission_total += t.gross - t.pnl;
    bars_sum += static_cast<double>(t.bars_held);
    if (t.pnl > 0.0) {
      ++r.n_winners;
      win_sum += t.pnl;
      r.largest_winner = std::max(r.largest_winner, t.pnl);
      run_loss = 0;
      r.max_consec_winners = std::max(r.max_consec_winners, ++run_win);
    } else if (t.pnl < 0.0) {
      ++r.n_losers;
      loss_sum += t.pnl;
      r.largest_loser = std::min(r.largest_loser, t.pnl);
      run_win = 0;
      r.max_consec_losers = std::max(r.max_consec_losers, ++run_loss);
    } else {
      run_win = 0;
      run_loss = 0;
    }
  }
  if (r.n_trades > 0) {
    const double nt = static_cast<double>(r.n_trades);
    r.avg_trade = r.net_profit / nt;
    r.percent_profitable = 100.0 * static_cast<double>(r.n_winners) / nt;
    r.avg_bars_in_trade = bars_sum / nt;
  }
  if (r.n_winners > 0) r.avg_winner = win_sum / static_cast<double>(r.n_winners);
  if (r.n_losers > 0) r.avg_loser = loss_sum / static_cast<double>(r.n_losers);
  r.profit_factor = ratio_or_inf(r.gross_profit, std::abs(r.gross_loss));
  r.avg_win_over_avg_loss = ratio_or_inf(r.avg_winner, std::abs(r.avg_loser));
  if (r.n_bars > 0) r.trades_per_day = static_cast<double>(r.n_trades) / static_cast<double>(r.n_bars);

  r.total_net_pct = 100.0 * r.net_profit / initial_capital;
  if (r.n_bars > 0) {
    const double growth = 1.0 + r.net_profit / initial_capital;
    r.annualized_net_pct =
        growth > 0.0 ? 100.0 * (std::pow(growth, kTradingDays / static_cast<double>(r.n_bars)) - 1.0)
                     : -100.0;
  }

  // Daily returns, the first measured from the flat starting equity.
  std::vector<double> returns;
  returns.reserve(r.n_bars);
  double prev = 0.0;
  for (double e : equity_curve) {
    returns.push_back((e - prev) / (initial_capital + prev));
    prev = e;
  }
  if (returns.size() >= 2) {
    const double n = static_cast<double>(returns.size());
    double mean = 0.0;
    for (double x : returns) mean += x;
    mean /= n;
    double ss = 0.0;
    double down = 0.0;
    for (double x : returns) {
      ss += (x - mean) * (x - mean);
      if (x < 0.0) down += x * x;
    }
    const double sd = std::sqrt(ss / (n - 1.0));
    const double downside = std::sqrt(down / n);
    r.annualized_vol = 100.0 * sd * std::sqrt(kTradingDays);
    if (sd > 1e-15 * std::max(1.0, std::abs(mean))) {
      r.sharpe = mean / sd * std::sqrt(kTradingDays);
    } else {
      r.sharpe_degenerate = true;
    }
    if (downside > 0.0 && !r.sharpe_degenerate) r.sortino = mean / downside * std::sqrt(kTradingDays);
  } else {
    r.sharpe_degenerate = true;
  }

  // Drawdown against the running maximum, which starts at the flat equity 0.
  double peak = 0.0;
  std::size_t peak_index = 0;  // bar where the current peak was set
  bool underwater = false;
  double longest = 0.0;
  for (std::size_t i = 0; i < r.n_bars; ++i) {
    const double e = equity_curve[i];
    r.max_drawdown = std::min(r.max_drawdown, e - peak);
    if (e >= peak) {
      if (underwater) {
        longest = std::max(longest, static_cast<double>((calendar[i] - calendar[peak_index]).count()));
        underwater = false;
      }
      peak = e;
      peak_index = i;
    } else {
      underwater = true;
    }
  }
  if (underwater) {
    longest = std::max(longest,
                       static_cast<double>((calendar[r.n_bars - 1] - calendar[peak_index]).count()));
  }
  r.time_to_recover_days = longest;
  r.recovery_factor = ratio_or_inf(r.net_profit, std::abs(r.max_drawdown));
  return r;
}

}  // namespace ssm
