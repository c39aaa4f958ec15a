#include "ssm/report_io.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <utility>

namespace ssm {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

using Field = std::pair<const char*, double>;

std::vector<Field> scalar_fields(const BacktestReport& r) {
  auto n = [](std::size_t v) { return static_cast<double>(v); };
  return {
      {"net_profit", r.net_profit},
      {"gross_profit", r.gross_profit},
      {"gross_loss", r.gross_loss},
      {"n_trades", n(r.n_trades)},
      {"avg_trade", r.avg_trade},
      {"total_net_pct", r.total_net_pct},
      {"annualized_net_pct", r.annualized_net_pct},
      {"annualized_vol", r.annualized_vol},
      {"sharpe", r.sharpe},
      {"sortino", r.sortino},
      {"max_drawdown", r.max_drawdown},
      {"recovery_factor", r.recovery_factor},
      {"percent_profitable", r.percent_profitable},
      {"profit_factor", r.profit_factor},
      {"n_winners", n(r.n_winners)},
      {"avg_winner", r.avg_winner},
      {"largest_winner", r.largest_winner},
      {"max_consec_winners", n(r.max_consec_winners)},
      {"n_losers", n(r.n_losers)},
      {"avg_loser", r.avg_loser},
      {"largest_loser", r.largest_loser},
      {"max_consec_losers", n(r.max_consec_losers)},
      {"avg_win_over_avg_loss", r.avg_win_over_avg_loss},
      {"trades_per_day", r.trades_per_day},
      {"avg_bars_in_trade", r.avg_bars_in_trade},
      {"commission_total", r.commission_total},
      {"time_to_recover_days", r.time_to_recover_days},
      {"sharpe_degenerate", r.sharpe_degenerate ? 1.0 : 0.0},
      {"n_bars", n(r.n_bars)},
  };
}

nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

void write_vector(std::ostream& out, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << format_number(v(i));
}

void write_diag(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) out << ',' << format_number(m(i, i));
}

void header_block(std::ostream& out, const char* prefix, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) out << ',' << prefix << i;
}

}  // namespace

void write_filter_csv(std::ostream& out, const FilterResult& result) {
  out << "t";
  if (!result.steps.empty()) {
    const auto& s0 = result.steps.front();
    header_block(out, "x_pred_", s0.x_pred.size());
    header_block(out, "x_post_", s0.x_post.size());
    header_block(out, "p_post_", s0.x_post.size());
    header_block(out, "innovation_", s0.innovation.size());
    header_block(out, "s_", s0.innovation.size());
  }
  out << ",loglik_increment\n";
  for (std::size_t i = 0; i < result.steps.size(); ++i) {
    const auto& s = result.steps[i];
    out << i + 1;
    write_vector(out, s.x_pred);
    write_vector(out, s.x_post);
    write_diag(out, s.p_post);
    write_vector(out, s.innovation);
    write_diag(out, s.s);
    out << ',' << format_number(s.loglik_increment) << '\n';
  }
}

void write_smooth_csv(std::ostream& out, const std::vector<SmoothStep>& rts,
                      const std::vector<Gaussian>* fused) {
  out << "t";
  if (!rts.empty()) {
    const Eigen::Index n = rts.front().x_smooth.size();
    header_block(out, "x_smooth_", n);
    header_block(out, "p_smooth_", n);
    if (fused) {
      header_block(out, "x_fused_", n);
      header_block(out, "p_fused_", n);
    }
  }
  out << '\n';
  for (std::size_t i = 0; i < rts.size(); ++i) {
    out << i + 1;
    write_vector(out, rts[i].x_smooth);
    write_diag(out, rts[i].p_smooth);
    if (fused) {
      write_vector(out, (*fused)[i].mean);
      write_diag(out, (*fused)[i].cov);
    }
    out << '\n';
  }
}

void write_report_csv(std::ostream& out, const BacktestReport& report) {
  out << "key,value\n";
  for (const auto& [key, value] : scalar_fields(report)) out << key << ',' << format_number(value) << '\n';
}

nlohmann::json report_json(const BacktestReport& report) {
  nlohmann::json j;
  nlohmann::json stats = nlohmann::json::object();
  for (const auto& [key, value] : scalar_fields(report)) stats[key] = json_number(value);
  j["statistics"] = stats;
  nlohmann::json trades = nlohmann::json::array();
  for (const Trade& t : report.trades) {
    trades.push_back({{"direction", signal_name(t.direction)},
                      {"entry_time", format_date(t.entry_time)},
                      {"exit_time", format_date(t.exit_time)},
                      {"entry_price", t.entry_price},
                      {"exit_price", t.exit_price},
                      {"exit_reason", exit_reason_name(t.exit_reason)},
                      {"pnl", t.pnl},
                      {"bars_held", t.bars_held}});
  }
  j["trades"] = trades;
  nlohmann::json equity = nlohmann::json::array();
  for (std::size_t i = 0; i < report.equity_curve.size(); ++i) {
    equity.push_back({{"date", format_date(report.dates[i])}, {"equity", report.equity_curve[i]}});
  }
  j["equity_curve"] = equity;
  return j;
}

void write_equity_csv(std::ostream& out, const BacktestReport& report) {
  out << "date,equity\n";
  for (std::size_t i = 0; i < report.equity_curve.size(); ++i) {
    out << format_date(report.dates[i]) << ',' << format_number(report.equity_curve[i]) << '\n';
  }
}

void write_blotter_csv(std::ostream& out, const BacktestReport& report) {
  out << "entry_time,exit_time,direction,entry_price,exit_price,exit_reason,pnl\n";
  for (const Trade& t : report.trades) {
    out << format_date(t.entry_time) << ',' << format_date(t.exit_time) << ','
        << signal_name(t.direction) << ',' << format_number(t.entry_price) << ','
        << format_number(t.exit_price) << ',' << exit_reason_name(t.exit_reason) << ','
        << format_number(t.pnl) << '\n';
  }
}

void write_fit_trace_csv(std::ostream& out, const CmaesResult& result) {
  out << "iteration,best_f,sigma,loglik\n";
  for (const auto& it : result.trace) {
    out << it.k << ',' << format_number(it.best_f) << ',' << format_number(it.sigma) << ",\n";
  }
}

void write_fit_trace_csv(std::ostream& out, const EmState& state) {
  out << "iteration,best_f,sigma,loglik\n";
  for (std::size_t i = 0; i < state.loglik_history.size(); ++i) {
    out << i << ",,," << format_number(state.loglik_history[i]) << '\n';
  }
}

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  out << "algo,total_net_profit,recovery_factor,profit_factor,max_drawdown,sharpe,n_trades,"
         "percent_profitable,train_total_net_profit\n";
  for (const auto& row : rows) {
    const auto& t = row.test;
    out << row.algo << ',' << format_number(t.net_profit) << ',' << format_number(t.recovery_factor)
        << ',' << format_number(t.profit_factor) << ',' << format_number(t.max_drawdown) << ','
        << format_number(t.sharpe) << ',' << t.n_trades << ',' << format_number(t.percent_profitable)
        << ',' << format_number(row.train.net_profit) << '\n';
  }
}

}  // namespace ssm
