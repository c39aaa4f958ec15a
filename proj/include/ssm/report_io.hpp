#pragma once

#include "ssm/backtest.hpp"
#include "ssm/cmaes.hpp"
#include "ssm/em.hpp"
#include "ssm/kalman.hpp"
#include "ssm/smoother.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace ssm {

/// Shortest round-tripping text for a double; "inf", "-inf", "nan" otherwise.
std::string format_number(double v);

void write_filter_csv(std::ostream& out, const FilterResult& result);

/// RTS marginals, with fused two-filter marginals alongside when given.
void write_smooth_csv(std::ostream& out, const std::vector<SmoothStep>& rts,
                      const std::vector<Gaussian>* fused = nullptr);

/// Flat "key,value" rows of every scalar statistic.
void write_report_csv(std::ostream& out, const BacktestReport& report);
nlohmann::json report_json(const BacktestReport& report);

void write_equity_csv(std::ostream& out, const BacktestReport& report);
void write_blotter_csv(std::ostream& out, const BacktestReport& report);

/// iteration,best_f,sigma,loglik with the unused column left empty.
void write_fit_trace_csv(std::ostream& out, const CmaesResult& result);
void write_fit_trace_csv(std::ostream& out, const EmState& state);

struct ComparisonRow {
  std::string algo;
  BacktestReport test;
  BacktestReport train;
};

/// Side-by-side strategy table: test-period net profit, recovery factor,
/// profit factor, max drawdown, Sharpe, trade count, percent profitable, and
/// the training-period net profit.
void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows);

}  // namespace ssm
