#pragma once

#include "ssm/backtest.hpp"
#include "ssm/em.hpp"
#include "ssm/strategy.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace ssm {

enum ExitCode : int { kExitOk = 0, kExitData = 1, kExitUsage = 2 };

/// Model id 0 selects the scalar model used by EM, with p = [F, q, r, P0].
struct Config {
  ModelParams model;
  StrategyParams strategy;
  MaParams ma{5, 20, 0.0, MaRule::literal, 20, 20};
  InstrumentSpec instrument;
  BacktestOptions backtest;
  std::filesystem::path data_path;
  std::filesystem::path params_path;  // optional fitted-parameter file
  double split_fraction = 0.5;
  struct {
    std::optional<std::size_t> lambda;
    std::size_t max_iter = 300;
    std::uint64_t seed = 1;
    double penalty_weight = 1e-3;
    double sigma = 0.3;
    std::size_t threads = 1;
  } cmaes;
  struct {
    std::size_t max_iter = 500;
    double tol = 1e-8;
    EStepSource source = EStepSource::smoothed;
    MStepForm mstep = MStepForm::exact;
  } em;
  bool fusion = false;  // smooth: also run the two-filter smoother
  std::filesystem::path output_dir = "out";
};

/// Every recognised key, dotted, with a one-line description.
const std::vector<std::pair<std::string, std::string>>& config_keys();

/// Parses a JSON config; unknown keys and bad values throw Error. Relative
/// paths resolve against `base_dir`.
Config parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
Config load_config(const std::filesystem::path& path);

/// The spec a subcommand filters with: model 0 gives the scalar model,
/// others come from build_model.
LgssmSpec config_spec(const Config& cfg);

int cmd_filter(const Config& cfg);
int cmd_smooth(const Config& cfg);
int cmd_fit(const Config& cfg, const std::string& method);
int cmd_backtest(const Config& cfg, bool compare);

}  // namespace ssm
