#include "ssm/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

std::string key_listing() {
  std::ostringstream os;
  os << "\nConfig keys (JSON document passed with --config):\n";
  for (const auto& [key, doc] : ssm::config_keys()) os << "  " << key << "  " << doc << '\n';
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ssmkit: linear-Gaussian state-space filtering, smoothing, fitting and backtests"};
  app.footer(key_listing());
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string output;
  bool compare = false;
  std::string method = "em";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--seed", seed, "overrides cmaes.seed");
    sub->add_option("--output", output, "overrides output_dir");
    sub->footer(key_listing());
  };
  CLI::App* filter = app.add_subcommand("filter", "run the Kalman filter over the closes");
  CLI::App* smooth = app.add_subcommand("smooth", "RTS smoother, optionally the two-filter smoother");
  CLI::App* fit = app.add_subcommand("fit", "fit parameters with EM or CMA-ES");
  CLI::App* backtest = app.add_subcommand("backtest", "train/test backtest of the trend strategy");
  for (CLI::App* sub : {filter, smooth, fit, backtest}) add_common(sub);
  fit->add_option("--method", method, "em | cmaes")->check(CLI::IsMember({"em", "cmaes"}));
  backtest->add_flag("--compare", compare, "also run the moving-average crossover");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : ssm::kExitUsage;
  }

  ssm::Config cfg;
  try {
    cfg = ssm::load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return std::filesystem::exists(config_path) ? ssm::kExitUsage : ssm::kExitData;
  }
  if (seed) cfg.cmaes.seed = *seed;
  if (!output.empty()) cfg.output_dir = output;

  if (filter->parsed()) return ssm::cmd_filter(cfg);
  if (smooth->parsed()) return ssm::cmd_smooth(cfg);
  if (fit->parsed()) return ssm::cmd_fit(cfg, method);
  return ssm::cmd_backtest(cfg, compare);
}
