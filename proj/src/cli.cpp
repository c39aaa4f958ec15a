#include "ssm/cli.hpp"

#include "ssm/bars.hpp"
#include "ssm/calibrate.hpp"
#include "ssm/error.hpp"
#include "ssm/kalman.hpp"
#include "ssm/report_io.hpp"
#include "ssm/smoother.hpp"

#include <fstream>
#include <functional>
#include <iostream>
#include <set>

namespace ssm {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::pair<std::string, std::string>>& config_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"data_path", "bars CSV (date,open,high,low,close)"},
      {"output_dir", "directory for every output file"},
      {"split_fraction", "train share of the bars, 0 < f < 1 (train side floored)"},
      {"params_path", "optional fitted_params.json overriding model/strategy/ma"},
      {"model.id", "0 scalar [F,q,r,P0], 1..4 model table"},
      {"model.p", "parameter vector p_1..p_m"},
      {"model.dt", "time step of models 1 and 2"},
      {"strategy.signal_offset", "KF signal dead zone mu, price units"},
      {"strategy.profit_target_ticks", "KF profit target, ticks"},
      {"strategy.stop_loss_ticks", "KF stop loss, ticks"},
      {"ma.short_period", "fast SMA length"},
      {"ma.long_period", "slow SMA length"},
      {"ma.offset", "crossover offset, price units"},
      {"ma.rule", "literal | symmetric short-entry rule"},
      {"ma.profit_target_ticks", "MA profit target, ticks"},
      {"ma.stop_loss_ticks", "MA stop loss, ticks"},
      {"instrument.tick_size", "price units per tick"},
      {"instrument.tick_value", "currency per tick per contract"},
      {"instrument.commission", "currency per side"},
      {"backtest.exit_on_flip", "exit at next open on an opposite signal"},
      {"backtest.initial_capital", "capital base for percentage statistics"},
      {"cmaes.lambda", "population size (default 4 + floor(3 ln n))"},
      {"cmaes.max_iter", "CMA-ES generations"},
      {"cmaes.seed", "seed for every random draw (--seed overrides)"},
      {"cmaes.penalty_weight", "L1 weight on model parameters"},
      {"cmaes.sigma", "initial step size in scaled coordinates"},
      {"cmaes.threads", "parallel objective evaluations"},
      {"em.max_iter", "EM iterations"},
      {"em.tol", "stop when |delta loglik| < tol"},
      {"em.source", "smoothed | filtered E-step"},
      {"em.mstep", "exact | point_estimate"},
      {"smooth.fusion", "also run the two-filter smoother and compare"},
  };
  return keys;
}

namespace {

template <typename T>
T get(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw Error("config key " + key + " has the wrong type");
  }
}

void check_keys(const json& obj, const std::string& prefix) {
  if (!obj.is_object()) throw Error("config section " + prefix + " must be an object");
  static const std::set<std::string> known = [] {
    std::set<std::string> s;
    for (const auto& [k, v] : config_keys()) s.insert(k);
    return s;
  }();
  for (const auto& [k, v] : obj.items()) {
    const std::string full = prefix.empty() ? k : prefix + "." + k;
    const bool is_section = prefix.empty() && v.is_object();
    if (!is_section && !known.count(full)) throw Error("unknown config key " + full);
  }
}

void apply_model(const json& j, ModelParams& m) {
  check_keys(j, "model");
  if (j.contains("id")) m.model_id = get<int>(j["id"], "model.id");
  if (j.contains("p")) m.p = get<std::vector<double>>(j["p"], "model.p");
  if (j.contains("dt")) m.dt = get<double>(j["dt"], "model.dt");
}

void apply_strategy(const json& j, StrategyParams& s) {
  check_keys(j, "strategy");
  if (j.contains("signal_offset")) s.signal_offset = get<double>(j["signal_offset"], "strategy.signal_offset");
  if (j.contains("profit_target_ticks")) {
    s.profit_target_ticks = get<int>(j["profit_target_ticks"], "strategy.profit_target_ticks");
  }
  if (j.contains("stop_loss_ticks")) s.stop_loss_ticks = get<int>(j["stop_loss_ticks"], "strategy.stop_loss_ticks");
}

void apply_ma(const json& j, MaParams& m) {
  check_keys(j, "ma");
  if (j.contains("short_period")) m.short_period = get<std::size_t>(j["short_period"], "ma.short_period");
  if (j.contains("long_period")) m.long_period = get<std::size_t>(j["long_period"], "ma.long_period");
  if (j.contains("offset")) m.offset = get<double>(j["offset"], "ma.offset");
  if (j.contains("rule")) {
    const auto rule = get<std::string>(j["rule"], "ma.rule");
    if (rule == "literal") {
      m.rule = MaRule::literal;
    } else if (rule == "symmetric") {
      m.rule = MaRule::symmetric;
    } else {
      throw Error("ma.rule must be literal or symmetric");
    }
  }
  if (j.contains("profit_target_ticks")) m.profit_target_ticks = get<int>(j["profit_target_ticks"], "ma.profit_target_ticks");
  if (j.contains("stop_loss_ticks")) m.stop_loss_ticks = get<int>(j["stop_loss_ticks"], "ma.stop_loss_ticks");
}

json model_json(const ModelParams& m) { return {{"id", m.model_id}, {"p", m.p}, {"dt", m.dt}}; }

json strategy_json(const StrategyParams& s) {
  return {{"signal_offset", s.signal_offset},
          {"profit_target_ticks", s.profit_target_ticks},
          {"stop_loss_ticks", s.stop_loss_ticks}};
}

json ma_json(const MaParams& m) {
  return {{"short_period", m.short_period},
          {"long_period", m.long_period},
          {"offset", m.offset},
          {"rule", m.rule == MaRule::literal ? "literal" : "symmetric"},
          {"profit_target_ticks", m.profit_target_ticks},
          {"stop_loss_ticks", m.stop_loss_ticks}};
}

void validate(const Config& c) {
  if (!(c.split_fraction > 0.0 && c.split_fraction < 1.0)) throw Error("split_fraction must lie in (0, 1)");
  if (!(c.instrument.tick_size > 0.0) || !(c.instrument.tick_value > 0.0) || c.instrument.commission < 0.0) {
    throw Error("instrument.tick_size and tick_value must be positive, commission non-negative");
  }
  if (c.strategy.profit_target_ticks < 1 || c.strategy.stop_loss_ticks < 1 ||
      c.ma.profit_target_ticks < 1 || c.ma.stop_loss_ticks < 1) {
    throw Error("targets and stops must be at least one tick");
  }
  if (c.ma.short_period < 1 || c.ma.long_period < c.ma.short_period) {
    throw Error("ma periods need 1 <= short_period <= long_period");
  }
  if (c.em.tol < 0.0 || !(c.cmaes.sigma > 0.0)) throw Error("em.tol must be >= 0 and cmaes.sigma > 0");
  if (!(c.backtest.initial_capital > 0.0)) throw Error("backtest.initial_capital must be positive");
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  return p.empty() || p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

Config parse_config(const json& j, const fs::path& base_dir) {
  check_keys(j, "");
  Config c;
  for (const auto& [key, value] : j.items()) {
    if (key == "model") {
      apply_model(value, c.model);
    } else if (key == "strategy") {
      apply_strategy(value, c.strategy);
    } else if (key == "ma") {
      apply_ma(value, c.ma);
    } else if (key == "instrument") {
      check_keys(value, key);
      if (value.contains("tick_size")) c.instrument.tick_size = get<double>(value["tick_size"], "instrument.tick_size");
      if (value.contains("tick_value")) c.instrument.tick_value = get<double>(value["tick_value"], "instrument.tick_value");
      if (value.contains("commission")) c.instrument.commission = get<double>(value["commission"], "instrument.commission");
    } else if (key == "backtest") {
      check_keys(value, key);
      if (value.contains("exit_on_flip")) c.backtest.exit_on_flip = get<bool>(value["exit_on_flip"], "backtest.exit_on_flip");
      if (value.contains("initial_capital")) {
        c.backtest.initial_capital = get<double>(value["initial_capital"], "backtest.initial_capital");
      }
    } else if (key == "cmaes") {
      check_keys(value, key);
      if (value.contains("lambda")) c.cmaes.lambda = get<std::size_t>(value["lambda"], "cmaes.lambda");
      if (value.contains("max_iter")) c.cmaes.max_iter = get<std::size_t>(value["max_iter"], "cmaes.max_iter");
      if (value.contains("seed")) c.cmaes.seed = get<std::uint64_t>(value["seed"], "cmaes.seed");
      if (value.contains("penalty_weight")) c.cmaes.penalty_weight = get<double>(value["penalty_weight"], "cmaes.penalty_weight");
      if (value.contains("sigma")) c.cmaes.sigma = get<double>(value["sigma"], "cmaes.sigma");
      if (value.contains("threads")) c.cmaes.threads = get<std::size_t>(value["threads"], "cmaes.threads");
    } else if (key == "em") {
      check_keys(value, key);
      if (value.contains("max_iter")) c.em.max_iter = get<std::size_t>(value["max_iter"], "em.max_iter");
      if (value.contains("tol")) c.em.tol = get<double>(value["tol"], "em.tol");
      if (value.contains("source")) {
        const auto s = get<std::string>(value["source"], "em.source");
        if (s != "smoothed" && s != "filtered") throw Error("em.source must be smoothed or filtered");
        c.em.source = s == "smoothed" ? EStepSource::smoothed : EStepSource::filtered;
      }
      if (value.contains("mstep")) {
        const auto s = get<std::string>(value["mstep"], "em.mstep");
        if (s != "exact" && s != "point_estimate") throw Error("em.mstep must be exact or point_estimate");
        c.em.mstep = s == "exact" ? MStepForm::exact : MStepForm::point_estimate;
      }
    } else if (key == "smooth") {
      check_keys(value, key);
      if (value.contains("fusion")) c.fusion = get<bool>(value["fusion"], "smooth.fusion");
    } else if (key == "data_path") {
      c.data_path = resolve(get<std::string>(value, key), base_dir);
    } else if (key == "params_path") {
      c.params_path = resolve(get<std::string>(value, key), base_dir);
    } else if (key == "output_dir") {
      c.output_dir = resolve(get<std::string>(value, key), base_dir);
    } else if (key == "split_fraction") {
      c.split_fraction = get<double>(value, key);
    } else {
      throw Error("unknown config key " + key);
    }
  }
  c.strategy.model = c.model;
  validate(c);
  return c;
}

Config load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j, path.parent_path());
}

LgssmSpec config_spec(const Config& cfg) {
  if (cfg.model.model_id != 0) return build_model(cfg.model);
  const auto& p = cfg.model.p;
  if (p.size() != 4) throw ParamArity("model 0 takes 4 parameters [F, q, r, P0], got " + std::to_string(p.size()));
  if (!(p[1] >= 0.0) || !(p[2] > 0.0) || !(p[3] >= 0.0)) {
    throw InvalidModel("model 0 needs q >= 0, r > 0, P0 >= 0");
  }
  EmOptions opts;
  opts.prior = Gaussian(Vector::Zero(1), Matrix::Constant(1, 1, p[3]));
  return scalar_spec(ScalarTheta{p[0], p[1], p[2]}, opts);
}

namespace {

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  body(out);
  if (!out) throw Error("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) {
  write_file(path, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

int guarded(const char* name, const std::function<int()>& body) {
  try {
    return body();
  } catch (const UnsupportedModel& e) {
    std::cerr << name << ": unsupported: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParamArity& e) {
    std::cerr << name << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidModel& e) {
    std::cerr << name << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << name << ": " << e.what() << '\n';
    return kExitData;
  }
}

struct Loaded {
  std::vector<Bar> bars;
  std::vector<Vector> obs;
};

Loaded load_data(const Config& cfg) {
  if (cfg.data_path.empty()) throw Error("data_path is not set");
  if (!fs::exists(cfg.data_path)) throw Error("data file not found: " + cfg.data_path.string());
  Loaded d;
  d.bars = load_bars(cfg.data_path);
  if (d.bars.empty()) throw Error("data file has no bars: " + cfg.data_path.string());
  for (const Bar& b : d.bars) d.obs.push_back(Vector::Constant(1, b.close));
  return d;
}

LgssmSpec anchored_spec(const Config& cfg, const std::vector<Vector>& obs) {
  return anchor_initial_state(config_spec(cfg), obs.front());
}

void print_notes(const LgssmSpec& spec) {
  for (const auto& n : spec.notes) std::cerr << "note: " << n << '\n';
}

}  // namespace

int cmd_filter(const Config& cfg) {
  return guarded("filter", [&] {
    const Loaded d = load_data(cfg);
    const LgssmSpec spec = anchored_spec(cfg, d.obs);
    print_notes(spec);
    const FilterResult res = filter(spec, d.obs);
    fs::create_directories(cfg.output_dir);
    write_file(cfg.output_dir / "filter.csv", [&](std::ostream& o) { write_filter_csv(o, res); });
    write_json(cfg.output_dir / "filter_summary.json",
               {{"n_steps", res.steps.size()},
                {"total_loglik", res.total_loglik},
                {"notes", spec.notes}});
    std::cout << "steps " << res.steps.size() << " total_loglik " << format_number(res.total_loglik) << '\n';
    return kExitOk;
  });
}

int cmd_smooth(const Config& cfg) {
  return guarded("smooth", [&] {
    const Loaded d = load_data(cfg);
    const LgssmSpec spec = anchored_spec(cfg, d.obs);
    print_notes(spec);
    const FilterResult fwd = filter(spec, d.obs);
    const auto rts = rts_smooth(fwd, spec);
    std::vector<Gaussian> fused;
    if (cfg.fusion) fused = two_filter_smooth(spec, d.obs);
    fs::create_directories(cfg.output_dir);
    write_file(cfg.output_dir / "smooth.csv",
               [&](std::ostream& o) { write_smooth_csv(o, rts, cfg.fusion ? &fused : nullptr); });
    json summary = {{"n_steps", rts.size()}, {"total_loglik", fwd.total_loglik}, {"notes", spec.notes}};
    if (cfg.fusion) {
      double mean_gap = 0.0;
      double cov_gap = 0.0;
      for (std::size_t i = 0; i < rts.size(); ++i) {
        mean_gap = std::max(mean_gap, (rts[i].x_smooth - fused[i].mean).cwiseAbs().maxCoeff());
        cov_gap = std::max(cov_gap, (rts[i].p_smooth - fused[i].cov).cwiseAbs().maxCoeff());
      }
      summary["rts_vs_fusion_max_mean_diff"] = mean_gap;
      summary["rts_vs_fusion_max_cov_diff"] = cov_gap;
      std::cout << "rts vs two-filter: max |mean diff| " << format_number(mean_gap)
                << ", max |cov diff| " << format_number(cov_gap) << '\n';
    }
    write_json(cfg.output_dir / "smooth_summary.json", summary);
    std::cout << "steps " << rts.size() << '\n';
    return kExitOk;
  });
}

namespace {

CalibrationOptions calibration_options(const Config& cfg, std::uint64_t seed_offset) {
  CalibrationOptions o;
  o.penalty_weight = cfg.cmaes.penalty_weight;
  o.init_sigma = cfg.cmaes.sigma;
  o.cmaes.lambda = cfg.cmaes.lambda;
  o.cmaes.max_iter = cfg.cmaes.max_iter;
  o.cmaes.seed = cfg.cmaes.seed + seed_offset;
  o.cmaes.threads = cfg.cmaes.threads;
  o.backtest = cfg.backtest;
  return o;
}

}  // namespace

int cmd_fit(const Config& cfg, const std::string& method) {
  return guarded("fit", [&] {
    if (method != "em" && method != "cmaes") {
      std::cerr << "fit: --method must be em or cmaes\n";
      return static_cast<int>(kExitUsage);
    }
    if (method == "em" && cfg.model.model_id != 0) {
      throw UnsupportedModel("EM needs the scalar model (model.id 0); model " +
                             std::to_string(cfg.model.model_id) + " has a 2-dimensional state");
    }
    const Loaded d = load_data(cfg);
    fs::create_directories(cfg.output_dir);
    if (method == "em") {
      const LgssmSpec spec = anchored_spec(cfg, d.obs);
      EmOptions opts;
      opts.max_iter = cfg.em.max_iter;
      opts.tol = cfg.em.tol;
      opts.source = cfg.em.source;
      opts.mstep = cfg.em.mstep;
      const EmState st = em_fit(spec, d.obs, opts);
      ModelParams fitted = cfg.model;
      fitted.p = {st.theta.f, st.theta.q, st.theta.r, cfg.model.p[3]};
      write_json(cfg.output_dir / "fitted_params.json",
                 {{"model", model_json(fitted)},
                  {"em", {{"iterations", st.iteration},
                          {"converged", st.converged},
                          {"monotone", st.monotone},
                          {"degenerate", st.degenerate},
                          {"final_loglik", st.loglik_history.back()}}}});
      write_file(cfg.output_dir / "fit_trace.csv", [&](std::ostream& o) { write_fit_trace_csv(o, st); });
      std::cout << "em: " << st.iteration << " iterations, F " << format_number(st.theta.f) << ", q "
                << format_number(st.theta.q) << ", r " << format_number(st.theta.r) << '\n';
      std::cout << "loglik trace monotone: " << (st.monotone ? "yes" : "no") << '\n';
      if (st.degenerate) std::cout << "warning: variance floor applied (degenerate data)\n";
      return static_cast<int>(kExitOk);
    }

    const TrainTest split = split_train_test(d.bars, cfg.split_fraction);
    StrategyParams start = cfg.strategy;
    start.model = cfg.model;
    const KfCalibration kf = calibrate_kf(split.train, start, cfg.instrument, calibration_options(cfg, 0));
    const MaCalibration ma = calibrate_ma(split.train, cfg.ma, cfg.instrument, calibration_options(cfg, 1));
    write_json(cfg.output_dir / "fitted_params.json",
               {{"model", model_json(kf.params.model)},
                {"strategy", strategy_json(kf.params)},
                {"ma", ma_json(ma.params)},
                {"train_sharpe", {{"kf", kf.train.sharpe}, {"ma", ma.train.sharpe}}}});
    write_file(cfg.output_dir / "fit_trace.csv", [&](std::ostream& o) { write_fit_trace_csv(o, kf.search); });
    write_file(cfg.output_dir / "fit_trace_ma.csv", [&](std::ostream& o) { write_fit_trace_csv(o, ma.search); });
    std::cout << "cmaes: kf train sharpe " << format_number(kf.train.sharpe) << ", ma train sharpe "
              << format_number(ma.train.sharpe) << '\n';
    return static_cast<int>(kExitOk);
  });
}

namespace {

void emit_report(const fs::path& dir, const std::string& stem, const BacktestReport& r) {
  write_file(dir / (stem + "_report.csv"), [&](std::ostream& o) { write_report_csv(o, r); });
  write_json(dir / (stem + "_report.json"), report_json(r));
  write_file(dir / (stem + "_equity.csv"), [&](std::ostream& o) { write_equity_csv(o, r); });
  write_file(dir / (stem + "_blotter.csv"), [&](std::ostream& o) { write_blotter_csv(o, r); });
}

Config with_fitted(const Config& cfg) {
  if (cfg.params_path.empty()) return cfg;
  std::ifstream in(cfg.params_path);
  if (!in) throw Error("cannot open params file " + cfg.params_path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("params file " + cfg.params_path.string() + " is not valid JSON: " + e.what());
  }
  Config out = cfg;
  if (j.contains("model")) apply_model(j["model"], out.model);
  if (j.contains("strategy")) apply_strategy(j["strategy"], out.strategy);
  if (j.contains("ma")) apply_ma(j["ma"], out.ma);
  out.strategy.model = out.model;
  validate(out);
  return out;
}

}  // namespace

int cmd_backtest(const Config& base, bool compare) {
  return guarded("backtest", [&] {
    const Config cfg = with_fitted(base);
    const Loaded d = load_data(cfg);
    const TrainTest split = split_train_test(d.bars, cfg.split_fraction);
    const LgssmSpec spec = config_spec(cfg);
    print_notes(spec);
    fs::create_directories(cfg.output_dir);

    auto run_kf = [&](const std::vector<Bar>& bars) {
      const auto signals = kf_trend_signals(bars, spec, cfg.strategy.signal_offset);
      return run_backtest(bars, signals, cfg.instrument, cfg.strategy.profit_target_ticks,
                          cfg.strategy.stop_loss_ticks, cfg.backtest);
    };
    auto run_ma = [&](const std::vector<Bar>& bars) {
      const auto signals = ma_crossover_signals(bars, cfg.ma.short_period, cfg.ma.long_period,
                                                cfg.ma.offset, cfg.ma.rule);
      return run_backtest(bars, signals, cfg.instrument, cfg.ma.profit_target_ticks,
                          cfg.ma.stop_loss_ticks, cfg.backtest);
    };

    const BacktestReport kf_train = run_kf(split.train);
    const BacktestReport kf_test = run_kf(split.test);
    emit_report(cfg.output_dir, "kf_train", kf_train);
    emit_report(cfg.output_dir, "kf_test", kf_test);
    std::cout << "kf: train bars " << kf_train.n_bars << ", test bars " << kf_test.n_bars
              << ", test net " << format_number(kf_test.net_profit) << ", test sharpe "
              << format_number(kf_test.sharpe) << '\n';
    if (compare) {
      const BacktestReport ma_train = run_ma(split.train);
      const BacktestReport ma_test = run_ma(split.test);
      emit_report(cfg.output_dir, "ma_train", ma_train);
      emit_report(cfg.output_dir, "ma_test", ma_test);
      const std::vector<ComparisonRow> rows = {{"MA Cross over", ma_test, ma_train},
                                               {"Kalman filter", kf_test, kf_train}};
      write_file(cfg.output_dir / "comparison.csv", [&](std::ostream& o) { write_comparison_csv(o, rows); });
      std::cout << "ma: test net " << format_number(ma_test.net_profit) << ", test sharpe "
                << format_number(ma_test.sharpe) << '\n';
    }
    return static_cast<int>(kExitOk);
  });
}

}  // namespace ssm
