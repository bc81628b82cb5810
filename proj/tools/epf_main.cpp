// Command-line front end: data ingestion/generation, single experiment runs,
// strategy grids, training-amount sweeps, rolling re-calibration, DM grids,
// and report ensembling. Errors exit nonzero with a single line on stderr.

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "epf/experiments.hpp"
#include "epf/io.hpp"
#include "epf/timeseries.hpp"

namespace fs = std::filesystem;
using namespace epf;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;  // 0 = keep the config's seed
  int seeds = 1;
  int threads = 1;
};

RunSpec load_spec(const GlobalOpts& g) {
  if (g.config_path.empty())
    throw std::runtime_error("config error: --config is required");
  RunSpec spec = load_run_spec(g.config_path);
  if (g.seed != 0) spec.config.seed = g.seed;
  return spec;
}

std::string report_dir(const GlobalOpts& g, const EvaluationReport& rep) {
  return g.out_dir + "/" + rep.config.target_market + "/" +
         strategy_name(rep.config.strategy);
}

void do_run(const GlobalOpts& g) {
  RunSpec spec = load_spec(g);
  DataMap data = load_data(spec.data);
  std::vector<MetricsRow> rows;
  for (int i = 0; i < g.seeds; ++i) {
    ExperimentConfig cfg = spec.config;
    cfg.seed = spec.config.seed + static_cast<std::uint64_t>(i);
    EvaluationReport rep = run_strategy(cfg, data);
    std::string dir = report_dir(g, rep);
    if (g.seeds > 1) dir += "/seed" + std::to_string(cfg.seed);
    write_report_bundle(rep, dir);
    rows.push_back({rep.config.target_market, strategy_name(rep.config.strategy),
                    rep.metric_set});
    std::cout << rep.config.target_market << ' '
              << strategy_name(rep.config.strategy) << " seed=" << cfg.seed
              << " mae=" << format_double(rep.metric_set.mae)
              << " rmae=" << format_double(rep.metric_set.rmae) << '\n';
  }
  if (g.seeds > 1) {
    MetricSet mean;
    for (const MetricsRow& r : rows) {
      mean.mae += r.metric_set.mae;
      mean.rmse += r.metric_set.rmse;
      mean.smape += r.metric_set.smape;
      mean.rmae += r.metric_set.rmae;
    }
    double n = static_cast<double>(rows.size());
    mean.mae /= n;
    mean.rmse /= n;
    mean.smape /= n;
    mean.rmae /= n;
    rows.push_back({spec.config.target_market,
                    strategy_name(spec.config.strategy) + "_mean", mean});
  }
  fs::create_directories(g.out_dir);
  write_metrics_csv(rows, g.out_dir + "/run_metrics.csv");
}

void do_grid(const GlobalOpts& g) {
  RunSpec spec = load_spec(g);
  DataMap data = load_data(spec.data);
  std::vector<std::string> targets = spec.grid_markets;
  if (targets.empty())
    for (const auto& [id, series] : data) targets.push_back(id);
  GridResult grid = run_grid(spec.config, data, targets, all_strategies(), g.threads);
  std::vector<MetricsRow> rows;
  for (const EvaluationReport& rep : grid.reports) {
    write_report_bundle(rep, report_dir(g, rep));
    rows.push_back({rep.config.target_market, strategy_name(rep.config.strategy),
                    rep.metric_set});
  }
  write_metrics_csv(rows, g.out_dir + "/summary.csv");
  std::cout << "grid: " << targets.size() << " markets x "
            << all_strategies().size() << " strategies -> " << g.out_dir
            << "/summary.csv\n";
}

void do_sweep(const GlobalOpts& g, std::vector<double> fractions) {
  RunSpec spec = load_spec(g);
  DataMap data = load_data(spec.data);
  if (fractions.empty()) fractions = {0.1, 0.25, 0.5, 0.75, 1.0};
  auto rows = fraction_sweep(spec.config, data, fractions);
  fs::create_directories(g.out_dir);
  write_sweep_csv(rows, g.out_dir + "/sweep.csv");
  for (const FractionRow& r : rows)
    std::cout << "fraction=" << format_double(r.fraction)
              << " basic_mae=" << format_double(r.basic_mae)
              << " finetune_mae=" << format_double(r.finetune_mae)
              << " p=" << format_double(r.dm_p_value) << '\n';
}

void do_rolling(const GlobalOpts& g) {
  RunSpec spec = load_spec(g);
  spec.config.rolling.enabled = true;
  DataMap data = load_data(spec.data);
  EvaluationReport rep = rolling_recalibrate(spec.config, data);
  write_report_bundle(rep, report_dir(g, rep) + "_rolling");
  std::cout << rep.config.target_market << " rolling "
            << strategy_name(rep.config.strategy)
            << " fits=" << rep.model_fits
            << " mae=" << format_double(rep.metric_set.mae) << '\n';
}

void do_dm(const GlobalOpts& g, const std::string& grid_dir,
           std::vector<std::string> markets) {
  if (markets.empty()) {
    for (const auto& entry : fs::directory_iterator(grid_dir))
      if (entry.is_directory()) markets.push_back(entry.path().filename().string());
    std::sort(markets.begin(), markets.end());
  }
  if (markets.empty()) throw std::runtime_error("no market directories in '" + grid_dir + "'");
  fs::create_directories(g.out_dir);
  for (const std::string& market : markets) {
    std::vector<std::string> names;
    std::vector<EvaluationReport> reports;
    for (Strategy s : all_strategies()) {
      fs::path p = fs::path(grid_dir) / market / strategy_name(s) / "report.json";
      if (!fs::exists(p)) continue;
      names.push_back(strategy_name(s));
      reports.push_back(load_report_json(p.string()));
    }
    if (reports.size() < 2)
      throw std::runtime_error("need at least 2 reports for market '" + market + "'");
    std::vector<const ForecastPanel*> panels;
    for (const EvaluationReport& r : reports) panels.push_back(&r.panel);
    std::string out = g.out_dir + "/dm_" + market + ".csv";
    write_dm_grid_csv(names, panels, out);
    std::cout << "dm grid for " << market << " -> " << out << '\n';
  }
}

void do_ensemble(const GlobalOpts& g, const std::vector<std::string>& report_paths) {
  if (report_paths.size() < 2)
    throw std::runtime_error("ensemble needs at least 2 report files");
  std::vector<EvaluationReport> members;
  for (const std::string& p : report_paths) members.push_back(load_report_json(p));
  EvaluationReport rep = ensemble(members);
  write_report_bundle(rep, report_dir(g, rep) + "_ensemble");
  std::cout << "ensemble of " << members.size()
            << " reports: mae=" << format_double(rep.metric_set.mae)
            << " rmae=" << format_double(rep.metric_set.rmae) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Day-ahead electricity price forecasting with transfer learning"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "experiment config JSON");
  app.add_option("--seed", g.seed, "override the config seed (0 keeps it)");
  app.add_option("--out-dir", g.out_dir, "output directory");
  app.add_option("--threads", g.threads, "worker threads for grid cells");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "repair and re-emit a market CSV");
  std::string in_csv, market = "MKT", out_csv;
  ingest->add_option("--csv", in_csv, "input CSV path")->required();
  ingest->add_option("--market", market, "market id");
  ingest->add_option("--out", out_csv, "repaired CSV path");

  // synth
  auto* synth = app.add_subcommand("synth", "write synthetic market CSVs");
  SyntheticSpec syn;
  std::string syn_start;
  synth->add_option("--markets", syn.n_markets, "number of markets");
  synth->add_option("--days", syn.days, "days per market");
  synth->add_option("--correlation", syn.correlation, "cross-market correlation");
  synth->add_option("--noise", syn.noise_scale, "noise scale");
  synth->add_option("--start", syn_start, "start date YYYY-MM-DD");
  synth->add_option("--synth-seed", syn.seed, "generator seed");

  // describe
  auto* describe_cmd = app.add_subcommand("describe", "per-year price statistics");
  std::vector<std::string> describe_inputs;
  describe_cmd->add_option("--csv", describe_inputs, "market=path pairs")->required();

  // run / grid / sweep / rolling
  app.add_subcommand("run", "run one experiment config");
  app.add_subcommand("grid", "strategy x market matrix");
  auto* sweep = app.add_subcommand("sweep", "training-fraction ablation");
  std::vector<double> fractions;
  sweep->add_option("--fractions", fractions, "fractions in (0,1]");
  app.add_subcommand("rolling", "daily re-calibration run");

  // dm
  auto* dm = app.add_subcommand("dm", "pairwise DM p-value grids from stored reports");
  std::string dm_dir = "out";
  std::vector<std::string> dm_markets;
  dm->add_option("--dir", dm_dir, "grid output directory with market subdirs");
  dm->add_option("--market", dm_markets, "markets (default: all found)");

  // ensemble
  auto* ens = app.add_subcommand("ensemble", "average stored reports");
  std::vector<std::string> ens_reports;
  ens->add_option("--reports", ens_reports, "report.json paths")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) {
      HourlySeries s = ingest_csv(in_csv, market);
      if (!out_csv.empty()) emit_csv(s, out_csv);
      std::cout << market << ": " << s.length() << " hours from "
                << format_timestamp(s.start) << '\n';
    } else if (synth->parsed()) {
      if (g.seed != 0) syn.seed = g.seed;
      if (!syn_start.empty()) syn.start = parse_date(syn_start);
      fs::create_directories(g.out_dir);
      for (const HourlySeries& s : generate_synthetic(syn)) {
        std::string path = g.out_dir + "/" + s.market_id + ".csv";
        emit_csv(s, path);
        std::cout << s.market_id << " -> " << path << '\n';
      }
    } else if (describe_cmd->parsed()) {
      std::vector<std::pair<std::string, std::vector<YearStats>>> stats;
      for (const std::string& pair : describe_inputs) {
        auto eq = pair.find('=');
        if (eq == std::string::npos)
          throw std::runtime_error("expected market=path, got '" + pair + "'");
        std::string id = pair.substr(0, eq);
        stats.emplace_back(id, describe(ingest_csv(pair.substr(eq + 1), id)));
      }
      fs::create_directories(g.out_dir);
      std::string out = g.out_dir + "/describe.csv";
      write_describe_csv(stats, out);
      for (const auto& [id, years] : stats)
        for (const YearStats& y : years)
          std::cout << id << ' ' << y.year << " mean=" << format_double(y.mean)
                    << " std=" << format_double(y.stddev) << '\n';
      std::cout << "-> " << out << '\n';
    } else if (app.get_subcommand("run")->parsed()) {
      do_run(g);
    } else if (app.get_subcommand("grid")->parsed()) {
      do_grid(g);
    } else if (sweep->parsed()) {
      do_sweep(g, fractions);
    } else if (app.get_subcommand("rolling")->parsed()) {
      do_rolling(g);
    } else if (dm->parsed()) {
      do_dm(g, dm_dir, dm_markets);
    } else if (ens->parsed()) {
      do_ensemble(g, ens_reports);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
