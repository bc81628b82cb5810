#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "epf/experiments.hpp"
#include "epf/io.hpp"

using namespace epf;

namespace {

// Small but realistic setup: 4 correlated synthetic markets, ~5 weeks of
// training data, narrow network, short training budget.
DataMap tiny_data(int days = 40, double correlation = 0.9, std::uint64_t seed = 2013,
                  int n_markets = 4, double noise = 2.0) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.n_markets = n_markets;
  spec.days = days;
  spec.correlation = correlation;
  spec.noise_scale = noise;
  DataMap data;
  for (HourlySeries& s : generate_synthetic(spec)) {
    std::string id = s.market_id;
    data.emplace(std::move(id), std::move(s));
  }
  return data;
}

ExperimentConfig tiny_config(const DataMap& data, int train_days = 22,
                             int val_days = 9, int test_days = 9) {
  ExperimentConfig cfg;
  cfg.target_market = "M1";
  cfg.split = make_split_by_days(data.at("M1").start, train_days, val_days, test_days);
  cfg.hidden_dims = {32, 16};
  cfg.train_config.max_epochs = 30;
  cfg.train_config.patience = 6;
  cfg.train_config.batch_size = 32;
  cfg.train_config.learning_rate = 0.002;
  cfg.fine_tune_config.max_epochs = 30;
  cfg.seed = 71;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config validation catches strategy/source mismatches") {
  DataMap data = tiny_data(20);
  ExperimentConfig cfg = tiny_config(data, 10, 5, 5);
  cfg.strategy = Strategy::kBasic;
  cfg.source_markets = {"M2"};
  CHECK_THROWS_WITH_AS(run_strategy(cfg, data), doctest::Contains("config error"),
                       std::runtime_error);
  cfg.source_markets = {"M1"};
  cfg.strategy = Strategy::kPretrainFinetune;
  CHECK_THROWS_WITH_AS(run_strategy(cfg, data),
                       doctest::Contains("target market listed among sources"),
                       std::runtime_error);
  cfg.source_markets.clear();
  cfg.strategy = Strategy::kPretrainOnly;
  CHECK_THROWS_WITH_AS(run_strategy(cfg, data),
                       doctest::Contains("pretrain_only requires source markets"),
                       std::runtime_error);
  cfg.strategy = Strategy::kBasic;
  cfg.training_fraction = 0.0;
  CHECK_THROWS(run_strategy(cfg, data));
}

TEST_CASE("pretrain-finetune without sources degenerates to basic") {
  DataMap data = tiny_data();
  ExperimentConfig basic = tiny_config(data);
  basic.strategy = Strategy::kBasic;
  EvaluationReport rb = run_strategy(basic, data);

  ExperimentConfig pf = basic;
  pf.strategy = Strategy::kPretrainFinetune;
  pf.source_markets.clear();
  EvaluationReport rp = run_strategy(pf, data);

  CHECK(rp.panel.forecasts == rb.panel.forecasts);
  CHECK(rp.metric_set.mae == rb.metric_set.mae);
  CHECK(rp.model_fits == 1);
}

TEST_CASE("every strategy produces a self-verifying report") {
  DataMap data = tiny_data();
  for (Strategy s : all_strategies()) {
    ExperimentConfig cfg = tiny_config(data);
    cfg.strategy = s;
    if (strategy_uses_sources(s)) cfg.source_markets = {"M2", "M3"};
    EvaluationReport rep = run_strategy(cfg, data);
    CAPTURE(strategy_name(s));
    REQUIRE(rep.panel.n_days() == 9);
    MetricSet again = recompute_metrics(rep);
    CHECK(again.mae == rep.metric_set.mae);
    CHECK(again.rmse == rep.metric_set.rmse);
    CHECK(again.smape == rep.metric_set.smape);
    CHECK(again.rmae == rep.metric_set.rmae);
    // rMAE consistent with the MAE ratio
    double naive_mae = rep.metric_set.mae / rep.metric_set.rmae;
    MetricSet naive_self = metrics(rep.naive_panel, rep.naive_panel);
    CHECK(rep.metric_set.rmae ==
          doctest::Approx(rep.metric_set.mae /
                          (naive_self.mae / naive_self.rmae)).epsilon(1e-9));
    CHECK(naive_mae > 0.0);
  }
}

TEST_CASE("stored forecasts are price-unit values that survive the transform") {
  DataMap data = tiny_data();
  ExperimentConfig cfg = tiny_config(data);
  cfg.strategy = Strategy::kBasic;
  EvaluationReport rep = run_strategy(cfg, data);
  const HourlySeries& s = data.at("M1");
  std::size_t a = s.index_of(cfg.split.train_begin);
  std::size_t n = static_cast<std::size_t>(cfg.split.train_end - cfg.split.train_begin);
  TransformParams tx =
      TransformParams::fit(std::span<const double>(s.prices).subspan(a, n));
  for (double f : rep.panel.forecasts.data) {
    CHECK(std::isfinite(f));
    CHECK(std::abs(tx.inverse(tx.forward(f)) - f) <= 1e-9 * std::max(1.0, std::abs(f)));
  }
}

TEST_CASE("multi-task on identical markets stays close to basic") {
  // correlation 1 with shared noise: the four markets are the same task up
  // to a level offset that the per-market transform removes.
  DataMap data = tiny_data(60, 1.0, 99, 4, 2.0);
  ExperimentConfig cfg = tiny_config(data, 36, 12, 12);
  cfg.strategy = Strategy::kBasic;
  EvaluationReport basic = run_strategy(cfg, data);
  cfg.strategy = Strategy::kMultiTask;
  cfg.source_markets = {"M2", "M3", "M4"};
  EvaluationReport mt = run_strategy(cfg, data);
  CHECK(std::abs(mt.metric_set.mae - basic.metric_set.mae) <
        0.05 * basic.metric_set.mae);
}

TEST_CASE("source subset selection") {
  SUBCASE("a single candidate is selected outright") {
    DataMap data = tiny_data(30, 0.9, 7, 2);
    ExperimentConfig cfg = tiny_config(data, 15, 7, 8);
    cfg.strategy = Strategy::kPretrainOnly;
    cfg.source_markets = {"M2"};
    auto [best, scores] = select_sources(cfg, data);
    CHECK(best == std::vector<std::string>{"M2"});
    CHECK(scores.size() == 1);
  }
  SUBCASE("three candidates enumerate seven subsets") {
    DataMap data = tiny_data(30, 0.9, 7, 4);
    ExperimentConfig cfg = tiny_config(data, 15, 7, 8);
    cfg.strategy = Strategy::kPretrainOnly;
    cfg.auto_sources = true;
    auto [best, scores] = select_sources(cfg, data);
    CHECK(scores.size() == 7);
    CHECK(!best.empty());
  }
  SUBCASE("an identical source beats an anti-correlated one") {
    DataMap data = tiny_data(30, 0.9, 19, 1, 2.0);
    HourlySeries target = data.at("M1");
    HourlySeries twin = target;
    twin.market_id = "TWIN";
    HourlySeries anti = target;
    anti.market_id = "ANTI";
    double mean = 0.0;
    for (double p : anti.prices) mean += p;
    mean /= static_cast<double>(anti.prices.size());
    for (double& p : anti.prices) p = 2.0 * mean - p;
    data.emplace("TWIN", std::move(twin));
    data.emplace("ANTI", std::move(anti));

    ExperimentConfig cfg = tiny_config(data, 15, 7, 8);
    cfg.strategy = Strategy::kPretrainOnly;
    cfg.source_markets = {"TWIN", "ANTI"};
    auto [best, scores] = select_sources(cfg, data);
    CHECK(best == std::vector<std::string>{"TWIN"});
    CHECK(scores.size() == 3);
  }
}

TEST_CASE("fraction sweep shares pre-training and matches standalone runs") {
  DataMap data = tiny_data();
  ExperimentConfig cfg = tiny_config(data);
  cfg.strategy = Strategy::kPretrainFinetune;
  cfg.source_markets = {"M2", "M3", "M4"};

  auto rows = fraction_sweep(cfg, data, {0.5, 1.0});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].fraction == 0.5);
  CHECK(rows[0].model_fits == 2);
  CHECK(rows[1].model_fits == 2);

  // fraction 1.0 row equals standalone runs with the same seed
  ExperimentConfig basic = cfg;
  basic.strategy = Strategy::kBasic;
  basic.source_markets.clear();
  EvaluationReport rb = run_strategy(basic, data);
  EvaluationReport rp = run_strategy(cfg, data);
  CHECK(rows[1].basic_mae == rb.metric_set.mae);
  CHECK(rows[1].finetune_mae == rp.metric_set.mae);

  SUBCASE("fractions outside (0,1] are rejected") {
    CHECK_THROWS(fraction_sweep(cfg, data, {0.0}));
    CHECK_THROWS(fraction_sweep(cfg, data, {1.5}));
    CHECK_THROWS(fraction_sweep(cfg, data, {}));
  }
}

TEST_CASE("training fraction never touches validation or test data") {
  DataMap data = tiny_data();
  ExperimentConfig cfg = tiny_config(data);
  cfg.strategy = Strategy::kBasic;
  cfg.training_fraction = 1.0;
  EvaluationReport full = run_strategy(cfg, data);
  cfg.training_fraction = 0.3;
  EvaluationReport part = run_strategy(cfg, data);
  CHECK(full.panel.days == part.panel.days);
  CHECK(full.panel.actuals == part.panel.actuals);
  CHECK(full.naive_panel.forecasts == part.naive_panel.forecasts);
  CHECK(!(full.panel.forecasts == part.panel.forecasts));  // the model did change
}

TEST_CASE("rolling recalibration fits one model per test day") {
  DataMap data = tiny_data(45);
  ExperimentConfig cfg = tiny_config(data, 25, 10, 5);
  cfg.strategy = Strategy::kBasic;
  cfg.rolling.enabled = true;
  EvaluationReport rep = run_strategy(cfg, data);
  CHECK(rep.model_fits == 5);
  REQUIRE(rep.panel.n_days() == 5);
  for (std::size_t d = 1; d < rep.panel.days.size(); ++d)
    CHECK(rep.panel.days[d] - rep.panel.days[d - 1] == kHoursPerDay);
  MetricSet again = recompute_metrics(rep);
  CHECK(again.mae == rep.metric_set.mae);

  SUBCASE("static and rolling runs cover the same days") {
    ExperimentConfig st = cfg;
    st.rolling.enabled = false;
    EvaluationReport stat = run_strategy(st, data);
    CHECK(stat.panel.days == rep.panel.days);
    CHECK(stat.panel.actuals == rep.panel.actuals);
  }
  SUBCASE("fixed windows shorter than the lookback are rejected") {
    ExperimentConfig bad = cfg;
    bad.rolling.window_days = 9;  // 9 days: 6/3 split leaves no training anchor
    CHECK_THROWS(run_strategy(bad, data));
  }
}

TEST_CASE("rolling pretrain-finetune fine-tunes daily from one checkpoint") {
  DataMap data = tiny_data(45);
  ExperimentConfig cfg = tiny_config(data, 25, 10, 4);
  cfg.strategy = Strategy::kPretrainFinetune;
  cfg.source_markets = {"M2"};
  cfg.rolling.enabled = true;
  EvaluationReport rep = run_strategy(cfg, data);
  // 1 pretrain + 4 daily fine-tunes
  CHECK(rep.model_fits == 5);
  REQUIRE(rep.panel.n_days() == 4);

  ExperimentConfig daily = cfg;
  daily.rolling.refit_pretrain_daily = true;
  EvaluationReport rep2 = run_strategy(daily, data);
  CHECK(rep2.model_fits == 8);  // pretrain + fine-tune per day
}

TEST_CASE("rolling matches static accuracy on a stationary process") {
  double ratio_sum = 0.0;
  int n = 3;
  for (int i = 0; i < n; ++i) {
    DataMap data = tiny_data(45, 0.9, 100 + static_cast<std::uint64_t>(i));
    ExperimentConfig cfg = tiny_config(data, 25, 10, 5);
    cfg.strategy = Strategy::kBasic;
    cfg.seed = 500 + static_cast<std::uint64_t>(i);
    EvaluationReport stat = run_strategy(cfg, data);
    cfg.rolling.enabled = true;
    EvaluationReport roll = run_strategy(cfg, data);
    ratio_sum += roll.metric_set.mae / stat.metric_set.mae;
  }
  CHECK(std::abs(ratio_sum / n - 1.0) < 0.10);
}

TEST_CASE("ensembles average forecasts") {
  DataMap data = tiny_data();
  ExperimentConfig cfg = tiny_config(data);
  cfg.strategy = Strategy::kBasic;
  EvaluationReport rep = run_strategy(cfg, data);

  SUBCASE("identical members reproduce the member") {
    EvaluationReport e = ensemble({rep, rep});
    CHECK(e.panel.forecasts == rep.panel.forecasts);
    CHECK(e.metric_set.mae == rep.metric_set.mae);
    CHECK(e.config.ensemble_size == 2);
  }
  SUBCASE("symmetric errors cancel") {
    EvaluationReport up = rep, dn = rep;
    for (std::size_t i = 0; i < up.panel.forecasts.data.size(); ++i) {
      up.panel.forecasts.data[i] = up.panel.actuals.data[i] + 3.0;
      dn.panel.forecasts.data[i] = dn.panel.actuals.data[i] - 3.0;
    }
    up.metric_set = recompute_metrics(up);
    dn.metric_set = recompute_metrics(dn);
    EvaluationReport e = ensemble({up, dn});
    CHECK(e.metric_set.mae <= 1e-12);  // cancellation up to rounding
  }
  SUBCASE("ensemble MAE is at most the mean member MAE") {
    ExperimentConfig c2 = cfg;
    c2.seed = cfg.seed + 1;
    EvaluationReport rep2 = run_strategy(c2, data);
    EvaluationReport e = ensemble({rep, rep2});
    CHECK(e.metric_set.mae <=
          0.5 * (rep.metric_set.mae + rep2.metric_set.mae) + 1e-12);
  }
  SUBCASE("misaligned panels are rejected") {
    EvaluationReport other = rep;
    other.panel.actuals.at(0, 0) += 1.0;
    CHECK_THROWS_WITH_AS(ensemble({rep, other}), doctest::Contains("misaligned"),
                         std::runtime_error);
    CHECK_THROWS(ensemble({rep}));
  }
  SUBCASE("ensemble_size in the config trains derived seeds") {
    ExperimentConfig ec = cfg;
    ec.ensemble_size = 2;
    EvaluationReport e = run_strategy(ec, data);
    CHECK(e.model_fits == 2);
    CHECK(e.config.ensemble_size == 2);
    MetricSet again = recompute_metrics(e);
    CHECK(again.mae == e.metric_set.mae);
  }
}

TEST_CASE("identical configuration and data reproduce identical artifacts") {
  DataMap data = tiny_data();
  ExperimentConfig cfg = tiny_config(data);
  cfg.strategy = Strategy::kPretrainFinetune;
  cfg.source_markets = {"M2", "M3"};
  EvaluationReport a = run_strategy(cfg, data);
  EvaluationReport b = run_strategy(cfg, data);
  CHECK(a.panel.forecasts == b.panel.forecasts);
  CHECK(a.metric_set.mae == b.metric_set.mae);

  auto dir = std::filesystem::temp_directory_path() / "epf_det";
  std::filesystem::create_directories(dir);
  write_metrics_csv({{cfg.target_market, "pretrain_finetune", a.metric_set}},
                    (dir / "m1.csv").string());
  write_metrics_csv({{cfg.target_market, "pretrain_finetune", b.metric_set}},
                    (dir / "m2.csv").string());
  CHECK(slurp((dir / "m1.csv").string()) == slurp((dir / "m2.csv").string()));
  std::filesystem::remove_all(dir);
}

TEST_CASE("report JSON round-trips") {
  DataMap data = tiny_data();
  ExperimentConfig cfg = tiny_config(data);
  cfg.strategy = Strategy::kLear;
  EvaluationReport rep = run_strategy(cfg, data);
  auto path = (std::filesystem::temp_directory_path() / "epf_report.json").string();
  write_report_json(rep, path);
  EvaluationReport back = load_report_json(path);
  CHECK(back.panel.forecasts == rep.panel.forecasts);
  CHECK(back.panel.days == rep.panel.days);
  CHECK(back.naive_panel.forecasts == rep.naive_panel.forecasts);
  CHECK(back.metric_set.mae == rep.metric_set.mae);
  CHECK(back.config.target_market == rep.config.target_market);
  CHECK(strategy_name(back.config.strategy) == "lear");
  CHECK(back.model_fits == rep.model_fits);
  // the reloaded report verifies itself too
  MetricSet again = recompute_metrics(back);
  CHECK(again.mae == doctest::Approx(rep.metric_set.mae).epsilon(1e-12));
  std::filesystem::remove(path);
}

TEST_CASE("grid runs cells independently of the thread count") {
  DataMap data = tiny_data(40, 0.9, 11, 2);
  ExperimentConfig base = tiny_config(data);
  std::vector<Strategy> strategies{Strategy::kNaive, Strategy::kLear, Strategy::kBasic};
  GridResult g1 = run_grid(base, data, {"M1", "M2"}, strategies, 1);
  GridResult g2 = run_grid(base, data, {"M1", "M2"}, strategies, 2);
  REQUIRE(g1.reports.size() == 6);
  for (std::size_t i = 0; i < g1.reports.size(); ++i) {
    CHECK(g1.reports[i].panel.forecasts == g2.reports[i].panel.forecasts);
    CHECK(g1.reports[i].metric_set.mae == g2.reports[i].metric_set.mae);
  }
}
