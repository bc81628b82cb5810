#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "epf/evaluation.hpp"
#include "epf/features.hpp"
#include "epf/linear.hpp"
#include "epf/neural.hpp"
#include "epf/timeseries.hpp"

namespace epf {

enum class Strategy {
  kBasic,
  kIntegrate,
  kPretrainOnly,
  kMultiTask,
  kPretrainFinetune,
  kNaive,
  kLear,
};

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);
const std::vector<Strategy>& all_strategies();
bool strategy_uses_sources(Strategy s);

struct RollingSpec {
  bool enabled = false;
  double train_val_ratio = 0.75;  // chronological train share of each window
  int window_days = 0;            // 0 = expanding from the series start
  // Re-run pre-training inside every daily window instead of fine-tuning
  // from the one checkpoint fitted on pre-test data.
  bool refit_pretrain_daily = false;
};

struct ExperimentConfig {
  Strategy strategy = Strategy::kBasic;
  std::string target_market;
  std::vector<std::string> source_markets;
  bool auto_sources = false;  // enumerate subsets, pick by validation MAE
  FeatureSpec feature_spec;
  std::vector<std::size_t> hidden_dims = {64, 32};
  TrainConfig train_config;
  TrainConfig fine_tune_config = TrainConfig::fine_tune_defaults();
  SplitSpec split;
  double training_fraction = 1.0;  // truncates target-market training rows only
  RollingSpec rolling;
  int ensemble_size = 1;
  std::uint64_t seed = 1;
  double lear_lambda = 0.001;

  void validate() const;
};

struct SubsetScore {
  std::vector<std::string> subset;
  double val_mae = 0.0;  // price units over the validation days
};

struct EvaluationReport {
  ExperimentConfig config;
  ForecastPanel panel;        // actuals + model forecasts, price units
  ForecastPanel naive_panel;  // same days, naive forecasts (rMAE denominator)
  MetricSet metric_set;
  std::vector<std::string> selected_sources;
  std::vector<SubsetScore> subset_scores;
  std::vector<TrainTrace> traces;
  int model_fits = 0;
  double wall_seconds = 0.0;
};

using DataMap = std::map<std::string, HourlySeries>;

// Train per the configured strategy and evaluate on the test days. With
// rolling enabled this defers to rolling_recalibrate; ensemble_size > 1 runs
// seed-derived members and averages them.
EvaluationReport run_strategy(const ExperimentConfig& config, const DataMap& data);

// Enumerates every non-empty subset of the candidate sources, runs the
// strategy per subset, and picks the minimum target-validation MAE
// (lexicographic tie-break). Returns the winner plus the full score table.
std::pair<std::vector<std::string>, std::vector<SubsetScore>> select_sources(
    const ExperimentConfig& config, const DataMap& data);

struct FractionRow {
  double fraction = 1.0;
  double basic_mae = 0.0;
  double finetune_mae = 0.0;
  double dm_statistic = 0.0;  // basic vs fine-tuned daily-loss differential
  double dm_p_value = 1.0;    // small => fine-tuned significantly better
  int model_fits = 0;         // per fraction: basic + fine-tune stage
};

// Training-amount ablation: for each fraction, truncate the target training
// rows and run basic and pretrain-finetune. The pre-trained stage does not
// depend on the fraction and is fitted once.
std::vector<FractionRow> fraction_sweep(const ExperimentConfig& config,
                                        const DataMap& data,
                                        const std::vector<double>& fractions);

// Daily re-calibration: one model fit per test day on an expanding or fixed
// window split chronologically train/validation, forecasting that day only.
EvaluationReport rolling_recalibrate(const ExperimentConfig& config,
                                     const DataMap& data);

// Arithmetic mean of member forecasts per day and hour, metrics recomputed.
EvaluationReport ensemble(const std::vector<EvaluationReport>& members);

struct GridResult {
  std::vector<std::string> markets;
  std::vector<Strategy> strategies;
  std::vector<EvaluationReport> reports;  // market-major, strategy-minor
};

// Strategy x market matrix. Cells are independent runs and may execute on
// `threads` workers; results are keyed by cell, never by completion order.
GridResult run_grid(const ExperimentConfig& base, const DataMap& data,
                    const std::vector<std::string>& targets,
                    const std::vector<Strategy>& strategies, int threads = 1);

// Recompute metrics from the embedded panels; used to keep reports
// self-verifying.
MetricSet recompute_metrics(const EvaluationReport& report);

}  // namespace epf
