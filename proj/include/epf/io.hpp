#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epf/experiments.hpp"
#include "epf/timeseries.hpp"

namespace epf {

// Where a run's market data comes from: ingested CSV files or the synthetic
// generator. Exactly one of the two must be set.
struct DataSpec {
  std::map<std::string, std::string> csv_paths;  // market id -> file path
  std::optional<SyntheticSpec> synthetic;
};

struct RunSpec {
  ExperimentConfig config;
  DataSpec data;
  std::vector<std::string> grid_markets;  // targets for `grid`; empty = all
};

RunSpec load_run_spec(const std::string& path);
DataMap load_data(const DataSpec& spec);

void write_report_json(const EvaluationReport& report, const std::string& path);
EvaluationReport load_report_json(const std::string& path);

struct MetricsRow {
  std::string market;
  std::string strategy;
  MetricSet metric_set;
};

// "market,strategy,mae,rmse,smape,rmae"
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);

// "day,hour,actual,forecast,naive"
void write_panel_csv(const EvaluationReport& report, const std::string& path);

// "fraction,basic_mae,finetune_mae,dm_statistic,dm_p_value"
void write_sweep_csv(const std::vector<FractionRow>& rows, const std::string& path);

// Report bundle under dir: report.json, metrics.csv, panel.csv.
void write_report_bundle(const EvaluationReport& report, const std::string& dir);

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace epf
