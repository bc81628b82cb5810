#include "epf/io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace epf {

namespace {

using nlohmann::json;

const json& require(const json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end())
    throw std::runtime_error("config error: missing field " + path + key);
  return *it;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<T>();
}

std::pair<HourIndex, HourIndex> range_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2)
    throw std::runtime_error("config error: " + what +
                             " must be [begin_date, end_date]");
  return {parse_date(j[0].get<std::string>()), parse_date(j[1].get<std::string>())};
}

json range_to_json(HourIndex begin, HourIndex end) {
  return json::array({format_date(begin), format_date(end)});
}

TrainConfig train_config_from_json(const json& j, const TrainConfig& defaults) {
  TrainConfig c = defaults;
  c.learning_rate = get_or(j, "learning_rate", c.learning_rate);
  c.batch_size = get_or(j, "batch_size", c.batch_size);
  c.max_epochs = get_or(j, "max_epochs", c.max_epochs);
  c.patience = get_or(j, "patience", c.patience);
  c.adam_beta1 = get_or(j, "adam_beta1", c.adam_beta1);
  c.adam_beta2 = get_or(j, "adam_beta2", c.adam_beta2);
  c.adam_epsilon = get_or(j, "adam_epsilon", c.adam_epsilon);
  c.seed = get_or(j, "seed", c.seed);
  return c;
}

json train_config_to_json(const TrainConfig& c) {
  return json{{"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"max_epochs", c.max_epochs},
              {"patience", c.patience},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"adam_epsilon", c.adam_epsilon},
              {"seed", c.seed}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.strategy = strategy_from_name(get_or<std::string>(j, "strategy", "basic"));
  cfg.target_market = require(j, "target_market", "").get<std::string>();
  if (auto it = j.find("source_markets"); it != j.end()) {
    if (it->is_string() && it->get<std::string>() == "auto")
      cfg.auto_sources = true;
    else if (it->is_array())
      cfg.source_markets = it->get<std::vector<std::string>>();
    else
      throw std::runtime_error(
          "config error: source_markets must be an array or \"auto\"");
  }
  if (auto it = j.find("feature_spec"); it != j.end()) {
    cfg.feature_spec.use_temperature =
        get_or(*it, "use_temperature", cfg.feature_spec.use_temperature);
    cfg.feature_spec.use_dummies =
        get_or(*it, "use_dummies", cfg.feature_spec.use_dummies);
    cfg.feature_spec.price_lags = get_or(*it, "price_lags", cfg.feature_spec.price_lags);
    cfg.feature_spec.temperature_lags =
        get_or(*it, "temperature_lags", cfg.feature_spec.temperature_lags);
  }
  cfg.hidden_dims = get_or(j, "hidden_dims", cfg.hidden_dims);
  if (auto it = j.find("train_config"); it != j.end())
    cfg.train_config = train_config_from_json(*it, cfg.train_config);
  if (auto it = j.find("fine_tune_config"); it != j.end())
    cfg.fine_tune_config = train_config_from_json(*it, cfg.fine_tune_config);
  const json& split = require(j, "split", "");
  std::tie(cfg.split.train_begin, cfg.split.train_end) =
      range_from_json(require(split, "train", "split."), "split.train");
  std::tie(cfg.split.val_begin, cfg.split.val_end) =
      range_from_json(require(split, "validation", "split."), "split.validation");
  std::tie(cfg.split.test_begin, cfg.split.test_end) =
      range_from_json(require(split, "test", "split."), "split.test");
  cfg.training_fraction = get_or(j, "training_fraction", cfg.training_fraction);
  if (auto it = j.find("rolling"); it != j.end()) {
    cfg.rolling.enabled = get_or(*it, "enabled", cfg.rolling.enabled);
    cfg.rolling.train_val_ratio =
        get_or(*it, "train_val_ratio", cfg.rolling.train_val_ratio);
    if (auto w = it->find("window_days"); w != it->end()) {
      if (w->is_string() && w->get<std::string>() == "expanding")
        cfg.rolling.window_days = 0;
      else
        cfg.rolling.window_days = w->get<int>();
    }
    cfg.rolling.refit_pretrain_daily =
        get_or(*it, "refit_pretrain_daily", cfg.rolling.refit_pretrain_daily);
  }
  cfg.ensemble_size = get_or(j, "ensemble_size", cfg.ensemble_size);
  cfg.seed = get_or(j, "seed", cfg.seed);
  cfg.lear_lambda = get_or(j, "lear_lambda", cfg.lear_lambda);
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["strategy"] = strategy_name(cfg.strategy);
  j["target_market"] = cfg.target_market;
  if (cfg.auto_sources)
    j["source_markets"] = "auto";
  else
    j["source_markets"] = cfg.source_markets;
  j["feature_spec"] = {{"use_temperature", cfg.feature_spec.use_temperature},
                       {"use_dummies", cfg.feature_spec.use_dummies},
                       {"price_lags", cfg.feature_spec.price_lags},
                       {"temperature_lags", cfg.feature_spec.temperature_lags}};
  j["hidden_dims"] = cfg.hidden_dims;
  j["train_config"] = train_config_to_json(cfg.train_config);
  j["fine_tune_config"] = train_config_to_json(cfg.fine_tune_config);
  j["split"] = {{"train", range_to_json(cfg.split.train_begin, cfg.split.train_end)},
                {"validation", range_to_json(cfg.split.val_begin, cfg.split.val_end)},
                {"test", range_to_json(cfg.split.test_begin, cfg.split.test_end)}};
  j["training_fraction"] = cfg.training_fraction;
  j["rolling"] = {{"enabled", cfg.rolling.enabled},
                  {"train_val_ratio", cfg.rolling.train_val_ratio},
                  {"window_days", cfg.rolling.window_days},
                  {"refit_pretrain_daily", cfg.rolling.refit_pretrain_daily}};
  j["ensemble_size"] = cfg.ensemble_size;
  j["seed"] = cfg.seed;
  j["lear_lambda"] = cfg.lear_lambda;
  return j;
}

json panel_to_json(const ForecastPanel& p) {
  json days = json::array();
  for (HourIndex d : p.days) days.push_back(format_date(d));
  json actuals = json::array(), forecasts = json::array();
  for (std::size_t d = 0; d < p.n_days(); ++d) {
    actuals.push_back(std::vector<double>(p.actuals.row(d), p.actuals.row(d) + kHoursPerDay));
    forecasts.push_back(
        std::vector<double>(p.forecasts.row(d), p.forecasts.row(d) + kHoursPerDay));
  }
  return json{{"days", days}, {"actuals", actuals}, {"forecasts", forecasts}};
}

ForecastPanel panel_from_json(const json& j, const std::string& path) {
  ForecastPanel p;
  const json& days = require(j, "days", path);
  for (const auto& d : days) p.days.push_back(parse_date(d.get<std::string>()));
  const json& actuals = require(j, "actuals", path);
  const json& forecasts = require(j, "forecasts", path);
  if (actuals.size() != p.days.size() || forecasts.size() != p.days.size())
    throw std::runtime_error("config error: panel rows do not match days");
  p.actuals = Matrix(p.days.size(), kHoursPerDay);
  p.forecasts = Matrix(p.days.size(), kHoursPerDay);
  for (std::size_t d = 0; d < p.days.size(); ++d) {
    auto a = actuals[d].get<std::vector<double>>();
    auto f = forecasts[d].get<std::vector<double>>();
    if (a.size() != kHoursPerDay || f.size() != kHoursPerDay)
      throw std::runtime_error("config error: panel row is not 24 hours");
    std::copy(a.begin(), a.end(), p.actuals.row(d));
    std::copy(f.begin(), f.end(), p.forecasts.row(d));
  }
  p.validate();
  return p;
}

json trace_to_json(const TrainTrace& t) {
  return json{{"train_loss", t.train_loss},
              {"val_loss", t.val_loss},
              {"initial_val_loss", t.initial_val_loss},
              {"best_epoch", t.best_epoch},
              {"stopped_epoch", t.stopped_epoch}};
}

TrainTrace trace_from_json(const json& j) {
  TrainTrace t;
  t.train_loss = get_or(j, "train_loss", t.train_loss);
  t.val_loss = get_or(j, "val_loss", t.val_loss);
  t.initial_val_loss = get_or(j, "initial_val_loss", t.initial_val_loss);
  t.best_epoch = get_or(j, "best_epoch", t.best_epoch);
  t.stopped_epoch = get_or(j, "stopped_epoch", t.stopped_epoch);
  return t;
}

}  // namespace

RunSpec load_run_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("config error: parse failure in '" + path + "': " + e.what());
  }
  RunSpec spec;
  spec.config = config_from_json(j);
  const json& data = require(j, "data", "");
  if (auto it = data.find("csv"); it != data.end()) {
    spec.data.csv_paths = it->get<std::map<std::string, std::string>>();
  }
  if (auto it = data.find("synthetic"); it != data.end()) {
    SyntheticSpec s;
    s.seed = get_or(*it, "seed", s.seed);
    s.n_markets = get_or(*it, "n_markets", s.n_markets);
    s.days = get_or(*it, "days", s.days);
    s.correlation = get_or(*it, "correlation", s.correlation);
    s.noise_scale = get_or(*it, "noise_scale", s.noise_scale);
    if (auto st = it->find("start"); st != it->end())
      s.start = parse_date(st->get<std::string>());
    spec.data.synthetic = s;
  }
  if (spec.data.csv_paths.empty() == !spec.data.synthetic.has_value())
    throw std::runtime_error(
        "config error: data must specify exactly one of csv or synthetic");
  spec.grid_markets = get_or(j, "grid_markets", spec.grid_markets);
  return spec;
}

DataMap load_data(const DataSpec& spec) {
  DataMap data;
  if (spec.synthetic) {
    for (HourlySeries& s : generate_synthetic(*spec.synthetic)) {
      std::string id = s.market_id;
      data.emplace(std::move(id), std::move(s));
    }
  } else {
    for (const auto& [market, path] : spec.csv_paths)
      data.emplace(market, ingest_csv(path, market));
  }
  return data;
}

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

void write_report_json(const EvaluationReport& report, const std::string& path) {
  json j;
  j["config"] = config_to_json(report.config);
  j["panel"] = panel_to_json(report.panel);
  j["naive_panel"] = panel_to_json(report.naive_panel);
  j["metrics"] = {{"mae", report.metric_set.mae},
                  {"rmse", report.metric_set.rmse},
                  {"smape", report.metric_set.smape},
                  {"rmae", report.metric_set.rmae}};
  j["selected_sources"] = report.selected_sources;
  json scores = json::array();
  for (const SubsetScore& s : report.subset_scores)
    scores.push_back({{"subset", s.subset}, {"val_mae", s.val_mae}});
  j["subset_scores"] = std::move(scores);
  json traces = json::array();
  for (const TrainTrace& t : report.traces) traces.push_back(trace_to_json(t));
  j["traces"] = std::move(traces);
  j["model_fits"] = report.model_fits;
  j["wall_seconds"] = report.wall_seconds;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

EvaluationReport load_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("report parse failure in '" + path + "': " + e.what());
  }
  EvaluationReport rep;
  rep.config = config_from_json(require(j, "config", ""));
  rep.panel = panel_from_json(require(j, "panel", ""), "panel.");
  rep.naive_panel = panel_from_json(require(j, "naive_panel", ""), "naive_panel.");
  const json& m = require(j, "metrics", "");
  rep.metric_set.mae = require(m, "mae", "metrics.").get<double>();
  rep.metric_set.rmse = require(m, "rmse", "metrics.").get<double>();
  rep.metric_set.smape = require(m, "smape", "metrics.").get<double>();
  rep.metric_set.rmae = require(m, "rmae", "metrics.").get<double>();
  rep.selected_sources = get_or(j, "selected_sources", rep.selected_sources);
  if (auto it = j.find("subset_scores"); it != j.end())
    for (const auto& s : *it)
      rep.subset_scores.push_back({s.at("subset").get<std::vector<std::string>>(),
                                   s.at("val_mae").get<double>()});
  if (auto it = j.find("traces"); it != j.end())
    for (const auto& t : *it) rep.traces.push_back(trace_from_json(t));
  rep.model_fits = get_or(j, "model_fits", 0);
  rep.wall_seconds = get_or(j, "wall_seconds", 0.0);
  return rep;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "market,strategy,mae,rmse,smape,rmae\n";
  for (const MetricsRow& r : rows)
    out << r.market << ',' << r.strategy << ',' << format_double(r.metric_set.mae)
        << ',' << format_double(r.metric_set.rmse) << ','
        << format_double(r.metric_set.smape) << ','
        << format_double(r.metric_set.rmae) << '\n';
}

void write_panel_csv(const EvaluationReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "day,hour,actual,forecast,naive\n";
  for (std::size_t d = 0; d < report.panel.n_days(); ++d)
    for (int h = 0; h < kHoursPerDay; ++h)
      out << format_date(report.panel.days[d]) << ',' << h << ','
          << format_double(report.panel.actuals.at(d, h)) << ','
          << format_double(report.panel.forecasts.at(d, h)) << ','
          << format_double(report.naive_panel.forecasts.at(d, h)) << '\n';
}

void write_sweep_csv(const std::vector<FractionRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "fraction,basic_mae,finetune_mae,dm_statistic,dm_p_value\n";
  for (const FractionRow& r : rows)
    out << format_double(r.fraction) << ',' << format_double(r.basic_mae) << ','
        << format_double(r.finetune_mae) << ',' << format_double(r.dm_statistic)
        << ',' << format_double(r.dm_p_value) << '\n';
}

void write_report_bundle(const EvaluationReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_report_json(report, dir + "/report.json");
  write_metrics_csv({{report.config.target_market,
                      strategy_name(report.config.strategy), report.metric_set}},
                    dir + "/metrics.csv");
  write_panel_csv(report, dir + "/panel.csv");
}

}  // namespace epf
