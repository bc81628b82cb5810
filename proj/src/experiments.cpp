#include "epf/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <stdexcept>

#include "epf/rng.hpp"

namespace epf {

namespace {

// Seed streams derived from ExperimentConfig::seed. The degenerate
// pretrain-finetune path (no sources) reuses the basic streams so it matches
// a basic run bit for bit.
constexpr std::uint64_t kStreamInit = 1;
constexpr std::uint64_t kStreamTrain = 2;
constexpr std::uint64_t kStreamStack = 3;
constexpr std::uint64_t kStreamFineTune = 4;
constexpr std::uint64_t kStreamEnsemble = 0x1000;
constexpr std::uint64_t kStreamRollingDay = 0x2000;

struct Window {
  HourIndex train_begin = 0, train_end = 0;
  HourIndex val_begin = 0, val_end = 0;
  HourIndex eval_begin = 0, eval_end = 0;
};

struct StrategyRun {
  ForecastPanel panel;
  std::vector<TrainTrace> traces;
  int fits = 0;
};

const HourlySeries& market_series(const DataMap& data, const std::string& id) {
  auto it = data.find(id);
  if (it == data.end()) throw std::runtime_error("unknown market '" + id + "'");
  return it->second;
}

MarketTransforms fit_transforms(const HourlySeries& s, HourIndex begin,
                                HourIndex end) {
  if (!s.covers(begin, end))
    throw std::runtime_error("market '" + s.market_id +
                             "' does not cover the transform fit range");
  std::size_t a = s.index_of(begin);
  std::size_t n = static_cast<std::size_t>(end - begin);
  MarketTransforms tx;
  tx.price =
      TransformParams::fit(std::span<const double>(s.prices).subspan(a, n));
  tx.temperature = TransformParams::fit(
      std::span<const double>(s.temperatures).subspan(a, n));
  return tx;
}

std::vector<HourIndex> enumerate_days(HourIndex begin, HourIndex end) {
  std::vector<HourIndex> days;
  for (HourIndex d = begin; d < end; d += kHoursPerDay) days.push_back(d);
  if (days.empty()) throw std::runtime_error("empty evaluation range");
  return days;
}

ForecastPanel actual_panel(const HourlySeries& s, const std::vector<HourIndex>& days) {
  ForecastPanel p;
  p.days = days;
  p.actuals = Matrix(days.size(), kHoursPerDay);
  p.forecasts = Matrix(days.size(), kHoursPerDay);
  for (std::size_t d = 0; d < days.size(); ++d) {
    if (!s.covers(days[d], days[d] + kHoursPerDay))
      throw std::runtime_error("series does not cover evaluation day " +
                               format_date(days[d]));
    for (int h = 0; h < kHoursPerDay; ++h)
      p.actuals.at(d, h) = s.price_at(days[d] + h);
  }
  return p;
}

std::vector<std::size_t> layer_dims(const ExperimentConfig& cfg,
                                    std::size_t input_dim) {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
  dims.push_back(kHorizon);
  return dims;
}

void check_eval_anchors(const SampleSet& ev, const std::vector<HourIndex>& days) {
  if (ev.anchors != days)
    throw std::runtime_error("evaluation anchors misaligned with eval days");
}

void fill_forecasts_nn(const MlpModel& model, const SampleSet& ev,
                       const TransformParams& price_tx, ForecastPanel& panel) {
  Matrix out = model.forward_batch(ev.inputs);
  for (std::size_t d = 0; d < out.rows; ++d)
    for (int h = 0; h < kHorizon; ++h)
      panel.forecasts.at(d, h) = price_tx.inverse(out.at(d, h));
}

struct SourceSets {
  SampleSet train;  // stacked and shuffled
  SampleSet val;    // stacked
};

SourceSets build_source_sets(const ExperimentConfig& cfg, const DataMap& data,
                             const std::vector<std::string>& sources,
                             const Window& win) {
  std::vector<SampleSet> trains, vals;
  for (const std::string& id : sources) {
    const HourlySeries& s = market_series(data, id);
    MarketTransforms tx = fit_transforms(s, win.train_begin, win.train_end);
    trains.push_back(build_samples(
        s, tx, cfg.feature_spec, 1,
        AnchorRange{win.train_begin + cfg.feature_spec.lookback(), win.train_end}));
    vals.push_back(build_samples(s, tx, cfg.feature_spec, 1,
                                 AnchorRange{win.val_begin, win.val_end}));
  }
  SourceSets out;
  out.train = shuffle_samples(stack(trains), mix_seed(cfg.seed, kStreamStack));
  out.val = stack(vals);
  return out;
}

MlpModel pretrain_on_sources(const ExperimentConfig& cfg, const DataMap& data,
                             const std::vector<std::string>& sources,
                             const Window& win, std::vector<TrainTrace>& traces,
                             int& fits) {
  SourceSets src = build_source_sets(cfg, data, sources, win);
  MlpModel model =
      init_mlp(layer_dims(cfg, src.train.inputs.cols), mix_seed(cfg.seed, kStreamInit));
  model.spec = cfg.feature_spec;
  TrainConfig tc = cfg.train_config;
  tc.seed = mix_seed(cfg.seed, kStreamTrain);
  auto [trained, trace] = train(std::move(model), src.train, src.val, tc);
  traces.push_back(std::move(trace));
  ++fits;
  return std::move(trained);
}

// One strategy, one calibration window, one evaluation range. `pretrained`
// short-circuits the pre-training stage of pretrain-finetune (rolling mode
// fine-tunes from a single checkpoint each day by default).
StrategyRun execute_window(const ExperimentConfig& cfg, const DataMap& data,
                           std::vector<std::string> sources, const Window& win,
                           const MlpModel* pretrained) {
  std::sort(sources.begin(), sources.end());
  const HourlySeries& target = market_series(data, cfg.target_market);
  const FeatureSpec& spec = cfg.feature_spec;
  MarketTransforms target_tx = fit_transforms(target, win.train_begin, win.train_end);

  // Training samples live entirely inside the calibration window: anchors
  // start one lookback past the window begin, so a window shorter than
  // lookback+horizon has no training anchor and is rejected. Validation and
  // evaluation lags may reach into earlier data, which is known at forecast
  // time.
  AnchorRange train_r{win.train_begin + spec.lookback(), win.train_end};
  AnchorRange val_r{win.val_begin, win.val_end};
  AnchorRange eval_r{win.eval_begin, win.eval_end};
  std::vector<HourIndex> eval_days = enumerate_days(win.eval_begin, win.eval_end);

  StrategyRun run;
  run.panel = actual_panel(target, eval_days);

  auto target_train = [&]() {
    return truncate_to_fraction(
        build_samples(target, target_tx, spec, 1, train_r), cfg.training_fraction);
  };
  auto target_val = [&]() {
    return build_samples(target, target_tx, spec, 1, val_r);
  };
  auto target_eval = [&]() {
    SampleSet ev = build_samples(target, target_tx, spec, kHorizon, eval_r);
    check_eval_anchors(ev, eval_days);
    return ev;
  };

  auto run_basic = [&]() {
    SampleSet tr = target_train();
    SampleSet va = target_val();
    MlpModel model =
        init_mlp(layer_dims(cfg, tr.inputs.cols), mix_seed(cfg.seed, kStreamInit));
    model.spec = spec;
    model.transforms = target_tx;
    TrainConfig tc = cfg.train_config;
    tc.seed = mix_seed(cfg.seed, kStreamTrain);
    auto [trained, trace] = train(std::move(model), tr, va, tc);
    run.traces.push_back(std::move(trace));
    ++run.fits;
    fill_forecasts_nn(trained, target_eval(), target_tx.price, run.panel);
  };

  switch (cfg.strategy) {
    case Strategy::kNaive: {
      for (std::size_t d = 0; d < eval_days.size(); ++d) {
        auto f = naive_forecast(target, eval_days[d]);
        std::copy(f.begin(), f.end(), run.panel.forecasts.row(d));
      }
      break;
    }
    case Strategy::kLear: {
      SampleSet tr = target_train();
      LearModel lm = lear_fit(tr, cfg.lear_lambda);
      SampleSet ev = target_eval();
      for (std::size_t d = 0; d < ev.size(); ++d) {
        auto out = lear_forecast(
            lm, std::span<const double>(ev.inputs.row(d), ev.inputs.cols));
        for (int h = 0; h < kHorizon; ++h)
          run.panel.forecasts.at(d, h) = target_tx.price.inverse(out[h]);
      }
      ++run.fits;
      break;
    }
    case Strategy::kBasic: {
      run_basic();
      break;
    }
    case Strategy::kIntegrate: {
      std::vector<const HourlySeries*> list{&target};
      std::vector<MarketTransforms> txs{target_tx};
      for (const std::string& id : sources) {
        const HourlySeries& s = market_series(data, id);
        list.push_back(&s);
        txs.push_back(fit_transforms(s, win.train_begin, win.train_end));
      }
      SampleSet tr = truncate_to_fraction(
          build_integrated(list, txs, spec, cfg.target_market, 1, train_r),
          cfg.training_fraction);
      SampleSet va =
          build_integrated(list, txs, spec, cfg.target_market, 1, val_r);
      SampleSet ev =
          build_integrated(list, txs, spec, cfg.target_market, kHorizon, eval_r);
      check_eval_anchors(ev, eval_days);
      MlpModel model =
          init_mlp(layer_dims(cfg, tr.inputs.cols), mix_seed(cfg.seed, kStreamInit));
      model.spec = spec;
      model.transforms = target_tx;
      TrainConfig tc = cfg.train_config;
      tc.seed = mix_seed(cfg.seed, kStreamTrain);
      auto [trained, trace] = train(std::move(model), tr, va, tc);
      run.traces.push_back(std::move(trace));
      ++run.fits;
      fill_forecasts_nn(trained, ev, target_tx.price, run.panel);
      break;
    }
    case Strategy::kPretrainOnly: {
      SourceSets src = build_source_sets(cfg, data, sources, win);
      MlpModel model = init_mlp(layer_dims(cfg, src.train.inputs.cols),
                                mix_seed(cfg.seed, kStreamInit));
      model.spec = spec;
      model.transforms = target_tx;
      TrainConfig tc = cfg.train_config;
      tc.seed = mix_seed(cfg.seed, kStreamTrain);
      auto [trained, trace] = train(std::move(model), src.train, src.val, tc);
      run.traces.push_back(std::move(trace));
      ++run.fits;
      fill_forecasts_nn(trained, target_eval(), target_tx.price, run.panel);
      break;
    }
    case Strategy::kMultiTask: {
      std::vector<std::string> markets = sources;
      markets.push_back(cfg.target_market);
      std::sort(markets.begin(), markets.end());
      std::vector<SampleSet> trains, vals;
      for (const std::string& id : markets) {
        const HourlySeries& s = market_series(data, id);
        MarketTransforms tx = fit_transforms(s, win.train_begin, win.train_end);
        SampleSet tr = build_samples(s, tx, spec, 1, train_r);
        if (id == cfg.target_market)
          tr = truncate_to_fraction(tr, cfg.training_fraction);
        trains.push_back(std::move(tr));
        vals.push_back(build_samples(s, tx, spec, 1, val_r));
      }
      SampleSet tr = shuffle_samples(stack(trains), mix_seed(cfg.seed, kStreamStack));
      SampleSet va = stack(vals);
      MlpModel model =
          init_mlp(layer_dims(cfg, tr.inputs.cols), mix_seed(cfg.seed, kStreamInit));
      model.spec = spec;
      model.transforms = target_tx;
      TrainConfig tc = cfg.train_config;
      tc.seed = mix_seed(cfg.seed, kStreamTrain);
      auto [trained, trace] = train(std::move(model), tr, va, tc);
      run.traces.push_back(std::move(trace));
      ++run.fits;
      fill_forecasts_nn(trained, target_eval(), target_tx.price, run.panel);
      break;
    }
    case Strategy::kPretrainFinetune: {
      if (sources.empty()) {
        // No source data: pre-training is skipped and the run degenerates
        // to basic training on the target market.
        run_basic();
        break;
      }
      MlpModel base;
      if (pretrained) {
        base = *pretrained;
      } else {
        base = pretrain_on_sources(cfg, data, sources, win, run.traces, run.fits);
      }
      base.spec = spec;
      base.transforms = target_tx;
      SampleSet tr = target_train();
      SampleSet va = target_val();
      TrainConfig ft = cfg.fine_tune_config;
      ft.seed = mix_seed(cfg.seed, kStreamFineTune);
      auto [tuned, trace] = fine_tune(std::move(base), tr, va, ft);
      run.traces.push_back(std::move(trace));
      ++run.fits;
      fill_forecasts_nn(tuned, target_eval(), target_tx.price, run.panel);
      break;
    }
  }
  return run;
}

ForecastPanel naive_panel_for(const HourlySeries& target,
                              const std::vector<HourIndex>& days) {
  ForecastPanel p = actual_panel(target, days);
  for (std::size_t d = 0; d < days.size(); ++d) {
    auto f = naive_forecast(target, days[d]);
    std::copy(f.begin(), f.end(), p.forecasts.row(d));
  }
  return p;
}

Window static_window(const SplitSpec& split) {
  return Window{split.train_begin, split.train_end, split.val_begin,
                split.val_end,     split.test_begin, split.test_end};
}

double panel_mae(const ForecastPanel& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.actuals.data.size(); ++i)
    s += std::abs(p.actuals.data[i] - p.forecasts.data[i]);
  return s / static_cast<double>(p.actuals.data.size());
}

std::vector<std::string> sorted_sources(const ExperimentConfig& cfg) {
  std::vector<std::string> s = cfg.source_markets;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

}  // namespace

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kBasic: return "basic";
    case Strategy::kIntegrate: return "integrate";
    case Strategy::kPretrainOnly: return "pretrain_only";
    case Strategy::kMultiTask: return "multi_task";
    case Strategy::kPretrainFinetune: return "pretrain_finetune";
    case Strategy::kNaive: return "naive";
    case Strategy::kLear: return "lear";
  }
  throw std::runtime_error("unknown strategy");
}

Strategy strategy_from_name(const std::string& name) {
  for (Strategy s : all_strategies())
    if (strategy_name(s) == name) return s;
  throw std::runtime_error("config error: unknown strategy '" + name + "'");
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> kAll{
      Strategy::kNaive,     Strategy::kLear,
      Strategy::kBasic,     Strategy::kIntegrate,
      Strategy::kPretrainOnly, Strategy::kMultiTask,
      Strategy::kPretrainFinetune};
  return kAll;
}

bool strategy_uses_sources(Strategy s) {
  return s == Strategy::kIntegrate || s == Strategy::kPretrainOnly ||
         s == Strategy::kMultiTask || s == Strategy::kPretrainFinetune;
}

void ExperimentConfig::validate() const {
  if (target_market.empty())
    throw std::runtime_error("config error: target_market is empty");
  for (const std::string& s : source_markets)
    if (s == target_market)
      throw std::runtime_error("config error: target market listed among sources");
  if (!strategy_uses_sources(strategy) && (!source_markets.empty() || auto_sources))
    throw std::runtime_error("config error: strategy '" + strategy_name(strategy) +
                             "' takes no source markets");
  if (strategy == Strategy::kPretrainOnly && source_markets.empty() && !auto_sources)
    throw std::runtime_error("config error: pretrain_only requires source markets");
  if (training_fraction <= 0.0 || training_fraction > 1.0)
    throw std::runtime_error("config error: training_fraction must lie in (0, 1]");
  if (ensemble_size < 1)
    throw std::runtime_error("config error: ensemble_size must be >= 1");
  if (hidden_dims.empty())
    throw std::runtime_error("config error: hidden_dims must not be empty");
  for (std::size_t d : hidden_dims)
    if (d < 1) throw std::runtime_error("config error: hidden dims must be >= 1");
  if (feature_spec.price_lags < 1)
    throw std::runtime_error("config error: price_lags must be >= 1");
  if (feature_spec.use_temperature && feature_spec.temperature_lags < 1)
    throw std::runtime_error("config error: temperature_lags must be >= 1");
  if (lear_lambda < 0.0)
    throw std::runtime_error("config error: lear_lambda must be >= 0");
  if (rolling.enabled) {
    if (rolling.train_val_ratio <= 0.0 || rolling.train_val_ratio >= 1.0)
      throw std::runtime_error("config error: train_val_ratio must lie in (0, 1)");
    if (rolling.window_days < 0)
      throw std::runtime_error("config error: window_days must be >= 0");
  }
  train_config.validate();
  fine_tune_config.validate();
  split.validate();
}

EvaluationReport run_strategy(const ExperimentConfig& config, const DataMap& data) {
  config.validate();
  if (config.rolling.enabled) return rolling_recalibrate(config, data);
  auto t0 = std::chrono::steady_clock::now();

  if (config.ensemble_size > 1) {
    std::vector<EvaluationReport> members;
    for (int k = 0; k < config.ensemble_size; ++k) {
      ExperimentConfig m = config;
      m.ensemble_size = 1;
      m.seed = mix_seed(config.seed, kStreamEnsemble + static_cast<std::uint64_t>(k));
      members.push_back(run_strategy(m, data));
    }
    EvaluationReport rep = ensemble(members);
    rep.config = config;
    return rep;
  }

  std::vector<std::string> sources = sorted_sources(config);
  std::vector<SubsetScore> scores;
  if (strategy_uses_sources(config.strategy) && config.auto_sources)
    std::tie(sources, scores) = select_sources(config, data);

  Window win = static_window(config.split);
  StrategyRun out = execute_window(config, data, sources, win, nullptr);

  EvaluationReport rep;
  rep.config = config;
  rep.panel = std::move(out.panel);
  rep.naive_panel =
      naive_panel_for(market_series(data, config.target_market), rep.panel.days);
  rep.metric_set = metrics(rep.panel, rep.naive_panel);
  if (strategy_uses_sources(config.strategy)) rep.selected_sources = sources;
  rep.subset_scores = std::move(scores);
  rep.traces = std::move(out.traces);
  rep.model_fits = out.fits;
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

std::pair<std::vector<std::string>, std::vector<SubsetScore>> select_sources(
    const ExperimentConfig& config, const DataMap& data) {
  if (!strategy_uses_sources(config.strategy))
    throw std::runtime_error("config error: strategy '" +
                             strategy_name(config.strategy) +
                             "' has no source subset to select");
  std::vector<std::string> candidates = sorted_sources(config);
  if (candidates.empty()) {
    for (const auto& [id, series] : data)
      if (id != config.target_market) candidates.push_back(id);
    std::sort(candidates.begin(), candidates.end());
  }
  if (candidates.empty())
    throw std::runtime_error("config error: no candidate source markets");

  // Subset runs score on the validation days.
  Window win = static_window(config.split);
  win.eval_begin = config.split.val_begin;
  win.eval_end = config.split.val_end;

  std::vector<SubsetScore> scores;
  std::vector<std::string> best;
  double best_mae = std::numeric_limits<double>::infinity();
  std::size_t n = candidates.size();
  for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
    std::vector<std::string> subset;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (std::size_t{1} << i)) subset.push_back(candidates[i]);
    ExperimentConfig sub = config;
    sub.auto_sources = false;
    sub.source_markets = subset;
    StrategyRun out = execute_window(sub, data, subset, win, nullptr);
    double mae = panel_mae(out.panel);
    scores.push_back({subset, mae});
    if (mae < best_mae || (mae == best_mae && subset < best)) {
      best_mae = mae;
      best = subset;
    }
  }
  return {best, scores};
}

std::vector<FractionRow> fraction_sweep(const ExperimentConfig& config,
                                        const DataMap& data,
                                        const std::vector<double>& fractions) {
  ExperimentConfig base = config;
  base.training_fraction = 1.0;
  base.strategy = Strategy::kPretrainFinetune;
  base.validate();
  if (base.rolling.enabled)
    throw std::runtime_error("config error: fraction sweep uses the static split");
  if (fractions.empty())
    throw std::runtime_error("config error: no fractions given");
  for (double f : fractions)
    if (f <= 0.0 || f > 1.0)
      throw std::runtime_error("config error: fractions must lie in (0, 1]");

  std::vector<std::string> sources = sorted_sources(base);
  if (sources.empty() && !base.auto_sources)
    throw std::runtime_error("config error: fraction sweep requires source markets");
  if (base.auto_sources) {
    auto [sel, scores] = select_sources(base, data);
    sources = sel;
    base.auto_sources = false;
    base.source_markets = sel;
  }

  Window win = static_window(base.split);

  // Pre-training sees no target data, so it is shared across fractions; it
  // is bit-identical to what each standalone run would fit.
  std::vector<TrainTrace> pre_traces;
  int pre_fits = 0;
  std::optional<MlpModel> pretrained;
  if (!sources.empty())
    pretrained = pretrain_on_sources(base, data, sources, win, pre_traces, pre_fits);

  std::vector<FractionRow> rows;
  for (double f : fractions) {
    FractionRow row;
    row.fraction = f;

    ExperimentConfig basic_cfg = base;
    basic_cfg.strategy = Strategy::kBasic;
    basic_cfg.source_markets.clear();
    basic_cfg.training_fraction = f;
    StrategyRun basic_run = execute_window(basic_cfg, data, {}, win, nullptr);
    row.basic_mae = panel_mae(basic_run.panel);
    row.model_fits += basic_run.fits;

    ExperimentConfig ft_cfg = base;
    ft_cfg.training_fraction = f;
    StrategyRun ft_run = execute_window(ft_cfg, data, sources, win,
                                        pretrained ? &*pretrained : nullptr);
    row.finetune_mae = panel_mae(ft_run.panel);
    row.model_fits += ft_run.fits;

    DmResult dm = dm_test(basic_run.panel, ft_run.panel);
    row.dm_statistic = dm.statistic;
    row.dm_p_value = dm.p_value;
    rows.push_back(row);
  }
  return rows;
}

EvaluationReport rolling_recalibrate(const ExperimentConfig& config,
                                     const DataMap& data) {
  config.validate();
  if (!config.rolling.enabled)
    throw std::runtime_error("config error: rolling is not enabled");
  auto t0 = std::chrono::steady_clock::now();

  const HourlySeries& target = market_series(data, config.target_market);
  std::vector<std::string> sources = sorted_sources(config);
  std::vector<SubsetScore> scores;
  if (strategy_uses_sources(config.strategy) && config.auto_sources) {
    ExperimentConfig sel_cfg = config;
    sel_cfg.rolling.enabled = false;
    std::tie(sources, scores) = select_sources(sel_cfg, data);
  }

  auto window_begin_for = [&](HourIndex end) {
    if (config.rolling.window_days == 0) return target.start;  // expanding
    HourIndex wb = end - static_cast<HourIndex>(config.rolling.window_days) * kHoursPerDay;
    if (wb < target.start)
      throw std::runtime_error("rolling window precedes the data start");
    return wb;
  };
  auto split_window = [&](HourIndex begin, HourIndex end, HourIndex eval_b,
                          HourIndex eval_e) {
    HourIndex n_days = (end - begin) / kHoursPerDay;
    HourIndex train_days = static_cast<HourIndex>(
        std::floor(static_cast<double>(n_days) * config.rolling.train_val_ratio));
    if (train_days < 1 || n_days - train_days < 1)
      throw std::runtime_error("rolling window too short to split");
    HourIndex mid = begin + train_days * kHoursPerDay;
    return Window{begin, mid, mid, end, eval_b, eval_e};
  };

  std::vector<TrainTrace> traces;
  int fits = 0;
  std::optional<MlpModel> pretrained;
  bool static_pretrain = config.strategy == Strategy::kPretrainFinetune &&
                         !sources.empty() && !config.rolling.refit_pretrain_daily;
  if (static_pretrain) {
    HourIndex wb = window_begin_for(config.split.test_begin);
    Window pw = split_window(wb, config.split.test_begin, config.split.test_begin,
                             config.split.test_end);
    pretrained = pretrain_on_sources(config, data, sources, pw, traces, fits);
  }

  std::vector<HourIndex> days =
      enumerate_days(config.split.test_begin, config.split.test_end);
  ForecastPanel panel = actual_panel(target, days);
  for (std::size_t i = 0; i < days.size(); ++i) {
    HourIndex d = days[i];
    HourIndex wb = window_begin_for(d);
    Window win = split_window(wb, d, d, d + kHoursPerDay);
    ExperimentConfig day_cfg = config;
    day_cfg.rolling.enabled = false;
    day_cfg.seed = mix_seed(config.seed, kStreamRollingDay + i);
    StrategyRun out = execute_window(day_cfg, data, sources, win,
                                     pretrained ? &*pretrained : nullptr);
    std::copy(out.panel.forecasts.row(0),
              out.panel.forecasts.row(0) + kHoursPerDay, panel.forecasts.row(i));
    for (TrainTrace& t : out.traces) traces.push_back(std::move(t));
    fits += out.fits;
  }

  EvaluationReport rep;
  rep.config = config;
  rep.panel = std::move(panel);
  rep.naive_panel = naive_panel_for(target, rep.panel.days);
  rep.metric_set = metrics(rep.panel, rep.naive_panel);
  if (strategy_uses_sources(config.strategy)) rep.selected_sources = sources;
  rep.subset_scores = std::move(scores);
  rep.traces = std::move(traces);
  rep.model_fits = fits;
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

EvaluationReport ensemble(const std::vector<EvaluationReport>& members) {
  if (members.size() < 2)
    throw std::runtime_error("ensemble needs at least 2 reports");
  const EvaluationReport& first = members[0];
  for (const EvaluationReport& m : members) {
    if (m.panel.days != first.panel.days ||
        !(m.panel.actuals == first.panel.actuals) ||
        !(m.naive_panel.forecasts == first.naive_panel.forecasts))
      throw std::runtime_error("misaligned panels in ensemble");
  }
  EvaluationReport rep;
  rep.config = first.config;
  rep.config.ensemble_size = static_cast<int>(members.size());
  rep.panel = first.panel;
  std::fill(rep.panel.forecasts.data.begin(), rep.panel.forecasts.data.end(), 0.0);
  for (const EvaluationReport& m : members)
    for (std::size_t i = 0; i < rep.panel.forecasts.data.size(); ++i)
      rep.panel.forecasts.data[i] += m.panel.forecasts.data[i];
  for (double& v : rep.panel.forecasts.data)
    v /= static_cast<double>(members.size());
  rep.naive_panel = first.naive_panel;
  rep.metric_set = metrics(rep.panel, rep.naive_panel);
  rep.selected_sources = first.selected_sources;
  for (const EvaluationReport& m : members) {
    rep.model_fits += m.model_fits;
    rep.wall_seconds += m.wall_seconds;
  }
  return rep;
}

GridResult run_grid(const ExperimentConfig& base, const DataMap& data,
                    const std::vector<std::string>& targets,
                    const std::vector<Strategy>& strategies, int threads) {
  GridResult grid;
  grid.markets = targets;
  grid.strategies = strategies;
  grid.reports.resize(targets.size() * strategies.size());

  auto cell_config = [&](std::size_t ti, std::size_t si) {
    ExperimentConfig cfg = base;
    cfg.target_market = targets[ti];
    cfg.strategy = strategies[si];
    if (strategy_uses_sources(cfg.strategy)) {
      if (!cfg.auto_sources && cfg.source_markets.empty())
        for (const auto& [id, series] : data)
          if (id != cfg.target_market) cfg.source_markets.push_back(id);
      if (cfg.auto_sources) cfg.source_markets.clear();
    } else {
      cfg.source_markets.clear();
      cfg.auto_sources = false;
    }
    return cfg;
  };

  std::size_t n_cells = grid.reports.size();
  int workers = std::max(1, threads);
  auto worker = [&](std::size_t w) {
    for (std::size_t cell = w; cell < n_cells; cell += static_cast<std::size_t>(workers)) {
      std::size_t ti = cell / strategies.size();
      std::size_t si = cell % strategies.size();
      grid.reports[cell] = run_strategy(cell_config(ti, si), data);
    }
  };
  if (workers == 1) {
    worker(0);
  } else {
    std::vector<std::future<void>> futs;
    for (int w = 0; w < workers; ++w)
      futs.push_back(std::async(std::launch::async, worker, static_cast<std::size_t>(w)));
    for (auto& f : futs) f.get();
  }
  return grid;
}

MetricSet recompute_metrics(const EvaluationReport& report) {
  return metrics(report.panel, report.naive_panel);
}

}  // namespace epf
