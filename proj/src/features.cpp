#include "epf/features.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "epf/rng.hpp"

namespace epf {

namespace {

// Anchors t must satisfy: lookback inside the series, horizon inside the
// series, and [t, t+24) within the requested range when one is given.
std::vector<HourIndex> enumerate_anchors(const HourlySeries& series,
                                         int lookback, int stride,
                                         std::optional<AnchorRange> range) {
  if (stride != 1 && stride != kHorizon)
    throw std::runtime_error("stride must be 1 or 24");
  HourIndex first = series.start + lookback;
  HourIndex last = series.end() - kHorizon;  // inclusive
  if (range) {
    first = std::max(first, range->begin);
    last = std::min(last, range->end - kHorizon);
  }
  std::vector<HourIndex> anchors;
  if (stride == kHorizon) {
    // Midnight-aligned so each sample covers one calendar day.
    HourIndex t = day_begin(first);
    if (t < first) t += kHoursPerDay;
    for (; t <= last; t += kHoursPerDay) anchors.push_back(t);
  } else {
    for (HourIndex t = first; t <= last; ++t) anchors.push_back(t);
  }
  if (anchors.empty()) throw std::runtime_error("insufficient history");
  return anchors;
}

void fill_market_block(double* row, const HourlySeries& s,
                       const MarketTransforms& tx, const FeatureSpec& spec,
                       HourIndex t) {
  std::size_t col = 0;
  for (int k = 1; k <= spec.price_lags; ++k)
    row[col++] = tx.price.forward(s.price_at(t - k));
  if (spec.use_temperature)
    for (int k = 1; k <= spec.temperature_lags; ++k)
      row[col++] = tx.temperature.forward(s.temperature_at(t - k));
}

}  // namespace

SampleSet build_samples(const HourlySeries& series, const MarketTransforms& tx,
                        const FeatureSpec& spec, int stride_hours,
                        std::optional<AnchorRange> range) {
  if (series.length() < static_cast<std::size_t>(spec.lookback() + kHorizon))
    throw std::runtime_error("insufficient history");
  auto anchors = enumerate_anchors(series, spec.lookback(), stride_hours, range);

  SampleSet out;
  out.inputs = Matrix(anchors.size(), static_cast<std::size_t>(spec.input_dim()));
  out.targets = Matrix(anchors.size(), kHorizon);
  out.anchors = anchors;
  out.market_ids.assign(anchors.size(), series.market_id);
  std::size_t block = static_cast<std::size_t>(
      spec.price_lags + (spec.use_temperature ? spec.temperature_lags : 0));
  for (std::size_t r = 0; r < anchors.size(); ++r) {
    HourIndex t = anchors[r];
    double* row = out.inputs.row(r);
    fill_market_block(row, series, tx, spec, t);
    if (spec.use_dummies) row[block + weekday_mon0(t)] = 1.0;
    double* y = out.targets.row(r);
    for (int h = 0; h < kHorizon; ++h) y[h] = tx.price.forward(series.price_at(t + h));
  }
  return out;
}

SampleSet build_integrated(const std::vector<const HourlySeries*>& series_list,
                           const std::vector<MarketTransforms>& tx_list,
                           const FeatureSpec& spec,
                           const std::string& target_market, int stride_hours,
                           std::optional<AnchorRange> range) {
  if (series_list.empty() || series_list.size() != tx_list.size())
    throw std::runtime_error("series/params list mismatch");
  const HourlySeries* target = nullptr;
  for (const HourlySeries* s : series_list) {
    if (s->start != series_list[0]->start || s->length() != series_list[0]->length())
      throw std::runtime_error("market misalignment");
    if (s->market_id == target_market) target = s;
  }
  if (!target) throw std::runtime_error("target market not in series list");

  const HourlySeries& ref = *series_list[0];
  if (ref.length() < static_cast<std::size_t>(spec.lookback() + kHorizon))
    throw std::runtime_error("insufficient history");
  auto anchors = enumerate_anchors(ref, spec.lookback(), stride_hours, range);

  std::size_t block = static_cast<std::size_t>(
      spec.price_lags + (spec.use_temperature ? spec.temperature_lags : 0));
  std::size_t width = block * series_list.size() +
                      (spec.use_dummies ? kWeekdayDummies : 0);
  std::size_t target_ix = 0;
  while (series_list[target_ix] != target) ++target_ix;
  const MarketTransforms& target_tx = tx_list[target_ix];

  SampleSet out;
  out.inputs = Matrix(anchors.size(), width);
  out.targets = Matrix(anchors.size(), kHorizon);
  out.anchors = anchors;
  out.market_ids.assign(anchors.size(), target_market);
  for (std::size_t r = 0; r < anchors.size(); ++r) {
    HourIndex t = anchors[r];
    double* row = out.inputs.row(r);
    for (std::size_t m = 0; m < series_list.size(); ++m)
      fill_market_block(row + m * block, *series_list[m], tx_list[m], spec, t);
    if (spec.use_dummies)
      row[block * series_list.size() + weekday_mon0(t)] = 1.0;
    double* y = out.targets.row(r);
    for (int h = 0; h < kHorizon; ++h)
      y[h] = target_tx.price.forward(target->price_at(t + h));
  }
  return out;
}

SampleSet stack(const std::vector<SampleSet>& sets) {
  if (sets.empty()) throw std::runtime_error("nothing to stack");
  std::size_t in_dim = sets[0].inputs.cols;
  std::size_t n = 0;
  for (const SampleSet& s : sets) {
    if (s.inputs.cols != in_dim || s.targets.cols != kHorizon)
      throw std::runtime_error("sample dimension mismatch in stack");
    n += s.size();
  }
  SampleSet out;
  out.inputs = Matrix(n, in_dim);
  out.targets = Matrix(n, kHorizon);
  out.anchors.reserve(n);
  out.market_ids.reserve(n);
  std::size_t r = 0;
  for (const SampleSet& s : sets) {
    std::copy(s.inputs.data.begin(), s.inputs.data.end(), out.inputs.row(r));
    std::copy(s.targets.data.begin(), s.targets.data.end(), out.targets.row(r));
    out.anchors.insert(out.anchors.end(), s.anchors.begin(), s.anchors.end());
    out.market_ids.insert(out.market_ids.end(), s.market_ids.begin(), s.market_ids.end());
    r += s.size();
  }
  return out;
}

SampleSet shuffle_samples(const SampleSet& set, std::uint64_t seed) {
  std::vector<std::size_t> perm(set.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (std::size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[rng.index(i)]);

  SampleSet out;
  out.inputs = Matrix(set.size(), set.inputs.cols);
  out.targets = Matrix(set.size(), set.targets.cols);
  out.anchors.resize(set.size());
  out.market_ids.resize(set.size());
  for (std::size_t r = 0; r < perm.size(); ++r) {
    std::size_t src = perm[r];
    std::copy(set.inputs.row(src), set.inputs.row(src) + set.inputs.cols,
              out.inputs.row(r));
    std::copy(set.targets.row(src), set.targets.row(src) + set.targets.cols,
              out.targets.row(r));
    out.anchors[r] = set.anchors[src];
    out.market_ids[r] = set.market_ids[src];
  }
  return out;
}

SampleSet truncate_to_fraction(const SampleSet& set, double fraction) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw std::runtime_error("training fraction must lie in (0, 1]");
  std::size_t keep = static_cast<std::size_t>(fraction * static_cast<double>(set.size()));
  if (keep < 1) throw std::runtime_error("training fraction leaves no samples");
  if (keep >= set.size()) return set;
  std::size_t first = set.size() - keep;

  SampleSet out;
  out.inputs = Matrix(keep, set.inputs.cols);
  out.targets = Matrix(keep, set.targets.cols);
  std::copy(set.inputs.row(first), set.inputs.row(first) + keep * set.inputs.cols,
            out.inputs.row(0));
  std::copy(set.targets.row(first), set.targets.row(first) + keep * set.targets.cols,
            out.targets.row(0));
  out.anchors.assign(set.anchors.begin() + first, set.anchors.end());
  out.market_ids.assign(set.market_ids.begin() + first, set.market_ids.end());
  return out;
}

void dump_samples_csv(const SampleSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  auto fmt = [](double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
  };
  out << "anchor,market";
  for (std::size_t c = 0; c < set.inputs.cols; ++c) out << ",x" << c;
  for (std::size_t c = 0; c < set.targets.cols; ++c) out << ",y" << c;
  out << '\n';
  for (std::size_t r = 0; r < set.size(); ++r) {
    out << format_timestamp(set.anchors[r]) << ',' << set.market_ids[r];
    for (std::size_t c = 0; c < set.inputs.cols; ++c) out << ',' << fmt(set.inputs.at(r, c));
    for (std::size_t c = 0; c < set.targets.cols; ++c) out << ',' << fmt(set.targets.at(r, c));
    out << '\n';
  }
}

}  // namespace epf
