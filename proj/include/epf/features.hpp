#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "epf/matrix.hpp"
#include "epf/timeseries.hpp"
#include "epf/transform.hpp"

namespace epf {

inline constexpr int kHorizon = 24;  // day-ahead targets
inline constexpr int kWeekdayDummies = 7;

struct FeatureSpec {
  bool use_temperature = true;
  bool use_dummies = true;
  int price_lags = 168;
  int temperature_lags = 168;

  int input_dim() const {
    return price_lags + (use_temperature ? temperature_lags : 0) +
           (use_dummies ? kWeekdayDummies : 0);
  }
  int lookback() const {
    return std::max(price_lags, use_temperature ? temperature_lags : 0);
  }
};

// Supervised samples in transformed units. Rows are ordered by anchor (the
// first target hour) unless explicitly shuffled.
struct SampleSet {
  Matrix inputs;
  Matrix targets;  // n x 24
  std::vector<HourIndex> anchors;
  std::vector<std::string> market_ids;

  std::size_t size() const { return anchors.size(); }
};

// Half-open interval of admissible anchors, in hours.
struct AnchorRange {
  HourIndex begin = 0;
  HourIndex end = 0;
};

// One sample per stride step. Price lags come first, most recent first, then
// temperature lags, then the one-hot weekday of the target day. With
// stride 24, anchors align to midnight so each target row is one calendar
// day. Throws "insufficient history" when no anchor fits.
SampleSet build_samples(const HourlySeries& series, const MarketTransforms& tx,
                        const FeatureSpec& spec, int stride_hours,
                        std::optional<AnchorRange> anchors = std::nullopt);

// Multi-market input: [M_1, ..., M_n, D_1..D_7] where each block M_i holds
// that market's price and temperature lags; targets belong to target_market.
SampleSet build_integrated(const std::vector<const HourlySeries*>& series_list,
                           const std::vector<MarketTransforms>& tx_list,
                           const FeatureSpec& spec,
                           const std::string& target_market, int stride_hours,
                           std::optional<AnchorRange> anchors = std::nullopt);

// Row-wise concatenation; sets must agree on input and target width.
SampleSet stack(const std::vector<SampleSet>& sets);

// Deterministic Fisher-Yates permutation of rows.
SampleSet shuffle_samples(const SampleSet& set, std::uint64_t seed);

// Keep the most recent floor(fraction * n) rows of an anchor-ascending set.
// Throws when nothing would remain.
SampleSet truncate_to_fraction(const SampleSet& set, double fraction);

// Debug dump for cross-implementation diffing: anchor, market, inputs, targets.
void dump_samples_csv(const SampleSet& set, const std::string& path);

}  // namespace epf
