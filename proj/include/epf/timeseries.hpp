#pragma once

#include <optional>
#include <string>
#include <vector>

#include "epf/calendar.hpp"

namespace epf {

// One market's hourly price and temperature history on a strict hourly grid.
struct HourlySeries {
  std::string market_id;
  HourIndex start = 0;
  std::vector<double> prices;        // EUR/MWh
  std::vector<double> temperatures;  // degrees C, population-weighted

  std::size_t length() const { return prices.size(); }
  HourIndex end() const { return start + static_cast<HourIndex>(prices.size()); }
  bool covers(HourIndex begin, HourIndex end_excl) const {
    return begin >= start && end_excl <= end();
  }
  std::size_t index_of(HourIndex t) const {
    return static_cast<std::size_t>(t - start);
  }
  double price_at(HourIndex t) const { return prices[index_of(t)]; }
  double temperature_at(HourIndex t) const { return temperatures[index_of(t)]; }
};

// Chronologically ordered, disjoint half-open intervals in whole days.
struct SplitSpec {
  HourIndex train_begin = 0, train_end = 0;
  HourIndex val_begin = 0, val_end = 0;
  HourIndex test_begin = 0, test_end = 0;

  void validate() const;  // throws on overlap, disorder, or partial days
};

// Back-to-back train/validation/test ranges starting at `start`.
SplitSpec make_split_by_days(HourIndex start, int train_days, int val_days,
                             int test_days);

struct YearStats {
  int year = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

struct RawRow {
  HourIndex t = 0;
  double price = 0.0;
  double temperature = 0.0;
};

// Resolves DST anomalies: a single missing hour is filled with the mean of
// its two neighbours, duplicate hours are averaged. Both columns are treated
// identically. `expected_begin`/`expected_end` extend the covered interval
// beyond the observed rows; a missing hour at the interval edge has only one
// neighbour and is rejected ("boundary gap").
HourlySeries repair_dst(std::vector<RawRow> rows, const std::string& market_id,
                        std::optional<HourIndex> expected_begin = std::nullopt,
                        std::optional<HourIndex> expected_end = std::nullopt);

// CSV schema: header "timestamp,price,temperature", ISO-8601 local timestamps.
HourlySeries ingest_csv(const std::string& path, const std::string& market_id);
void emit_csv(const HourlySeries& series, const std::string& path);

// Per calendar year arithmetic mean and population standard deviation of
// prices, sorted by year.
std::vector<YearStats> describe(const HourlySeries& series);
void write_describe_csv(const std::vector<std::pair<std::string, std::vector<YearStats>>>& stats,
                        const std::string& path);

struct SyntheticSpec {
  std::uint64_t seed = 1;
  int n_markets = 4;
  int days = 120;
  double correlation = 0.9;  // cross-market noise correlation in [0, 1]
  double noise_scale = 3.0;  // EUR/MWh
  HourIndex start = 0;       // 0 -> defaulted to 2013-01-01 at generation time
};

// Deterministic multi-market toy data: a shared daily+weekly seasonal base,
// a per-market level offset, and noise whose cross-market correlation is
// controlled by `correlation`. Temperatures follow the same construction on
// a slower seasonal cycle.
std::vector<HourlySeries> generate_synthetic(const SyntheticSpec& spec);

}  // namespace epf
