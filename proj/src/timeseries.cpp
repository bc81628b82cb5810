#include "epf/timeseries.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "epf/rng.hpp"

namespace epf {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view s, const char* what, std::size_t row) {
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw std::runtime_error("row " + std::to_string(row) + ": bad " +
                             std::string(what) + " '" + std::string(s) + "'");
  return v;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

void SplitSpec::validate() const {
  auto whole_days = [](HourIndex a, HourIndex b) {
    return a % kHoursPerDay == 0 && b % kHoursPerDay == 0;
  };
  if (!whole_days(train_begin, train_end) || !whole_days(val_begin, val_end) ||
      !whole_days(test_begin, test_end))
    throw std::runtime_error("split ranges must cover whole days");
  if (!(train_begin < train_end && val_begin < val_end && test_begin < test_end))
    throw std::runtime_error("split ranges must be non-empty");
  if (!(train_end <= val_begin && val_end <= test_begin))
    throw std::runtime_error("split ranges must be ordered train < validation < test");
}

SplitSpec make_split_by_days(HourIndex start, int train_days, int val_days,
                             int test_days) {
  SplitSpec s;
  s.train_begin = start;
  s.train_end = start + static_cast<HourIndex>(train_days) * kHoursPerDay;
  s.val_begin = s.train_end;
  s.val_end = s.val_begin + static_cast<HourIndex>(val_days) * kHoursPerDay;
  s.test_begin = s.val_end;
  s.test_end = s.test_begin + static_cast<HourIndex>(test_days) * kHoursPerDay;
  s.validate();
  return s;
}

HourlySeries repair_dst(std::vector<RawRow> rows, const std::string& market_id,
                        std::optional<HourIndex> expected_begin,
                        std::optional<HourIndex> expected_end) {
  if (rows.empty()) throw std::runtime_error("empty series");
  std::stable_sort(rows.begin(), rows.end(),
                   [](const RawRow& a, const RawRow& b) { return a.t < b.t; });

  // Average duplicate hours in place.
  std::vector<RawRow> dedup;
  dedup.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size();) {
    std::size_t j = i;
    double p = 0.0, tmp = 0.0;
    while (j < rows.size() && rows[j].t == rows[i].t) {
      p += rows[j].price;
      tmp += rows[j].temperature;
      ++j;
    }
    double n = static_cast<double>(j - i);
    dedup.push_back({rows[i].t, p / n, tmp / n});
    i = j;
  }

  HourIndex begin = expected_begin.value_or(dedup.front().t);
  HourIndex end = expected_end.value_or(dedup.back().t + 1);
  if (begin > dedup.front().t || end <= dedup.back().t)
    throw std::runtime_error("rows outside expected interval");
  if (dedup.front().t - begin > 0 || end - (dedup.back().t + 1) > 0) {
    // A missing hour at the interval edge has no neighbour on one side.
    throw std::runtime_error("boundary gap");
  }

  HourlySeries out;
  out.market_id = market_id;
  out.start = begin;
  out.prices.reserve(static_cast<std::size_t>(end - begin));
  out.temperatures.reserve(static_cast<std::size_t>(end - begin));
  for (std::size_t i = 0; i < dedup.size(); ++i) {
    if (i > 0) {
      HourIndex step = dedup[i].t - dedup[i - 1].t;
      if (step == 2) {
        out.prices.push_back((dedup[i - 1].price + dedup[i].price) / 2.0);
        out.temperatures.push_back(
            (dedup[i - 1].temperature + dedup[i].temperature) / 2.0);
      } else if (step > 2) {
        throw std::runtime_error("unrepairable gap at " +
                                 format_timestamp(dedup[i - 1].t + 1));
      }
    }
    out.prices.push_back(dedup[i].price);
    out.temperatures.push_back(dedup[i].temperature);
  }
  return out;
}

HourlySeries ingest_csv(const std::string& path, const std::string& market_id) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "timestamp,price,temperature")
    throw std::runtime_error("unexpected CSV header '" + line + "'");

  std::vector<RawRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t c1 = line.find(',');
    std::size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos)
      throw std::runtime_error("row " + std::to_string(lineno) + ": expected 3 columns");
    RawRow r;
    try {
      r.t = parse_timestamp(std::string_view(line).substr(0, c1));
    } catch (const std::exception& e) {
      throw std::runtime_error("row " + std::to_string(lineno) + ": " + e.what());
    }
    r.price = parse_double(std::string_view(line).substr(c1 + 1, c2 - c1 - 1), "price", lineno);
    r.temperature = parse_double(std::string_view(line).substr(c2 + 1), "temperature", lineno);
    rows.push_back(r);
  }
  if (rows.empty()) throw std::runtime_error("no data rows in '" + path + "'");
  return repair_dst(std::move(rows), market_id);
}

void emit_csv(const HourlySeries& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "timestamp,price,temperature\n";
  for (std::size_t i = 0; i < series.length(); ++i) {
    out << format_timestamp(series.start + static_cast<HourIndex>(i)) << ','
        << fmt_double(series.prices[i]) << ',' << fmt_double(series.temperatures[i])
        << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<YearStats> describe(const HourlySeries& series) {
  if (series.length() == 0) throw std::runtime_error("empty series");
  std::map<int, std::vector<double>> by_year;
  for (std::size_t i = 0; i < series.length(); ++i)
    by_year[year_of(series.start + static_cast<HourIndex>(i))].push_back(series.prices[i]);
  std::vector<YearStats> out;
  for (auto& [year, vals] : by_year) {
    double m = mean_of(vals);
    double ss = 0.0;
    for (double x : vals) ss += (x - m) * (x - m);
    out.push_back({year, m, std::sqrt(ss / static_cast<double>(vals.size()))});
  }
  return out;
}

void write_describe_csv(
    const std::vector<std::pair<std::string, std::vector<YearStats>>>& stats,
    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "market,year,mean,std\n";
  for (const auto& [market, years] : stats)
    for (const auto& y : years)
      out << market << ',' << y.year << ',' << fmt_double(y.mean) << ','
          << fmt_double(y.stddev) << '\n';
}

std::vector<HourlySeries> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_markets < 1) throw std::runtime_error("n_markets must be >= 1");
  if (spec.days < 15) throw std::runtime_error("days must be >= 15");
  if (spec.correlation < 0.0 || spec.correlation > 1.0)
    throw std::runtime_error("correlation must lie in [0, 1]");

  HourIndex start = spec.start != 0 ? spec.start : make_hour(2013, 1, 1, 0);
  std::size_t n_hours = static_cast<std::size_t>(spec.days) * kHoursPerDay;
  double rho = spec.correlation;
  double w_shared = std::sqrt(rho);
  double w_own = std::sqrt(1.0 - rho);

  // One stream for the shared noise, one per market; adding markets does not
  // perturb the series of existing ones.
  Rng shared(mix_seed(spec.seed, 0));
  std::vector<double> shared_price(n_hours), shared_temp(n_hours);
  for (std::size_t h = 0; h < n_hours; ++h) shared_price[h] = shared.gaussian();
  for (std::size_t h = 0; h < n_hours; ++h) shared_temp[h] = shared.gaussian();

  constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
  std::vector<HourlySeries> out;
  out.reserve(static_cast<std::size_t>(spec.n_markets));
  for (int m = 0; m < spec.n_markets; ++m) {
    Rng own(mix_seed(spec.seed, 1 + static_cast<std::uint64_t>(m)));
    HourlySeries s;
    s.market_id = "M" + std::to_string(m + 1);
    s.start = start;
    s.prices.resize(n_hours);
    s.temperatures.resize(n_hours);
    double price_offset = 5.0 * m;
    double temp_offset = 0.5 * m;
    for (std::size_t h = 0; h < n_hours; ++h) {
      double t = static_cast<double>(h);
      // Two daily harmonics give the asymmetric ramp-up/drop-off profile of
      // real day-ahead prices; the weekly cycle modulates on top.
      double base = 40.0 + 10.0 * std::sin(kTwoPi * t / 24.0 + 1.0) +
                    4.0 * std::sin(2.0 * kTwoPi * t / 24.0 + 0.7) +
                    5.0 * std::sin(kTwoPi * t / 168.0 + 0.5);
      double eps = w_shared * shared_price[h] + w_own * own.gaussian();
      s.prices[h] = base + price_offset + spec.noise_scale * eps;
      double tbase = 12.0 + 8.0 * std::sin(kTwoPi * t / (365.0 * 24.0) - 1.3) +
                     4.0 * std::sin(kTwoPi * t / 24.0 - 2.0);
      double teps = w_shared * shared_temp[h] + w_own * own.gaussian();
      s.temperatures[h] = tbase + temp_offset + 1.5 * teps;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace epf
