#include "epf/evaluation.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace epf {

void ForecastPanel::validate() const {
  if (days.empty()) throw std::runtime_error("empty panel");
  if (actuals.rows != days.size() || !actuals.same_shape(forecasts) ||
      actuals.cols < 1)
    throw std::runtime_error("panel shape mismatch");
}

namespace {

void check_aligned(const ForecastPanel& a, const ForecastPanel& b) {
  a.validate();
  b.validate();
  if (a.days != b.days || !(a.actuals == b.actuals))
    throw std::runtime_error("panel misalignment");
}

double panel_mae(const ForecastPanel& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.actuals.data.size(); ++i)
    s += std::abs(p.actuals.data[i] - p.forecasts.data[i]);
  return s / static_cast<double>(p.actuals.data.size());
}

}  // namespace

MetricSet metrics(const ForecastPanel& panel, const ForecastPanel& naive_panel) {
  check_aligned(panel, naive_panel);
  MetricSet m;
  double se = 0.0, sm = 0.0;
  std::size_t n = panel.actuals.data.size();
  for (std::size_t i = 0; i < n; ++i) {
    double actual = panel.actuals.data[i];
    double pred = panel.forecasts.data[i];
    double err = actual - pred;
    se += err * err;
    double denom = std::abs(actual) + std::abs(pred);
    if (denom > 0.0) sm += 2.0 * std::abs(err) / denom;  // 0/0 term counts as 0
  }
  m.mae = panel_mae(panel);
  m.rmse = std::sqrt(se / static_cast<double>(n));
  m.smape = 100.0 * sm / static_cast<double>(n);
  double naive_mae = panel_mae(naive_panel);
  if (naive_mae == 0.0) throw std::runtime_error("degenerate denominator");
  m.rmae = m.mae / naive_mae;
  return m;
}

DmResult dm_test(const ForecastPanel& panel_a, const ForecastPanel& panel_b) {
  check_aligned(panel_a, panel_b);
  std::size_t n = panel_a.n_days();
  if (n < 2) throw std::runtime_error("need at least 2 days for the DM test");

  std::vector<double> delta(n);
  for (std::size_t d = 0; d < n; ++d) {
    double la = 0.0, lb = 0.0;
    for (std::size_t h = 0; h < panel_a.actuals.cols; ++h) {
      la += std::abs(panel_a.actuals.at(d, h) - panel_a.forecasts.at(d, h));
      lb += std::abs(panel_b.actuals.at(d, h) - panel_b.forecasts.at(d, h));
    }
    delta[d] = la - lb;
  }
  double mean = 0.0;
  for (double v : delta) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : delta) ss += (v - mean) * (v - mean);
  double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0) throw std::runtime_error("degenerate differential");

  DmResult r;
  r.n_days = n;
  r.statistic = std::sqrt(static_cast<double>(n)) * mean / sd;
  r.p_value = normal_cdf(-r.statistic);
  return r;
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

void write_dm_grid_csv(const std::vector<std::string>& names,
                       const std::vector<const ForecastPanel*>& panels,
                       const std::string& path) {
  if (names.size() != panels.size()) throw std::runtime_error("name/panel mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  auto fmt = [](double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
  };
  out << "method";
  for (const std::string& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t row = 0; row < names.size(); ++row) {
    out << names[row];
    for (std::size_t col = 0; col < names.size(); ++col) {
      out << ',';
      if (row == col) continue;
      try {
        out << fmt(dm_test(*panels[row], *panels[col]).p_value);
      } catch (const std::runtime_error&) {
        // identical forecasts: the differential is degenerate, leave blank
      }
    }
    out << '\n';
  }
}

}  // namespace epf
