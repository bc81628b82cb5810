#pragma once

#include <string>
#include <vector>

#include "epf/calendar.hpp"
#include "epf/matrix.hpp"

namespace epf {

// Day-by-hour forecast/actual pair in price units. The pipeline always
// produces 24-hour rows; the metrics are generic over the row width.
struct ForecastPanel {
  Matrix actuals;    // n_days x hours
  Matrix forecasts;  // n_days x hours
  std::vector<HourIndex> days;

  std::size_t n_days() const { return days.size(); }
  void validate() const;
};

struct MetricSet {
  double mae = 0.0;
  double rmse = 0.0;
  double smape = 0.0;  // reported x100
  double rmae = 0.0;
};

// MAE, RMSE, sMAPE (x100) and rMAE = MAE(model)/MAE(naive). The naive panel
// supplies the rMAE denominator and must share days and actuals.
MetricSet metrics(const ForecastPanel& panel, const ForecastPanel& naive_panel);

struct DmResult {
  double statistic = 0.0;
  double p_value = 0.0;
  std::size_t n_days = 0;
};

// Multivariate Diebold-Mariano test on daily L1 losses:
//   L_{X,d} = sum_h |actual_{d,h} - forecast_{X,d,h}|,
//   delta_d = L_{A,d} - L_{B,d},
//   statistic = sqrt(N) * mean(delta) / sd(delta)  (sample sd, n-1),
//   p = Phi(-statistic) one-sided for "B forecasts better than A".
DmResult dm_test(const ForecastPanel& panel_a, const ForecastPanel& panel_b);

// Phi, the standard normal CDF (erfc-based, absolute error well under 1e-10).
double normal_cdf(double x);

// Pairwise p-value matrix: cell (row, col) is the p-value of "col better than
// row". The diagonal is left empty.
void write_dm_grid_csv(const std::vector<std::string>& names,
                       const std::vector<const ForecastPanel*>& panels,
                       const std::string& path);

}  // namespace epf
