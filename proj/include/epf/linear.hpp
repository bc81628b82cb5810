#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "epf/features.hpp"
#include "epf/matrix.hpp"
#include "epf/timeseries.hpp"

namespace epf {

// Calendar benchmark: hour-matched prices of d-7 for Monday/Saturday/Sunday
// targets, d-1 otherwise. `target_day` is the midnight of the forecast day.
std::array<double, kHorizon> naive_forecast(const HourlySeries& history,
                                            HourIndex target_day);

struct LassoResult {
  std::vector<double> beta;
  std::vector<double> objective_per_sweep;  // RSS + lambda * l1, one per sweep
  int sweeps = 0;
};

// Cyclic coordinate descent with soft-thresholding for
//   min_beta  sum_i (y_i - X beta)_i^2 + lambda * sum_j |beta_j|
// (plain RSS, no 1/2 or 1/n factor, so the per-coordinate threshold sits at
// lambda/2). No intercept; callers center/standardize beforehand. Stops when
// the largest coefficient change in a sweep drops below `tol` or after
// `max_sweeps`.
LassoResult lasso_cd(const Matrix& x, std::span<const double> y, double lambda,
                     double tol = 1e-8, int max_sweeps = 10000);

// 24 per-hour lasso regressions on the shared input vector. Features are
// standardized internally; coefficients live in standardized space with the
// scaling stored alongside. The intercept is unpenalized.
struct LearModel {
  std::size_t input_dim = 0;
  double lambda = 0.001;
  std::vector<double> feat_mean, feat_sd;
  Matrix beta;                    // 24 x input_dim
  std::vector<double> intercept;  // 24
};

LearModel lear_fit(const SampleSet& train_set, double lambda);

// Per-hour affine prediction in transformed units; the caller inverts the
// price transform.
std::array<double, kHorizon> lear_forecast(const LearModel& model,
                                           std::span<const double> input);

void save_lear_checkpoint(const LearModel& model, const std::string& path);
LearModel load_lear_checkpoint(const std::string& path);

}  // namespace epf
