#include "epf/linear.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace epf {

std::array<double, kHorizon> naive_forecast(const HourlySeries& history,
                                            HourIndex target_day) {
  if (target_day % kHoursPerDay != 0)
    throw std::runtime_error("target day must start at midnight");
  int wd = weekday_mon0(target_day);
  bool weekly = (wd == 0 || wd == 5 || wd == 6);  // Monday, Saturday, Sunday
  HourIndex ref = target_day - (weekly ? 7 : 1) * kHoursPerDay;
  if (!history.covers(ref, ref + kHorizon))
    throw std::runtime_error("insufficient history for naive forecast");
  std::array<double, kHorizon> out{};
  for (int h = 0; h < kHorizon; ++h) out[h] = history.price_at(ref + h);
  return out;
}

LassoResult lasso_cd(const Matrix& x, std::span<const double> y, double lambda,
                     double tol, int max_sweeps) {
  if (x.rows == 0 || x.cols == 0) throw std::runtime_error("empty design matrix");
  if (y.size() != x.rows) throw std::runtime_error("row count mismatch");
  if (lambda < 0.0) throw std::runtime_error("lambda must be >= 0");

  std::size_t n = x.rows, p = x.cols;
  // Column-contiguous copy: the sweep walks one feature at a time.
  Matrix xt(p, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.row(i);
    for (std::size_t j = 0; j < p; ++j) xt.at(j, i) = xi[j];
  }
  std::vector<double> col_sq(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    const double* cj = xt.row(j);
    for (std::size_t i = 0; i < n; ++i) col_sq[j] += cj[i] * cj[i];
  }

  LassoResult res;
  res.beta.assign(p, 0.0);
  std::vector<double> r(y.begin(), y.end());  // residual y - X beta

  auto objective = [&]() {
    double rss = 0.0;
    for (double v : r) rss += v * v;
    double l1 = 0.0;
    for (double b : res.beta) l1 += std::abs(b);
    return rss + lambda * l1;
  };

  double thresh = lambda / 2.0;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (col_sq[j] < 1e-12) continue;  // constant-zero column stays inactive
      const double* cj = xt.row(j);
      double old = res.beta[j];
      double z = 0.0;
      for (std::size_t i = 0; i < n; ++i) z += cj[i] * r[i];
      z += col_sq[j] * old;
      double bj = 0.0;
      if (z > thresh)
        bj = (z - thresh) / col_sq[j];
      else if (z < -thresh)
        bj = (z + thresh) / col_sq[j];
      double d = bj - old;
      if (d != 0.0) {
        for (std::size_t i = 0; i < n; ++i) r[i] -= d * cj[i];
        res.beta[j] = bj;
      }
      max_change = std::max(max_change, std::abs(d));
    }
    res.sweeps = sweep + 1;
    res.objective_per_sweep.push_back(objective());
    if (max_change < tol) break;
  }
  return res;
}

LearModel lear_fit(const SampleSet& train_set, double lambda) {
  if (train_set.size() == 0) throw std::runtime_error("empty training set");
  std::size_t n = train_set.size(), p = train_set.inputs.cols;

  LearModel model;
  model.input_dim = p;
  model.lambda = lambda;
  model.feat_mean.assign(p, 0.0);
  model.feat_sd.assign(p, 1.0);

  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = train_set.inputs.row(i);
    for (std::size_t j = 0; j < p; ++j) model.feat_mean[j] += xi[j];
  }
  for (double& m : model.feat_mean) m /= static_cast<double>(n);
  std::vector<double> var(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = train_set.inputs.row(i);
    for (std::size_t j = 0; j < p; ++j) {
      double d = xi[j] - model.feat_mean[j];
      var[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < p; ++j) {
    double sd = std::sqrt(var[j] / static_cast<double>(n));
    model.feat_sd[j] = sd > 1e-12 ? sd : 1.0;  // constant columns stay inert
  }

  Matrix xs(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = train_set.inputs.row(i);
    double* si = xs.row(i);
    for (std::size_t j = 0; j < p; ++j)
      si[j] = (xi[j] - model.feat_mean[j]) / model.feat_sd[j];
  }

  model.beta = Matrix(kHorizon, p);
  model.intercept.assign(kHorizon, 0.0);
  std::vector<double> y(n);
  for (int h = 0; h < kHorizon; ++h) {
    double mean_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_y += train_set.targets.at(i, h);
    mean_y /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = train_set.targets.at(i, h) - mean_y;
    LassoResult res = lasso_cd(xs, y, lambda);
    std::copy(res.beta.begin(), res.beta.end(), model.beta.row(h));
    model.intercept[h] = mean_y;
  }
  return model;
}

std::array<double, kHorizon> lear_forecast(const LearModel& model,
                                           std::span<const double> input) {
  if (input.size() != model.input_dim)
    throw std::runtime_error("input dimension mismatch");
  std::array<double, kHorizon> out{};
  for (int h = 0; h < kHorizon; ++h) {
    const double* bh = model.beta.row(h);
    double acc = model.intercept[h];
    for (std::size_t j = 0; j < model.input_dim; ++j)
      acc += bh[j] * (input[j] - model.feat_mean[j]) / model.feat_sd[j];
    out[h] = acc;
  }
  return out;
}

void save_lear_checkpoint(const LearModel& model, const std::string& path) {
  nlohmann::json j;
  j["kind"] = "lear";
  j["input_dim"] = model.input_dim;
  j["lambda"] = model.lambda;
  j["feat_mean"] = model.feat_mean;
  j["feat_sd"] = model.feat_sd;
  j["beta"] = model.beta.data;
  j["intercept"] = model.intercept;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump();
}

LearModel load_lear_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint: parse error in '" + path + "': " + e.what());
  }
  auto require = [&](const char* key) -> const nlohmann::json& {
    auto it = j.find(key);
    if (it == j.end())
      throw std::runtime_error(std::string("checkpoint: missing field ") + key);
    return *it;
  };
  if (require("kind").get<std::string>() != "lear")
    throw std::runtime_error("checkpoint: kind is not 'lear'");
  LearModel m;
  m.input_dim = require("input_dim").get<std::size_t>();
  m.lambda = require("lambda").get<double>();
  m.feat_mean = require("feat_mean").get<std::vector<double>>();
  m.feat_sd = require("feat_sd").get<std::vector<double>>();
  m.intercept = require("intercept").get<std::vector<double>>();
  m.beta = Matrix(kHorizon, m.input_dim);
  auto beta = require("beta").get<std::vector<double>>();
  if (beta.size() != m.beta.data.size() || m.feat_mean.size() != m.input_dim ||
      m.feat_sd.size() != m.input_dim || m.intercept.size() != kHorizon)
    throw std::runtime_error("checkpoint: field lengths inconsistent with input_dim");
  m.beta.data = std::move(beta);
  return m;
}

}  // namespace epf
