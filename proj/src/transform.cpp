#include "epf/transform.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace epf {

namespace {

double median_of(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace

TransformParams TransformParams::fit(std::span<const double> values) {
  if (values.empty()) throw std::runtime_error("cannot fit transform on empty data");
  std::vector<double> v(values.begin(), values.end());
  double med = median_of(v);
  for (double& x : v) x = std::abs(x - med);
  double mad = median_of(v);
  if (mad == 0.0) throw std::runtime_error("degenerate series");
  return {med, mad};
}

double TransformParams::forward(double p) const {
  return std::asinh((p - median) / mad);
}

double TransformParams::inverse(double y) const {
  return std::sinh(y) * mad + median;
}

}  // namespace epf
