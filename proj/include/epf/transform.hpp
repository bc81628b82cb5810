#pragma once

#include <span>

namespace epf {

// Median-MAD normalization followed by asinh, the variance-stabilizing chain
// applied to prices (and, by the same rule, temperatures) before model
// fitting. Parameters are estimated on training data only.
struct TransformParams {
  double median = 0.0;
  double mad = 1.0;  // raw median absolute deviation, no consistency constant

  // median = sample median, mad = median of |x - median|.
  // Throws "degenerate series" when mad == 0.
  static TransformParams fit(std::span<const double> values);

  // asinh((p - median) / mad)
  double forward(double p) const;
  // sinh(y) * mad + median
  double inverse(double y) const;
};

// Per-market parameter pair; prices and temperatures are scaled independently.
struct MarketTransforms {
  TransformParams price;
  TransformParams temperature;
};

}  // namespace epf
