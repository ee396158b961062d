#pragma once

#include <span>
#include <string>

#include "boaw/error.hpp"
#include "boaw/matrix.hpp"

namespace boaw::classifiers {

/// Training data must have matching sizes, finite values and both labels.
inline void check_training_data(const Matrix& x, std::span<const int> y) {
  if (x.rows() != y.size()) throw ArgumentError("row count and label count differ");
  bool has0 = false, has1 = false;
  for (int v : y) {
    if (v == 0) has0 = true;
    else if (v == 1) has1 = true;
    else throw ArgumentError("labels must be 0 or 1");
  }
  if (!has0 || !has1) throw ArgumentError("training data must contain both classes");
  for (double v : x.data())
    if (!std::isfinite(v)) throw ArgumentError("training data contains non-finite values");
}

inline void check_width(std::span<const double> row, std::size_t width) {
  if (row.size() != width)
    throw SchemaError("input width " + std::to_string(row.size()) + " does not match model width " +
                      std::to_string(width));
}

}  // namespace boaw::classifiers
