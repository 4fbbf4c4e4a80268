#pragma once

#include <cstddef>
#include <vector>

namespace deftet {

enum class OccupancyMode { Soft, Hard };

/// Per-tet occupancy. Hard fields hold exactly 0 or 1; soft fields hold
/// probabilities, usually logistic(logit) so they stay strictly inside (0, 1).
struct OccupancyField {
  std::vector<double> values;
  OccupancyMode mode = OccupancyMode::Hard;

  [[nodiscard]] std::size_t size() const { return values.size(); }

  static OccupancyField hard(std::vector<double> labels) {
    return {std::move(labels), OccupancyMode::Hard};
  }
  static OccupancyField soft(std::vector<double> probabilities) {
    return {std::move(probabilities), OccupancyMode::Soft};
  }
  static OccupancyField from_logits(const std::vector<double>& logits);
};

double logistic(double x);

}  // namespace deftet
