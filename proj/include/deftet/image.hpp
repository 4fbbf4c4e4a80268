#pragma once

#include "deftet/common.hpp"

#include <vector>

namespace deftet {

/// Linear RGB plus a coverage mask, row-major with (0, 0) at the top left.
/// has_mask is false for images whose source carried no mask channel; the
/// mask then holds 1 everywhere and losses skip it.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<Vec3> rgb;
  std::vector<double> mask;
  bool has_mask = true;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(std::size_t(w) * h, Vec3::Zero()),
                        mask(std::size_t(w) * h, 0.0) {}

  [[nodiscard]] std::size_t pixel_count() const { return rgb.size(); }
  [[nodiscard]] std::size_t index(int x, int y) const { return std::size_t(y) * width + x; }
};

}  // namespace deftet
