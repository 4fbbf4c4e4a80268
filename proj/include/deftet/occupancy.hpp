#pragma once

#include "deftet/geometry.hpp"
#include "deftet/lattice.hpp"
#include "deftet/occupancy_field.hpp"

#include <span>

namespace deftet {

/// Winding-number value at or above which a centroid counts as inside.
inline constexpr double kInsideWinding = 0.5;

struct OccupancyLabeling {
  OccupancyField field;
  std::vector<double> winding;      // per-tet winding number at the deformed centroid
  std::size_t ambiguous_count = 0;  // winding values in (0.25, 0.75)
};

/// Hard labels from the winding number of each deformed tet centroid against
/// `target`. Logs a warning when more than 1% of the values are ambiguous,
/// which usually means the target is not watertight.
OccupancyLabeling label_occupancy_detailed(const TetGrid& grid, const SurfaceMesh& target);

OccupancyField label_occupancy(const TetGrid& grid, const SurfaceMesh& target);

/// P_s = O1 (1 - O2) + (1 - O1) O2; the exterior side of a boundary face has O = 0.
double face_probability(const TetGrid& grid, const OccupancyField& occ, int face);

/// O_k = max of the visibility values at the tet's four corners.
OccupancyField occupancy_from_vertex_visibility(const TetGrid& grid,
                                                std::span<const double> visibility);

/// Number of tets whose deformed signed volume is <= 0.
std::size_t count_flipped(const TetGrid& grid);

}  // namespace deftet
