#pragma once

#include "deftet/geometry.hpp"
#include "deftet/image.hpp"
#include "deftet/lattice.hpp"
#include "deftet/occupancy_field.hpp"

#include <optional>

namespace deftet {

struct DistortionMetrics {
  double min_dihedral = 0.0;  // degrees, over occupied tets
  double mean_amips = 0.0;
  double max_amips = 0.0;
  std::size_t flipped_count = 0;  // over the whole grid
  std::size_t occupied_count = 0;
};

/// Dihedral and AMIPS statistics over tets with occupancy above `threshold`.
/// Throws NoSolid when no tet is occupied.
DistortionMetrics distortion_metrics(const TetGrid& grid, const OccupancyField& occ,
                                     double threshold = 0.5);

struct SurfaceDistances {
  double hausdorff = 0.0;  // sampled: max of both directed sample-to-surface maxima
  double chamfer = 0.0;    // mean of the two directed mean distances
};

inline constexpr std::size_t kDefaultMetricSamples = 100000;

/// Unsquared point-to-surface distances between area-weighted samples of each
/// mesh and the exact other surface.
SurfaceDistances surface_distances(const SurfaceMesh& pred, const SurfaceMesh& gt,
                                   std::size_t samples = kDefaultMetricSamples,
                                   std::uint64_t seed = 0);

/// 10 log10(1 / MSE) over the RGB channels; +infinity for identical images.
double psnr(const Image& a, const Image& b);

struct QualityReport {
  double min_dihedral = 0.0;
  double mean_amips = 0.0;
  double max_amips = 0.0;
  std::size_t flipped_count = 0;
  double hausdorff = 0.0;
  double chamfer = 0.0;
  std::size_t tet_count = 0;
  std::size_t vertex_count = 0;
  std::optional<double> psnr;
};

/// Surface of the occupied region as a standalone mesh (vertices compacted).
SurfaceMesh extract_surface(const TetGrid& grid, const OccupancyField& occ,
                            double threshold = 0.5);

/// Fills every QualityReport field for the occupied part of `grid` measured
/// against `target`.
QualityReport quality_report(const TetGrid& grid, const OccupancyField& occ,
                             const SurfaceMesh& target, std::size_t samples, std::uint64_t seed,
                             double threshold = 0.5);

}  // namespace deftet
