#include "deftet/metrics.hpp"

#include "deftet/bvh.hpp"
#include "deftet/energies.hpp"
#include "deftet/occupancy.hpp"
#include "deftet/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace deftet {

DistortionMetrics distortion_metrics(const TetGrid& grid, const OccupancyField& occ,
                                     double threshold) {
  if (occ.size() != grid.tet_count()) {
    throw InvalidArgument("distortion_metrics: occupancy length does not match tet count");
  }
  DistortionMetrics out;
  out.min_dihedral = 180.0;
  out.max_amips = 0.0;
  double amips_sum = 0.0;
  for (std::size_t k = 0; k < grid.tet_count(); ++k) {
    if (!(occ.values[k] > threshold)) continue;
    const Tet& t = grid.tets[k];
    const Vec3 a = grid.position(t[0]);
    const Vec3 b = grid.position(t[1]);
    const Vec3 c = grid.position(t[2]);
    const Vec3 d = grid.position(t[3]);
    ++out.occupied_count;
    try {
      const auto angles = dihedral_angles(a, b, c, d);
      out.min_dihedral = std::min(out.min_dihedral, *std::min_element(angles.begin(), angles.end()));
    } catch (const DegenerateGeometry&) {
      out.min_dihedral = 0.0;
    }
    const double e = amips_energy(a, b, c, d).value;
    amips_sum += e;
    out.max_amips = std::max(out.max_amips, e);
  }
  if (out.occupied_count == 0) throw NoSolid("distortion_metrics: no occupied tets");
  out.mean_amips = amips_sum / static_cast<double>(out.occupied_count);
  out.flipped_count = count_flipped(grid);
  return out;
}

namespace {

struct Directed {
  double mean = 0.0;
  double max = 0.0;
};

Directed directed_distance(const std::vector<Vec3>& points, const SurfaceMesh& surface) {
  const TriangleBvh bvh(surface.vertices, surface.triangles);
  constexpr std::size_t kChunk = 1024;
  const std::size_t chunks = chunk_count(points.size(), kChunk);
  std::vector<double> sums(chunks, 0.0);
  std::vector<double> maxima(chunks, 0.0);
  parallel_chunks(points.size(), kChunk, [&](std::size_t c, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double d = std::sqrt(bvh.nearest(points[i]).result.squared_distance);
      sums[c] += d;
      maxima[c] = std::max(maxima[c], d);
    }
  });
  Directed out;
  for (std::size_t c = 0; c < chunks; ++c) {
    out.mean += sums[c];
    out.max = std::max(out.max, maxima[c]);
  }
  out.mean /= static_cast<double>(points.size());
  return out;
}

}  // namespace

SurfaceDistances surface_distances(const SurfaceMesh& pred, const SurfaceMesh& gt,
                                   std::size_t samples, std::uint64_t seed) {
  // Both sample sets depend only on their own mesh, so swapping the arguments
  // swaps the two directed terms and leaves the result unchanged.
  const SampleSet gt_samples = sample_surface(gt, samples, seed);
  const SampleSet pred_samples = sample_surface(pred, samples, seed);
  const Directed gt_to_pred = directed_distance(gt_samples.points, pred);
  const Directed pred_to_gt = directed_distance(pred_samples.points, gt);
  return {std::max(gt_to_pred.max, pred_to_gt.max), 0.5 * (gt_to_pred.mean + pred_to_gt.mean)};
}

double psnr(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height || a.pixel_count() != b.pixel_count()) {
    throw InvalidArgument("psnr: image dimensions differ");
  }
  if (a.pixel_count() == 0) throw InvalidArgument("psnr: empty images");
  double sum = 0.0;
  for (std::size_t j = 0; j < a.pixel_count(); ++j) sum += (a.rgb[j] - b.rgb[j]).squaredNorm();
  const double mse = sum / (3.0 * static_cast<double>(a.pixel_count()));
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

SurfaceMesh extract_surface(const TetGrid& grid, const OccupancyField& occ, double threshold) {
  const auto faces = surface_candidate_faces(grid, occ, threshold);
  SurfaceMesh mesh;
  std::unordered_map<int, int> remap;
  for (const auto& f : faces) {
    Tri tri{};
    for (int i = 0; i < 3; ++i) {
      auto [it, inserted] = remap.try_emplace(f.vertices[i], static_cast<int>(mesh.vertices.size()));
      if (inserted) mesh.vertices.push_back(grid.position(f.vertices[i]));
      tri[i] = it->second;
    }
    mesh.triangles.push_back(tri);
  }
  return mesh;
}

QualityReport quality_report(const TetGrid& grid, const OccupancyField& occ,
                             const SurfaceMesh& target, std::size_t samples, std::uint64_t seed,
                             double threshold) {
  const DistortionMetrics distortion = distortion_metrics(grid, occ, threshold);
  const SurfaceMesh surface = extract_surface(grid, occ, threshold);
  const SurfaceDistances dist = surface_distances(surface, target, samples, seed);
  QualityReport r;
  r.min_dihedral = distortion.min_dihedral;
  r.mean_amips = distortion.mean_amips;
  r.max_amips = distortion.max_amips;
  r.flipped_count = distortion.flipped_count;
  r.hausdorff = dist.hausdorff;
  r.chamfer = dist.chamfer;
  r.tet_count = distortion.occupied_count;
  std::vector<char> used(grid.vertex_count(), 0);
  for (std::size_t k = 0; k < grid.tet_count(); ++k) {
    if (occ.values[k] > threshold) {
      for (int v : grid.tets[k]) used[v] = 1;
    }
  }
  r.vertex_count = static_cast<std::size_t>(std::count(used.begin(), used.end(), 1));
  return r;
}

}  // namespace deftet
