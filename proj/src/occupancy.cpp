#include "deftet/occupancy.hpp"

#include "deftet/log.hpp"
#include "deftet/parallel.hpp"

#include <algorithm>
#include <sstream>

namespace deftet {

OccupancyLabeling label_occupancy_detailed(const TetGrid& grid, const SurfaceMesh& target) {
  if (target.empty()) throw InvalidArgument("label_occupancy: empty target surface");
  const std::vector<Vec3> pos = deformed_positions(grid);
  OccupancyLabeling out;
  out.winding.resize(grid.tet_count());
  out.field = OccupancyField::hard(std::vector<double>(grid.tet_count(), 0.0));
  parallel_chunks(grid.tet_count(), 64, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const Tet& t = grid.tets[k];
      const Vec3 c = centroid(pos[t[0]], pos[t[1]], pos[t[2]], pos[t[3]]);
      const double w = winding_number(c, target);
      out.winding[k] = w;
      out.field.values[k] = w >= kInsideWinding ? 1.0 : 0.0;
    }
  });
  out.ambiguous_count = static_cast<std::size_t>(std::count_if(
      out.winding.begin(), out.winding.end(), [](double w) { return w > 0.25 && w < 0.75; }));
  if (out.ambiguous_count * 100 > grid.tet_count()) {
    std::ostringstream msg;
    msg << "label_occupancy: " << out.ambiguous_count << " of " << grid.tet_count()
        << " winding numbers lie in (0.25, 0.75); target is probably not watertight";
    log_warning(msg.str());
  }
  return out;
}

OccupancyField label_occupancy(const TetGrid& grid, const SurfaceMesh& target) {
  return label_occupancy_detailed(grid, target).field;
}

double face_probability(const TetGrid& grid, const OccupancyField& occ, int face) {
  if (face < 0 || static_cast<std::size_t>(face) >= grid.face_count()) {
    throw InvalidArgument("face_probability: face index out of range");
  }
  if (occ.size() != grid.tet_count()) {
    throw InvalidArgument("face_probability: occupancy length does not match tet count");
  }
  const auto [t0, t1] = grid.face_adjacency[face];
  const double o1 = occ.values[t0];
  const double o2 = t1 == kExterior ? 0.0 : occ.values[t1];
  return o1 * (1.0 - o2) + (1.0 - o1) * o2;
}

OccupancyField occupancy_from_vertex_visibility(const TetGrid& grid,
                                                std::span<const double> visibility) {
  if (visibility.size() != grid.vertex_count()) {
    throw InvalidArgument("occupancy_from_vertex_visibility: length does not match vertex count");
  }
  std::vector<double> occ(grid.tet_count());
  for (std::size_t k = 0; k < grid.tet_count(); ++k) {
    const Tet& t = grid.tets[k];
    occ[k] = std::max({visibility[t[0]], visibility[t[1]], visibility[t[2]], visibility[t[3]]});
  }
  return OccupancyField::soft(std::move(occ));
}

std::size_t count_flipped(const TetGrid& grid) {
  std::size_t flipped = 0;
  for (const Tet& t : grid.tets) {
    if (signed_volume(grid.position(t[0]), grid.position(t[1]), grid.position(t[2]),
                      grid.position(t[3])) <= 0.0) {
      ++flipped;
    }
  }
  return flipped;
}

}  // namespace deftet
