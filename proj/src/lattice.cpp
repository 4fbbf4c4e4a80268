#include "deftet/lattice.hpp"

#include "deftet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace deftet {

namespace {

// Outward corner triples for a positively oriented tet, indexed by the
// opposite corner.
constexpr int kLocalFaces[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};

std::uint64_t face_key(Tri t) {
  std::sort(t.begin(), t.end());
  return (static_cast<std::uint64_t>(t[0]) << 42) | (static_cast<std::uint64_t>(t[1]) << 21) |
         static_cast<std::uint64_t>(t[2]);
}

}  // namespace

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

OccupancyField OccupancyField::from_logits(const std::vector<double>& logits) {
  std::vector<double> p(logits.size());
  std::transform(logits.begin(), logits.end(), p.begin(), logistic);
  return soft(std::move(p));
}

TetGrid make_tet_grid(std::vector<Vec3> rest_positions, std::vector<Tet> tets, int resolution) {
  if (resolution < 1) throw InvalidArgument("make_tet_grid: resolution must be >= 1");
  if (rest_positions.size() >= (std::size_t{1} << 21)) {
    throw InvalidArgument("make_tet_grid: too many vertices");
  }
  const int n = static_cast<int>(rest_positions.size());
  for (Tet& t : tets) {
    for (int v : t) {
      if (v < 0 || v >= n) throw InvalidArgument("make_tet_grid: tet index out of range");
    }
    const double vol = signed_volume(rest_positions[t[0]], rest_positions[t[1]],
                                     rest_positions[t[2]], rest_positions[t[3]]);
    if (vol == 0.0) throw DegenerateGeometry("make_tet_grid: zero-volume tet at rest");
    if (vol < 0.0) std::swap(t[2], t[3]);
  }

  TetGrid grid;
  grid.resolution = resolution;
  grid.offsets.assign(rest_positions.size(), Vec3::Zero());
  grid.rest_positions = std::move(rest_positions);
  grid.tets = std::move(tets);
  grid.tet_faces.resize(grid.tets.size());

  std::unordered_map<std::uint64_t, int> lookup;
  lookup.reserve(grid.tets.size() * 3);
  for (std::size_t k = 0; k < grid.tets.size(); ++k) {
    const Tet& t = grid.tets[k];
    for (int local = 0; local < 4; ++local) {
      const Tri tri{t[kLocalFaces[local][0]], t[kLocalFaces[local][1]], t[kLocalFaces[local][2]]};
      auto [it, inserted] = lookup.try_emplace(face_key(tri), static_cast<int>(grid.faces.size()));
      if (inserted) {
        grid.faces.push_back(tri);
        grid.face_adjacency.push_back({static_cast<int>(k), kExterior});
      } else {
        auto& adj = grid.face_adjacency[it->second];
        if (adj[1] != kExterior) {
          throw InvalidArgument("make_tet_grid: face shared by more than two tets");
        }
        adj[1] = static_cast<int>(k);
      }
      grid.tet_faces[k][local] = it->second;
    }
  }

  grid.vertex_neighbors.resize(grid.rest_positions.size());
  for (const Tet& t : grid.tets) {
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        if (i != j) grid.vertex_neighbors[t[i]].push_back(t[j]);
      }
    }
  }
  for (auto& nbrs : grid.vertex_neighbors) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
  return grid;
}

TetGrid build_lattice(int resolution) {
  if (resolution < 1) throw InvalidArgument("build_lattice: resolution must be >= 1");
  const int n = resolution;
  const int side = n + 1;
  auto index = [side](int i, int j, int k) { return i + side * (j + side * k); };

  std::vector<Vec3> positions;
  positions.reserve(static_cast<std::size_t>(side) * side * side);
  for (int k = 0; k <= n; ++k) {
    for (int j = 0; j <= n; ++j) {
      for (int i = 0; i <= n; ++i) {
        positions.emplace_back(static_cast<double>(i) / n, static_cast<double>(j) / n,
                               static_cast<double>(k) / n);
      }
    }
  }

  // Each cube splits into six tets along its main diagonal, one per ordering
  // of the axes walked from the low corner to the high corner.
  static constexpr int kAxisOrders[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                            {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  std::vector<Tet> tets;
  tets.reserve(static_cast<std::size_t>(6) * n * n * n);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        for (const auto& order : kAxisOrders) {
          int c[3] = {i, j, k};
          Tet t{};
          t[0] = index(c[0], c[1], c[2]);
          for (int step = 0; step < 3; ++step) {
            ++c[order[step]];
            t[step + 1] = index(c[0], c[1], c[2]);
          }
          tets.push_back(t);
        }
      }
    }
  }
  return make_tet_grid(std::move(positions), std::move(tets), resolution);
}

std::vector<Vec3> deformed_positions(const TetGrid& grid) {
  std::vector<Vec3> out(grid.rest_positions.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = grid.rest_positions[i] + grid.offsets[i];
  return out;
}

Tri oriented_face(const TetGrid& grid, int face, int tet) {
  const Tri& f = grid.faces[face];
  if (grid.face_adjacency[face][0] == tet) return f;
  return {f[0], f[2], f[1]};
}

std::vector<OrientedFace> surface_candidate_faces(const TetGrid& grid,
                                                  const OccupancyField& occ,
                                                  double threshold) {
  if (occ.size() != grid.tet_count()) {
    throw InvalidArgument("surface_candidate_faces: occupancy length does not match tet count");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw InvalidArgument("surface_candidate_faces: threshold must lie in (0, 1)");
  }
  std::vector<OrientedFace> out;
  for (std::size_t f = 0; f < grid.face_count(); ++f) {
    const auto [t0, t1] = grid.face_adjacency[f];
    const bool in0 = occ.values[t0] > threshold;
    const bool in1 = t1 != kExterior && occ.values[t1] > threshold;
    if (in0 == in1) continue;
    const int face = static_cast<int>(f);
    out.push_back({face, oriented_face(grid, face, in0 ? t0 : t1)});
  }
  return out;
}

std::vector<Tri> triangles_of(const std::vector<OrientedFace>& faces) {
  std::vector<Tri> out;
  out.reserve(faces.size());
  for (const auto& f : faces) out.push_back(f.vertices);
  return out;
}

}  // namespace deftet
