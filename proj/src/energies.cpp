#include "deftet/energies.hpp"

#include "deftet/bvh.hpp"
#include "deftet/occupancy.hpp"
#include "deftet/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace deftet {

namespace {

constexpr std::size_t kChunk = 256;

TermResult zero_term(const TetGrid& grid) {
  return {0.0, std::vector<Vec3>(grid.vertex_count(), Vec3::Zero())};
}

// Edge matrix of the unit regular tetrahedron, inverted once.
const Mat3& reference_inverse() {
  static const Mat3 inv = [] {
    Mat3 r;
    r.col(0) = Vec3(1.0, 0.0, 0.0);
    r.col(1) = Vec3(0.5, std::sqrt(3.0) / 2.0, 0.0);
    r.col(2) = Vec3(0.5, std::sqrt(3.0) / 6.0, std::sqrt(2.0 / 3.0));
    return Mat3(r.inverse());
  }();
  return inv;
}

// Per-chunk gradient buffers summed in chunk order.
struct ChunkedGradient {
  ChunkedGradient(std::size_t chunks, std::size_t n)
      : values(chunks, 0.0), grads(chunks, std::vector<Vec3>(n, Vec3::Zero())) {}

  TermResult reduce() const {
    TermResult out{0.0, std::vector<Vec3>(grads.empty() ? 0 : grads[0].size(), Vec3::Zero())};
    for (std::size_t c = 0; c < values.size(); ++c) {
      out.value += values[c];
      for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += grads[c][i];
    }
    return out;
  }

  std::vector<double> values;
  std::vector<std::vector<Vec3>> grads;
};

}  // namespace

void EnergyConfig::validate() const {
  for (double w : {lambda_recon, lambda_surf, lambda_lap, lambda_del, lambda_vol, lambda_amips,
                   lambda_sm, lambda_mask}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InvalidArgument("EnergyConfig: weights must be finite and nonnegative");
    }
  }
  if (sample_count_target == 0 || sample_count_pred == 0) {
    throw InvalidArgument("EnergyConfig: sample counts must be positive");
  }
}

BceResult occupancy_bce(const OccupancyField& occ, const OccupancyField& labels) {
  if (occ.mode != OccupancyMode::Soft || labels.mode != OccupancyMode::Hard) {
    throw InvalidArgument("occupancy_bce: expects soft predictions and hard labels");
  }
  if (occ.size() != labels.size()) throw InvalidArgument("occupancy_bce: length mismatch");
  BceResult out;
  out.grad_logits.resize(occ.size());
  for (std::size_t k = 0; k < occ.size(); ++k) {
    const double o = std::clamp(occ.values[k], kProbabilityClamp, 1.0 - kProbabilityClamp);
    const double y = labels.values[k];
    out.value -= y * std::log(o) + (1.0 - y) * std::log(1.0 - o);
    out.grad_logits[k] = occ.values[k] - y;
  }
  return out;
}

TermResult surface_loss(const TetGrid& grid, const std::vector<OrientedFace>& faces,
                        std::span<const Vec3> target, const SampleSet& predicted) {
  if (faces.empty()) throw NoSurface("surface_loss: no candidate surface faces");
  if (target.empty() || predicted.points.empty()) {
    throw InvalidArgument("surface_loss: empty sample set");
  }
  if (predicted.source_face.size() != predicted.points.size() ||
      predicted.barycentrics.size() != predicted.points.size()) {
    throw InvalidArgument("surface_loss: predicted samples lack face coordinates");
  }
  const std::size_t n = grid.vertex_count();
  const std::vector<Vec3> pos = deformed_positions(grid);
  const std::vector<Tri> tris = triangles_of(faces);
  const TriangleBvh bvh(pos, tris);

  // Target samples pull on the vertices of their closest face.
  ChunkedGradient to_surface(chunk_count(target.size(), kChunk), n);
  parallel_chunks(target.size(), kChunk, [&](std::size_t c, std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      const auto nearest = bvh.nearest(target[s]);
      const Tri& t = tris[nearest.triangle];
      to_surface.values[c] += nearest.result.squared_distance;
      const Vec3 diff = 2.0 * (target[s] - nearest.result.closest);
      for (int i = 0; i < 3; ++i) to_surface.grads[c][t[i]] -= nearest.result.barycentric(i) * diff;
    }
  });

  // Predicted samples ride on their faces and pull toward the closest target sample.
  const std::size_t m = predicted.points.size();
  ChunkedGradient to_target(chunk_count(m, kChunk), n);
  parallel_chunks(m, kChunk, [&](std::size_t c, std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      const int face = predicted.source_face[s];
      if (face < 0 || static_cast<std::size_t>(face) >= tris.size()) {
        throw InvalidArgument("surface_loss: predicted sample references unknown face");
      }
      const Tri& t = tris[face];
      const Vec3& b = predicted.barycentrics[s];
      const Vec3 q = b(0) * pos[t[0]] + b(1) * pos[t[1]] + b(2) * pos[t[2]];
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_index = 0;
      for (std::size_t p = 0; p < target.size(); ++p) {
        const double d = (q - target[p]).squaredNorm();
        if (d < best) {
          best = d;
          best_index = p;
        }
      }
      to_target.values[c] += best;
      const Vec3 diff = 2.0 * (q - target[best_index]);
      for (int i = 0; i < 3; ++i) to_target.grads[c][t[i]] += b(i) * diff;
    }
  });

  TermResult out = to_surface.reduce();
  const TermResult second = to_target.reduce();
  out.value += second.value;
  for (std::size_t i = 0; i < n; ++i) out.grad[i] += second.grad[i];
  return out;
}

TermResult laplacian_loss(const TetGrid& grid) {
  TermResult out = zero_term(grid);
  const std::size_t n = grid.vertex_count();
  std::vector<Vec3> residual(n, Vec3::Zero());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nbrs = grid.vertex_neighbors[i];
    if (nbrs.empty()) continue;
    Vec3 mean = Vec3::Zero();
    for (int j : nbrs) mean += grid.offsets[j];
    mean /= static_cast<double>(nbrs.size());
    residual[i] = grid.offsets[i] - mean;
    out.value += residual[i].squaredNorm();
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nbrs = grid.vertex_neighbors[i];
    if (nbrs.empty()) continue;
    out.grad[i] += 2.0 * residual[i];
    const Vec3 share = 2.0 * residual[i] / static_cast<double>(nbrs.size());
    for (int j : nbrs) out.grad[j] -= share;
  }
  return out;
}

TermResult delta_loss(const TetGrid& grid) {
  TermResult out = zero_term(grid);
  for (std::size_t i = 0; i < grid.vertex_count(); ++i) {
    out.value += grid.offsets[i].squaredNorm();
    out.grad[i] = 2.0 * grid.offsets[i];
  }
  return out;
}

TermResult equivolume_loss(const TetGrid& grid) {
  TermResult out = zero_term(grid);
  if (grid.tets.empty()) return out;
  double rest_total = 0.0;
  for (const Tet& t : grid.tets) {
    rest_total += signed_volume(grid.rest_positions[t[0]], grid.rest_positions[t[1]],
                                grid.rest_positions[t[2]], grid.rest_positions[t[3]]);
  }
  const double mean_rest = rest_total / static_cast<double>(grid.tet_count());
  for (const Tet& t : grid.tets) {
    const Vec3 a = grid.position(t[0]);
    const Vec3 b = grid.position(t[1]);
    const Vec3 c = grid.position(t[2]);
    const Vec3 d = grid.position(t[3]);
    const double ratio = signed_volume(a, b, c, d) / mean_rest - 1.0;
    out.value += ratio * ratio;
    const auto g = signed_volume_grad(a, b, c, d);
    for (int i = 0; i < 4; ++i) out.grad[t[i]] += (2.0 * ratio / mean_rest) * g[i];
  }
  return out;
}

TetEnergy amips_energy(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  Mat3 edges;
  edges.col(0) = b - a;
  edges.col(1) = c - a;
  edges.col(2) = d - a;
  const Mat3& ref_inv = reference_inverse();
  const Mat3 jac = edges * ref_inv;
  const double det = jac.determinant();

  Mat3 g_jac;
  TetEnergy out;
  if (det > kAmipsMinDet) {
    const double frob = jac.squaredNorm();
    const double scale = std::pow(det, -2.0 / 3.0);
    out.value = frob * scale;
    g_jac = 2.0 * scale * jac - (2.0 / 3.0) * frob * scale * jac.inverse().transpose();
  } else {
    out.value = kAmipsBarrier + kAmipsBarrierSlope * (kAmipsMinDet - det);
    Mat3 cofactor;
    cofactor.col(0) = jac.col(1).cross(jac.col(2));
    cofactor.col(1) = jac.col(2).cross(jac.col(0));
    cofactor.col(2) = jac.col(0).cross(jac.col(1));
    g_jac = -kAmipsBarrierSlope * cofactor;
  }
  const Mat3 g_edges = g_jac * ref_inv.transpose();
  out.grad[1] = g_edges.col(0);
  out.grad[2] = g_edges.col(1);
  out.grad[3] = g_edges.col(2);
  out.grad[0] = -(out.grad[1] + out.grad[2] + out.grad[3]);
  return out;
}

TermResult amips_loss(const TetGrid& grid) {
  const std::size_t k_count = grid.tet_count();
  ChunkedGradient acc(chunk_count(k_count, kChunk), grid.vertex_count());
  parallel_chunks(k_count, kChunk, [&](std::size_t c, std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const Tet& t = grid.tets[k];
      const TetEnergy e = amips_energy(grid.position(t[0]), grid.position(t[1]),
                                       grid.position(t[2]), grid.position(t[3]));
      acc.values[c] += e.value;
      for (int i = 0; i < 4; ++i) acc.grads[c][t[i]] += e.grad[i];
    }
  });
  if (k_count == 0) return zero_term(grid);
  return acc.reduce();
}

TermResult smoothness_loss(const TetGrid& grid, const std::vector<OrientedFace>& faces) {
  TermResult out = zero_term(grid);
  std::vector<Vec3> normals(faces.size());
  std::vector<Vec3> raw(faces.size());
  std::vector<double> lengths(faces.size());
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const Tri& t = faces[i].vertices;
    const Vec3 a = grid.position(t[0]);
    raw[i] = (grid.position(t[1]) - a).cross(grid.position(t[2]) - a);
    lengths[i] = raw[i].norm();
    const double scale = std::max((grid.position(t[1]) - a).squaredNorm(),
                                  (grid.position(t[2]) - a).squaredNorm());
    if (!(lengths[i] > 1e-12 * scale)) {
      throw DegenerateGeometry("smoothness_loss: degenerate face");
    }
    normals[i] = raw[i] / lengths[i];
  }

  std::unordered_map<std::uint64_t, std::vector<int>> edge_faces;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const Tri& t = faces[i].vertices;
    for (int e = 0; e < 3; ++e) {
      const auto lo = static_cast<std::uint64_t>(std::min(t[e], t[(e + 1) % 3]));
      const auto hi = static_cast<std::uint64_t>(std::max(t[e], t[(e + 1) % 3]));
      edge_faces[(lo << 32) | hi].push_back(static_cast<int>(i));
    }
  }
  std::vector<std::uint64_t> keys;
  keys.reserve(edge_faces.size());
  for (const auto& [key, _] : edge_faces) keys.push_back(key);
  std::sort(keys.begin(), keys.end());

  // d(n_i . n_j)/d(raw_i) = (n_j - (n_i . n_j) n_i) / |raw_i|.
  auto push_normal_grad = [&](int face, const Vec3& g_raw) {
    const Tri& t = faces[face].vertices;
    const Vec3 a = grid.position(t[0]);
    const Vec3 e1 = grid.position(t[1]) - a;
    const Vec3 e2 = grid.position(t[2]) - a;
    const Vec3 g1 = e2.cross(g_raw);
    const Vec3 g2 = g_raw.cross(e1);
    out.grad[t[1]] += g1;
    out.grad[t[2]] += g2;
    out.grad[t[0]] -= g1 + g2;
  };
  for (std::uint64_t key : keys) {
    const auto& list = edge_faces[key];
    for (std::size_t x = 0; x < list.size(); ++x) {
      for (std::size_t y = x + 1; y < list.size(); ++y) {
        const int i = list[x];
        const int j = list[y];
        const double dot = normals[i].dot(normals[j]);
        out.value += 1.0 - dot;
        push_normal_grad(i, -(normals[j] - dot * normals[i]) / lengths[i]);
        push_normal_grad(j, -(normals[i] - dot * normals[j]) / lengths[j]);
      }
    }
  }
  return out;
}

namespace {
double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }
}  // namespace

ImageLossResult image_loss(const Image& rendered, const Image& reference, double lambda_mask) {
  if (rendered.width != reference.width || rendered.height != reference.height ||
      rendered.pixel_count() != reference.pixel_count()) {
    throw InvalidArgument("image_loss: image dimensions differ");
  }
  const std::size_t pixels = rendered.pixel_count();
  ImageLossResult out;
  out.grad_rgb.assign(pixels, Vec3::Zero());
  out.grad_mask.assign(pixels, 0.0);
  for (std::size_t j = 0; j < pixels; ++j) {
    for (int ch = 0; ch < 3; ++ch) {
      const double diff = rendered.rgb[j](ch) - reference.rgb[j](ch);
      out.value += std::abs(diff);
      out.grad_rgb[j](ch) = sign(diff);
    }
    if (reference.has_mask) {
      const double diff = rendered.mask[j] - reference.mask[j];
      out.value += lambda_mask * std::abs(diff);
      out.grad_mask[j] = lambda_mask * sign(diff);
    }
  }
  return out;
}

namespace {

void add_scaled(std::vector<Vec3>& into, const std::vector<Vec3>& from, double scale) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += scale * from[i];
}

void add_term(EnergyReport& report, const std::string& name, double weight, const TermResult& t) {
  report.terms[name] = t.value;
  report.weighted[name] = weight * t.value;
  report.total += weight * t.value;
  if (weight != 0.0) add_scaled(report.grad_offsets, t.grad, weight);
}

}  // namespace

EnergyReport total_loss(const TetGrid& grid, const EnergyConfig& config, LossMode mode,
                        const Recon3dInputs* recon3d, const Recon2dInputs* recon2d) {
  config.validate();
  const std::size_t n = grid.vertex_count();
  EnergyReport report;
  report.grad_offsets.assign(n, Vec3::Zero());

  const std::vector<OrientedFace>* smooth_faces = nullptr;
  std::vector<OrientedFace> derived_faces;

  if (mode == LossMode::Recon3d) {
    if (recon3d == nullptr || recon3d->faces == nullptr || recon3d->predicted_samples == nullptr ||
        recon3d->target_samples.empty()) {
      throw InvalidArgument("total_loss: recon3d mode needs faces and sample sets");
    }
    const double w_recon = config.lambda_recon;
    if (recon3d->occupancy != nullptr && recon3d->labels != nullptr) {
      const BceResult bce = occupancy_bce(*recon3d->occupancy, *recon3d->labels);
      report.terms["occ"] = bce.value;
      report.weighted["occ"] = w_recon * bce.value;
      report.total += w_recon * bce.value;
      report.grad_occ_logits = bce.grad_logits;
      for (double& g : *report.grad_occ_logits) g *= w_recon;
    }
    add_term(report, "surf", w_recon * config.lambda_surf,
             surface_loss(grid, *recon3d->faces, recon3d->target_samples,
                          *recon3d->predicted_samples));
    smooth_faces = recon3d->faces;
  } else {
    if (recon2d == nullptr || recon2d->attributes == nullptr || recon2d->views.empty()) {
      throw InvalidArgument("total_loss: recon2d mode needs views and vertex attributes");
    }
    const VertexAttributes& attrs = *recon2d->attributes;
    if (attrs.colors.size() != n || attrs.visibility.size() != n) {
      throw InvalidArgument("total_loss: vertex attribute count does not match grid");
    }
    const double w = config.lambda_recon;
    std::vector<Vec3> grad_colors(n, Vec3::Zero());
    std::vector<double> grad_logits(n, 0.0);
    double value = 0.0;
    const std::vector<int> faces = soft_render_faces(grid, attrs, recon2d->render_options);
    for (const View& view : recon2d->views) {
      const HitList hits = cast_rays(grid, faces, view.camera);
      const Image rendered = composite(hits, attrs, grid);
      const ImageLossResult il = image_loss(rendered, view.image, config.lambda_mask);
      value += il.value;
      report.renders.push_back(rendered);
      if (w == 0.0) continue;
      const CompositeGradients back =
          composite_backward(hits, attrs, grid, view.camera, il.grad_rgb, il.grad_mask);
      add_scaled(grad_colors, back.colors, w);
      add_scaled(report.grad_offsets, back.offsets, w);
      for (std::size_t i = 0; i < n; ++i) grad_logits[i] += w * back.visibility_logits[i];
    }
    report.terms["image"] = value;
    report.weighted["image"] = w * value;
    report.total += w * value;
    report.grad_colors = std::move(grad_colors);
    report.grad_visibility_logits = std::move(grad_logits);

    derived_faces = surface_candidate_faces(
        grid, occupancy_from_vertex_visibility(grid, attrs.visibility), recon2d->threshold);
    smooth_faces = &derived_faces;
  }

  add_term(report, "vol", config.lambda_vol, equivolume_loss(grid));
  add_term(report, "lap", config.lambda_lap, laplacian_loss(grid));
  add_term(report, "sm", config.lambda_sm, smoothness_loss(grid, *smooth_faces));
  add_term(report, "del", config.lambda_del, delta_loss(grid));
  add_term(report, "amips", config.lambda_amips, amips_loss(grid));
  return report;
}

}  // namespace deftet
