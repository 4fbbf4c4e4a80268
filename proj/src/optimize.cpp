#include "deftet/optimize.hpp"

#include "deftet/metrics.hpp"
#include "deftet/occupancy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace deftet {

void adam_step(OptimizerState& state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, double loss) {
  if (params.size() != grads.size()) throw InvalidArgument("adam_step: block count mismatch");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size()) {
      throw InvalidArgument("adam_step: parameter and gradient shapes differ");
    }
  }
  if (state.blocks.empty()) {
    state.blocks.resize(params.size());
    for (std::size_t b = 0; b < params.size(); ++b) {
      state.blocks[b].first.assign(params[b].size(), 0.0);
      state.blocks[b].second.assign(params[b].size(), 0.0);
    }
  } else if (state.blocks.size() != params.size()) {
    throw InvalidArgument("adam_step: block count changed between steps");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (state.blocks[b].first.size() != params[b].size()) {
      throw InvalidArgument("adam_step: block shape changed between steps");
    }
  }

  ++state.step;
  state.loss_history.push_back(loss);
  const AdamConfig& c = state.config;
  if (c.plain_sgd) {
    for (std::size_t b = 0; b < params.size(); ++b) {
      for (std::size_t i = 0; i < params[b].size(); ++i) params[b][i] -= c.learning_rate * grads[b][i];
    }
    return;
  }
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.blocks[b].first;
    auto& v = state.blocks[b].second;
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double g = grads[b][i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      params[b][i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

void laplacian_smooth(TetGrid& grid, int iterations, double factor) {
  if (!(factor >= 0.0 && factor < 1.0)) {
    throw InvalidArgument("laplacian_smooth: factor must lie in [0, 1)");
  }
  std::vector<Vec3> next(grid.vertex_count());
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < grid.vertex_count(); ++i) {
      const auto& nbrs = grid.vertex_neighbors[i];
      if (nbrs.empty()) {
        next[i] = grid.offsets[i];
        continue;
      }
      Vec3 mean = Vec3::Zero();
      for (int j : nbrs) mean += grid.offsets[j];
      mean /= static_cast<double>(nbrs.size());
      next[i] = grid.offsets[i] + factor * (mean - grid.offsets[i]);
    }
    grid.offsets.swap(next);
  }
}

namespace {

using Clock = std::chrono::steady_clock;

// Identical images have infinite PSNR; the trace stores a finite stand-in.
constexpr double kPsnrCap = 200.0;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void clamp_offsets(TetGrid& grid) {
  const double limit = 0.5 * grid.cell_size();
  for (Vec3& o : grid.offsets) {
    const double norm = o.norm();
    if (norm > limit) o *= limit / norm;
  }
}

}  // namespace

MeshOptimizeResult mesh_optimize(TetGrid grid, const SurfaceMesh& target,
                                 const MeshOptimizeConfig& config) {
  if (config.iterations < 1) throw InvalidArgument("mesh_optimize: iterations must be >= 1");
  if (config.relabel_every < 1) throw InvalidArgument("mesh_optimize: relabel_every must be >= 1");
  if (target.empty()) throw InvalidArgument("mesh_optimize: empty target surface");
  config.energy.validate();

  const auto start = Clock::now();
  const SampleSet target_samples =
      sample_surface(target, config.energy.sample_count_target, config.energy.seed);

  MeshOptimizeResult result;
  result.state.config = config.optimizer;
  OccupancyField labels;
  std::vector<OrientedFace> faces;
  SampleSet predicted;

  auto relabel = [&](int iteration) {
    labels = label_occupancy(grid, target);
    faces = surface_candidate_faces(grid, labels, config.threshold);
    if (faces.empty()) {
      std::ostringstream msg;
      msg << "mesh_optimize: no occupied tets after relabeling at iteration " << iteration
          << "; is the target inside the unit cube?";
      throw NoSurface(msg.str());
    }
    const std::vector<Vec3> pos = deformed_positions(grid);
    const std::vector<Tri> tris = triangles_of(faces);
    predicted = sample_triangles(pos, tris, config.energy.sample_count_pred,
                                 config.energy.seed + 1 + static_cast<std::uint64_t>(iteration));
  };

  for (int it = 0; it < config.iterations; ++it) {
    if (it % config.relabel_every == 0) relabel(it);
    Recon3dInputs inputs;
    inputs.faces = &faces;
    inputs.target_samples = target_samples.points;
    inputs.predicted_samples = &predicted;
    const EnergyReport report = total_loss(grid, config.energy, LossMode::Recon3d, &inputs, nullptr);

    const std::span<double> params[] = {as_scalars(grid.offsets)};
    const std::span<const double> grads[] = {as_scalars(report.grad_offsets)};
    adam_step(result.state, params, grads, report.total);
    if (config.clamp_offsets) clamp_offsets(grid);

    TraceRecord rec;
    rec.iteration = it;
    rec.terms = report.terms;
    rec.total = report.total;
    rec.flipped = count_flipped(grid);
    rec.surface_faces = faces.size();
    rec.elapsed_ms = elapsed_ms(start);
    result.trace.push_back(std::move(rec));
  }

  result.occupancy = label_occupancy(grid, target);
  if (surface_candidate_faces(grid, result.occupancy, config.threshold).empty()) {
    throw NoSurface("mesh_optimize: final labeling has no occupied tets");
  }
  result.grid = std::move(grid);
  return result;
}

MultiviewResult multiview_optimize(TetGrid grid, std::span<const View> views,
                                   const MultiviewConfig& config, const MultiviewState* init) {
  if (views.empty()) throw InvalidArgument("multiview_optimize: no views");
  if (config.iterations < 0) throw InvalidArgument("multiview_optimize: negative iteration count");
  for (const View& v : views) {
    v.camera.validate();
    if (v.image.width != v.camera.width || v.image.height != v.camera.height) {
      throw InvalidArgument("multiview_optimize: image size does not match its camera");
    }
  }
  config.energy.validate();
  const std::size_t n = grid.vertex_count();

  MultiviewState state;
  if (init != nullptr) {
    if (init->colors.size() != n || init->visibility_logits.size() != n) {
      throw InvalidArgument("multiview_optimize: initial state does not match grid");
    }
    state = *init;
  } else {
    state.colors.assign(n, Vec3::Constant(0.5));
    state.visibility_logits.assign(n, 0.0);
  }

  const std::size_t batch =
      config.views_per_step == 0 ? views.size() : std::min(config.views_per_step, views.size());
  OptimizerState opt;
  opt.config = config.optimizer;
  MultiviewResult result;
  const auto start = Clock::now();
  std::vector<View> step_views;
  std::size_t cursor = 0;

  for (int it = 0; it < config.iterations; ++it) {
    // Deterministic round-robin over the views.
    step_views.clear();
    for (std::size_t b = 0; b < batch; ++b) {
      step_views.push_back(views[cursor]);
      cursor = (cursor + 1) % views.size();
    }
    const VertexAttributes attrs = VertexAttributes::from_logits(state.colors, state.visibility_logits);
    Recon2dInputs inputs;
    inputs.views = step_views;
    inputs.attributes = &attrs;
    inputs.render_options = config.render_options;
    inputs.threshold = config.threshold;
    const EnergyReport report = total_loss(grid, config.energy, LossMode::Recon2d, nullptr, &inputs);

    std::vector<Vec3> grad_offsets = report.grad_offsets;
    if (!config.optimize_positions) std::fill(grad_offsets.begin(), grad_offsets.end(), Vec3::Zero());
    const std::span<double> params[] = {as_scalars(grid.offsets), as_scalars(state.colors),
                                        std::span<double>(state.visibility_logits)};
    const std::span<const double> grads[] = {as_scalars(grad_offsets),
                                             as_scalars(*report.grad_colors),
                                             std::span<const double>(*report.grad_visibility_logits)};
    adam_step(opt, params, grads, report.total);
    if (config.clamp_offsets) clamp_offsets(grid);

    TraceRecord rec;
    rec.iteration = it;
    rec.terms = report.terms;
    rec.total = report.total;
    rec.flipped = count_flipped(grid);
    double psnr_sum = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      psnr_sum += std::min(psnr(report.renders[b], step_views[b].image), kPsnrCap);
    }
    rec.psnr = psnr_sum / static_cast<double>(batch);
    rec.elapsed_ms = elapsed_ms(start);
    result.trace.push_back(std::move(rec));
  }

  result.attributes = VertexAttributes::from_logits(state.colors, state.visibility_logits);
  for (const View& v : views) {
    result.final_psnr.push_back(psnr(render(grid, result.attributes, v.camera, config.render_options),
                                     v.image));
  }
  result.occupancy = occupancy_from_vertex_visibility(grid, result.attributes.visibility);
  result.state = std::move(state);
  result.grid = std::move(grid);
  return result;
}

}  // namespace deftet
