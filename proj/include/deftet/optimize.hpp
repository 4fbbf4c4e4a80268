#pragma once

#include "deftet/energies.hpp"
#include "deftet/geometry.hpp"
#include "deftet/lattice.hpp"
#include "deftet/renderer.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace deftet {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool plain_sgd = false;  // p -= lr * g instead of Adam

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct MomentBlock {
  std::vector<double> first;
  std::vector<double> second;
};

struct OptimizerState {
  AdamConfig config;
  std::size_t step = 0;
  std::vector<MomentBlock> blocks;
  std::vector<double> loss_history;
};

/// One bias-corrected Adam (or SGD) update over every parameter block.
/// Moment buffers are sized on the first call; later calls must pass the same
/// block shapes. `loss` is appended to the history.
void adam_step(OptimizerState& state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, double loss);

inline std::span<double> as_scalars(std::vector<Vec3>& v) {
  return {v.empty() ? nullptr : v.front().data(), 3 * v.size()};
}
inline std::span<const double> as_scalars(const std::vector<Vec3>& v) {
  return {v.empty() ? nullptr : v.front().data(), 3 * v.size()};
}

/// Jacobi umbrella smoothing of the offsets:
/// dv_i += factor * (mean_{j in N(i)} dv_j - dv_i), `iterations` times.
void laplacian_smooth(TetGrid& grid, int iterations, double factor);

struct TraceRecord {
  int iteration = 0;
  std::map<std::string, double> terms;
  double total = 0.0;
  std::size_t flipped = 0;
  std::size_t surface_faces = 0;
  double psnr = 0.0;  // multi-view only: mean over the views used this step
  double elapsed_ms = 0.0;
};

struct MeshOptimizeConfig {
  EnergyConfig energy;
  AdamConfig optimizer;
  int iterations = 300;
  int relabel_every = 20;
  double threshold = 0.5;
  bool clamp_offsets = true;  // |offset| <= 0.5 cell size after each step
};

struct MeshOptimizeResult {
  TetGrid grid;
  OccupancyField occupancy;
  std::vector<TraceRecord> trace;
  OptimizerState state;
};

/// Alternates winding-number relabeling of the deformed tets with optimizer
/// steps on the offsets against lambda_surf L_surf plus the regularizers.
/// Target samples are drawn once; predicted-surface samples are redrawn at
/// each relabeling. Throws NoSurface when a labeling leaves no occupied tet.
MeshOptimizeResult mesh_optimize(TetGrid grid, const SurfaceMesh& target,
                                 const MeshOptimizeConfig& config);

struct MultiviewConfig {
  EnergyConfig energy;
  AdamConfig optimizer{.learning_rate = 1e-2};
  int iterations = 2000;
  std::size_t views_per_step = 0;  // 0: every view every step
  bool optimize_positions = true;
  bool clamp_offsets = true;
  double threshold = 0.5;
  RenderOptions render_options;
};

struct MultiviewState {
  std::vector<Vec3> colors;
  std::vector<double> visibility_logits;
};

struct MultiviewResult {
  TetGrid grid;
  MultiviewState state;
  VertexAttributes attributes;
  OccupancyField occupancy;
  std::vector<TraceRecord> trace;
  std::vector<double> final_psnr;  // per input view
};

/// Fits vertex colors, visibility logits and (optionally) offsets to posed
/// images. Starts from `init` when given, else gray colors and D = 0.5.
MultiviewResult multiview_optimize(TetGrid grid, std::span<const View> views,
                                   const MultiviewConfig& config,
                                   const MultiviewState* init = nullptr);

}  // namespace deftet
