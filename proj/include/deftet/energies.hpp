#pragma once

#include "deftet/geometry.hpp"
#include "deftet/image.hpp"
#include "deftet/lattice.hpp"
#include "deftet/occupancy_field.hpp"
#include "deftet/renderer.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace deftet {

/// Loss weights and sample counts. Defaults are tuning knobs, not derived values.
struct EnergyConfig {
  double lambda_recon = 1.0;
  double lambda_surf = 1.0;
  double lambda_lap = 0.1;
  double lambda_del = 0.01;
  double lambda_vol = 0.05;
  double lambda_amips = 1e-4;
  double lambda_sm = 0.01;
  double lambda_mask = 1.0;
  std::size_t sample_count_target = 2000;
  std::size_t sample_count_pred = 2000;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const EnergyConfig&, const EnergyConfig&) = default;
};

/// A single loss term and its gradient w.r.t. the vertex offsets.
struct TermResult {
  double value = 0.0;
  std::vector<Vec3> grad;
};

struct BceResult {
  double value = 0.0;
  std::vector<double> grad_logits;
};

inline constexpr double kProbabilityClamp = 1e-7;

/// -sum_k [y_k ln O_k + (1 - y_k) ln(1 - O_k)] with O clamped to
/// [1e-7, 1 - 1e-7]. The gradient is taken w.r.t. the logits behind `occ`
/// and equals O_k - y_k.
BceResult occupancy_bce(const OccupancyField& occ, const OccupancyField& labels);

/// Two-sided surface alignment:
///   sum_{p in target} min_f |p - f|^2 + sum_{q in predicted} min_p |q - p|^2.
/// `predicted` must come from sample_triangles over triangles_of(faces); each
/// sample follows its source face through its barycentric coordinates.
TermResult surface_loss(const TetGrid& grid, const std::vector<OrientedFace>& faces,
                        std::span<const Vec3> target, const SampleSet& predicted);

/// sum_i |dv_i - mean_{j in N(i)} dv_j|^2 over the offset field.
TermResult laplacian_loss(const TetGrid& grid);

/// sum_i |dv_i|^2.
TermResult delta_loss(const TetGrid& grid);

/// sum_k (V_k / Vbar - 1)^2 with Vbar the mean rest volume.
TermResult equivolume_loss(const TetGrid& grid);

inline constexpr double kAmipsMinDet = 1e-12;
inline constexpr double kAmipsBarrier = 1e6;
inline constexpr double kAmipsBarrierSlope = 1e6;

struct TetEnergy {
  double value = 0.0;
  std::array<Vec3, 4> grad{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
};

/// AMIPS energy tr(J^T J) / det(J)^(2/3) of the map from the unit regular
/// tetrahedron onto (a, b, c, d). Equals 3 exactly for similar copies of the
/// regular tet. For det(J) <= kAmipsMinDet a linear barrier takes over.
TetEnergy amips_energy(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

TermResult amips_loss(const TetGrid& grid);

/// sum over pairs of faces sharing an edge of (1 - n_i . n_j).
TermResult smoothness_loss(const TetGrid& grid, const std::vector<OrientedFace>& faces);

struct ImageLossResult {
  double value = 0.0;
  std::vector<Vec3> grad_rgb;
  std::vector<double> grad_mask;
};

/// sum_j |R_gt - R|_1 + lambda_mask |M_gt - M|; the mask term is skipped when
/// the reference has no mask.
ImageLossResult image_loss(const Image& rendered, const Image& reference, double lambda_mask);

struct View {
  Image image;
  Camera camera;
};

enum class LossMode { Recon3d, Recon2d };

struct Recon3dInputs {
  const std::vector<OrientedFace>* faces = nullptr;   // F
  std::span<const Vec3> target_samples;               // S
  const SampleSet* predicted_samples = nullptr;       // S_F
  // Optional occupancy supervision: soft prediction (logistic of logits) and labels.
  const OccupancyField* occupancy = nullptr;
  const OccupancyField* labels = nullptr;
};

struct Recon2dInputs {
  std::span<const View> views;
  const VertexAttributes* attributes = nullptr;
  RenderOptions render_options;
  double threshold = 0.5;  // surface used by the smoothness term
};

/// Per-term values and gradients of one full objective evaluation.
struct EnergyReport {
  std::map<std::string, double> terms;     // unweighted values
  std::map<std::string, double> weighted;  // lambda * value
  double total = 0.0;
  std::vector<Vec3> grad_offsets;
  std::optional<std::vector<double>> grad_occ_logits;
  std::optional<std::vector<double>> grad_visibility_logits;
  std::optional<std::vector<Vec3>> grad_colors;
  std::vector<Image> renders;  // recon2d: one per view, in input order
};

/// lambda_recon * L_recon + lambda_vol L_vol + lambda_lap L_lap
///   + lambda_sm L_sm + lambda_del L_del + lambda_amips L_amips,
/// with L_recon = L_occ + lambda_surf L_surf (3D) or the image loss summed
/// over views (2D).
EnergyReport total_loss(const TetGrid& grid, const EnergyConfig& config, LossMode mode,
                        const Recon3dInputs* recon3d, const Recon2dInputs* recon2d);

}  // namespace deftet
