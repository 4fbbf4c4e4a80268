#pragma once

#include "deftet/energies.hpp"
#include "deftet/geometry.hpp"
#include "deftet/image.hpp"
#include "deftet/lattice.hpp"
#include "deftet/metrics.hpp"
#include "deftet/optimize.hpp"
#include "deftet/renderer.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace deftet::io {

// ---- OBJ ----------------------------------------------------------------

/// Reads `v` and `f` records; polygons are fan-triangulated, everything else
/// (normals, texture coordinates, materials, groups) is ignored.
SurfaceMesh parse_obj(std::istream& in, const std::string& source = "<stream>");
SurfaceMesh read_obj(const std::filesystem::path& path);
void write_obj(const SurfaceMesh& mesh, const std::filesystem::path& path);

// ---- TetGen .node / .ele ------------------------------------------------

struct TetMeshFile {
  std::vector<Vec3> points;
  std::vector<Tet> tets;  // 0-based
};

/// Writes stem.node (all deformed vertices) and stem.ele (tets with occupancy
/// above `threshold`, positively oriented at their deformed positions).
void write_tetgen(const TetGrid& grid, const OccupancyField& occ,
                  const std::filesystem::path& stem, double threshold = 0.5);
TetMeshFile read_tetgen(const std::filesystem::path& stem);

// ---- Cameras ------------------------------------------------------------

/// JSON array of {width, height, fx, fy, cx, cy, world_to_camera[16]}.
std::vector<Camera> parse_cameras(const std::string& json_text);
std::vector<Camera> read_cameras(const std::filesystem::path& path);
std::string cameras_to_json(const std::vector<Camera>& cameras);

// ---- PNG ----------------------------------------------------------------

/// 8-bit RGB or RGBA. Alpha becomes the mask; RGB images get mask 1 and
/// has_mask = false.
Image read_png(const std::filesystem::path& path);

/// Writes 8-bit RGBA (alpha from the mask). Out-of-range values are clamped
/// with a warning. Returns the number of clamped channel values.
std::size_t write_png(const Image& image, const std::filesystem::path& path);

// ---- Vertex attributes (binary) -----------------------------------------

/// 16-byte header ("DEFTATTR", uint32 version, uint32 reserved) followed by
/// uint64 N, N*3 float64 colors and N float64 visibilities, little endian.
void write_attributes(const VertexAttributes& attrs, const std::filesystem::path& path);
VertexAttributes read_attributes(const std::filesystem::path& path);

// ---- Run configuration --------------------------------------------------

enum class OptimizerKind { Adam, Sgd };

struct RunConfig {
  int resolution = 8;
  int iterations = 300;
  int relabel_every = 20;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  AdamConfig adam;
  EnergyConfig energy;
  double threshold = 0.5;
  bool clamp_offsets = true;
  std::size_t views_per_step = 0;
  bool optimize_positions = true;
  std::size_t metric_samples = 20000;
  double smooth_factor = 0.0;  // Laplace post-smoothing of offsets; 0 disables
  int smooth_iterations = 0;
  std::string output;  // default output stem when --out is absent
  std::string log;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  [[nodiscard]] MeshOptimizeConfig mesh_config() const;
  [[nodiscard]] MultiviewConfig multiview_config() const;
};

/// Flat `key = value` lines, `#` comments. Unknown keys and malformed values
/// raise ParseError naming the line.
RunConfig parse_config(std::istream& in, const std::string& source = "<stream>");
RunConfig read_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& config);

// ---- Reports and traces -------------------------------------------------

/// Flat JSON object with every QualityReport key plus `extra` entries.
std::string quality_report_json(const QualityReport& report,
                                const std::vector<std::pair<std::string, double>>& extra = {});

/// One line per record: `iter=<i> total=<v> <term>=<v>... flipped=<n> faces=<n> psnr=<v> elapsed_ms=<v>`.
void write_trace(const std::vector<TraceRecord>& trace, std::ostream& out);
std::vector<TraceRecord> parse_trace(std::istream& in);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace deftet::io
