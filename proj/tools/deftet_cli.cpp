// deftet: command-line driver for lattice export, optimization-based tet
// meshing, rendering, multi-view reconstruction and quality metrics.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include "deftet/io.hpp"
#include "deftet/log.hpp"
#include "deftet/metrics.hpp"
#include "deftet/occupancy.hpp"
#include "deftet/optimize.hpp"
#include "deftet/parallel.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace deftet;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string log;
};

// Log lines go to stderr (warnings only) and, with --log, to a file (all).
class LogFile {
 public:
  explicit LogFile(const std::string& path) {
    if (path.empty()) return;
    file_ = std::make_shared<std::ofstream>(path);
    if (!*file_) throw IoError("cannot open log file '" + path + "'");
    auto file = file_;
    set_log_sink([file](LogLevel level, const std::string& msg) {
      const char* tag = level == LogLevel::Warning ? "warning" : "info";
      *file << tag << ": " << msg << '\n';
      if (level == LogLevel::Warning) std::cerr << "warning: " << msg << '\n';
    });
  }
  void trace(const std::vector<TraceRecord>& records) {
    if (file_) io::write_trace(records, *file_);
  }

 private:
  std::shared_ptr<std::ofstream> file_;
};

io::RunConfig load_config(const std::string& path, const Globals& g) {
  io::RunConfig c = path.empty() ? io::RunConfig{} : io::read_config(path);
  if (g.seed) c.seed = *g.seed;
  return c;
}

std::string stem_or(const std::string& out, const io::RunConfig& c) {
  if (!out.empty()) return out;
  if (!c.output.empty()) return c.output;
  throw InvalidArgument("no output stem: pass --out or set 'output' in the config");
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// A tet grid rebuilt from a .node/.ele pair; positions become the rest state.
TetGrid grid_from_tetgen(const std::string& stem) {
  io::TetMeshFile f = io::read_tetgen(stem);
  if (f.tets.empty()) throw NoSolid("'" + stem + ".ele' has no tetrahedra");
  return make_tet_grid(std::move(f.points), std::move(f.tets));
}

void write_trace_file(const std::vector<TraceRecord>& trace, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  io::write_trace(trace, out);
}

int cmd_lattice(int res, const std::string& out) {
  const TetGrid grid = build_lattice(res);
  ensure_parent(out);
  io::write_tetgen(grid, OccupancyField::hard(std::vector<double>(grid.tet_count(), 1.0)), out);
  log_info("wrote " + out + ".node/.ele: " + std::to_string(grid.vertex_count()) + " points, " +
           std::to_string(grid.tet_count()) + " tets");
  return 0;
}

int cmd_tetmesh(const std::string& surface, const std::string& config_path, std::string out,
                const Globals& g, LogFile& log) {
  const io::RunConfig cfg = load_config(config_path, g);
  out = stem_or(out, cfg);
  const SurfaceMesh target = io::read_obj(surface);
  MeshOptimizeResult r = mesh_optimize(build_lattice(cfg.resolution), target, cfg.mesh_config());
  if (cfg.smooth_iterations > 0 && cfg.smooth_factor > 0.0) {
    laplacian_smooth(r.grid, cfg.smooth_iterations, cfg.smooth_factor);
    r.occupancy = label_occupancy(r.grid, target);
  }
  log.trace(r.trace);

  const QualityReport q =
      quality_report(r.grid, r.occupancy, target, cfg.metric_samples, cfg.seed, cfg.threshold);
  ensure_parent(out);
  io::write_tetgen(r.grid, r.occupancy, out, cfg.threshold);
  io::write_obj(extract_surface(r.grid, r.occupancy, cfg.threshold), out + ".surface.obj");
  io::write_text(out + ".report.json",
                 io::quality_report_json(q, {{"iterations", double(cfg.iterations)},
                                             {"final_loss", r.trace.back().total}}));
  write_trace_file(r.trace, out + ".trace");
  log_info("tetmesh: chamfer " + std::to_string(q.chamfer) + ", flipped " +
           std::to_string(q.flipped_count));
  return 0;
}

int cmd_render(const std::string& nodes, const std::string& attrs_path, const std::string& cams,
               const std::string& out_dir, bool hard) {
  const TetGrid grid = grid_from_tetgen(nodes);
  const VertexAttributes attrs = io::read_attributes(attrs_path);
  if (attrs.size() != grid.vertex_count()) {
    throw InvalidArgument("attribute count " + std::to_string(attrs.size()) +
                          " does not match node count " + std::to_string(grid.vertex_count()));
  }
  const std::vector<Camera> cameras = io::read_cameras(cams);
  RenderOptions opt;
  opt.mode = hard ? RenderMode::Hard : RenderMode::Soft;
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "view_%03zu.png", i);
    io::write_png(render(grid, attrs, cameras[i], opt), fs::path(out_dir) / name);
  }
  log_info("render: wrote " + std::to_string(cameras.size()) + " images to " + out_dir);
  return 0;
}

std::vector<fs::path> png_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

int cmd_recon_mv(const std::string& images, const std::string& cams, const std::string& config_path,
                 std::string out, const Globals& g, LogFile& log) {
  const io::RunConfig cfg = load_config(config_path, g);
  out = stem_or(out, cfg);
  const std::vector<Camera> cameras = io::read_cameras(cams);
  const std::vector<fs::path> files = png_files(images);
  if (files.size() != cameras.size()) {
    throw InvalidArgument(std::to_string(files.size()) + " images but " +
                          std::to_string(cameras.size()) + " cameras");
  }
  std::vector<View> views;
  for (std::size_t i = 0; i < files.size(); ++i) views.push_back({io::read_png(files[i]), cameras[i]});

  const MultiviewResult r = multiview_optimize(build_lattice(cfg.resolution), views, cfg.multiview_config());
  log.trace(r.trace);

  ensure_parent(out);
  io::write_tetgen(r.grid, r.occupancy, out, cfg.threshold);
  io::write_attributes(r.attributes, out + ".attrs");
  write_trace_file(r.trace, out + ".trace");

  nlohmann::ordered_json doc;
  try {
    const DistortionMetrics d = distortion_metrics(r.grid, r.occupancy, cfg.threshold);
    doc["min_dihedral"] = d.min_dihedral;
    doc["mean_amips"] = d.mean_amips;
    doc["max_amips"] = d.max_amips;
    doc["flipped_count"] = d.flipped_count;
    doc["tet_count"] = d.occupied_count;
  } catch (const NoSolid&) {
    log_warning("recon-mv: no occupied tets; distortion metrics omitted");
    doc["min_dihedral"] = nullptr;
    doc["mean_amips"] = nullptr;
    doc["max_amips"] = nullptr;
    doc["flipped_count"] = count_flipped(r.grid);
    doc["tet_count"] = 0;
  }
  doc["vertex_count"] = r.grid.vertex_count();
  double sum = 0.0;
  bool exact = true;
  nlohmann::ordered_json per_view = nlohmann::ordered_json::array();
  for (double p : r.final_psnr) {
    if (std::isinf(p)) {
      per_view.push_back("exact");
    } else {
      per_view.push_back(p);
      sum += p;
      exact = false;
    }
  }
  if (exact) doc["psnr"] = "exact";
  else doc["psnr"] = sum / double(r.final_psnr.size());
  doc["psnr_per_view"] = per_view;
  doc["iterations"] = cfg.iterations;
  io::write_text(out + ".report.json", doc.dump(2) + "\n");
  return 0;
}

int cmd_metrics(const std::string& pred, const std::string& gt, const std::string& out,
                std::size_t samples, const Globals& g) {
  const TetGrid grid = grid_from_tetgen(pred);
  const OccupancyField occ = OccupancyField::hard(std::vector<double>(grid.tet_count(), 1.0));
  const QualityReport q = quality_report(grid, occ, io::read_obj(gt), samples, g.seed.value_or(0));
  const std::string json = io::quality_report_json(q);
  if (out.empty() || out == "-") {
    std::cout << json;
  } else {
    ensure_parent(out);
    io::write_text(out, json);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deformable tetrahedral meshes: meshing, rendering and reconstruction"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Override the random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--log", g.log, "Write log lines and optimization traces to this file");

  int res = 0;
  std::string out, surface, config, nodes, attrs, cameras, images, pred, gt;
  bool hard = false;
  std::size_t samples = kDefaultMetricSamples;

  auto* lattice = app.add_subcommand("lattice", "Export the undeformed lattice as TetGen files");
  lattice->add_option("--res", res, "Cells per axis")->required()->check(CLI::PositiveNumber);
  lattice->add_option("--out", out, "Output stem")->required();

  auto* tetmesh = app.add_subcommand("tetmesh", "Fit a tet mesh to a watertight surface");
  tetmesh->add_option("--surface", surface, "Target surface (OBJ)")->required()->check(CLI::ExistingFile);
  tetmesh->add_option("--config", config, "Run configuration file");
  tetmesh->add_option("--out", out, "Output stem");

  auto* render_cmd = app.add_subcommand("render", "Render a tet mesh with vertex attributes");
  render_cmd->add_option("--nodes", nodes, "TetGen stem (.node/.ele)")->required();
  render_cmd->add_option("--attrs", attrs, "Binary vertex attributes")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--cameras", cameras, "Camera JSON")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--out", out, "Output directory")->required();
  render_cmd->add_flag("--hard", hard, "Opaque flat-shaded preview instead of soft compositing");

  auto* recon = app.add_subcommand("recon-mv", "Reconstruct from posed images");
  recon->add_option("--images", images, "Directory of PNG views (sorted by name)")->required();
  recon->add_option("--cameras", cameras, "Camera JSON, one entry per image")->required()->check(CLI::ExistingFile);
  recon->add_option("--config", config, "Run configuration file");
  recon->add_option("--out", out, "Output stem");

  auto* metrics = app.add_subcommand("metrics", "Quality report of a tet mesh against a surface");
  metrics->add_option("--pred", pred, "TetGen stem (.node/.ele)")->required();
  metrics->add_option("--gt", gt, "Ground-truth surface (OBJ)")->required()->check(CLI::ExistingFile);
  metrics->add_option("--out", out, "Report path ('-' for stdout)");
  metrics->add_option("--samples", samples, "Surface samples per mesh")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    set_thread_count(g.threads);
    LogFile log(g.log);
    if (*lattice) return cmd_lattice(res, out);
    if (*tetmesh) return cmd_tetmesh(surface, config, out, g, log);
    if (*render_cmd) return cmd_render(nodes, attrs, cameras, out, hard);
    if (*recon) return cmd_recon_mv(images, cameras, config, out, g, log);
    if (*metrics) return cmd_metrics(pred, gt, out, samples, g);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
