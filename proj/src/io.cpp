#include "deftet/io.hpp"

#include "deftet/log.hpp"

#include <json.hpp>
#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace deftet::io {

namespace {

std::string location(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

std::ifstream open_input(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path,
                          std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

// Strips an optional "#" comment and surrounding whitespace.
std::string strip(const std::string& line) {
  std::string s = line.substr(0, line.find('#'));
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_output(path, std::ios::out | std::ios::binary);
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  auto in = open_input(path, std::ios::in | std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---- OBJ ----------------------------------------------------------------

SurfaceMesh parse_obj(std::istream& in, const std::string& source) {
  SurfaceMesh mesh;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::pair<std::size_t, std::vector<long>>> pending;  // validated after all vertices
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = strip(line);
    if (s.empty()) continue;
    std::istringstream ls(s);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      double x = 0, y = 0, z = 0;
      if (!(ls >> x >> y >> z)) {
        throw ParseError(location(source, line_no) + ": malformed vertex record");
      }
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<long> idx;
      std::string token;
      while (ls >> token) {
        const std::string head = token.substr(0, token.find('/'));
        long value = 0;
        const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), value);
        if (ec != std::errc() || ptr != head.data() + head.size() || value == 0) {
          throw ParseError(location(source, line_no) + ": malformed face index '" + token + "'");
        }
        idx.push_back(value);
      }
      if (idx.size() < 3) {
        throw ParseError(location(source, line_no) + ": face needs at least 3 vertices");
      }
      // Negative indices are relative to the vertices read so far.
      for (long& v : idx) {
        if (v < 0) v = static_cast<long>(mesh.vertices.size()) + v + 1;
      }
      pending.emplace_back(line_no, std::move(idx));
    }
  }
  for (const auto& [face_line, idx] : pending) {
    for (long v : idx) {
      if (v < 1 || v > static_cast<long>(mesh.vertices.size())) {
        throw ParseError(location(source, face_line) + ": face index out of range");
      }
    }
    for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
      mesh.triangles.push_back({static_cast<int>(idx[0] - 1), static_cast<int>(idx[k] - 1),
                                static_cast<int>(idx[k + 1] - 1)});
    }
  }
  if (mesh.triangles.empty()) throw ParseError(source + ": mesh has no faces");
  return mesh;
}

SurfaceMesh read_obj(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_obj(in, path.string());
}

void write_obj(const SurfaceMesh& mesh, const std::filesystem::path& path) {
  std::ostringstream os;
  for (const Vec3& v : mesh.vertices) {
    os << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' '
       << format_double(v.z()) << '\n';
  }
  for (const Tri& t : mesh.triangles) os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  write_text(path, os.str());
}

// ---- TetGen -------------------------------------------------------------

void write_tetgen(const TetGrid& grid, const OccupancyField& occ,
                  const std::filesystem::path& stem, double threshold) {
  if (occ.size() != grid.tet_count()) {
    throw InvalidArgument("write_tetgen: occupancy length does not match tet count");
  }
  std::ostringstream node;
  node << grid.vertex_count() << " 3 0 0\n";
  for (std::size_t i = 0; i < grid.vertex_count(); ++i) {
    const Vec3 p = grid.position(static_cast<int>(i));
    node << i + 1 << ' ' << format_double(p.x()) << ' ' << format_double(p.y()) << ' '
         << format_double(p.z()) << '\n';
  }

  std::vector<Tet> kept;
  for (std::size_t k = 0; k < grid.tet_count(); ++k) {
    if (!(occ.values[k] > threshold)) continue;
    Tet t = grid.tets[k];
    if (signed_volume(grid.position(t[0]), grid.position(t[1]), grid.position(t[2]),
                      grid.position(t[3])) < 0.0) {
      std::swap(t[2], t[3]);
    }
    kept.push_back(t);
  }
  std::ostringstream ele;
  ele << kept.size() << " 4 0\n";
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const Tet& t = kept[k];
    ele << k + 1 << ' ' << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << ' ' << t[3] + 1 << '\n';
  }
  write_text(stem.string() + ".node", node.str());
  write_text(stem.string() + ".ele", ele.str());
}

namespace {

// Non-comment, non-blank lines with their line numbers.
std::vector<std::pair<std::size_t, std::string>> data_lines(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::pair<std::size_t, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = strip(line);
    if (!s.empty()) out.emplace_back(line_no, std::move(s));
  }
  return out;
}

}  // namespace

TetMeshFile read_tetgen(const std::filesystem::path& stem) {
  const std::filesystem::path node_path = stem.string() + ".node";
  const std::filesystem::path ele_path = stem.string() + ".ele";
  TetMeshFile mesh;

  const auto nodes = data_lines(node_path);
  if (nodes.empty()) throw ParseError(node_path.string() + ": missing header");
  std::size_t count = 0;
  int dim = 0;
  {
    std::istringstream hs(nodes[0].second);
    if (!(hs >> count >> dim) || dim != 3) {
      throw ParseError(location(node_path.string(), nodes[0].first) + ": bad header");
    }
  }
  if (nodes.size() < count + 1) throw ParseError(node_path.string() + ": truncated point list");
  long first_index = 1;
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream ls(nodes[i + 1].second);
    long idx = 0;
    double x = 0, y = 0, z = 0;
    if (!(ls >> idx >> x >> y >> z)) {
      throw ParseError(location(node_path.string(), nodes[i + 1].first) + ": malformed point");
    }
    if (i == 0) first_index = idx;
    mesh.points.emplace_back(x, y, z);
  }

  const auto eles = data_lines(ele_path);
  if (eles.empty()) throw ParseError(ele_path.string() + ": missing header");
  std::size_t tet_count = 0;
  int corners = 0;
  {
    std::istringstream hs(eles[0].second);
    if (!(hs >> tet_count >> corners) || corners != 4) {
      throw ParseError(location(ele_path.string(), eles[0].first) + ": bad header");
    }
  }
  if (eles.size() < tet_count + 1) throw ParseError(ele_path.string() + ": truncated tet list");
  for (std::size_t k = 0; k < tet_count; ++k) {
    std::istringstream ls(eles[k + 1].second);
    long idx = 0;
    long v[4];
    if (!(ls >> idx >> v[0] >> v[1] >> v[2] >> v[3])) {
      throw ParseError(location(ele_path.string(), eles[k + 1].first) + ": malformed tet");
    }
    Tet t{};
    for (int i = 0; i < 4; ++i) {
      const long local = v[i] - first_index;
      if (local < 0 || local >= static_cast<long>(count)) {
        throw ParseError(location(ele_path.string(), eles[k + 1].first) + ": index out of range");
      }
      t[i] = static_cast<int>(local);
    }
    mesh.tets.push_back(t);
  }
  return mesh;
}

// ---- Cameras ------------------------------------------------------------

std::vector<Camera> parse_cameras(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("cameras: invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("cameras: top level must be an array");
  std::vector<Camera> cameras;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& entry = doc[i];
    const std::string where = "cameras[" + std::to_string(i) + "]";
    if (!entry.is_object()) throw ParseError(where + ": expected an object");
    auto number = [&](const char* key) {
      if (!entry.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
      if (!entry[key].is_number()) throw ParseError(where + ": field '" + key + "' must be a number");
      return entry[key].get<double>();
    };
    auto integer = [&](const char* key) {
      if (!entry.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
      if (!entry[key].is_number_integer()) {
        throw ParseError(where + ": field '" + key + "' must be an integer");
      }
      return entry[key].get<int>();
    };
    Camera cam;
    cam.width = integer("width");
    cam.height = integer("height");
    cam.fx = number("fx");
    cam.fy = number("fy");
    cam.cx = number("cx");
    cam.cy = number("cy");
    if (!entry.contains("world_to_camera")) {
      throw ParseError(where + ": missing field 'world_to_camera'");
    }
    const auto& m = entry["world_to_camera"];
    if (!m.is_array() || m.size() != 16) {
      throw ParseError(where + ": field 'world_to_camera' must hold 16 numbers");
    }
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        if (!m[4 * r + c].is_number()) {
          throw ParseError(where + ": field 'world_to_camera' must hold 16 numbers");
        }
        cam.world_to_camera(r, c) = m[4 * r + c].get<double>();
      }
    }
    try {
      cam.validate(1e-6);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    cameras.push_back(cam);
  }
  return cameras;
}

std::vector<Camera> read_cameras(const std::filesystem::path& path) {
  return parse_cameras(read_text(path));
}

std::string cameras_to_json(const std::vector<Camera>& cameras) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const Camera& c : cameras) {
    nlohmann::ordered_json e;
    e["width"] = c.width;
    e["height"] = c.height;
    e["fx"] = c.fx;
    e["fy"] = c.fy;
    e["cx"] = c.cx;
    e["cy"] = c.cy;
    std::vector<double> m;
    for (int r = 0; r < 4; ++r) {
      for (int col = 0; col < 4; ++col) m.push_back(c.world_to_camera(r, col));
    }
    e["world_to_camera"] = m;
    doc.push_back(e);
  }
  return doc.dump(2) + "\n";
}

// ---- PNG ----------------------------------------------------------------

Image read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
    const std::string why = png.message;
    if (!std::filesystem::exists(path)) throw IoError("cannot open " + path.string());
    throw FormatError(path.string() + ": " + why);
  }
  if (png.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&png);
    throw FormatError(path.string() + ": unsupported bit depth (only 8-bit PNG is accepted)");
  }
  const bool has_alpha = (png.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  png.format = PNG_FORMAT_RGBA;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    const std::string why = png.message;
    png_image_free(&png);
    throw FormatError(path.string() + ": " + why);
  }
  Image img(static_cast<int>(png.width), static_cast<int>(png.height));
  img.has_mask = has_alpha;
  for (std::size_t j = 0; j < img.pixel_count(); ++j) {
    const png_byte* px = &buffer[4 * j];
    img.rgb[j] = Vec3(px[0], px[1], px[2]) / 255.0;
    img.mask[j] = has_alpha ? px[3] / 255.0 : 1.0;
  }
  return img;
}

std::size_t write_png(const Image& image, const std::filesystem::path& path) {
  if (image.width <= 0 || image.height <= 0) throw InvalidArgument("write_png: empty image");
  std::vector<png_byte> buffer(4 * image.pixel_count());
  std::size_t clamped = 0;
  auto quantize = [&](double v) {
    if (!(v >= 0.0 && v <= 1.0)) {
      ++clamped;
      v = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
    }
    return static_cast<png_byte>(std::lround(v * 255.0));
  };
  for (std::size_t j = 0; j < image.pixel_count(); ++j) {
    for (int c = 0; c < 3; ++c) buffer[4 * j + c] = quantize(image.rgb[j](c));
    buffer[4 * j + 3] = quantize(image.has_mask ? image.mask[j] : 1.0);
  }
  if (clamped > 0) {
    log_warning("write_png: clamped " + std::to_string(clamped) + " out-of-range values in " +
                path.string());
  }
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGBA;
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
    throw IoError("write_png: " + std::string(png.message));
  }
  return clamped;
}

// ---- Vertex attributes --------------------------------------------------

namespace {

constexpr char kAttrMagic[8] = {'D', 'E', 'F', 'T', 'A', 'T', 'T', 'R'};
constexpr std::uint32_t kAttrVersion = 1;

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw FormatError("attributes: truncated file");
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  pos += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_attributes(const VertexAttributes& attrs, const std::filesystem::path& path) {
  if (attrs.colors.size() != attrs.visibility.size()) {
    throw InvalidArgument("write_attributes: color and visibility counts differ");
  }
  std::string out(kAttrMagic, sizeof(kAttrMagic));
  put_le<std::uint32_t>(out, kAttrVersion);
  put_le<std::uint32_t>(out, 0);
  put_le<std::uint64_t>(out, attrs.colors.size());
  for (const Vec3& c : attrs.colors) {
    for (int i = 0; i < 3; ++i) put_le<double>(out, c(i));
  }
  for (double d : attrs.visibility) put_le<double>(out, d);
  write_text(path, out);
}

VertexAttributes read_attributes(const std::filesystem::path& path) {
  const std::string data = read_text(path);
  if (data.size() < 16 || std::memcmp(data.data(), kAttrMagic, sizeof(kAttrMagic)) != 0) {
    throw FormatError(path.string() + ": not a vertex attribute file");
  }
  std::size_t pos = 8;
  const auto version = get_le<std::uint32_t>(data, pos);
  if (version != kAttrVersion) {
    throw FormatError(path.string() + ": unsupported attribute version " + std::to_string(version));
  }
  get_le<std::uint32_t>(data, pos);
  const auto n = get_le<std::uint64_t>(data, pos);
  if (data.size() != pos + n * 4 * sizeof(double)) {
    throw FormatError(path.string() + ": size does not match vertex count");
  }
  VertexAttributes attrs;
  attrs.colors.resize(n);
  attrs.visibility.resize(n);
  for (auto& c : attrs.colors) {
    for (int i = 0; i < 3; ++i) c(i) = get_le<double>(data, pos);
  }
  for (double& d : attrs.visibility) d = get_le<double>(data, pos);
  return attrs;
}

// ---- Run configuration --------------------------------------------------

MeshOptimizeConfig RunConfig::mesh_config() const {
  MeshOptimizeConfig c;
  c.energy = energy;
  c.energy.seed = seed;
  c.optimizer = adam;
  c.optimizer.plain_sgd = optimizer == OptimizerKind::Sgd;
  c.iterations = iterations;
  c.relabel_every = relabel_every;
  c.threshold = threshold;
  c.clamp_offsets = clamp_offsets;
  return c;
}

MultiviewConfig RunConfig::multiview_config() const {
  MultiviewConfig c;
  c.energy = energy;
  c.energy.seed = seed;
  c.optimizer = adam;
  c.optimizer.plain_sgd = optimizer == OptimizerKind::Sgd;
  c.iterations = iterations;
  c.views_per_step = views_per_step;
  c.optimize_positions = optimize_positions;
  c.clamp_offsets = clamp_offsets;
  c.threshold = threshold;
  return c;
}

namespace {

struct ConfigField {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> parse;
  std::function<std::string(const RunConfig&)> print;
};

double to_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw std::invalid_argument("expected a number, got '" + s + "'");
  }
  return v;
}

template <typename Int>
Int to_integer(const std::string& s) {
  Int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected an integer, got '" + s + "'");
  }
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

#define DEFTET_DOUBLE(name, member)                                                     \
  ConfigField {                                                                         \
    name, [](RunConfig& c, const std::string& v) { c.member = to_double(v); },          \
        [](const RunConfig& c) { return format_double(c.member); }                      \
  }
#define DEFTET_INT(name, member, type)                                                  \
  ConfigField {                                                                         \
    name, [](RunConfig& c, const std::string& v) { c.member = to_integer<type>(v); },   \
        [](const RunConfig& c) { return std::to_string(c.member); }                     \
  }
#define DEFTET_BOOL(name, member)                                                       \
  ConfigField {                                                                         \
    name, [](RunConfig& c, const std::string& v) { c.member = to_bool(v); },            \
        [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }     \
  }
#define DEFTET_STRING(name, member)                                                     \
  ConfigField {                                                                         \
    name, [](RunConfig& c, const std::string& v) { c.member = v; },                     \
        [](const RunConfig& c) { return c.member; }                                     \
  }

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = {
      DEFTET_INT("resolution", resolution, int),
      DEFTET_INT("iterations", iterations, int),
      DEFTET_INT("relabel_every", relabel_every, int),
      DEFTET_INT("seed", seed, std::uint64_t),
      ConfigField{"optimizer",
                  [](RunConfig& c, const std::string& v) {
                    if (v == "adam") c.optimizer = OptimizerKind::Adam;
                    else if (v == "sgd") c.optimizer = OptimizerKind::Sgd;
                    else throw std::invalid_argument("expected adam or sgd, got '" + v + "'");
                  },
                  [](const RunConfig& c) {
                    return std::string(c.optimizer == OptimizerKind::Adam ? "adam" : "sgd");
                  }},
      DEFTET_DOUBLE("learning_rate", adam.learning_rate),
      DEFTET_DOUBLE("beta1", adam.beta1),
      DEFTET_DOUBLE("beta2", adam.beta2),
      DEFTET_DOUBLE("epsilon", adam.epsilon),
      DEFTET_DOUBLE("lambda_recon", energy.lambda_recon),
      DEFTET_DOUBLE("lambda_surf", energy.lambda_surf),
      DEFTET_DOUBLE("lambda_lap", energy.lambda_lap),
      DEFTET_DOUBLE("lambda_del", energy.lambda_del),
      DEFTET_DOUBLE("lambda_vol", energy.lambda_vol),
      DEFTET_DOUBLE("lambda_amips", energy.lambda_amips),
      DEFTET_DOUBLE("lambda_sm", energy.lambda_sm),
      DEFTET_DOUBLE("lambda_mask", energy.lambda_mask),
      DEFTET_INT("sample_count_target", energy.sample_count_target, std::size_t),
      DEFTET_INT("sample_count_pred", energy.sample_count_pred, std::size_t),
      DEFTET_DOUBLE("threshold", threshold),
      DEFTET_BOOL("clamp_offsets", clamp_offsets),
      DEFTET_INT("views_per_step", views_per_step, std::size_t),
      DEFTET_BOOL("optimize_positions", optimize_positions),
      DEFTET_INT("metric_samples", metric_samples, std::size_t),
      DEFTET_DOUBLE("smooth_factor", smooth_factor),
      DEFTET_INT("smooth_iterations", smooth_iterations, int),
      DEFTET_STRING("output", output),
      DEFTET_STRING("log", log),
  };
  return fields;
}

#undef DEFTET_DOUBLE
#undef DEFTET_INT
#undef DEFTET_BOOL
#undef DEFTET_STRING

void validate_config(const RunConfig& c, const std::string& source) {
  auto fail = [&](const std::string& why) { throw ParseError(source + ": " + why); };
  if (c.resolution < 1) fail("resolution must be >= 1");
  if (c.iterations < 0) fail("iterations must be >= 0");
  if (c.relabel_every < 1) fail("relabel_every must be >= 1");
  if (!(c.adam.learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(c.adam.beta1 >= 0.0 && c.adam.beta1 < 1.0)) fail("beta1 must lie in [0, 1)");
  if (!(c.adam.beta2 >= 0.0 && c.adam.beta2 < 1.0)) fail("beta2 must lie in [0, 1)");
  if (!(c.adam.epsilon > 0.0)) fail("epsilon must be positive");
  if (!(c.threshold > 0.0 && c.threshold < 1.0)) fail("threshold must lie in (0, 1)");
  if (c.metric_samples == 0) fail("metric_samples must be positive");
  if (!(c.smooth_factor >= 0.0 && c.smooth_factor < 1.0)) fail("smooth_factor must lie in [0, 1)");
  if (c.smooth_iterations < 0) fail("smooth_iterations must be >= 0");
  try {
    c.energy.validate();
  } catch (const InvalidArgument& e) {
    fail(e.what());
  }
}

}  // namespace

RunConfig parse_config(std::istream& in, const std::string& source) {
  RunConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = strip(line);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ParseError(location(source, line_no) + ": expected 'key = value'");
    }
    const std::string key = strip(s.substr(0, eq));
    const std::string value = strip(s.substr(eq + 1));
    const auto& fields = config_fields();
    const auto it = std::find_if(fields.begin(), fields.end(),
                                 [&](const ConfigField& f) { return key == f.key; });
    if (it == fields.end()) {
      throw ParseError(location(source, line_no) + ": unknown key '" + key + "'");
    }
    try {
      it->parse(config, value);
    } catch (const std::invalid_argument& e) {
      throw ParseError(location(source, line_no) + ": " + key + ": " + e.what());
    }
  }
  validate_config(config, source);
  return config;
}

RunConfig read_config(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_config(in, path.string());
}

std::string serialize_config(const RunConfig& config) {
  std::ostringstream os;
  for (const auto& f : config_fields()) os << f.key << " = " << f.print(config) << '\n';
  return os.str();
}

// ---- Reports and traces -------------------------------------------------

std::string quality_report_json(const QualityReport& report,
                                const std::vector<std::pair<std::string, double>>& extra) {
  nlohmann::ordered_json doc;
  doc["min_dihedral"] = report.min_dihedral;
  doc["mean_amips"] = report.mean_amips;
  doc["max_amips"] = report.max_amips;
  doc["flipped_count"] = report.flipped_count;
  doc["hausdorff"] = report.hausdorff;
  doc["hausdorff_kind"] = "sampled";
  doc["chamfer"] = report.chamfer;
  doc["tet_count"] = report.tet_count;
  doc["vertex_count"] = report.vertex_count;
  if (report.psnr) {
    if (std::isinf(*report.psnr)) doc["psnr"] = "exact";
    else doc["psnr"] = *report.psnr;
  } else {
    doc["psnr"] = nullptr;
  }
  for (const auto& [key, value] : extra) {
    if (std::isfinite(value)) doc[key] = value;
    else doc[key] = std::isinf(value) && value > 0 ? "exact" : "nan";
  }
  return doc.dump(2) + "\n";
}

void write_trace(const std::vector<TraceRecord>& trace, std::ostream& out) {
  for (const TraceRecord& r : trace) {
    out << "iter=" << r.iteration << " total=" << format_double(r.total);
    for (const auto& [name, value] : r.terms) out << ' ' << name << '=' << format_double(value);
    out << " flipped=" << r.flipped << " faces=" << r.surface_faces
        << " psnr=" << format_double(r.psnr) << " elapsed_ms=" << format_double(r.elapsed_ms)
        << '\n';
  }
}

std::vector<TraceRecord> parse_trace(std::istream& in) {
  std::vector<TraceRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = strip(line);
    if (s.empty()) continue;
    TraceRecord r;
    std::istringstream ls(s);
    std::string token;
    bool has_iter = false;
    while (ls >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) {
        throw ParseError("trace:" + std::to_string(line_no) + ": malformed token '" + token + "'");
      }
      const std::string key = token.substr(0, eq);
      const std::string value = token.substr(eq + 1);
      try {
        if (key == "iter") {
          r.iteration = to_integer<int>(value);
          has_iter = true;
        } else if (key == "total") {
          r.total = to_double(value);
        } else if (key == "flipped") {
          r.flipped = to_integer<std::size_t>(value);
        } else if (key == "faces") {
          r.surface_faces = to_integer<std::size_t>(value);
        } else if (key == "psnr") {
          r.psnr = to_double(value);
        } else if (key == "elapsed_ms") {
          r.elapsed_ms = to_double(value);
        } else {
          r.terms[key] = to_double(value);
        }
      } catch (const std::invalid_argument& e) {
        throw ParseError("trace:" + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (!has_iter) throw ParseError("trace:" + std::to_string(line_no) + ": missing iter");
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace deftet::io
