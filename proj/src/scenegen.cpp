#include "xdet/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "xdet/rng.hpp"

namespace xdet {

namespace fs = std::filesystem;
using nlohmann::json;

const char* const kClassNames[kNumClasses] = {"disk", "square", "triangle"};

const char* domain_name(Domain d) { return d == Domain::source ? "source" : "target"; }

Domain domain_from_name(const std::string& name) {
  if (name == "source") return Domain::source;
  if (name == "target") return Domain::target;
  throw std::invalid_argument("unknown domain: " + name);
}

namespace {

struct ShapeSpec {
  int class_id;
  real cx, cy, size;
  std::array<real, 3> color;
};

BoundingBox shape_box(const ShapeSpec& s) {
  const real h = s.size / 2;
  return {s.cx - h, s.cy - h, s.cx + h, s.cy + h};
}

bool inside_shape(const ShapeSpec& s, real px, real py) {
  const real h = s.size / 2;
  switch (s.class_id) {
    case 0:
      return (px - s.cx) * (px - s.cx) + (py - s.cy) * (py - s.cy) <= h * h;
    case 1:
      return std::abs(px - s.cx) <= h && std::abs(py - s.cy) <= h;
    default: {
      // Upward triangle: apex (cx, cy-h), base corners (cx +- h, cy+h).
      if (py < s.cy - h || py > s.cy + h) return false;
      const real t = (py - (s.cy - h)) / s.size;  // 0 at apex, 1 at base
      return std::abs(px - s.cx) <= t * h;
    }
  }
}

// Coverage from a 2x2 subpixel grid; gives soft edges without a full AA pass.
real coverage(const ShapeSpec& s, int x, int y) {
  int hits = 0;
  for (real dy : {real(0.25), real(0.75)})
    for (real dx : {real(0.25), real(0.75)})
      if (inside_shape(s, x + dx, y + dy)) ++hits;
  return static_cast<real>(hits) / real(4);
}

// Geometry (shape list) must depend only on the scene seed, never the domain.
std::vector<ShapeSpec> sample_shapes(std::uint64_t seed) {
  Rng geo(seed, "geometry");
  Rng paint(seed, "render");
  static constexpr std::array<std::array<real, 3>, kNumClasses> kClassColors = {{
      {real(0.80), real(0.22), real(0.20)},
      {real(0.20), real(0.68), real(0.28)},
      {real(0.25), real(0.35), real(0.85)},
  }};

  const int wanted = geo.uniform_int(1, 3);
  for (int n = wanted; n >= 1; --n) {
    std::vector<ShapeSpec> shapes;
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      ok = false;
      for (int attempt = 0; attempt < 100; ++attempt) {
        ShapeSpec s;
        s.class_id = static_cast<int>(geo.uniform_int(kNumClasses));
        s.size = static_cast<real>(geo.uniform(8.0, 24.0));
        const real h = s.size / 2;
        s.cx = static_cast<real>(geo.uniform(h, kSceneSize - h));
        s.cy = static_cast<real>(geo.uniform(h, kSceneSize - h));
        bool clash = false;
        for (const ShapeSpec& other : shapes)
          if (iou(shape_box(s), shape_box(other)) >= real(0.3)) {
            clash = true;
            break;
          }
        if (clash) continue;
        for (int c = 0; c < 3; ++c)
          s.color[c] = std::clamp(
              kClassColors[s.class_id][c] + static_cast<real>(paint.uniform(-0.08, 0.08)),
              real(0), real(1));
        shapes.push_back(s);
        ok = true;
        break;
      }
    }
    if (ok) return shapes;
  }
  throw std::logic_error("sample_shapes: could not place a single shape");
}

ImageBuffer box_blur3(const ImageBuffer& img) {
  const int h = img.height(), w = img.width();
  ImageBuffer out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        real acc = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = std::clamp(y + dy, 0, h - 1);
            const int xx = std::clamp(x + dx, 0, w - 1);
            acc += img.at(yy, xx, c);
          }
        out.at(y, x, c) = acc / real(9);
      }
  return out;
}

}  // namespace

Scene generate_scene(std::uint64_t seed, Domain domain, std::int64_t id) {
  const std::vector<ShapeSpec> shapes = sample_shapes(seed);

  Rng tex(seed, "texture");
  // Low-frequency luminance noise: coarse grid, bilinear upsample.
  constexpr int kGrid = 9;
  std::array<real, kGrid * kGrid> grid;
  for (real& g : grid) g = static_cast<real>(tex.uniform(-0.07, 0.07));
  auto noise_at = [&](int y, int x) {
    const real gy = static_cast<real>(y) / (kSceneSize - 1) * (kGrid - 1);
    const real gx = static_cast<real>(x) / (kSceneSize - 1) * (kGrid - 1);
    const int y0 = std::min(static_cast<int>(gy), kGrid - 2);
    const int x0 = std::min(static_cast<int>(gx), kGrid - 2);
    const real fy = gy - y0, fx = gx - x0;
    return grid[y0 * kGrid + x0] * (1 - fy) * (1 - fx) +
           grid[y0 * kGrid + x0 + 1] * (1 - fy) * fx +
           grid[(y0 + 1) * kGrid + x0] * fy * (1 - fx) +
           grid[(y0 + 1) * kGrid + x0 + 1] * fy * fx;
  };

  // Vertical shading gives every scene a stable up direction; the rotation
  // pretext task is unlearnable from isotropic content alone.
  const std::array<real, 3> base = domain == Domain::source
                                       ? std::array<real, 3>{real(0.34), real(0.30), real(0.24)}
                                       : std::array<real, 3>{real(0.26), real(0.29), real(0.34)};
  constexpr real kShade = 0.11;

  Scene scene;
  scene.domain = domain;
  scene.id = id;
  scene.image = ImageBuffer(kSceneSize, kSceneSize);
  for (int y = 0; y < kSceneSize; ++y) {
    const real shade = kShade * (real(1) - real(2) * y / real(kSceneSize - 1));
    for (int x = 0; x < kSceneSize; ++x) {
      const real n = noise_at(y, x);
      for (int c = 0; c < 3; ++c) scene.image.at(y, x, c) = base[c] + shade + n;
    }
  }

  for (const ShapeSpec& s : shapes) {
    scene.annotations.push_back({shape_box(s).clipped(kSceneSize, kSceneSize), s.class_id});
    const int x0 = std::max(0, static_cast<int>(std::floor(s.cx - s.size / 2)));
    const int x1 = std::min(kSceneSize - 1, static_cast<int>(std::ceil(s.cx + s.size / 2)));
    const int y0 = std::max(0, static_cast<int>(std::floor(s.cy - s.size / 2)));
    const int y1 = std::min(kSceneSize - 1, static_cast<int>(std::ceil(s.cy + s.size / 2)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const real cov = coverage(s, x, y);
        if (cov <= 0) continue;
        for (int c = 0; c < 3; ++c)
          scene.image.at(y, x, c) =
              scene.image.at(y, x, c) * (real(1) - cov) + s.color[c] * cov;
      }
  }

  if (domain == Domain::target) {
    Rng fog(seed, "fog");
    const real alpha = static_cast<real>(fog.uniform(0.4, 0.7));
    constexpr real kFogGray = 0.85;
    for (real& v : scene.image.data()) v = (real(1) - alpha) * v + alpha * kFogGray;
    scene.image = box_blur3(scene.image);
    for (real& v : scene.image.data()) v = real(0.5) + (v - real(0.5)) * real(0.7);
  }
  scene.image.clamp01();
  return scene;
}

namespace {

json annotations_to_json(const std::vector<Annotation>& anns) {
  json arr = json::array();
  for (const Annotation& a : anns)
    arr.push_back({{"box", {a.box.x_min, a.box.y_min, a.box.x_max, a.box.y_max}},
                   {"class_id", a.class_id}});
  return arr;
}

std::vector<Annotation> annotations_from_json(const json& arr) {
  std::vector<Annotation> anns;
  for (const json& a : arr) {
    Annotation ann;
    ann.box = {a.at("box").at(0).get<real>(), a.at("box").at(1).get<real>(),
               a.at("box").at(2).get<real>(), a.at("box").at(3).get<real>()};
    ann.class_id = a.at("class_id").get<int>();
    anns.push_back(ann);
  }
  return anns;
}

void write_split_index(const fs::path& path, Domain domain, const std::vector<Scene>& scenes,
                       const std::vector<std::string>& rel_paths) {
  json entries = json::array();
  for (std::size_t i = 0; i < scenes.size(); ++i)
    entries.push_back({{"id", scenes[i].id},
                       {"image_path", rel_paths[i]},
                       {"domain", domain_name(domain)},
                       {"annotations", annotations_to_json(scenes[i].annotations)}});
  json index = {{"version", 1}, {"domain", domain_name(domain)}, {"entries", entries}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write index: " + path.string());
  out << index.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

void generate_split(std::uint64_t seed, int n_train, int n_test, Domain domain,
                    const std::string& out_dir) {
  if (n_train <= 0 || n_test < 0)
    throw std::invalid_argument("generate_split: counts must be positive");
  const fs::path root(out_dir);
  const fs::path img_dir = root / "images";
  std::error_code ec;
  fs::create_directories(img_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + img_dir.string() + ": " + ec.message());

  auto emit = [&](int first_id, int count, const char* split) {
    std::vector<Scene> scenes;
    std::vector<std::string> rel_paths;
    for (int i = 0; i < count; ++i) {
      const std::int64_t id = first_id + i;
      const std::uint64_t scene_seed = mix64(seed) ^ mix64(static_cast<std::uint64_t>(id));
      Scene s = generate_scene(scene_seed, domain, id);
      std::ostringstream name;
      name << domain_name(domain) << "_" << split << "_" << id << ".png";
      save_png((img_dir / name.str()).string(), s.image);
      rel_paths.push_back("images/" + name.str());
      scenes.push_back(std::move(s));
    }
    std::ostringstream index_name;
    index_name << domain_name(domain) << "_" << split << ".json";
    write_split_index(root / index_name.str(), domain, scenes, rel_paths);
  };

  emit(0, n_train, "train");
  emit(n_train, n_test, "test");
}

std::vector<IndexEntry> load_index(const std::string& index_path) {
  std::ifstream in(index_path);
  if (!in) throw std::runtime_error("cannot open index: " + index_path);
  json index;
  try {
    in >> index;
  } catch (const json::exception& e) {
    throw std::runtime_error("bad index " + index_path + ": " + e.what());
  }
  const fs::path dir = fs::path(index_path).parent_path();
  std::vector<IndexEntry> entries;
  for (const json& e : index.at("entries")) {
    IndexEntry entry;
    entry.id = e.at("id").get<std::int64_t>();
    entry.image_path = (dir / e.at("image_path").get<std::string>()).string();
    entry.domain = domain_from_name(e.at("domain").get<std::string>());
    entry.annotations = annotations_from_json(e.at("annotations"));
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::vector<Scene> load_scenes(const std::string& index_path) {
  std::vector<Scene> scenes;
  for (const IndexEntry& e : load_index(index_path)) {
    Scene s;
    s.id = e.id;
    s.domain = e.domain;
    s.annotations = e.annotations;
    s.image = load_png(e.image_path);
    scenes.push_back(std::move(s));
  }
  return scenes;
}

std::vector<UnlabeledImage> load_images_only(const std::string& index_path) {
  std::vector<UnlabeledImage> images;
  for (const IndexEntry& e : load_index(index_path))
    images.push_back({e.id, load_png(e.image_path)});
  return images;
}

}  // namespace xdet
