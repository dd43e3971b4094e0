#include "ofsr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "ofsr/config.hpp"
#include "ofsr/errors.hpp"
#include "ofsr/flo_io.hpp"

namespace ofsr {

namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Lattice value in [0, 1) from integer coordinates and a seed.
double lattice(int ix, int iy, std::uint32_t seed) {
  std::uint64_t h = splitmix64((static_cast<std::uint64_t>(seed) << 32) ^
                               (static_cast<std::uint64_t>(static_cast<std::uint32_t>(ix)) << 16) ^
                               static_cast<std::uint32_t>(iy));
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Multi-octave value noise in [0, 1].
double value_noise(double x, double y, std::uint32_t seed, int octaves) {
  double sum = 0.0, amp = 1.0, total = 0.0, freq = 1.0;
  for (int o = 0; o < octaves; ++o) {
    const double fx = x * freq, fy = y * freq;
    const int ix = static_cast<int>(std::floor(fx));
    const int iy = static_cast<int>(std::floor(fy));
    const double tx = smoothstep(fx - ix);
    const double ty = smoothstep(fy - iy);
    const std::uint32_t s = seed + static_cast<std::uint32_t>(o) * 0x9e37u;
    const double v00 = lattice(ix, iy, s), v01 = lattice(ix + 1, iy, s);
    const double v10 = lattice(ix, iy + 1, s), v11 = lattice(ix + 1, iy + 1, s);
    sum += amp * ((1 - ty) * ((1 - tx) * v00 + tx * v01) +
                  ty * ((1 - tx) * v10 + tx * v11));
    total += amp;
    amp *= 0.5;
    freq *= 2.0;
  }
  return sum / total;
}

float bilinear_sample(const ImageFrame& img, int c, double x, double y) {
  const int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, img.width - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, img.height - 1);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = std::clamp(x - std::floor(x), 0.0, 1.0);
  const double fy = std::clamp(y - std::floor(y), 0.0, 1.0);
  return static_cast<float>(
      (1 - fy) * ((1 - fx) * img.at(c, x0, y0) + fx * img.at(c, x1, y0)) +
      fy * ((1 - fx) * img.at(c, x0, y1) + fx * img.at(c, x1, y1)));
}

float bilinear_sample_gray(const std::vector<float>& img, int w, int h, double x,
                           double y) {
  const int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, w - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = std::clamp(x - std::floor(x), 0.0, 1.0);
  const double fy = std::clamp(y - std::floor(y), 0.0, 1.0);
  auto px = [&](int xx, int yy) {
    return static_cast<double>(img[static_cast<std::size_t>(yy) * w + xx]);
  };
  return static_cast<float>((1 - fy) * ((1 - fx) * px(x0, y0) + fx * px(x1, y0)) +
                            fy * ((1 - fx) * px(x0, y1) + fx * px(x1, y1)));
}

std::array<float, 3> texture_color(double x, double y, std::uint32_t seed,
                                   int octaves, const std::array<float, 3>& tint) {
  const double n = value_noise(x * 0.08, y * 0.08, seed, octaves);
  std::array<float, 3> out;
  for (int c = 0; c < 3; ++c) {
    const double n2 = value_noise(x * 0.15 + 37.0 * c, y * 0.15 + 11.0 * c,
                                  seed ^ (0x51edu + c), std::max(1, octaves - 1));
    out[c] = static_cast<float>(std::clamp(tint[c] * (0.25 + 0.55 * n + 0.2 * n2), 0.0, 1.0));
  }
  return out;
}

}  // namespace

void SceneConfig::validate() const {
  if (width < 8 || height < 8) {
    throw std::invalid_argument("SceneConfig: image size must be at least 8x8");
  }
  if (min_objects < 0 || max_objects < min_objects) {
    throw std::invalid_argument("SceneConfig: bad object count range");
  }
  if (max_displacement < 0 ||
      max_displacement >= std::min(width, height) / 4.0) {
    throw std::invalid_argument(
        "SceneConfig: max_displacement must be in [0, min(width, height) / 4)");
  }
  if (texture_octaves < 1) {
    throw std::invalid_argument("SceneConfig: texture_octaves must be >= 1");
  }
}

void HornSchunckConfig::validate() const {
  if (!(alpha > 0)) throw std::invalid_argument("HornSchunckConfig: alpha must be > 0");
  if (iterations < 1) throw std::invalid_argument("HornSchunckConfig: iterations must be >= 1");
  if (pyramid_levels < 1) throw std::invalid_argument("HornSchunckConfig: pyramid_levels must be >= 1");
}

bool SceneObject::contains(double x, double y) const {
  if (kind == Kind::ellipse) {
    const double dx = x - cx, dy = y - cy;
    const double ct = std::cos(tilt), st = std::sin(tilt);
    const double lx = (ct * dx + st * dy) / rx;
    const double ly = (-st * dx + ct * dy) / ry;
    return lx * lx + ly * ly <= 1.0;
  }
  // Convex polygon, vertices in counter-clockwise order.
  const std::size_t n = vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = vertices[i];
    const auto& b = vertices[(i + 1) % n];
    const double cross = (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]);
    if (cross < 0) return false;
  }
  return true;
}

std::array<double, 2> SceneObject::displacement(double x, double y) const {
  const double ct = std::cos(theta), st = std::sin(theta);
  const double dx = x - cx, dy = y - cy;
  const double nx = cx + scale * (ct * dx - st * dy) + tx;
  const double ny = cy + scale * (st * dx + ct * dy) + ty;
  return {nx - x, ny - y};
}

Scene render_scene(const SceneSpec& spec) {
  Scene scene;
  scene.frame1 = ImageFrame(spec.width, spec.height);
  scene.gt_flow = FlowField(spec.width, spec.height);

  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const SceneObject* top = nullptr;
      for (auto it = spec.objects.rbegin(); it != spec.objects.rend(); ++it) {
        if (it->contains(x, y)) {
          top = &*it;
          break;
        }
      }
      std::array<float, 3> color;
      double du, dv;
      if (top) {
        color = texture_color(x - top->cx, y - top->cy, top->texture_seed,
                              spec.texture_octaves, top->tint);
        const auto d = top->displacement(x, y);
        du = d[0];
        dv = d[1];
      } else {
        color = texture_color(x, y, spec.background_seed, spec.texture_octaves,
                              {0.85f, 0.85f, 0.9f});
        du = spec.bg_tx;
        dv = spec.bg_ty;
      }
      for (int c = 0; c < 3; ++c) scene.frame1.at(c, x, y) = color[c];
      scene.gt_flow.u_at(x, y) = static_cast<float>(du);
      scene.gt_flow.v_at(x, y) = static_cast<float>(dv);
    }
  }

  scene.frame2 = ImageFrame(spec.width, spec.height);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const double sx = x - scene.gt_flow.u_at(x, y);
      const double sy = y - scene.gt_flow.v_at(x, y);
      for (int c = 0; c < 3; ++c) {
        scene.frame2.at(c, x, y) = bilinear_sample(scene.frame1, c, sx, sy);
      }
    }
  }
  return scene;
}

Scene generate_scene(const SceneConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SceneSpec spec;
  spec.width = config.width;
  spec.height = config.height;
  spec.texture_octaves = config.texture_octaves;
  spec.background_seed = static_cast<std::uint32_t>(rng());
  const double maxd = config.max_displacement;
  spec.bg_tx = (unit(rng) * 2 - 1) * 0.25 * maxd;
  spec.bg_ty = (unit(rng) * 2 - 1) * 0.25 * maxd;

  const int n = config.min_objects +
                static_cast<int>(rng() % (config.max_objects - config.min_objects + 1));
  const double rmin = 0.10 * std::min(config.width, config.height);
  const double rmax = 0.28 * std::min(config.width, config.height);
  for (int i = 0; i < n; ++i) {
    SceneObject obj;
    obj.cx = unit(rng) * config.width;
    obj.cy = unit(rng) * config.height;
    obj.texture_seed = static_cast<std::uint32_t>(rng());
    for (int c = 0; c < 3; ++c) {
      obj.tint[c] = static_cast<float>(0.4 + 0.6 * unit(rng));
    }
    const double radius = rmin + unit(rng) * (rmax - rmin);
    if (unit(rng) < 0.5) {
      obj.kind = SceneObject::Kind::ellipse;
      obj.rx = radius * (0.6 + 0.4 * unit(rng));
      obj.ry = radius * (0.6 + 0.4 * unit(rng));
      obj.tilt = unit(rng) * M_PI;
    } else {
      obj.kind = SceneObject::Kind::polygon;
      const int verts = 3 + static_cast<int>(rng() % 4);
      std::vector<double> angles(verts);
      for (double& a : angles) a = unit(rng) * 2 * M_PI;
      std::sort(angles.begin(), angles.end());
      for (double a : angles) {
        const double r = radius * (0.5 + 0.5 * unit(rng));
        obj.vertices.push_back({obj.cx + r * std::cos(a), obj.cy + r * std::sin(a)});
      }
    }
    // Keep the total displacement under max_displacement: translation uses
    // at most 60% of the budget, rotation + scaling at most 25% at the
    // object's outermost point.
    const double extent = std::max({obj.rx, obj.ry, radius, 1.0});
    const double rot_budget = 0.25 * maxd / (2.0 * extent);
    obj.theta = (unit(rng) * 2 - 1) * std::min(0.12, rot_budget);
    obj.scale = 1.0 + (unit(rng) * 2 - 1) * std::min(0.06, rot_budget);
    obj.tx = (unit(rng) * 2 - 1) * 0.6 * maxd;
    obj.ty = (unit(rng) * 2 - 1) * 0.6 * maxd;
    spec.objects.push_back(std::move(obj));
  }
  return render_scene(spec);
}

FlowField horn_schunck(const ImageFrame& frame1, const ImageFrame& frame2,
                       const HornSchunckConfig& config) {
  config.validate();
  if (frame1.width != frame2.width || frame1.height != frame2.height) {
    throw std::invalid_argument("horn_schunck: frame dimensions differ");
  }

  struct Level {
    int w, h;
    std::vector<float> i1, i2;
  };
  auto to_gray = [](const ImageFrame& img) {
    std::vector<float> g(static_cast<std::size_t>(img.width) * img.height);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        // The classical smoothness weight (alpha = 15 by default) is
        // calibrated for 0-255 intensities; frames store [0, 1].
        g[static_cast<std::size_t>(y) * img.width + x] = 255.0f * luminance(img, x, y);
      }
    }
    return g;
  };
  auto downsample = [](const std::vector<float>& src, int w, int h, int ow, int oh) {
    std::vector<float> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        out[static_cast<std::size_t>(y) * ow + x] =
            bilinear_sample_gray(src, w, h, (x + 0.5) * 2.0 - 0.5, (y + 0.5) * 2.0 - 0.5);
      }
    }
    return out;
  };

  std::vector<Level> pyramid;
  pyramid.push_back({frame1.width, frame1.height, to_gray(frame1), to_gray(frame2)});
  for (int l = 1; l < config.pyramid_levels; ++l) {
    const Level& prev = pyramid.back();
    const int w = std::max(2, prev.w / 2), h = std::max(2, prev.h / 2);
    pyramid.push_back({w, h, downsample(prev.i1, prev.w, prev.h, w, h),
                       downsample(prev.i2, prev.w, prev.h, w, h)});
  }

  FlowField flow(pyramid.back().w, pyramid.back().h);
  for (int l = config.pyramid_levels - 1; l >= 0; --l) {
    const Level& lev = pyramid[l];
    if (flow.width != lev.w || flow.height != lev.h) {
      flow = bilinear_resize_flow(flow, 2.0);
      if (flow.width != lev.w || flow.height != lev.h) {
        FlowField fixed(lev.w, lev.h);
        for (int y = 0; y < lev.h; ++y) {
          for (int x = 0; x < lev.w; ++x) {
            const int sx = std::min(x, flow.width - 1), sy = std::min(y, flow.height - 1);
            fixed.u_at(x, y) = flow.u_at(sx, sy);
            fixed.v_at(x, y) = flow.v_at(sx, sy);
          }
        }
        flow = std::move(fixed);
      }
    }

    const int w = lev.w, h = lev.h;
    const std::size_t npx = static_cast<std::size_t>(w) * h;
    // Warp the second frame towards the first by the current flow.
    std::vector<float> i2w(npx);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        i2w[static_cast<std::size_t>(y) * w + x] = bilinear_sample_gray(
            lev.i2, w, h, x + flow.u_at(x, y), y + flow.v_at(x, y));
      }
    }
    // Central-difference derivatives of the frame average, temporal residual.
    std::vector<float> ix(npx), iy(npx), it(npx);
    auto avg = [&](int x, int y) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      return 0.5 * (lev.i1[i] + i2w[i]);
    };
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
        const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
        ix[i] = static_cast<float>((avg(xp, y) - avg(xm, y)) / 2.0);
        iy[i] = static_cast<float>((avg(x, yp) - avg(x, ym)) / 2.0);
        it[i] = i2w[i] - lev.i1[i];
      }
    }

    // Jacobi iterations on the flow increment.
    std::vector<float> du(npx, 0.0f), dv(npx, 0.0f), du2(npx), dv2(npx);
    const double alpha2 = config.alpha * config.alpha;
    for (int iter = 0; iter < config.iterations; ++iter) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          double ubar = 0, vbar = 0;
          int cnt = 0;
          auto tap = [&](int xx, int yy) {
            const std::size_t j = static_cast<std::size_t>(yy) * w + xx;
            ubar += du[j];
            vbar += dv[j];
            ++cnt;
          };
          if (x > 0) tap(x - 1, y);
          if (x < w - 1) tap(x + 1, y);
          if (y > 0) tap(x, y - 1);
          if (y < h - 1) tap(x, y + 1);
          ubar /= cnt;
          vbar /= cnt;
          const double denom = alpha2 + double(ix[i]) * ix[i] + double(iy[i]) * iy[i];
          const double common = (ix[i] * ubar + iy[i] * vbar + it[i]) / denom;
          du2[i] = static_cast<float>(ubar - ix[i] * common);
          dv2[i] = static_cast<float>(vbar - iy[i] * common);
        }
      }
      du.swap(du2);
      dv.swap(dv2);
    }
    for (std::size_t i = 0; i < npx; ++i) {
      flow.u[i] += du[i];
      flow.v[i] += dv[i];
    }
  }
  return flow;
}

SampleRecord make_sample(const Scene& scene, const HornSchunckConfig& hs,
                         const std::string& id, const std::string& split,
                         std::uint64_t seed) {
  const int w = scene.frame1.width, h = scene.frame1.height;
  if (w % 2 != 0 || h % 2 != 0) {
    throw std::invalid_argument("make_sample: frame dimensions must be even, got " +
                                std::to_string(w) + "x" + std::to_string(h));
  }
  SampleRecord rec;
  rec.id = id;
  rec.split = split;
  rec.seed = seed;
  rec.lr_image = bicubic_resize_image(scene.frame1, 0.5);
  const ImageFrame lr_frame2 = bicubic_resize_image(scene.frame2, 0.5);
  rec.lr_flow = horn_schunck(rec.lr_image, lr_frame2, hs);
  rec.hr_flow_gt = scene.gt_flow;
  return rec;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 0x517cc1b727220a95ull));
}

std::string scene_config_hash(const SceneConfig& config) {
  return json_hash(nlohmann::json(config));
}

Manifest build_dataset(int n_train, int n_test, const SceneConfig& config,
                       const HornSchunckConfig& hs, const std::string& out_dir) {
  if (n_train < 0 || n_test < 0 || n_train + n_test == 0) {
    throw std::invalid_argument("build_dataset: need a nonnegative split with at least one sample");
  }
  config.validate();
  hs.validate();

  Manifest manifest;
  manifest.config_hash = scene_config_hash(config);
  manifest.scene = config;
  manifest.horn_schunck = hs;

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw data_error("build_dataset: cannot create " + out_dir + ": " + ec.message());
  }

  char idbuf[16];
  for (int i = 0; i < n_train + n_test; ++i) {
    const std::string split = i < n_train ? "train" : "test";
    std::snprintf(idbuf, sizeof(idbuf), "%06d", i);
    const std::uint64_t sample_seed = mix_seed(config.seed, static_cast<std::uint64_t>(i));
    const Scene scene = generate_scene(config, sample_seed);
    const SampleRecord rec = make_sample(scene, hs, idbuf, split, sample_seed);

    const fs::path dir = fs::path(out_dir) / split / rec.id;
    fs::create_directories(dir, ec);
    if (ec) {
      throw data_error("build_dataset: cannot create " + dir.string() + ": " + ec.message());
    }
    write_png(rec.lr_image, (dir / "frame1_lr.png").string());
    write_flo(rec.lr_flow, (dir / "lr_flow.flo").string());
    write_flo(rec.hr_flow_gt, (dir / "hr_flow_gt.flo").string());
    manifest.entries.push_back({rec.id, split, sample_seed});
  }

  nlohmann::json j{{"config_hash", manifest.config_hash},
                   {"estimator", manifest.estimator},
                   {"scene", manifest.scene},
                   {"horn_schunck", manifest.horn_schunck}};
  nlohmann::json entries = nlohmann::json::array();
  for (const ManifestEntry& e : manifest.entries) {
    entries.push_back({{"id", e.id}, {"split", e.split}, {"seed", e.seed}});
  }
  j["entries"] = std::move(entries);
  std::ofstream out(fs::path(out_dir) / "manifest.json", std::ios::trunc);
  if (!out) {
    throw data_error("build_dataset: cannot write manifest under " + out_dir);
  }
  out << j.dump(2) << "\n";
  return manifest;
}

Manifest load_manifest(const std::string& dataset_dir) {
  const fs::path path = fs::path(dataset_dir) / "manifest.json";
  std::ifstream in(path);
  if (!in) {
    throw data_error("load_manifest: cannot open " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw data_error("load_manifest: " + path.string() + ": " + e.what());
  }
  Manifest m;
  m.config_hash = j.at("config_hash").get<std::string>();
  m.estimator = j.value("estimator", std::string("horn_schunck"));
  j.at("scene").get_to(m.scene);
  j.at("horn_schunck").get_to(m.horn_schunck);
  for (const auto& e : j.at("entries")) {
    m.entries.push_back({e.at("id").get<std::string>(), e.at("split").get<std::string>(),
                         e.at("seed").get<std::uint64_t>()});
  }
  return m;
}

SampleRecord load_sample(const std::string& dataset_dir, const ManifestEntry& entry) {
  const fs::path dir = fs::path(dataset_dir) / entry.split / entry.id;
  SampleRecord rec;
  rec.id = entry.id;
  rec.split = entry.split;
  rec.seed = entry.seed;
  rec.lr_image = read_png((dir / "frame1_lr.png").string());
  rec.lr_flow = read_flo((dir / "lr_flow.flo").string());
  rec.hr_flow_gt = read_flo((dir / "hr_flow_gt.flo").string());
  return rec;
}

std::vector<SampleRecord> load_split(const std::string& dataset_dir,
                                     const std::string& split) {
  const Manifest m = load_manifest(dataset_dir);
  std::vector<SampleRecord> out;
  for (const ManifestEntry& e : m.entries) {
    if (e.split == split) out.push_back(load_sample(dataset_dir, e));
  }
  return out;
}

}  // namespace ofsr
