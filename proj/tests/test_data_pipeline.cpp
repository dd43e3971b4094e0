#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "ofsr/dataset.hpp"
#include "ofsr/errors.hpp"
#include "ofsr/flow.hpp"

using namespace ofsr;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("ofsr_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool trees_identical(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> rel_a;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) rel_a.push_back(fs::relative(e.path(), a));
  }
  std::sort(rel_a.begin(), rel_a.end());
  std::vector<fs::path> rel_b;
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    if (e.is_regular_file()) rel_b.push_back(fs::relative(e.path(), b));
  }
  std::sort(rel_b.begin(), rel_b.end());
  if (rel_a != rel_b) return false;
  for (const fs::path& rel : rel_a) {
    if (slurp(a / rel) != slurp(b / rel)) return false;
  }
  return true;
}

double mean_lr_epe(const std::vector<SampleRecord>& samples) {
  double acc = 0;
  for (const SampleRecord& s : samples) {
    // Horn-Schunck error at its own (LR) scale, against the exact HR flow
    // brought down to the same grid.
    FlowField gt_lr = bilinear_resize_flow(s.hr_flow_gt, 0.5);
    acc += epe(s.lr_flow, gt_lr).mean_epe;
  }
  return acc / static_cast<double>(samples.size());
}

}  // namespace

TEST_CASE("generate_scene: zero motion budget gives identical frames, zero flow") {
  SceneConfig cfg;
  cfg.max_displacement = 0.0;
  Scene scene = generate_scene(cfg, 5);
  REQUIRE(scene.frame1.width == 64);
  REQUIRE(scene.frame1.height == 64);
  CHECK(scene.frame1.data == scene.frame2.data);
  for (std::size_t i = 0; i < scene.gt_flow.size(); ++i) {
    CHECK(scene.gt_flow.u[i] == 0.0f);
    CHECK(scene.gt_flow.v[i] == 0.0f);
  }
}

TEST_CASE("render_scene: full-frame integer translation by (3, 0)") {
  SceneSpec spec;
  spec.width = 32;
  spec.height = 32;
  spec.background_seed = 11;
  SceneObject obj;
  obj.kind = SceneObject::Kind::polygon;
  obj.vertices = {{-10, -10}, {42, -10}, {42, 42}, {-10, 42}};
  obj.tx = 3.0;
  obj.texture_seed = 12;
  spec.objects.push_back(obj);
  Scene scene = render_scene(spec);

  for (std::size_t i = 0; i < scene.gt_flow.size(); ++i) {
    CHECK(scene.gt_flow.u[i] == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(scene.gt_flow.v[i] == doctest::Approx(0.0).epsilon(1e-6));
  }
  // frame2(p) = frame1(p - flow), so the interior is frame1 shifted 3 columns.
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 32; ++y) {
      for (int x = 3; x < 32; ++x) {
        CHECK(scene.frame2.at(c, x, y) ==
              doctest::Approx(scene.frame1.at(c, x - 3, y)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("generate_scene: deterministic in (config, seed)") {
  SceneConfig cfg;
  Scene a = generate_scene(cfg, 99);
  Scene b = generate_scene(cfg, 99);
  CHECK(a.frame1.data == b.frame1.data);
  CHECK(a.frame2.data == b.frame2.data);
  CHECK(a.gt_flow.u == b.gt_flow.u);
  CHECK(a.gt_flow.v == b.gt_flow.v);

  Scene c = generate_scene(cfg, 100);
  CHECK(a.frame1.data != c.frame1.data);
}

TEST_CASE("generate_scene: gt flow re-renders frame2 from frame1") {
  SceneConfig cfg;
  Scene scene = generate_scene(cfg, 3);
  const int w = scene.frame1.width, h = scene.frame1.height;
  // Inverse bilinear warp of frame1 through gt_flow, edge clamped — the same
  // construction the renderer documents. Samples that would leave the frame
  // are the (excluded) disocclusion band.
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double sx = x - scene.gt_flow.u_at(x, y);
        const double sy = y - scene.gt_flow.v_at(x, y);
        if (sx < 0 || sy < 0 || sx > w - 1 || sy > h - 1) continue;
        const int x0 = static_cast<int>(std::floor(sx));
        const int y0 = static_cast<int>(std::floor(sy));
        const double fx = sx - x0, fy = sy - y0;
        auto at = [&](int px, int py) {
          return static_cast<double>(
              scene.frame1.at(c, std::clamp(px, 0, w - 1), std::clamp(py, 0, h - 1)));
        };
        const double warped =
            (1 - fy) * ((1 - fx) * at(x0, y0) + fx * at(x0 + 1, y0)) +
            fy * ((1 - fx) * at(x0, y0 + 1) + fx * at(x0 + 1, y0 + 1));
        CHECK(std::abs(scene.frame2.at(c, x, y) - warped) < 1e-6);
      }
    }
  }
}

TEST_CASE("SceneConfig and HornSchunckConfig: invalid values are rejected") {
  SceneConfig cfg;
  cfg.max_displacement = 20.0;  // >= 64 / 4
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  HornSchunckConfig hs;
  hs.alpha = 0.0;
  CHECK_THROWS_AS(hs.validate(), std::invalid_argument);
  hs = HornSchunckConfig{};
  hs.iterations = 0;
  CHECK_THROWS_AS(hs.validate(), std::invalid_argument);
}

TEST_CASE("horn_schunck: identical frames give exactly zero flow") {
  SceneConfig cfg;
  cfg.width = 32;
  cfg.height = 32;
  cfg.max_displacement = 3.0;
  Scene scene = generate_scene(cfg, 7);
  FlowField flow = horn_schunck(scene.frame1, scene.frame1, HornSchunckConfig{});
  for (std::size_t i = 0; i < flow.size(); ++i) {
    CHECK(flow.u[i] == 0.0f);
    CHECK(flow.v[i] == 0.0f);
  }
  ImageFrame other(31, 32);
  CHECK_THROWS_AS(horn_schunck(scene.frame1, other, HornSchunckConfig{}),
                  std::invalid_argument);
}

TEST_CASE("horn_schunck: recovers a unit translation of a smooth texture") {
  const int n = 48;
  ImageFrame f1(n, n), f2(n, n);
  auto tex = [](double x, double y) {
    return 0.5 + 0.25 * std::sin(2.0 * 3.14159265358979 * x / 16.0) +
           0.25 * std::sin(2.0 * 3.14159265358979 * y / 16.0);
  };
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        f1.at(c, x, y) = static_cast<float>(tex(x, y));
        f2.at(c, x, y) = static_cast<float>(tex(x - 1.0, y));  // moved by (1, 0)
      }
    }
  }
  FlowField flow = horn_schunck(f1, f2, HornSchunckConfig{});
  double mu = 0, mav = 0;
  for (std::size_t i = 0; i < flow.size(); ++i) {
    mu += flow.u[i];
    mav += std::abs(flow.v[i]);
  }
  mu /= static_cast<double>(flow.size());
  mav /= static_cast<double>(flow.size());
  CHECK(mu > 0.7);
  CHECK(mu < 1.3);
  CHECK(mav < 0.3);
}

TEST_CASE("make_sample: dimensions, zero-motion behaviour, noisy estimates") {
  SceneConfig cfg;
  Scene scene = generate_scene(cfg, 21);
  SampleRecord rec = make_sample(scene, HornSchunckConfig{}, "000021", "train", 21);
  CHECK(rec.lr_flow.width == 32);
  CHECK(rec.lr_flow.height == 32);
  CHECK(rec.lr_image.width == 32);
  CHECK(rec.lr_image.height == 32);
  CHECK(rec.hr_flow_gt.width == 64);
  CHECK(rec.hr_flow_gt.height == 64);
  // The bilinear x2 baseline is finite on every sample.
  EpeReport base = epe(bilinear_resize_flow(rec.lr_flow, 2.0), rec.hr_flow_gt);
  CHECK(std::isfinite(base.mean_epe));
  // Estimates genuinely differ from ground truth.
  CHECK(mean_lr_epe({rec}) > 0.0);

  SceneConfig still;
  still.max_displacement = 0.0;
  Scene frozen = generate_scene(still, 22);
  SampleRecord zero = make_sample(frozen, HornSchunckConfig{}, "z", "test", 22);
  double mag = 0;
  for (std::size_t i = 0; i < zero.lr_flow.size(); ++i) {
    mag += std::hypot(zero.lr_flow.u[i], zero.lr_flow.v[i]);
  }
  CHECK(mag / static_cast<double>(zero.lr_flow.size()) < 1e-3);
  for (std::size_t i = 0; i < zero.hr_flow_gt.size(); ++i) {
    CHECK(zero.hr_flow_gt.u[i] == 0.0f);
    CHECK(zero.hr_flow_gt.v[i] == 0.0f);
  }

  Scene odd = scene;
  odd.frame1 = ImageFrame(63, 63);
  odd.frame2 = ImageFrame(63, 63);
  odd.gt_flow = FlowField(63, 63);
  CHECK_THROWS_AS(make_sample(odd, HornSchunckConfig{}, "x", "train", 0),
                  std::invalid_argument);
}

TEST_CASE("build_dataset: layout, determinism, degenerate split") {
  fs::path dir_a = temp_dir("ds_a");
  fs::path dir_b = temp_dir("ds_b");
  SceneConfig cfg;
  cfg.seed = 7;
  HornSchunckConfig hs;
  Manifest m = build_dataset(2, 1, cfg, hs, dir_a.string());
  REQUIRE(m.entries.size() == 3);
  CHECK(fs::exists(dir_a / "manifest.json"));
  int train_count = 0, test_count = 0;
  for (const ManifestEntry& e : m.entries) {
    fs::path sample_dir = dir_a / e.split / e.id;
    CHECK(fs::exists(sample_dir / "frame1_lr.png"));
    CHECK(fs::exists(sample_dir / "lr_flow.flo"));
    CHECK(fs::exists(sample_dir / "hr_flow_gt.flo"));
    (e.split == "train" ? train_count : test_count) += 1;
    CHECK(e.seed == mix_seed(cfg.seed, static_cast<std::uint64_t>(
                                            &e - m.entries.data())));
  }
  CHECK(train_count == 2);
  CHECK(test_count == 1);

  build_dataset(2, 1, cfg, hs, dir_b.string());
  CHECK(trees_identical(dir_a, dir_b));

  Manifest loaded = load_manifest(dir_a.string());
  CHECK(loaded.config_hash == m.config_hash);
  CHECK(loaded.entries.size() == 3);
  CHECK(loaded.estimator == "horn_schunck");
  std::vector<SampleRecord> train = load_split(dir_a.string(), "train");
  CHECK(train.size() == 2);
  CHECK(train[0].hr_flow_gt.width == 2 * train[0].lr_flow.width);
  CHECK(train[0].hr_flow_gt.height == 2 * train[0].lr_flow.height);

  fs::path dir_c = temp_dir("ds_c");
  Manifest test_only = build_dataset(0, 2, cfg, hs, dir_c.string());
  CHECK(test_only.entries.size() == 2);
  for (const ManifestEntry& e : test_only.entries) CHECK(e.split == "test");
}

TEST_CASE("scene_config_hash: changes iff a config field changes") {
  SceneConfig cfg;
  const std::string base = scene_config_hash(cfg);
  CHECK(scene_config_hash(cfg) == base);

  SceneConfig changed = cfg;
  changed.max_displacement = 6.0;
  CHECK(scene_config_hash(changed) != base);
  changed = cfg;
  changed.width = 32;
  CHECK(scene_config_hash(changed) != base);
  changed = cfg;
  changed.seed = 1;
  CHECK(scene_config_hash(changed) != base);
  changed = cfg;
  changed.texture_octaves = 3;
  CHECK(scene_config_hash(changed) != base);
}

TEST_CASE("mix_seed: distinct indices give distinct per-sample seeds") {
  std::vector<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 64; ++i) seen.push_back(mix_seed(42, i));
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
}
