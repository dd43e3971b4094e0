#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ofsr/flow.hpp"
#include "ofsr/image.hpp"

namespace ofsr {

struct SceneConfig {
  int width = 64;
  int height = 64;
  int min_objects = 2;
  int max_objects = 5;
  double max_displacement = 8.0;
  int texture_octaves = 4;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SceneConfig&) const = default;
};

struct HornSchunckConfig {
  double alpha = 15.0;
  int iterations = 200;
  int pyramid_levels = 2;

  void validate() const;
  bool operator==(const HornSchunckConfig&) const = default;
};

/// One moving element of a synthetic scene. Motion is the affine map
/// p -> R(theta) * scale * (p - center) + center + t.
struct SceneObject {
  enum class Kind { ellipse, polygon };
  Kind kind = Kind::ellipse;
  double cx = 0, cy = 0;
  double rx = 1, ry = 1, tilt = 0;                 // ellipse
  std::vector<std::array<double, 2>> vertices;     // convex polygon
  double theta = 0, scale = 1, tx = 0, ty = 0;     // motion
  std::uint32_t texture_seed = 0;
  std::array<float, 3> tint = {1, 1, 1};

  bool contains(double x, double y) const;
  /// Displacement of point (x, y) under the object's motion.
  std::array<double, 2> displacement(double x, double y) const;
};

struct SceneSpec {
  int width = 0;
  int height = 0;
  std::uint32_t background_seed = 0;
  int texture_octaves = 4;
  double bg_tx = 0, bg_ty = 0;
  std::vector<SceneObject> objects;  // later entries render on top
};

struct Scene {
  ImageFrame frame1;
  ImageFrame frame2;
  FlowField gt_flow;
};

/// Render a fully specified scene: frame1 from the textures, gt_flow as the
/// exact per-point displacement (topmost object wins), frame2 by inverse
/// bilinear warping of frame1 through gt_flow.
Scene render_scene(const SceneSpec& spec);

/// Sample a random scene spec from the config and render it. Fully
/// determined by (config, seed).
Scene generate_scene(const SceneConfig& config, std::uint64_t seed);

/// Coarse-to-fine Horn-Schunck on the luminance of the two frames.
FlowField horn_schunck(const ImageFrame& frame1, const ImageFrame& frame2,
                       const HornSchunckConfig& config);

struct SampleRecord {
  std::string id;
  std::string split;  // "train" | "test"
  std::uint64_t seed = 0;
  FlowField lr_flow;      // estimated on the half-resolution frames
  ImageFrame lr_image;    // bicubic half of frame1
  FlowField hr_flow_gt;   // exact generator flow
};

/// Downsample the frames, run the flow estimator on them, and keep the
/// exact HR flow as ground truth. H and W must be even.
SampleRecord make_sample(const Scene& scene, const HornSchunckConfig& hs,
                         const std::string& id, const std::string& split,
                         std::uint64_t seed);

struct ManifestEntry {
  std::string id;
  std::string split;
  std::uint64_t seed = 0;
};

struct Manifest {
  std::string config_hash;
  std::string estimator = "horn_schunck";
  SceneConfig scene;
  HornSchunckConfig horn_schunck;
  std::vector<ManifestEntry> entries;
};

/// Stable 64-bit hash of the scene configuration (hex string).
std::string scene_config_hash(const SceneConfig& config);

/// Generate and persist n_train + n_test samples under
/// out_dir/<split>/<id>/{frame1_lr.png, lr_flow.flo, hr_flow_gt.flo} plus
/// out_dir/manifest.json. Per-sample seed = mix(config seed, index), so the
/// result is byte-identical across re-runs.
Manifest build_dataset(int n_train, int n_test, const SceneConfig& config,
                       const HornSchunckConfig& hs, const std::string& out_dir);

Manifest load_manifest(const std::string& dataset_dir);
SampleRecord load_sample(const std::string& dataset_dir, const ManifestEntry& entry);
std::vector<SampleRecord> load_split(const std::string& dataset_dir,
                                     const std::string& split);

/// splitmix64-style mixer used for per-sample seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace ofsr
