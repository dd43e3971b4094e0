#include "ofsr/model.hpp"

namespace ofsr {

void OfsrConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw std::invalid_argument("OfsrConfig: " + msg);
  };
  if (scale < 1) fail("scale must be >= 1");
  if (fe_kernel_sizes.empty() || upscale_kernel_sizes.size() != 3) {
    fail("expected at least one extraction kernel and exactly three upscale kernels");
  }
  for (int k : fe_kernel_sizes) {
    if (k < 1 || k % 2 == 0) fail("extraction kernel sizes must be odd");
  }
  for (int k : upscale_kernel_sizes) {
    if (k < 1 || k % 2 == 0) fail("upscale kernel sizes must be odd");
  }
  if (fe_channels < 1 || fusion_channels < 1 || rdb_count < 1 ||
      rdb_layers_per_block < 1 || rdb_growth < 1) {
    fail("channel and block counts must be positive");
  }
  if (pre_shuffle_channels % (scale * scale) != 0) {
    fail("pre_shuffle_channels " + std::to_string(pre_shuffle_channels) +
         " not divisible by scale^2 (layer up.conv3 -> pixel shuffle)");
  }
  if (input_channels != 5) fail("input is 3 image + 2 flow channels");
}

std::vector<LayerSpec> layer_plan(const OfsrConfig& c) {
  c.validate();
  std::vector<LayerSpec> plan;
  for (std::size_t i = 0; i < c.fe_kernel_sizes.size(); ++i) {
    plan.push_back({"fe.branch" + std::to_string(i + 1), c.input_channels,
                    c.fe_channels, c.fe_kernel_sizes[i]});
  }
  plan.push_back({"fe.fusion", static_cast<int>(c.fe_kernel_sizes.size()) * c.fe_channels,
                  c.fusion_channels, 3});
  for (int d = 0; d < c.rdb_count; ++d) {
    const std::string prefix = "rdb" + std::to_string(d) + ".";
    for (int l = 0; l < c.rdb_layers_per_block; ++l) {
      plan.push_back({prefix + "layer" + std::to_string(l),
                      c.fusion_channels + l * c.rdb_growth, c.rdb_growth, 3});
    }
    plan.push_back({prefix + "local_fusion",
                    c.fusion_channels + c.rdb_layers_per_block * c.rdb_growth,
                    c.fusion_channels, 1});
  }
  plan.push_back({"global_fusion.reduce", c.rdb_count * c.fusion_channels,
                  c.fusion_channels, 1});
  plan.push_back({"global_fusion.conv", c.fusion_channels, c.fusion_channels, 3});
  plan.push_back({"up.conv1", c.fusion_channels, c.fusion_channels,
                  c.upscale_kernel_sizes[0]});
  plan.push_back({"up.conv2", c.fusion_channels, c.fusion_channels,
                  c.upscale_kernel_sizes[1]});
  plan.push_back({"up.conv3", c.fusion_channels, c.pre_shuffle_channels,
                  c.upscale_kernel_sizes[2]});
  plan.push_back({"up.final_1x1", c.pre_shuffle_channels / (c.scale * c.scale), 2, 1});
  return plan;
}

std::size_t expected_param_count(const OfsrConfig& config) {
  std::size_t n = 0;
  for (const LayerSpec& l : layer_plan(config)) {
    n += static_cast<std::size_t>(l.out_channels) * l.in_channels * l.kernel * l.kernel;
    n += static_cast<std::size_t>(l.out_channels);
  }
  return n;
}

ModelParams<float> init_params(const OfsrConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ModelParams<float> params;
  for (const LayerSpec& spec : layer_plan(config)) {
    Tensor<float> w(Shape{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel});
    const double std_dev =
        std::sqrt(2.0 / (static_cast<double>(spec.in_channels) * spec.kernel * spec.kernel));
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = static_cast<float>(gauss(rng) * std_dev);
    }
    Tensor<float> b(Shape{1, spec.out_channels, 1, 1});
    params.names.push_back(spec.name);
    params.layers.emplace_back(std::move(w), std::move(b));
  }
  return params;
}

}  // namespace ofsr
