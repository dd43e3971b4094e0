#pragma once

// The flow super-resolution network: multi-scale feature extraction, a
// stack of residual dense blocks with global fusion, and a sub-pixel
// convolution upscale head.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ofsr/tape.hpp"

namespace ofsr {

struct OfsrConfig {
  int scale = 2;
  std::vector<int> fe_kernel_sizes = {7, 5, 3};
  int fe_channels = 32;          // per extraction branch
  int fusion_channels = 64;      // trunk width G0
  int rdb_count = 5;             // D
  int rdb_layers_per_block = 3;  // C
  int rdb_growth = 64;           // G
  std::vector<int> upscale_kernel_sizes = {5, 3, 3};
  int pre_shuffle_channels = 8;
  int input_channels = 5;  // 3 image + 2 flow

  void validate() const;
  bool operator==(const OfsrConfig&) const = default;
};

struct LayerSpec {
  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
};

/// Every conv layer of the network, in execution order. The single source
/// of truth for initialization, the forward pass and the parameter count.
std::vector<LayerSpec> layer_plan(const OfsrConfig& config);

/// Closed-form total parameter count (weights + biases) for a config.
std::size_t expected_param_count(const OfsrConfig& config);

template <typename T>
struct ModelParams {
  std::vector<std::string> names;   // layer paths, plan order
  std::vector<ConvLayer<T>> layers;

  const ConvLayer<T>& layer(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return layers[i];
    }
    throw std::invalid_argument("ModelParams: no layer named " + name);
  }
  ConvLayer<T>& layer(const std::string& name) {
    return const_cast<ConvLayer<T>&>(
        static_cast<const ModelParams*>(this)->layer(name));
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const ConvLayer<T>& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  /// Flat tensor list (weight, bias per layer) for the optimizer.
  std::vector<Tensor<T>*> tensors() {
    std::vector<Tensor<T>*> out;
    out.reserve(layers.size() * 2);
    for (ConvLayer<T>& l : layers) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }

  /// Names aligned with tensors(): "<layer>.weight" / "<layer>.bias".
  std::vector<std::string> tensor_names() const {
    std::vector<std::string> out;
    out.reserve(layers.size() * 2);
    for (const std::string& n : names) {
      out.push_back(n + ".weight");
      out.push_back(n + ".bias");
    }
    return out;
  }

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    out.names = names;
    out.layers.reserve(layers.size());
    for (const ConvLayer<T>& l : layers) {
      out.layers.push_back(l.template cast<U>());
    }
    return out;
  }
};

/// Fan-in-scaled Gaussian weights (std = sqrt(2 / (in_channels * k^2))),
/// zero biases, deterministic in the seed.
ModelParams<float> init_params(const OfsrConfig& config, std::uint64_t seed);

/// Parameter tensors registered on a tape, aligned with the plan order.
template <typename T>
struct TapeParams {
  std::vector<typename GradTape<T>::Id> weight_ids;
  std::vector<typename GradTape<T>::Id> bias_ids;
};

template <typename T>
TapeParams<T> register_params(GradTape<T>& tape, const ModelParams<T>& params) {
  TapeParams<T> tp;
  tp.weight_ids.reserve(params.layers.size());
  tp.bias_ids.reserve(params.layers.size());
  for (const ConvLayer<T>& l : params.layers) {
    tp.weight_ids.push_back(tape.leaf(l.weight));
    tp.bias_ids.push_back(tape.leaf(l.bias));
  }
  return tp;
}

/// Full forward pass on a tape. lr_flow is (b, 2, h, w), lr_image
/// (b, 3, h, w); the result is the (b, 2, r*h, r*w) HR flow value.
template <typename T>
typename GradTape<T>::Id forward(GradTape<T>& tape, typename GradTape<T>::Id lr_flow,
                                 typename GradTape<T>::Id lr_image,
                                 const TapeParams<T>& tp, const ModelParams<T>& params,
                                 const OfsrConfig& config) {
  using Id = typename GradTape<T>::Id;
  config.validate();
  std::size_t li = 0;  // walks the plan order used by init_params
  auto conv = [&](Id in) {
    Id out = tape.conv2d(in, tp.weight_ids[li], tp.bias_ids[li]);
    ++li;
    return out;
  };

  const Shape fs = tape.value(lr_flow).shape();
  const Shape is = tape.value(lr_image).shape();
  if (fs.h != is.h || fs.w != is.w || fs.b != is.b) {
    throw std::invalid_argument("forward: flow " + fs.str() + " and image " +
                                is.str() + " do not align");
  }

  Id input = tape.concat({lr_image, lr_flow});

  // Multi-scale feature extraction: parallel branches on the raw input,
  // concatenated and fused.
  std::vector<Id> branches;
  for (std::size_t i = 0; i < config.fe_kernel_sizes.size(); ++i) {
    branches.push_back(tape.relu(conv(input)));
  }
  Id f4 = tape.relu(conv(tape.concat(branches)));

  // Residual dense blocks with dense in-block connectivity, 1x1 local
  // fusion and a local residual; block outputs globally concatenated,
  // fused (1x1 then 3x3) and added back to the trunk.
  std::vector<Id> block_outputs;
  Id trunk = f4;
  for (int d = 0; d < config.rdb_count; ++d) {
    std::vector<Id> cat = {trunk};
    for (int c = 0; c < config.rdb_layers_per_block; ++c) {
      Id in = cat.size() == 1 ? cat[0] : tape.concat(cat);
      cat.push_back(tape.relu(conv(in)));
    }
    Id fused = conv(tape.concat(cat));  // 1x1, no activation
    Id out = tape.add(fused, trunk);
    block_outputs.push_back(out);
    trunk = out;
  }
  Id global = conv(tape.concat(block_outputs));  // 1x1
  global = conv(global);                         // 3x3
  Id fr = tape.add(global, f4);

  // Upscale head: two activated convs, a linear conv down to the
  // pre-shuffle channel count, sub-pixel shuffle, then a linear 1x1.
  Id up = tape.relu(conv(fr));
  up = tape.relu(conv(up));
  up = conv(up);
  up = tape.pixel_shuffle(up, config.scale);
  return conv(up);
}

/// Convenience inference wrapper (fresh tape, value returned by copy).
template <typename T>
Tensor<T> infer(const ModelParams<T>& params, const OfsrConfig& config,
                const Tensor<T>& lr_flow, const Tensor<T>& lr_image) {
  GradTape<T> tape;
  TapeParams<T> tp = register_params(tape, params);
  typename GradTape<T>::Id out =
      forward(tape, tape.leaf(lr_flow), tape.leaf(lr_image), tp, params, config);
  return tape.value(out);
}

}  // namespace ofsr
