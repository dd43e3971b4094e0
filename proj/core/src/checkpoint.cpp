#include "ofsr/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ofsr/config.hpp"
#include "ofsr/errors.hpp"

namespace ofsr {

namespace {

constexpr char kMagic[8] = {'O', 'F', 'S', 'R', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void put_string(std::ostream& out, const std::string& s) {
  put(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_tensor(std::ostream& out, const Tensor<float>& t) {
  const Shape& s = t.shape();
  put(out, static_cast<std::int32_t>(s.b));
  put(out, static_cast<std::int32_t>(s.c));
  put(out, static_cast<std::int32_t>(s.h));
  put(out, static_cast<std::int32_t>(s.w));
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
}

template <typename T>
T get(std::istream& in, const std::string& path, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw data_error("load_checkpoint: " + path + ": truncated at " + what);
  return v;
}

std::string get_string(std::istream& in, const std::string& path, const char* what) {
  const auto n = get<std::uint32_t>(in, path, what);
  if (n > (1u << 24)) throw data_error("load_checkpoint: " + path + ": implausible string length");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw data_error("load_checkpoint: " + path + ": truncated at " + what);
  return s;
}

Tensor<float> get_tensor(std::istream& in, const std::string& path, const char* what) {
  const auto b = get<std::int32_t>(in, path, what);
  const auto c = get<std::int32_t>(in, path, what);
  const auto h = get<std::int32_t>(in, path, what);
  const auto w = get<std::int32_t>(in, path, what);
  if (b < 0 || c < 0 || h < 0 || w < 0 ||
      static_cast<std::int64_t>(b) * c * h * w > (1ll << 28)) {
    throw data_error("load_checkpoint: " + path + ": implausible tensor shape at " + what);
  }
  Tensor<float> t(Shape{b, c, h, w});
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(float)));
  if (!in) throw data_error("load_checkpoint: " + path + ": truncated at " + what);
  return t;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("save_checkpoint: cannot open " + tmp + " for writing");
    out.write(kMagic, sizeof(kMagic));
    put(out, kVersion);
    const std::string cfg = nlohmann::json(ckpt.config).dump();
    put_string(out, cfg);
    put(out, fnv1a(cfg));
    put(out, static_cast<std::int32_t>(ckpt.epoch));
    put(out, static_cast<std::uint32_t>(ckpt.params.layers.size()));
    for (std::size_t i = 0; i < ckpt.params.layers.size(); ++i) {
      put_string(out, ckpt.params.names[i]);
      put_tensor(out, ckpt.params.layers[i].weight);
      put_tensor(out, ckpt.params.layers[i].bias);
    }
    const std::uint8_t has_adam = ckpt.adam.has_value() ? 1 : 0;
    put(out, has_adam);
    if (has_adam) {
      const AdamState<float>& a = *ckpt.adam;
      put(out, a.step_count);
      put(out, a.beta1);
      put(out, a.beta2);
      put(out, a.epsilon);
      for (const auto& slot : a.slots) {
        put_tensor(out, slot.m);
        put_tensor(out, slot.v);
      }
    }
    if (!out) throw data_error("save_checkpoint: short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw data_error("save_checkpoint: cannot rename " + tmp + " to " + path + ": " +
                     ec.message());
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw data_error("load_checkpoint: " + path + ": bad magic");
  }
  const auto version = get<std::uint32_t>(in, path, "version");
  if (version != kVersion) {
    throw data_error("load_checkpoint: " + path + ": unsupported version " +
                     std::to_string(version));
  }
  const std::string cfg_json = get_string(in, path, "config");
  const auto stored_hash = get<std::uint64_t>(in, path, "config hash");
  if (stored_hash != fnv1a(cfg_json)) {
    throw data_error("load_checkpoint: " + path + ": config hash mismatch (corrupt file?)");
  }

  Checkpoint ckpt;
  try {
    nlohmann::json::parse(cfg_json).get_to(ckpt.config);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("load_checkpoint: " + path + ": bad embedded config: " + e.what());
  }
  ckpt.epoch = get<std::int32_t>(in, path, "epoch");

  const auto n_layers = get<std::uint32_t>(in, path, "layer count");
  const std::vector<LayerSpec> plan = layer_plan(ckpt.config);
  if (n_layers != plan.size()) {
    throw data_error("load_checkpoint: " + path + ": layer count " +
                     std::to_string(n_layers) + " does not match config plan of " +
                     std::to_string(plan.size()));
  }
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const std::string name = get_string(in, path, "layer name");
    Tensor<float> w = get_tensor(in, path, name.c_str());
    Tensor<float> b = get_tensor(in, path, name.c_str());
    const LayerSpec& spec = plan[i];
    if (name != spec.name ||
        w.shape() != Shape{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel}) {
      throw data_error("load_checkpoint: " + path + ": layer " + name +
                       " does not match the config plan entry " + spec.name);
    }
    ckpt.params.names.push_back(name);
    ckpt.params.layers.emplace_back(std::move(w), std::move(b));
  }

  const auto has_adam = get<std::uint8_t>(in, path, "optimizer flag");
  if (has_adam) {
    AdamState<float> a;
    a.step_count = get<std::int64_t>(in, path, "adam step");
    a.beta1 = get<float>(in, path, "adam beta1");
    a.beta2 = get<float>(in, path, "adam beta2");
    a.epsilon = get<float>(in, path, "adam epsilon");
    for (std::uint32_t i = 0; i < n_layers; ++i) {
      for (int part = 0; part < 2; ++part) {
        typename AdamState<float>::Slot slot{get_tensor(in, path, "adam m"),
                                             get_tensor(in, path, "adam v")};
        a.slots.push_back(std::move(slot));
      }
    }
    ckpt.adam = std::move(a);
  }
  return ckpt;
}

}  // namespace ofsr
