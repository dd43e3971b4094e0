#include "ofsr/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "ofsr/errors.hpp"

namespace ofsr {

namespace {

using nlohmann::json;

// Read with strict key checking: every key in `j` must be consumed.
class StrictReader {
 public:
  explicit StrictReader(const json& j, std::string context)
      : j_(j), context_(std::move(context)) {
    if (!j.is_object()) {
      throw data_error("config: " + context_ + " must be a JSON object");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (auto it = j_.find(key); it != j_.end()) {
      it->get_to(out);
      seen_.insert(key);
    }
  }

  const json& sub(const char* key) {
    static const json empty = json::object();
    if (auto it = j_.find(key); it != j_.end()) {
      seen_.insert(key);
      return *it;
    }
    return empty;
  }

  ~StrictReader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) {
        throw data_error("config: unknown key \"" + it.key() + "\" in " + context_);
      }
    }
  }

 private:
  const json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

}  // namespace

void to_json(json& j, const SceneConfig& c) {
  j = json{{"width", c.width},
           {"height", c.height},
           {"min_objects", c.min_objects},
           {"max_objects", c.max_objects},
           {"max_displacement", c.max_displacement},
           {"texture_octaves", c.texture_octaves},
           {"seed", c.seed}};
}

void from_json(const json& j, SceneConfig& c) {
  StrictReader r(j, "scene config");
  r.get("width", c.width);
  r.get("height", c.height);
  r.get("min_objects", c.min_objects);
  r.get("max_objects", c.max_objects);
  r.get("max_displacement", c.max_displacement);
  r.get("texture_octaves", c.texture_octaves);
  r.get("seed", c.seed);
}

void to_json(json& j, const HornSchunckConfig& c) {
  j = json{{"alpha", c.alpha},
           {"iterations", c.iterations},
           {"pyramid_levels", c.pyramid_levels}};
}

void from_json(const json& j, HornSchunckConfig& c) {
  StrictReader r(j, "horn_schunck config");
  r.get("alpha", c.alpha);
  r.get("iterations", c.iterations);
  r.get("pyramid_levels", c.pyramid_levels);
}

void to_json(json& j, const OfsrConfig& c) {
  j = json{{"scale", c.scale},
           {"fe_kernel_sizes", c.fe_kernel_sizes},
           {"fe_channels", c.fe_channels},
           {"fusion_channels", c.fusion_channels},
           {"rdb_count", c.rdb_count},
           {"rdb_layers_per_block", c.rdb_layers_per_block},
           {"rdb_growth", c.rdb_growth},
           {"upscale_kernel_sizes", c.upscale_kernel_sizes},
           {"pre_shuffle_channels", c.pre_shuffle_channels}};
}

void from_json(const json& j, OfsrConfig& c) {
  StrictReader r(j, "model config");
  r.get("scale", c.scale);
  r.get("fe_kernel_sizes", c.fe_kernel_sizes);
  r.get("fe_channels", c.fe_channels);
  r.get("fusion_channels", c.fusion_channels);
  r.get("rdb_count", c.rdb_count);
  r.get("rdb_layers_per_block", c.rdb_layers_per_block);
  r.get("rdb_growth", c.rdb_growth);
  r.get("upscale_kernel_sizes", c.upscale_kernel_sizes);
  r.get("pre_shuffle_channels", c.pre_shuffle_channels);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"batch_size", c.batch_size},
           {"base_lr", c.base_lr},
           {"warmup_epochs_before_decay", c.warmup_epochs_before_decay},
           {"decay_every", c.decay_every},
           {"decay_factor", c.decay_factor},
           {"finetune_lr", c.finetune_lr},
           {"epochs", c.epochs},
           {"seed", c.seed},
           {"checkpoint_interval", c.checkpoint_interval}};
}

void from_json(const json& j, TrainConfig& c) {
  StrictReader r(j, "train config");
  r.get("batch_size", c.batch_size);
  r.get("base_lr", c.base_lr);
  r.get("warmup_epochs_before_decay", c.warmup_epochs_before_decay);
  r.get("decay_every", c.decay_every);
  r.get("decay_factor", c.decay_factor);
  r.get("finetune_lr", c.finetune_lr);
  r.get("epochs", c.epochs);
  r.get("seed", c.seed);
  r.get("checkpoint_interval", c.checkpoint_interval);
}

void to_json(json& j, const RunConfig& c) {
  j = json{{"scene", c.scene},
           {"horn_schunck", c.horn_schunck},
           {"model", c.model},
           {"train", c.train},
           {"n_train", c.n_train},
           {"n_test", c.n_test}};
}

void from_json(const json& j, RunConfig& c) {
  StrictReader r(j, "run config");
  if (const json& s = r.sub("scene"); !s.empty()) s.get_to(c.scene);
  if (const json& s = r.sub("horn_schunck"); !s.empty()) s.get_to(c.horn_schunck);
  if (const json& s = r.sub("model"); !s.empty()) s.get_to(c.model);
  if (const json& s = r.sub("train"); !s.empty()) s.get_to(c.train);
  r.get("n_train", c.n_train);
  r.get("n_test", c.n_test);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw data_error("load_run_config: cannot open " + path);
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw data_error("load_run_config: " + path + ": " + e.what());
  }
  return j.get<RunConfig>();
}

void save_run_config(const RunConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw data_error("save_run_config: cannot open " + path + " for writing");
  }
  out << json(config).dump(2) << "\n";
}

std::string json_hash(const json& j) {
  const std::string dump = j.dump();
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace ofsr
