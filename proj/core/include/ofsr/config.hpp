#pragma once

// JSON (de)serialization for every config struct. Deserialization is
// strict: unknown keys are rejected so typos cannot silently fall back to
// defaults.

#include <json.hpp>

#include <string>

#include "ofsr/dataset.hpp"
#include "ofsr/model.hpp"
#include "ofsr/train.hpp"

namespace ofsr {

void to_json(nlohmann::json& j, const SceneConfig& c);
void from_json(const nlohmann::json& j, SceneConfig& c);

void to_json(nlohmann::json& j, const HornSchunckConfig& c);
void from_json(const nlohmann::json& j, HornSchunckConfig& c);

void to_json(nlohmann::json& j, const OfsrConfig& c);
void from_json(const nlohmann::json& j, OfsrConfig& c);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Union of all component configs, as read from a run config file.
struct RunConfig {
  SceneConfig scene;
  HornSchunckConfig horn_schunck;
  OfsrConfig model;
  TrainConfig train;
  int n_train = 200;
  int n_test = 40;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& config, const std::string& path);

/// Stable FNV-1a hash of a canonical JSON dump, as a hex string.
std::string json_hash(const nlohmann::json& j);

}  // namespace ofsr
