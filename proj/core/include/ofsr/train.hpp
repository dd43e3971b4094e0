#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ofsr/adam.hpp"
#include "ofsr/dataset.hpp"
#include "ofsr/model.hpp"

namespace ofsr {

struct TrainConfig {
  int batch_size = 4;
  double base_lr = 1e-4;
  int warmup_epochs_before_decay = 100;  // epochs at base_lr before halving
  int decay_every = 50;
  double decay_factor = 0.5;
  double finetune_lr = 1e-6;
  int epochs = 300;
  std::uint64_t seed = 0;
  int checkpoint_interval = 50;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Step schedule: base_lr until the warmup boundary, then multiplied by
/// decay_factor at the boundary and again every decay_every epochs.
double lr_at_epoch(int epoch, const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
};

struct EvalRow {
  std::string id;
  double model_epe = 0;
  double baseline_epe = 0;
};

struct EvalTable {
  std::vector<EvalRow> rows;
  double mean_model_epe = 0;
  double mean_baseline_epe = 0;
};

struct TrainOptions {
  int start_epoch = 0;
  bool flat_finetune_lr = false;    // constant finetune_lr instead of the schedule
  std::string checkpoint_dir;      // empty: no checkpoints
  std::function<void(const EpochRecord&)> on_epoch;  // optional observer
};

/// Seeded-shuffle mini-batch training with EPE loss and Adam. Appends one
/// record per epoch to `history`. Aborts with numeric_error on a non-finite
/// loss or gradient, naming the offending layer.
void train(ModelParams<float>& params, AdamState<float>& adam,
           const std::vector<SampleRecord>& samples, const OfsrConfig& model_config,
           const TrainConfig& config, const TrainOptions& options,
           std::vector<EpochRecord>& history);

/// Same loop with a flat learning rate of config.finetune_lr.
void finetune(ModelParams<float>& params, AdamState<float>& adam,
              const std::vector<SampleRecord>& samples, const OfsrConfig& model_config,
              const TrainConfig& config, int epochs,
              std::vector<EpochRecord>& history);

/// Per-sample EPE of the model next to the bilinear x2 baseline on the
/// same LR flows.
EvalTable evaluate(const ModelParams<float>& params, const OfsrConfig& model_config,
                   const std::vector<SampleRecord>& samples);

// Line-delimited JSON serialization for history and evaluation tables.
void write_history(const std::vector<EpochRecord>& history, const std::string& path);
void write_eval_table(const EvalTable& table, const std::string& path);
std::string eval_table_to_string(const EvalTable& table);
EvalTable parse_eval_table(const std::string& text);

}  // namespace ofsr
