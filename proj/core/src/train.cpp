#include "ofsr/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ofsr/checkpoint.hpp"
#include "ofsr/errors.hpp"

namespace ofsr {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  return x ^ (x >> 31);
}

// Stack per-sample tensors into one batch tensor.
struct Batch {
  Tensor<float> lr_flow;
  Tensor<float> lr_image;
  Tensor<float> hr_gt;
};

Batch make_batch(const std::vector<SampleRecord>& samples,
                 const std::vector<std::size_t>& order, std::size_t begin,
                 std::size_t count) {
  const SampleRecord& first = samples[order[begin]];
  const int lh = first.lr_flow.height, lw = first.lr_flow.width;
  const int hh = first.hr_flow_gt.height, hw = first.hr_flow_gt.width;
  Batch b{Tensor<float>(Shape{static_cast<int>(count), 2, lh, lw}),
          Tensor<float>(Shape{static_cast<int>(count), 3, lh, lw}),
          Tensor<float>(Shape{static_cast<int>(count), 2, hh, hw})};
  for (std::size_t i = 0; i < count; ++i) {
    const SampleRecord& s = samples[order[begin + i]];
    if (s.lr_flow.width != lw || s.lr_flow.height != lh ||
        s.lr_image.width != lw || s.lr_image.height != lh ||
        s.hr_flow_gt.width != hw || s.hr_flow_gt.height != hh) {
      throw std::invalid_argument("train: sample " + s.id +
                                  " dimensions differ from the rest of the batch");
    }
    const std::size_t lplane = static_cast<std::size_t>(lh) * lw;
    const std::size_t hplane = static_cast<std::size_t>(hh) * hw;
    std::copy(s.lr_flow.u.begin(), s.lr_flow.u.end(), b.lr_flow.data() + i * 2 * lplane);
    std::copy(s.lr_flow.v.begin(), s.lr_flow.v.end(),
              b.lr_flow.data() + i * 2 * lplane + lplane);
    std::copy(s.lr_image.data.begin(), s.lr_image.data.end(),
              b.lr_image.data() + i * 3 * lplane);
    std::copy(s.hr_flow_gt.u.begin(), s.hr_flow_gt.u.end(), b.hr_gt.data() + i * 2 * hplane);
    std::copy(s.hr_flow_gt.v.begin(), s.hr_flow_gt.v.end(),
              b.hr_gt.data() + i * 2 * hplane + hplane);
  }
  return b;
}

void run_epochs(ModelParams<float>& params, AdamState<float>& adam,
                const std::vector<SampleRecord>& samples,
                const OfsrConfig& model_config, const TrainConfig& config,
                const TrainOptions& options, int epochs, bool flat_lr,
                std::vector<EpochRecord>& history) {
  config.validate();
  model_config.validate();
  if (samples.empty()) {
    throw std::invalid_argument("train: dataset is empty");
  }
  const std::vector<std::string> tensor_names = params.tensor_names();

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = options.start_epoch; epoch < epochs; ++epoch) {
    const double lr = flat_lr ? config.finetune_lr : lr_at_epoch(epoch, config);
    // Fresh identity order shuffled with a per-epoch seed: the order of any
    // epoch depends only on (run seed, epoch), so a resumed run replays
    // exactly the order of the uninterrupted one.
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix(config.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count =
          std::min(static_cast<std::size_t>(config.batch_size), order.size() - begin);
      Batch batch = make_batch(samples, order, begin, count);

      GradTape<float> tape;
      TapeParams<float> tp = register_params(tape, params);
      const auto flow_id = tape.leaf(std::move(batch.lr_flow));
      const auto image_id = tape.leaf(std::move(batch.lr_image));
      const auto out = forward(tape, flow_id, image_id, tp, params, model_config);
      const auto loss_id = tape.epe_loss(out, std::move(batch.hr_gt));
      const float loss = tape.value(loss_id)[0];
      if (!std::isfinite(loss)) {
        throw numeric_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(batches));
      }
      tape.backward(loss_id);

      std::vector<Tensor<float>*> tensors = params.tensors();
      std::vector<const Tensor<float>*> grads;
      grads.reserve(tensors.size());
      for (std::size_t i = 0; i < params.layers.size(); ++i) {
        grads.push_back(&tape.grad(tp.weight_ids[i]));
        grads.push_back(&tape.grad(tp.bias_ids[i]));
      }
      try {
        adam_step(tensors, grads, adam, static_cast<float>(lr), tensor_names);
      } catch (const numeric_error& e) {
        throw numeric_error(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(batches));
      }
      loss_sum += loss * static_cast<double>(count);
      ++batches;
    }

    EpochRecord rec{epoch, lr, loss_sum / static_cast<double>(order.size())};
    history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);

    if (!options.checkpoint_dir.empty() && config.checkpoint_interval > 0 &&
        ((epoch + 1) % config.checkpoint_interval == 0 || epoch + 1 == epochs)) {
      Checkpoint ckpt{model_config, params, adam, epoch + 1};
      save_checkpoint(ckpt, (std::filesystem::path(options.checkpoint_dir) /
                             "checkpoint.bin").string());
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(base_lr > 0) || !(finetune_lr > 0) || !(decay_factor > 0)) {
    throw std::invalid_argument("TrainConfig: all rates must be positive");
  }
  if (warmup_epochs_before_decay < 0 || decay_every < 1 || epochs < 0) {
    throw std::invalid_argument("TrainConfig: bad schedule parameters");
  }
}

double lr_at_epoch(int epoch, const TrainConfig& config) {
  if (epoch < 0) throw std::invalid_argument("lr_at_epoch: epoch must be >= 0");
  if (epoch < config.warmup_epochs_before_decay) return config.base_lr;
  const int halvings =
      1 + (epoch - config.warmup_epochs_before_decay) / config.decay_every;
  return config.base_lr * std::pow(config.decay_factor, halvings);
}

void train(ModelParams<float>& params, AdamState<float>& adam,
           const std::vector<SampleRecord>& samples, const OfsrConfig& model_config,
           const TrainConfig& config, const TrainOptions& options,
           std::vector<EpochRecord>& history) {
  run_epochs(params, adam, samples, model_config, config, options, config.epochs,
             /*flat_lr=*/false, history);
}

void finetune(ModelParams<float>& params, AdamState<float>& adam,
              const std::vector<SampleRecord>& samples, const OfsrConfig& model_config,
              const TrainConfig& config, int epochs,
              std::vector<EpochRecord>& history) {
  TrainOptions options;
  run_epochs(params, adam, samples, model_config, config, options, epochs,
             /*flat_lr=*/true, history);
}

EvalTable evaluate(const ModelParams<float>& params, const OfsrConfig& model_config,
                   const std::vector<SampleRecord>& samples) {
  model_config.validate();
  if (params.param_count() != expected_param_count(model_config)) {
    throw std::invalid_argument(
        "evaluate: parameter count " + std::to_string(params.param_count()) +
        " does not match the config's expected " +
        std::to_string(expected_param_count(model_config)));
  }
  EvalTable table;
  double model_sum = 0.0, baseline_sum = 0.0;
  for (const SampleRecord& s : samples) {
    const Tensor<float> hr = infer(params, model_config, flow_to_tensor(s.lr_flow),
                                   image_to_tensor(s.lr_image));
    const FlowField pred = flow_from_tensor(hr);
    const double model_epe = epe(pred, s.hr_flow_gt).mean_epe;
    const double baseline_epe =
        epe(bilinear_resize_flow(s.lr_flow, model_config.scale), s.hr_flow_gt).mean_epe;
    table.rows.push_back({s.id, model_epe, baseline_epe});
    model_sum += model_epe;
    baseline_sum += baseline_epe;
  }
  if (!samples.empty()) {
    table.mean_model_epe = model_sum / static_cast<double>(samples.size());
    table.mean_baseline_epe = baseline_sum / static_cast<double>(samples.size());
  }
  return table;
}

void write_history(const std::vector<EpochRecord>& history, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("write_history: cannot open " + path + " for writing");
  for (const EpochRecord& r : history) {
    out << nlohmann::json{{"epoch", r.epoch}, {"lr", r.lr}, {"train_loss", r.train_loss}}
               .dump()
        << "\n";
  }
}

std::string eval_table_to_string(const EvalTable& table) {
  std::ostringstream out;
  for (const EvalRow& r : table.rows) {
    out << nlohmann::json{{"id", r.id},
                          {"model_epe", r.model_epe},
                          {"baseline_epe", r.baseline_epe}}
               .dump()
        << "\n";
  }
  out << nlohmann::json{{"mean_model_epe", table.mean_model_epe},
                        {"mean_baseline_epe", table.mean_baseline_epe},
                        {"n", table.rows.size()}}
             .dump()
      << "\n";
  return out.str();
}

void write_eval_table(const EvalTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("write_eval_table: cannot open " + path + " for writing");
  out << eval_table_to_string(table);
}

EvalTable parse_eval_table(const std::string& text) {
  EvalTable table;
  std::istringstream in(text);
  std::string line;
  bool saw_summary = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw data_error(std::string("parse_eval_table: bad line: ") + e.what());
    }
    if (j.contains("id")) {
      table.rows.push_back({j.at("id").get<std::string>(), j.at("model_epe").get<double>(),
                            j.at("baseline_epe").get<double>()});
    } else {
      table.mean_model_epe = j.at("mean_model_epe").get<double>();
      table.mean_baseline_epe = j.at("mean_baseline_epe").get<double>();
      saw_summary = true;
    }
  }
  if (!saw_summary) {
    throw data_error("parse_eval_table: missing summary line");
  }
  return table;
}

}  // namespace ofsr
