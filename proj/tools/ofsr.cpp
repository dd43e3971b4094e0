// Command-line front end: dataset generation, training, evaluation,
// inference, visualization, the bilinear baseline and the gradient-check
// self-test.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical
// failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>

#include "ofsr/checkpoint.hpp"
#include "ofsr/config.hpp"
#include "ofsr/dataset.hpp"
#include "ofsr/errors.hpp"
#include "ofsr/flo_io.hpp"
#include "ofsr/gradcheck.hpp"
#include "ofsr/loss.hpp"
#include "ofsr/runtime.hpp"
#include "ofsr/train.hpp"

namespace fs = std::filesystem;
using namespace ofsr;

namespace {

RunConfig resolve_config(const std::string& config_path) {
  if (config_path.empty()) return RunConfig{};
  return load_run_config(config_path);
}

void echo_config(const RunConfig& config, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw data_error("cannot create " + dir + ": " + ec.message());
  save_run_config(config, (fs::path(dir) / "resolved_config.json").string());
}

int cmd_dataset(const RunConfig& config, const std::string& out_dir) {
  echo_config(config, out_dir);
  const Manifest m = build_dataset(config.n_train, config.n_test, config.scene,
                                   config.horn_schunck, out_dir);
  std::cout << "dataset: " << m.entries.size() << " samples under " << out_dir
            << " (config hash " << m.config_hash << ")\n";
  return 0;
}

int cmd_train(const RunConfig& config, const std::string& dataset_dir,
              const std::string& run_dir, const std::string& resume_path,
              bool is_finetune, int finetune_epochs) {
  echo_config(config, run_dir);
  const std::vector<SampleRecord> samples = load_split(dataset_dir, "train");

  ModelParams<float> params;
  AdamState<float> adam;
  int start_epoch = 0;
  OfsrConfig model_config = config.model;
  if (!resume_path.empty()) {
    Checkpoint ckpt = load_checkpoint(resume_path);
    model_config = ckpt.config;
    params = std::move(ckpt.params);
    if (ckpt.adam) {
      adam = std::move(*ckpt.adam);
    } else {
      adam = AdamState<float>::init(params.tensors());
    }
    start_epoch = is_finetune ? 0 : ckpt.epoch;
  } else {
    params = init_params(model_config, config.train.seed);
    adam = AdamState<float>::init(params.tensors());
  }

  std::vector<EpochRecord> history;
  TrainOptions options;
  options.start_epoch = start_epoch;
  options.checkpoint_dir = run_dir;
  options.on_epoch = [&](const EpochRecord& r) {
    std::printf("epoch %4d  lr %.3e  train_loss %.6f\n", r.epoch, r.lr, r.train_loss);
    std::fflush(stdout);
    write_history(history, (fs::path(run_dir) / "history.jsonl").string());
  };
  if (is_finetune) {
    finetune(params, adam, samples, model_config, config.train, finetune_epochs, history);
    Checkpoint ckpt{model_config, params, adam, finetune_epochs};
    save_checkpoint(ckpt, (fs::path(run_dir) / "checkpoint.bin").string());
  } else {
    train(params, adam, samples, model_config, config.train, options, history);
  }
  write_history(history, (fs::path(run_dir) / "history.jsonl").string());
  std::cout << "checkpoint: " << (fs::path(run_dir) / "checkpoint.bin").string() << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_dir,
             const std::string& split, const std::string& out_path) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const std::vector<SampleRecord> samples = load_split(dataset_dir, split);
  if (samples.empty()) {
    throw data_error("eval: no samples in split \"" + split + "\" of " + dataset_dir);
  }
  const EvalTable table = evaluate(ckpt.params, ckpt.config, samples);
  if (!out_path.empty()) write_eval_table(table, out_path);

  std::printf("Average endpoint errors (in pixels), split %s, %zu samples\n",
              split.c_str(), table.rows.size());
  std::printf("%-24s %10s\n", "method", "mean EPE");
  std::printf("%-24s %10.3f\n", "bilinear x2 baseline", table.mean_baseline_epe);
  std::printf("%-24s %10.3f\n", "ofsr", table.mean_model_epe);
  return 0;
}

int cmd_infer(const std::string& checkpoint_path, const std::string& flow_path,
              const std::string& image_path, const std::string& out_path) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const FlowField lr_flow = read_flo(flow_path);
  const ImageFrame lr_image = read_png(image_path);
  if (lr_flow.width != lr_image.width || lr_flow.height != lr_image.height) {
    throw data_error("infer: flow " + std::to_string(lr_flow.width) + "x" +
                     std::to_string(lr_flow.height) + " and image " +
                     std::to_string(lr_image.width) + "x" +
                     std::to_string(lr_image.height) + " do not align");
  }
  const Tensor<float> hr = infer(ckpt.params, ckpt.config, flow_to_tensor(lr_flow),
                                 image_to_tensor(lr_image));
  if (!hr.all_finite()) {
    throw numeric_error("infer: non-finite values in network output");
  }
  write_flo(flow_from_tensor(hr), out_path);
  return 0;
}

int cmd_viz(const std::string& flow_path, const std::string& out_path,
            std::optional<double> max_mag) {
  write_png(flow_to_color(read_flo(flow_path), max_mag), out_path);
  return 0;
}

int cmd_baseline(const std::string& flow_path, double scale, const std::string& out_path) {
  write_flo(bilinear_resize_flow(read_flo(flow_path), scale), out_path);
  return 0;
}

// Finite-difference self-checks over every differentiable op plus the full
// network with EPE loss, in double precision.
int cmd_gradcheck(std::uint64_t seed) {
  int failures = 0;
  auto report = [&](const std::string& name, double max_rel, double tol) {
    const bool ok = max_rel < tol;
    std::printf("%-28s max rel err %.3e  (tol %.0e)  %s\n", name.c_str(), max_rel,
                tol, ok ? "PASS" : "FAIL");
    if (!ok) ++failures;
  };
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto rand_tensor = [&](Shape s) {
    Tensor<double> t(s);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = gauss(rng);
    return t;
  };
  // Relative error against finite differences, with a floor on the scale so
  // near-zero entries compare absolutely.
  auto max_rel_err = [](const Tensor<double>& got, const Tensor<double>& want) {
    double m = 0;
    for (std::size_t i = 0; i < got.size(); ++i) {
      m = std::max(m, std::abs(got[i] - want[i]) /
                          std::max(std::abs(want[i]), 1e-3));
    }
    return m;
  };
  // Scalar readout that exercises all elements with distinct weights.
  auto weighted_sum = [](const Tensor<double>& t) {
    double s = 0;
    for (std::size_t i = 0; i < t.size(); ++i) s += std::sin(0.1 * (i + 1)) * t[i];
    return s;
  };
  auto seed_cotangent = [](const Tensor<double>& t) {
    Tensor<double> g(t.shape());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::sin(0.1 * (i + 1));
    return g;
  };

  {  // conv2d: input, weight and bias gradients
    Tensor<double> x = rand_tensor({1, 2, 4, 4});
    ConvLayer<double> layer(rand_tensor({2, 2, 3, 3}), rand_tensor({1, 2, 1, 1}));
    const Tensor<double> cot = seed_cotangent(conv2d_forward(x, layer));
    ConvGrads<double> g = conv2d_backward(cot, x, layer);
    auto loss_x = [&](const Tensor<double>& t) {
      Tensor<double> out = conv2d_forward(t, layer);
      double s = 0;
      for (std::size_t i = 0; i < out.size(); ++i) s += cot[i] * out[i];
      return s;
    };
    report("conv2d/input", max_rel_err(g.input, finite_diff_grad(loss_x, x)), 1e-4);
    auto loss_w = [&](const Tensor<double>& w) {
      ConvLayer<double> l(w, layer.bias);
      Tensor<double> out = conv2d_forward(x, l);
      double s = 0;
      for (std::size_t i = 0; i < out.size(); ++i) s += cot[i] * out[i];
      return s;
    };
    report("conv2d/weight", max_rel_err(g.weight, finite_diff_grad(loss_w, layer.weight)), 1e-4);
    auto loss_b = [&](const Tensor<double>& b) {
      ConvLayer<double> l(layer.weight, b);
      Tensor<double> out = conv2d_forward(x, l);
      double s = 0;
      for (std::size_t i = 0; i < out.size(); ++i) s += cot[i] * out[i];
      return s;
    };
    report("conv2d/bias", max_rel_err(g.bias, finite_diff_grad(loss_b, layer.bias)), 1e-4);
  }

  {  // relu, away from the kink
    Tensor<double> x = rand_tensor({1, 3, 4, 4});
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (std::abs(x[i]) < 1e-2) x[i] = 0.5;
    }
    const Tensor<double> cot = seed_cotangent(x);
    Tensor<double> g = relu_backward(cot, x);
    auto loss = [&](const Tensor<double>& t) {
      Tensor<double> out = relu_forward(t);
      double s = 0;
      for (std::size_t i = 0; i < out.size(); ++i) s += cot[i] * out[i];
      return s;
    };
    report("relu", max_rel_err(g, finite_diff_grad(loss, x)), 1e-4);
  }

  {  // pixel shuffle + add through a tape
    GradTape<double> tape;
    Tensor<double> x = rand_tensor({1, 8, 3, 3});
    Tensor<double> y = rand_tensor({1, 2, 6, 6});
    auto xid = tape.leaf(x), yid = tape.leaf(y);
    auto out = tape.add(tape.pixel_shuffle(xid, 2), yid);
    auto loss_id = tape.epe_loss(out, Tensor<double>(Shape{1, 2, 6, 6}, 0.5));
    tape.backward(loss_id);
    auto loss_x = [&](const Tensor<double>& t) {
      GradTape<double> tp;
      auto o = tp.add(tp.pixel_shuffle(tp.leaf(t), 2), tp.leaf(y));
      return tp.value(tp.epe_loss(o, Tensor<double>(Shape{1, 2, 6, 6}, 0.5)))[0];
    };
    report("pixel_shuffle+add+epe", max_rel_err(tape.grad(xid), finite_diff_grad(loss_x, x)),
           1e-4);
  }

  {  // concat through a tape
    GradTape<double> tape;
    Tensor<double> a = rand_tensor({1, 2, 3, 3});
    Tensor<double> b = rand_tensor({1, 3, 3, 3});
    ConvLayer<double> proj(rand_tensor({2, 5, 1, 1}), rand_tensor({1, 2, 1, 1}));
    auto aid = tape.leaf(a), bid = tape.leaf(b);
    auto cat = tape.concat({aid, bid});
    auto out = tape.conv2d(cat, tape.leaf(proj.weight), tape.leaf(proj.bias));
    auto loss_id = tape.epe_loss(out, Tensor<double>(Shape{1, 2, 3, 3}, 0.1));
    tape.backward(loss_id);
    auto loss_a = [&](const Tensor<double>& t) {
      GradTape<double> tp;
      auto o = tp.conv2d(tp.concat({tp.leaf(t), tp.leaf(b)}), tp.leaf(proj.weight),
                         tp.leaf(proj.bias));
      return tp.value(tp.epe_loss(o, Tensor<double>(Shape{1, 2, 3, 3}, 0.1)))[0];
    };
    report("concat", max_rel_err(tape.grad(aid), finite_diff_grad(loss_a, a)), 1e-4);
  }

  {  // full network + EPE loss, inputs and a parameter sample
    OfsrConfig config;
    ModelParams<double> params = init_params(config, seed).cast<double>();
    Tensor<double> flow = rand_tensor({1, 2, 8, 8});
    Tensor<double> image = rand_tensor({1, 3, 8, 8});
    Tensor<double> gt = rand_tensor({1, 2, 16, 16});

    GradTape<double> tape;
    TapeParams<double> tp = register_params(tape, params);
    auto fid = tape.leaf(flow), iid = tape.leaf(image);
    auto out = forward(tape, fid, iid, tp, params, config);
    auto loss_id = tape.epe_loss(out, gt);
    tape.backward(loss_id);

    auto net_loss_flow = [&](const Tensor<double>& t) {
      GradTape<double> tp2;
      TapeParams<double> p2 = register_params(tp2, params);
      auto o = forward(tp2, tp2.leaf(t), tp2.leaf(image), p2, params, config);
      return tp2.value(tp2.epe_loss(o, gt))[0];
    };
    report("network/input flow", max_rel_err(tape.grad(fid), finite_diff_grad(net_loss_flow, flow)),
           1e-4);
    auto net_loss_image = [&](const Tensor<double>& t) {
      GradTape<double> tp2;
      TapeParams<double> p2 = register_params(tp2, params);
      auto o = forward(tp2, tp2.leaf(flow), tp2.leaf(t), p2, params, config);
      return tp2.value(tp2.epe_loss(o, gt))[0];
    };
    report("network/input image",
           max_rel_err(tape.grad(iid), finite_diff_grad(net_loss_image, image)), 1e-4);

    // Sampled parameter coordinates across every layer.
    double worst = 0;
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
      Tensor<double>& w = params.layers[li].weight;
      std::vector<std::size_t> idx;
      for (int k = 0; k < 8; ++k) idx.push_back(rng() % w.size());
      std::vector<double> fd;
      auto loss_w = [&](const Tensor<double>&) {
        GradTape<double> tp2;
        TapeParams<double> p2 = register_params(tp2, params);
        auto o = forward(tp2, tp2.leaf(flow), tp2.leaf(image), p2, params, config);
        return tp2.value(tp2.epe_loss(o, gt))[0];
      };
      finite_diff_grad_at(loss_w, w, idx, 1e-6, fd);
      const Tensor<double>& g = tape.grad(tp.weight_ids[li]);
      for (std::size_t k = 0; k < idx.size(); ++k) {
        worst = std::max(worst, std::abs(g[idx[k]] - fd[k]) /
                                    std::max(std::abs(fd[k]), 1e-3));
      }
    }
    report("network/parameters", worst, 1e-4);
  }

  std::printf("gradcheck: %s\n", failures == 0 ? "all checks passed" : "FAILURES");
  return failures == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  init_runtime(argv);

  CLI::App app{"Optical-flow super-resolution toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, dataset_dir, run_dir, resume_path;
  std::string checkpoint_path, split = "test", flow_path, image_path, out_path;
  double scale = 2.0;
  std::uint64_t gradcheck_seed = 7;
  int finetune_epochs = 100;
  std::optional<int> n_train_flag, n_test_flag, epochs_flag;
  std::optional<std::uint64_t> seed_flag;
  std::optional<double> max_mag;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run config file");
  };

  CLI::App* dataset = app.add_subcommand("dataset", "Generate a synthetic dataset");
  add_config(dataset);
  dataset->add_option("--out", out_dir, "Output dataset directory")->required();
  dataset->add_option("--n-train", n_train_flag, "Training sample count");
  dataset->add_option("--n-test", n_test_flag, "Test sample count");
  dataset->add_option("--seed", seed_flag, "Scene seed");

  CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
  add_config(train_cmd);
  train_cmd->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  train_cmd->add_option("--run-dir", run_dir, "Run output directory")->required();
  train_cmd->add_option("--resume", resume_path, "Checkpoint to resume from");
  train_cmd->add_option("--epochs", epochs_flag, "Epoch count");
  train_cmd->add_option("--seed", seed_flag, "Training seed");

  CLI::App* finetune_cmd = app.add_subcommand("finetune", "Fine-tune at a flat low learning rate");
  add_config(finetune_cmd);
  finetune_cmd->add_option("--checkpoint", checkpoint_path, "Starting checkpoint")->required();
  finetune_cmd->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  finetune_cmd->add_option("--run-dir", run_dir, "Run output directory")->required();
  finetune_cmd->add_option("--epochs", finetune_epochs, "Fine-tune epoch count");

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint against the baseline");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  eval_cmd->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  eval_cmd->add_option("--split", split, "Split to evaluate (train|test)");
  eval_cmd->add_option("--out", out_path, "Write the table as JSON lines");

  CLI::App* infer_cmd = app.add_subcommand("infer", "Single-sample super-resolution");
  infer_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  infer_cmd->add_option("--flow", flow_path, "LR flow (.flo)")->required();
  infer_cmd->add_option("--image", image_path, "LR first frame (.png)")->required();
  infer_cmd->add_option("--out", out_path, "Output HR flow (.flo)")->required();

  CLI::App* viz_cmd = app.add_subcommand("viz", "Color-code a flow field");
  viz_cmd->add_option("--flow", flow_path, "Flow file (.flo)")->required();
  viz_cmd->add_option("--out", out_path, "Output PNG")->required();
  viz_cmd->add_option("--max-mag", max_mag, "Fixed normalization magnitude");

  CLI::App* baseline_cmd = app.add_subcommand("baseline", "Bilinear flow upsampling");
  baseline_cmd->add_option("--flow", flow_path, "Input flow (.flo)")->required();
  baseline_cmd->add_option("--scale", scale, "Spatial scale factor");
  baseline_cmd->add_option("--out", out_path, "Output flow (.flo)")->required();

  CLI::App* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference self-checks");
  gradcheck_cmd->add_option("--seed", gradcheck_seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    RunConfig config = resolve_config(config_path);
    if (n_train_flag) config.n_train = *n_train_flag;
    if (n_test_flag) config.n_test = *n_test_flag;
    if (epochs_flag) config.train.epochs = *epochs_flag;
    if (seed_flag) {
      config.scene.seed = *seed_flag;
      config.train.seed = *seed_flag;
    }

    if (dataset->parsed()) return cmd_dataset(config, out_dir);
    if (train_cmd->parsed()) {
      return cmd_train(config, dataset_dir, run_dir, resume_path, false, 0);
    }
    if (finetune_cmd->parsed()) {
      return cmd_train(config, dataset_dir, run_dir, checkpoint_path, true,
                       finetune_epochs);
    }
    if (eval_cmd->parsed()) return cmd_eval(checkpoint_path, dataset_dir, split, out_path);
    if (infer_cmd->parsed()) return cmd_infer(checkpoint_path, flow_path, image_path, out_path);
    if (viz_cmd->parsed()) return cmd_viz(flow_path, out_path, max_mag);
    if (baseline_cmd->parsed()) return cmd_baseline(flow_path, scale, out_path);
    if (gradcheck_cmd->parsed()) return cmd_gradcheck(gradcheck_seed);
  } catch (const numeric_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
