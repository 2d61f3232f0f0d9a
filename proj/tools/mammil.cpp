#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mammil/dataset.hpp"
#include "mammil/diagnostics.hpp"
#include "mammil/error.hpp"
#include "mammil/synth.hpp"
#include "mammil/train.hpp"

namespace fs = std::filesystem;
using namespace mammil;

namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config '" + path.string() + "': " + e.what());
  }
}

int run_synth(const SynthOptions& options, const fs::path& out) {
  const auto manifest = synth_generate(options, out);
  std::printf("wrote %zu bags to %s\n", manifest.bags.size(), out.string().c_str());
  return 0;
}

int run_train(const fs::path& config_path, const fs::path& manifest_path, const fs::path& out, bool quiet) {
  const nlohmann::json cfg = read_json(config_path);
  const auto manifest = DatasetManifest::load(manifest_path);
  nlohmann::json model_json = cfg.value("model", nlohmann::json::object());
  if (!model_json.contains("input_dim")) model_json["input_dim"] = manifest.dim;
  const ModelConfig model_cfg = model_config_from_json(model_json);
  if (model_cfg.input_dim != manifest.dim) {
    throw ValidationError("model input_dim " + std::to_string(model_cfg.input_dim) + " does not match dataset dim " +
                          std::to_string(manifest.dim));
  }
  const TrainConfig train_cfg = train_config_from_json(cfg.value("train", nlohmann::json::object()));

  const auto train_bags = manifest.load_split(Split::train);
  const auto val_bags = manifest.load_split(Split::val);
  Model model(model_cfg);
  const auto history = train(model, train_bags, val_bags, train_cfg, [&](const EpochRecord& r) {
    if (quiet) return;
    std::printf("epoch %zu train_loss=%.6f val: %s%s\n", r.epoch, r.train_loss, r.val.to_text().c_str(),
                r.improved ? " *" : "");
    std::fflush(stdout);
  });

  fs::create_directories(out);
  save_checkpoint(out / "model.mmck", model);
  nlohmann::json hist;
  hist["best_epoch"] = history.best_epoch;
  hist["best_monitor"] = history.best_monitor;
  hist["stopped_early"] = history.stopped_early;
  for (const auto& r : history.epochs) {
    nlohmann::json e{{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_loss", r.val.loss},
                     {"monitor", r.monitor_value}, {"improved", r.improved}};
    if (r.val.auc) e["val_auc"] = *r.val.auc;
    if (r.val.accuracy) e["val_accuracy"] = *r.val.accuracy;
    if (r.val.c_index) e["val_c_index"] = *r.val.c_index;
    hist["epochs"].push_back(e);
  }
  std::ofstream(out / "history.json") << hist.dump(2) << "\n";
  std::printf("best epoch %zu, checkpoint %s\n", history.best_epoch, (out / "model.mmck").string().c_str());
  return 0;
}

int run_eval(const fs::path& checkpoint, const fs::path& manifest_path, const std::string& split) {
  const Model model = load_checkpoint(checkpoint);
  const auto manifest = DatasetManifest::load(manifest_path);
  if (manifest.dim != model.config().input_dim) {
    throw ValidationError("dataset dim " + std::to_string(manifest.dim) + " does not match model input_dim " +
                          std::to_string(model.config().input_dim));
  }
  const auto bags = manifest.load_split(parse_split(split));
  std::printf("%s\n", evaluate(model, bags).to_text().c_str());
  return 0;
}

int run_gradcheck(const std::string& scope) {
  bool ok = true;
  for (const auto& r : run_gradient_suite(parse_grad_scope(scope))) {
    std::printf("%-24s max_rel_err=%.3e tol=%.0e %s\n", r.name.c_str(), r.max_rel_error, r.tolerance,
                r.passed() ? "ok" : "FAIL");
    ok = ok && r.passed();
  }
  if (!ok) throw NumericError("gradient check failed");
  return 0;
}

int run_bench(const std::vector<std::size_t>& lengths, const ssm::Dims& dims, std::size_t reps) {
  const auto medians = time_scan(lengths, dims, reps);
  for (std::size_t k = 0; k < lengths.size(); ++k) {
    std::printf("M=%zu median_s=%.6f", lengths[k], medians[k]);
    if (k > 0) std::printf(" ratio_vs_M=%zu: %.3f", lengths[k - 1], medians[k] / medians[k - 1]);
    std::printf("\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-serialized state-space multiple instance learning"};
  app.require_subcommand(1);

  SynthOptions synth;
  std::string synth_task = "classification";
  fs::path synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a seeded synthetic dataset");
  synth_cmd->add_option("--seed", synth.seed, "Random seed");
  synth_cmd->add_option("--n-bags", synth.n_bags, "Number of bags");
  synth_cmd->add_option("--task", synth_task, "classification or survival");
  synth_cmd->add_option("--dim", synth.dim, "Feature dimension");
  synth_cmd->add_option("--witness-shift", synth.witness_shift, "Mean shift of witness instances (0 = null control)");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  fs::path train_config, train_manifest, train_out;
  bool quiet = false;
  auto* train_cmd = app.add_subcommand("train", "Train a model on the train split, early-stopping on val");
  train_cmd->add_option("--config", train_config, "JSON with \"model\" and \"train\" sections")->required();
  train_cmd->add_option("--manifest", train_manifest, "Dataset manifest")->required();
  train_cmd->add_option("--out", train_out, "Output directory")->required();
  train_cmd->add_flag("--quiet", quiet, "Suppress per-epoch lines");

  fs::path eval_checkpoint, eval_manifest;
  std::string eval_split = "test";
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "Dataset manifest")->required();
  eval_cmd->add_option("--split", eval_split, "train, val or test");

  std::string scope = "primitives";
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  grad_cmd->add_option("--scope", scope, "primitives, blocks or model")
      ->check(CLI::IsMember({"primitives", "blocks", "model"}));

  std::vector<std::size_t> lengths{16384, 32768};
  ssm::Dims bench_dims;
  std::size_t reps = 5;
  auto* bench_cmd = app.add_subcommand("bench-scan", "Time the selective scan at several lengths");
  bench_cmd->add_option("--lengths", lengths, "Sequence lengths")->delimiter(',');
  bench_cmd->add_option("--repetitions", reps, "Runs per length");
  bench_cmd->add_option("--heads", bench_dims.heads);
  bench_cmd->add_option("--head-dim", bench_dims.head_dim);
  bench_cmd->add_option("--state-dim", bench_dims.state_dim);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth_cmd) {
      synth.task = parse_task(synth_task);
      return run_synth(synth, synth_out);
    }
    if (*train_cmd) return run_train(train_config, train_manifest, train_out, quiet);
    if (*eval_cmd) return run_eval(eval_checkpoint, eval_manifest, eval_split);
    if (*grad_cmd) return run_gradcheck(scope);
    if (*bench_cmd) return run_bench(lengths, bench_dims, reps);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
