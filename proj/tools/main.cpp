#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "xdet/config.hpp"
#include "xdet/evaluation.hpp"
#include "xdet/gradcheck.hpp"
#include "xdet/plot.hpp"
#include "xdet/scenegen.hpp"
#include "xdet/trainer.hpp"

namespace fs = std::filesystem;
using namespace xdet;

namespace {

struct ConfigCli {
  std::string config_path;
  std::string source_train, target_train, target_test, out_dir;
  std::uint64_t seed = 0;
  int steps = -1, eval_interval = -1, top_k = -1, aug_op_count = -1;
  double alpha = -1, lambda1 = -1, lambda2 = -1, sigma = -1;
  double lr = -1, momentum = -1, aug_magnitude = -1;
  bool no_uda = false, no_rp = false, no_cl = false;
  std::string rotation_mode;
  bool rp_from_unrotated = false;
};

void add_config_options(CLI::App* cmd, ConfigCli& cli) {
  cmd->add_option("--config", cli.config_path, "JSON config file; flags override its values");
  cmd->add_option("--seed", cli.seed, "master seed")->required();
  cmd->add_option("--source-train", cli.source_train, "source train index JSON");
  cmd->add_option("--target-train", cli.target_train, "target train index JSON");
  cmd->add_option("--target-test", cli.target_test, "target test index JSON");
  cmd->add_option("--out", cli.out_dir, "output directory");
  cmd->add_option("--steps", cli.steps, "training steps");
  cmd->add_option("--eval-interval", cli.eval_interval, "steps between target-test evals");
  cmd->add_option("--top-k", cli.top_k, "proposals per image");
  cmd->add_option("--alpha", cli.alpha, "domain-alignment weight");
  cmd->add_option("--lambda1", cli.lambda1, "rotation-prediction weight");
  cmd->add_option("--lambda2", cli.lambda2, "consistency weight");
  cmd->add_option("--sigma", cli.sigma, "consistency confidence threshold");
  cmd->add_option("--lr", cli.lr, "learning rate");
  cmd->add_option("--momentum", cli.momentum, "SGD momentum");
  cmd->add_option("--aug-op-count", cli.aug_op_count, "augmentation ops per image");
  cmd->add_option("--aug-magnitude", cli.aug_magnitude, "augmentation strength in [0,1]");
  cmd->add_flag("--no-uda", cli.no_uda, "disable the domain-alignment task");
  cmd->add_flag("--no-rp", cli.no_rp, "disable the rotation-prediction task");
  cmd->add_flag("--no-cl", cli.no_cl, "disable the consistency task");
  cmd->add_option("--rotation-mode", cli.rotation_mode, "proprot or imgrot")
      ->check(CLI::IsMember({"proprot", "imgrot"}));
  cmd->add_flag("--rp-from-unrotated", cli.rp_from_unrotated,
                "take rotation proposals from the unrotated image (ablation)");
}

TrainConfig resolve_config(const ConfigCli& cli) {
  TrainConfig c = cli.config_path.empty() ? TrainConfig{} : load_config(cli.config_path);
  c.seed = cli.seed;
  if (!cli.source_train.empty()) c.source_train = cli.source_train;
  if (!cli.target_train.empty()) c.target_train = cli.target_train;
  if (!cli.target_test.empty()) c.target_test = cli.target_test;
  if (!cli.out_dir.empty()) c.out_dir = cli.out_dir;
  if (cli.steps >= 0) c.steps = cli.steps;
  if (cli.eval_interval > 0) c.eval_interval = cli.eval_interval;
  if (cli.top_k > 0) c.top_k = cli.top_k;
  if (cli.alpha >= 0) c.weights.alpha = static_cast<real>(cli.alpha);
  if (cli.lambda1 >= 0) c.weights.lambda1 = static_cast<real>(cli.lambda1);
  if (cli.lambda2 >= 0) c.weights.lambda2 = static_cast<real>(cli.lambda2);
  if (cli.sigma >= 0) c.weights.sigma = static_cast<real>(cli.sigma);
  if (cli.lr > 0) c.lr = static_cast<real>(cli.lr);
  if (cli.momentum >= 0) c.momentum = static_cast<real>(cli.momentum);
  if (cli.aug_op_count > 0) c.aug_op_count = cli.aug_op_count;
  if (cli.aug_magnitude >= 0) c.aug_magnitude = static_cast<real>(cli.aug_magnitude);
  if (cli.no_uda) c.enable_uda = false;
  if (cli.no_rp) c.enable_rp = false;
  if (cli.no_cl) c.enable_cl = false;
  if (cli.rotation_mode == "proprot") c.rotation_mode = RotationMode::proposal;
  if (cli.rotation_mode == "imgrot") c.rotation_mode = RotationMode::image;
  if (cli.rp_from_unrotated) c.rp_proposals_from_rotated = false;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-domain shape detector with rotation-prediction and "
               "consistency auxiliary tasks"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic two-domain benchmark");
  std::string gen_out = "data";
  std::uint64_t gen_seed = 0;
  int n_source_train = 500, n_source_test = 200, n_target_train = 500, n_target_test = 200;
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--seed", gen_seed, "dataset seed")->required();
  gen->add_option("--source-train", n_source_train, "source train scenes");
  gen->add_option("--source-test", n_source_test, "source test scenes");
  gen->add_option("--target-train", n_target_train, "target train scenes");
  gen->add_option("--target-test", n_target_test, "target test scenes");

  // train
  auto* train_cmd = app.add_subcommand("train", "train one configuration");
  ConfigCli train_cli;
  add_config_options(train_cmd, train_cli);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score a predictions file against an index");
  std::string eval_preds, eval_index, eval_out;
  eval_cmd->add_option("--predictions", eval_preds, "JSON-lines predictions")->required();
  eval_cmd->add_option("--index", eval_index, "ground-truth index JSON")->required();
  eval_cmd->add_option("--out", eval_out, "write per-class AP CSV here");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "run the task-ablation grid");
  ConfigCli ablate_cli;
  add_config_options(ablate_cmd, ablate_cli);
  int ablate_seeds = 3;
  int ablate_jobs = static_cast<int>(std::thread::hardware_concurrency());
  ablate_cmd->add_option("--seeds-per-variant", ablate_seeds, "seeds per variant");
  ablate_cmd->add_option("--jobs", ablate_jobs, "parallel runs");

  // gradcheck
  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "finite-difference check of every op and loss term");

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "render loss/mAP curves from a metrics CSV");
  std::string plot_metrics_path, plot_out;
  plot_cmd->add_option("--metrics", plot_metrics_path, "metrics.csv from a run")->required();
  plot_cmd->add_option("--out", plot_out, "output path prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      generate_split(gen_seed, n_source_train, n_source_test, Domain::source, gen_out);
      generate_split(gen_seed, n_target_train, n_target_test, Domain::target, gen_out);
      std::cout << "wrote " << (n_source_train + n_source_test + n_target_train + n_target_test)
                << " scenes under " << gen_out << "\n";
    } else if (*train_cmd) {
      TrainConfig c = resolve_config(train_cli);
      Trainer trainer(c);
      const double map = trainer.run();
      std::cout << "final target mAP " << map << "  (outputs in " << c.out_dir << ")\n";
    } else if (*eval_cmd) {
      EvalResult r = mean_average_precision(read_predictions_jsonl(eval_preds),
                                            ground_truth_from_index(eval_index), kNumClasses);
      std::cout << format_eval_table(r);
      if (!eval_out.empty()) write_eval_csv(eval_out, r);
    } else if (*ablate_cmd) {
      TrainConfig base = resolve_config(ablate_cli);
      std::vector<std::uint64_t> seeds;
      for (int i = 0; i < ablate_seeds; ++i) seeds.push_back(base.seed + i);
      std::cout << "ablation grid: 6 variants x " << seeds.size() << " seeds, "
                << ablate_jobs << " jobs\n";
      AblationResult result = ablate(base, seeds, ablate_jobs, &std::cout);
      const std::string csv = (fs::path(base.out_dir) / "ablation.csv").string();
      write_ablation_csv(csv, result);
      std::cout << "medians:\n";
      for (const auto& [variant, median] : result.medians)
        std::cout << "  " << variant << ": " << median << "\n";
      std::cout << "table written to " << csv << "\n";
    } else if (*gradcheck_cmd) {
      if (!run_full_gradcheck(std::cout)) return 2;
    } else if (*plot_cmd) {
      if (plot_out.empty())
        plot_out = (fs::path(plot_metrics_path).parent_path() / "curves").string();
      const int n = plot_metrics(plot_metrics_path, plot_out);
      std::cout << "wrote " << n << " plot(s) with prefix " << plot_out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
