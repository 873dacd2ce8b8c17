#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pipeline.hpp"
#include "srfl/federated.hpp"

namespace {

using namespace srfl;
using namespace srfl::cli;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

// Flag values that were actually given; everything else keeps the config value.
struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> profile;
  std::optional<int> contexts;
  std::optional<int> test_contexts;
  std::optional<int> variations;
  std::optional<int> max_aps;
  std::optional<int> max_stas;
  bool no_metrics = false;

  std::optional<std::string> preset;
  std::optional<std::string> arch;
  std::optional<std::size_t> rounds;
  std::optional<std::size_t> clients_per_round;
  std::optional<std::size_t> local_epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<double> l2;
  std::optional<std::string> optimizer;
  std::optional<std::string> aggregation;
  std::optional<std::string> participation;
  std::optional<std::size_t> eval_every;
  std::optional<std::size_t> patience;
  std::vector<std::size_t> hidden;
  std::optional<double> dropout;
  std::optional<double> channel_scale;
  std::optional<int> grid_size;
  std::optional<std::size_t> epochs;
  std::vector<double> split;
  std::optional<std::size_t> workers;
  bool timing = false;
};

RunConfig build_config(const Overrides& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  if (o.preset) apply_preset(cfg, *o.preset);
  if (o.seed) cfg.seed = *o.seed;
  if (o.profile) cfg.dataset.profile = *o.profile;
  if (o.contexts) cfg.dataset.contexts = *o.contexts;
  if (o.test_contexts) cfg.dataset.test_contexts = *o.test_contexts;
  if (o.variations) cfg.dataset.variations = *o.variations;
  if (o.max_aps) cfg.dataset.max_aps = *o.max_aps;
  if (o.max_stas) cfg.dataset.max_stas = *o.max_stas;
  if (o.no_metrics) cfg.dataset.write_metrics = false;
  if (o.arch) {
    const auto arch = models::arch_from_string(*o.arch);
    if (arch != cfg.model.arch) {
      auto m = models::ModelConfig::defaults(arch);
      m.max_aps = cfg.model.max_aps;
      m.max_stas = cfg.model.max_stas;
      cfg.model = m;
    }
  }
  auto& f = cfg.fed;
  if (o.rounds) f.rounds = *o.rounds;
  if (o.clients_per_round) f.clients_per_round = *o.clients_per_round;
  if (o.local_epochs) f.local_epochs = *o.local_epochs;
  if (o.batch_size) f.batch_size = *o.batch_size;
  if (o.lr) f.optimizer.learning_rate = *o.lr;
  if (o.l2) f.optimizer.l2 = *o.l2;
  if (o.optimizer) f.optimizer.kind = nn::optimizer_from_string(*o.optimizer);
  if (o.aggregation) f.aggregation = fed::aggregation_from_string(*o.aggregation);
  if (o.participation) f.participation = fed::participation_from_string(*o.participation);
  if (o.eval_every) f.eval_every = *o.eval_every;
  if (o.patience) f.patience = *o.patience;
  if (o.workers) f.workers = *o.workers;
  if (o.timing) f.record_timing = true;
  if (!o.hidden.empty()) cfg.model.hidden_sizes = o.hidden;
  if (o.dropout) cfg.model.dropout_p = *o.dropout;
  if (o.channel_scale) cfg.model.cnn_channel_scale = *o.channel_scale;
  if (o.grid_size) cfg.model.grid.width = cfg.model.grid.height = *o.grid_size;
  if (o.epochs) cfg.centralized_epochs = *o.epochs;
  if (!o.split.empty()) {
    if (o.split.size() != 3) throw UsageError("--split takes three fractions: train val1 val2");
    cfg.split = {o.split[0], o.split[1], o.split[2]};
  }
  return cfg;
}

void add_config_flag(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON run config; flags override its keys")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Master seed (default 1)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated throughput prediction for 802.11ax spatial reuse"};
  app.require_subcommand(1);
  Overrides o;

  std::string out_path;
  std::string data_path;
  std::string run_path;
  bool force = false;
  int bins = 20;
  std::vector<std::string> compare;

  auto* gen = app.add_subcommand("generate", "Generate deployments, labels and context CSVs");
  add_config_flag(gen, o);
  gen->add_option("--profile", o.profile, "training1 | training2 | training3 (default training1)");
  gen->add_option("--contexts", o.contexts, "Number of training-profile contexts (default 50)");
  gen->add_option("--test-contexts", o.test_contexts,
                  "Additional test-profile contexts with one random threshold each (default 0)");
  gen->add_option("--variations", o.variations, "STA location variations per context (1-20)");
  gen->add_option("--max-aps", o.max_aps, "Interference slots a (default 6)");
  gen->add_option("--max-stas", o.max_stas, "STA slots b (default 4)");
  gen->add_flag("--no-metrics", o.no_metrics, "Skip per-threshold metrics CSVs");
  gen->add_option("-o,--out", out_path, "Dataset directory")->required();

  auto* train = app.add_subcommand("train", "Train a model on a generated dataset");
  add_config_flag(train, o);
  train->add_option("-d,--data", data_path, "Dataset directory")->required();
  train->add_option("-o,--out", out_path, "Run directory")->required();
  train->add_option("--preset", o.preset, "federations | fedipc | wirelessai");
  train->add_option("--model", o.arch, "federations | fedipc | wirelessai | centralized");
  train->add_option("--rounds", o.rounds, "Communication rounds T");
  train->add_option("--clients-per-round", o.clients_per_round, "Sampled clients N_tr");
  train->add_option("--participation", o.participation, "sampled | full");
  train->add_option("--local-epochs", o.local_epochs, "Local epochs E");
  train->add_option("--batch-size", o.batch_size, "Batch size B");
  train->add_option("--optimizer", o.optimizer, "sgd | adam");
  train->add_option("--lr", o.lr, "Learning rate");
  train->add_option("--l2", o.l2, "L2 coefficient");
  train->add_option("--aggregation", o.aggregation,
                    "fedavg_uniform | fedavg_weighted | federations_alpha");
  train->add_option("--eval-every", o.eval_every, "Rounds between validation passes");
  train->add_option("--patience", o.patience, "Early-stopping patience in rounds (0 = off)");
  train->add_option("--hidden", o.hidden, "Hidden widths (FedIPC and centralized)");
  train->add_option("--dropout", o.dropout, "Dropout probability");
  train->add_option("--channel-scale", o.channel_scale, "WirelessAI CNN width scale");
  train->add_option("--grid-size", o.grid_size, "WirelessAI grid image side in cells");
  train->add_option("--epochs", o.epochs, "Epochs for the centralized baseline");
  train->add_option("--split", o.split, "Context split fractions: train val1 val2")
      ->expected(3);
  train->add_option("--workers", o.workers, "Parallel client trainers (results do not change)");
  train->add_flag("--timing", o.timing, "Record wall time per round in history.csv");

  auto* eval = app.add_subcommand("eval", "Evaluate a trained run on its test contexts");
  eval->add_option("-r,--run", run_path, "Run directory");
  eval->add_option("-d,--data", data_path, "Dataset directory (default: the training dataset)");
  eval->add_option("-o,--out", out_path, "Report directory (default: the run directory)");
  eval->add_flag("--force", force, "Accept config hash mismatches");
  eval->add_option("--compare", compare, "Compare evaluated runs instead")->expected(2, -1);

  auto* report = app.add_subcommand("report", "Dataset statistics or a run comparison table");
  report->add_option("-d,--data", data_path, "Dataset directory");
  report->add_option("-o,--out", out_path, "Output directory")->required();
  report->add_option("--bins", bins, "Histogram bins")->check(CLI::PositiveNumber);
  report->add_option("--runs", compare, "Evaluated run directories to compare")->expected(2, -1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) {
      const auto cfg = build_config(o);
      generate_dataset(cfg, resolve_output(out_path, cfg.output_dir), std::cout);
    } else if (*train) {
      const auto cfg = build_config(o);
      train_run(cfg, resolve_output(data_path, cfg.output_dir),
                resolve_output(out_path, cfg.output_dir), std::cout);
    } else if (*eval) {
      if (!compare.empty()) {
        std::vector<fs::path> dirs;
        for (const auto& c : compare) dirs.push_back(resolve_output(c, "."));
        compare_run_dirs(dirs, resolve_output(out_path.empty() ? "." : out_path, "."), std::cout);
      } else {
        if (run_path.empty()) throw UsageError("eval needs --run or --compare");
        const auto run_dir = resolve_output(run_path, ".");
        std::optional<fs::path> data;
        if (!data_path.empty()) data = resolve_output(data_path, ".");
        eval_run(run_dir, data, out_path.empty() ? run_dir : resolve_output(out_path, "."),
                 force, std::cout);
      }
    } else if (*report) {
      const auto out = resolve_output(out_path, ".");
      if (!compare.empty()) {
        std::vector<fs::path> dirs;
        for (const auto& c : compare) dirs.push_back(resolve_output(c, "."));
        compare_run_dirs(dirs, out, std::cout);
      } else {
        if (data_path.empty()) throw UsageError("report needs --data or --runs");
        report_dataset(resolve_output(data_path, "."), out, bins, std::cout);
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
