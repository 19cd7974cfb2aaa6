#include "plasticnn/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "plasticnn/checkpoint.hpp"
#include "plasticnn/config.hpp"
#include "plasticnn/dataset_io.hpp"
#include "plasticnn/engine.hpp"
#include "plasticnn/harness.hpp"

namespace plasticnn {

namespace {

namespace fs = std::filesystem;

struct SingleRunData {
  Dataset train;
  Dataset val;
};

// Data for the single-task subcommands: either the configured CSV pair or
// the first synthetic task of the stream.
SingleRunData resolve_single_task(const RunConfig& config) {
  SingleRunData data;
  if (!config.train_csv.empty()) {
    data.train = load_dataset_csv(config.train_csv);
    data.val = load_dataset_csv(config.val_csv);
  } else {
    if (config.tasks.empty()) {
      throw ConfigError(
          "config needs either train_csv/val_csv or a task.0 block");
    }
    TaskStream stream =
        make_task_stream({config.tasks.front()}, config.seeds.front());
    data.train = stream.tasks.front().train;
    data.val = stream.tasks.front().val;
  }
  if (data.train.feature_width() != config.widths.front()) {
    throw ConfigError("widths: input width " +
                      std::to_string(config.widths.front()) +
                      " does not match the dataset feature width " +
                      std::to_string(data.train.feature_width()));
  }
  return data;
}

std::vector<MetricRecord> history_records(const LossHistory& history,
                                          std::uint64_t seed,
                                          const std::string& arm,
                                          bool classification) {
  std::vector<MetricRecord> records;
  for (std::size_t i = 0; i < history.epochs.size(); ++i) {
    records.push_back({seed, arm, 0, history.epochs[i], "train", "loss",
                       history.train_loss[i]});
  }
  const std::string metric = classification ? "accuracy" : "neg_loss";
  for (std::size_t i = 0; i < history.val_epochs.size(); ++i) {
    records.push_back({seed, arm, 0, history.val_epochs[i], "val", metric,
                       history.val_criterion[i]});
  }
  return records;
}

// train / dropin / plasticity / prune share this shell: one dataset pair,
// one network, one loop, artifacts under --out.
int run_single(const std::string& command, const RunConfig& config,
               const fs::path& out_dir, const std::string& relevance_csv) {
  fs::create_directories(out_dir);
  SingleRunData data = resolve_single_task(config);

  const std::uint64_t seed = config.seeds.front();
  Network<double> net =
      init_network(config.widths, config.activations, seed);
  MutationLog log;
  SplitRng growth_rng = SplitRng::substream(seed, "arm:" + command + ":growth");
  SplitRng dropout_rng =
      SplitRng::substream(seed, "arm:" + command + ":dropout");

  SgdOptions opt{config.loss, config.learning_rate, config.epochs_per_round,
                 config.max_rounds};

  LoopHooks hooks;
  int round_counter = 0;
  if (config.checkpoint_interval > 0) {
    hooks.on_round_end = [&](int epoch, const Network<double>& snapshot,
                             const MutationLog& snapshot_log) {
      ++round_counter;
      if (round_counter % config.checkpoint_interval == 0) {
        save_checkpoint(snapshot, snapshot_log,
                        out_dir / ("checkpoint_epoch" + std::to_string(epoch) +
                                   ".json"));
      }
    };
  }
  LoopContext ctx{0, nullptr, &hooks};

  LossHistory history;
  if (command == "train") {
    history = static_loop(net, data.train, data.val, opt,
                          config.policy.dropout_p,
                          config.policy.dropout_p > 0.0 ? &dropout_rng
                                                        : nullptr,
                          ctx);
  } else if (command == "dropin") {
    history = dropin_loop(net, config.policy, data.train, data.val, opt, log,
                          growth_rng, dropout_rng, ctx);
  } else if (command == "plasticity") {
    history = neuroplasticity_loop(net, config.policy, data.train, data.val,
                                   opt, log, growth_rng, dropout_rng, ctx);
  } else if (command == "prune") {
    history = prune_retrain_loop(net, config.policy, data.train, data.val,
                                 opt, log, ctx);
  } else {
    throw ConfigError("unknown single-run command '" + command + "'");
  }

  write_dataset_csv(data.train, out_dir / "train.csv");
  write_dataset_csv(data.val, out_dir / "val.csv");
  write_jsonl(history_records(history, seed, command,
                              data.val.classification),
              out_dir / "log.jsonl");
  save_checkpoint(net, log, out_dir / "checkpoint.json");
  save_mutation_log_jsonl(log, out_dir / "mutations.jsonl");
  if (!relevance_csv.empty()) {
    const Eigen::Index probe = std::min<Eigen::Index>(
        config.policy.probe_batch, data.train.features.cols());
    RelevanceMap<double> map =
        average_relevance(net, Eigen::MatrixXd(data.train.features.leftCols(probe)),
                          config.policy.lrp_epsilon);
    write_relevance_csv(map, relevance_csv);
  }

  std::cout << std::setprecision(17);
  std::cout << command << ": epochs=" <<
      (history.epochs.empty() ? 0 : history.epochs.back())
            << " stop_cause=" << history.stop_cause << '\n';
  if (!history.train_loss.empty()) {
    std::cout << "final_train_loss=" << history.train_loss.back() << '\n';
  }
  if (!history.val_criterion.empty()) {
    std::cout << "final_val_criterion=" << history.val_criterion.back()
              << '\n';
  }
  std::cout << "mutation_events=" << log.events().size() << '\n';
  std::cout << "artifacts: " << (out_dir / "log.jsonl").string() << ' '
            << (out_dir / "checkpoint.json").string() << '\n';
  return 0;
}

int run_eval(const fs::path& checkpoint_path, const fs::path& data_path) {
  auto [net, log] = load_checkpoint(checkpoint_path);
  (void)log;
  Dataset data = load_dataset_csv(data_path);
  std::cout << std::setprecision(17);
  if (data.classification) {
    std::cout << "accuracy=" << accuracy(net, data) << '\n';
  } else {
    const auto out = forward_batch(net, data.features).output();
    std::cout << "loss="
              << loss_eval_batch(Eigen::MatrixXd(out),
                                 targets_for(data, net.output_width()),
                                 Loss::MeanSquaredError)
              << '\n';
  }
  return 0;
}

int run_bench(const RunConfig& config, const fs::path& out_dir) {
  if (config.tasks.empty()) {
    throw ConfigError("bench needs at least one task.N block");
  }
  if (config.arms.empty()) {
    throw ConfigError("bench needs an arms= list");
  }
  fs::create_directories(out_dir);

  ExperimentSetup setup;
  setup.widths = config.widths;
  setup.activations = config.activations;
  setup.sgd = SgdOptions{config.loss, config.learning_rate,
                         config.epochs_per_round, config.max_rounds};
  setup.policy = config.policy;

  ExperimentLog merged;
  std::vector<ArmMutations> mutations;
  std::vector<std::pair<std::string, std::vector<ArmSeedResult>>> per_arm;
  for (const auto& arm : config.arms) per_arm.push_back({arm.name, {}});
  std::vector<double> total_seconds(config.arms.size(), 0.0);

  for (const std::uint64_t seed : config.seeds) {
    TaskStream stream = make_task_stream(config.tasks, seed);
    ExperimentResult result = run_experiment(stream, config.arms, setup, seed);
    merged.records.insert(merged.records.end(), result.log.records.begin(),
                          result.log.records.end());
    for (std::size_t a = 0; a < result.arms.size(); ++a) {
      const ArmOutcome& outcome = result.arms[a];
      mutations.push_back(
          {seed, outcome.name, outcome.mutations.events()});
      for (double s : outcome.task_seconds) total_seconds[a] += s;
      if (!outcome.failed) {
        per_arm[a].second.push_back(
            {seed, forgetting_metrics(accuracy_matrix(result.log, seed,
                                                      outcome.name)),
             static_cast<int>(total_neurons(outcome.net))});
      }
    }
  }

  write_jsonl(merged.records, out_dir / "log.jsonl");
  write_matrix_csv(merged, out_dir / "matrix.csv");
  write_mutations_jsonl(mutations, out_dir / "mutations.jsonl");

  std::cout << std::setprecision(6);
  if (config.arms.size() >= 2) {
    const auto report = compare_arms(per_arm);
    write_metrics_csv(report, out_dir / "metrics.csv");
    std::cout << "rank arm              avg_final  (std)      bwt        "
                 "neurons  delta_vs_next\n";
    for (const auto& row : report) {
      std::cout << std::left << std::setw(5) << row.rank << std::setw(17)
                << row.arm << std::right << std::setw(9) << row.avg_final_mean
                << "  (" << row.avg_final_std << ")  " << std::setw(9)
                << row.bwt_mean << "  " << std::setw(7) << row.neurons_mean
                << "  " << row.delta_vs_next << '\n';
    }
  } else {
    // Single arm: no comparison, still persist its metrics row.
    const auto& [name, results] = per_arm.front();
    std::ofstream metrics(out_dir / "metrics.csv");
    metrics << "arm,rank,avg_final_mean,avg_final_std,bwt_mean,bwt_std,"
               "forgetting_mean,neurons_mean,delta_vs_next\n";
    if (!results.empty()) {
      double mean = 0.0;
      for (const auto& r : results) mean += r.metrics.average_final;
      mean /= static_cast<double>(results.size());
      metrics << name << ",1," << mean << ",0,0,0,0,0,0\n";
    }
  }
  for (std::size_t a = 0; a < config.arms.size(); ++a) {
    std::cout << "wall_clock " << config.arms[a].name << ": "
              << total_seconds[a] << " s\n";
  }
  std::cout << "artifacts: " << (out_dir / "log.jsonl").string() << ' '
            << (out_dir / "matrix.csv").string() << ' '
            << (out_dir / "metrics.csv").string() << '\n';
  return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv) {
  CLI::App app{"Structural-plasticity feed-forward network toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::string relevance_csv;
  std::string checkpoint_path;
  std::string data_path;

  auto add_config_options = [&](CLI::App* cmd, bool with_relevance) {
    cmd->add_option("--config", config_path, "run configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", out_override,
                    "output directory (overrides out_dir)");
    if (with_relevance) {
      cmd->add_option("--dump-relevance", relevance_csv,
                      "write the final relevance map to this CSV");
    }
  };

  CLI::App* train = app.add_subcommand("train", "static SGD training");
  add_config_options(train, false);
  CLI::App* dropin =
      app.add_subcommand("dropin", "training with trigger-driven growth");
  add_config_options(dropin, true);
  CLI::App* plasticity = app.add_subcommand(
      "plasticity", "growth followed by relevance-guided masking");
  add_config_options(plasticity, true);
  CLI::App* prune =
      app.add_subcommand("prune", "one-shot prune and retrain");
  add_config_options(prune, true);

  CLI::App* eval =
      app.add_subcommand("eval", "checkpoint accuracy on a CSV dataset");
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--data", data_path, "CSV dataset")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* bench =
      app.add_subcommand("bench", "multi-arm continual-learning experiment");
  add_config_options(bench, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help
    }
    app.exit(e);
    std::cerr << app.help() << '\n';
    return 1;
  }

  try {
    if (eval->parsed()) {
      return run_eval(checkpoint_path, data_path);
    }
    RunConfig config = parse_config(config_path);
    const fs::path out_dir =
        out_override.empty() ? fs::path(config.out_dir) : fs::path(out_override);
    if (bench->parsed()) return run_bench(config, out_dir);
    for (const char* name : {"train", "dropin", "plasticity", "prune"}) {
      if (app.get_subcommand(name)->parsed()) {
        return run_single(name, config, out_dir, relevance_csv);
      }
    }
    std::cerr << app.help() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace plasticnn
