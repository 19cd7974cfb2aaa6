#include "plasticnn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <numeric>
#include <thread>

#include "json.hpp"

namespace plasticnn {

using nlohmann::json;

std::string to_string(ArmStrategy s) {
  switch (s) {
    case ArmStrategy::Static: return "static";
    case ArmStrategy::Dropin: return "dropin";
    case ArmStrategy::Neuroplasticity: return "neuroplasticity";
    case ArmStrategy::PruneRetrain: return "prune_retrain";
  }
  return "static";
}

ArmStrategy arm_strategy_from_string(const std::string& s) {
  if (s == "static") return ArmStrategy::Static;
  if (s == "dropin") return ArmStrategy::Dropin;
  if (s == "neuroplasticity") return ArmStrategy::Neuroplasticity;
  if (s == "prune_retrain") return ArmStrategy::PruneRetrain;
  throw ParseError("unknown arm strategy '" + s + "'");
}

namespace {

struct ArmRun {
  std::vector<MetricRecord> records;
  ArmOutcome outcome;
};

int resolve_threads(int requested, std::size_t arms) {
  int threads = requested;
  if (threads <= 0) {
    if (const char* env = std::getenv("PLASTICNN_THREADS")) {
      threads = std::atoi(env);
    }
  }
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
  }
  if (threads < 1) threads = 1;
  return std::min<int>(threads, static_cast<int>(arms));
}

// Output width needed for a label space, given the current width. A
// width-1 output already represents binary labels.
int required_output_width(int label_space, int current_width) {
  if (current_width == 1 && label_space <= 2) return current_width;
  return std::max(current_width, label_space);
}

// Output width accommodation still pending at or after task `t`, assuming
// the width already covers tasks before `t`. Reserved out of the growth
// budget so hidden growth can never crowd out a mandatory widening.
int pending_accommodation(const TaskStream& stream, std::size_t t,
                          Eigen::Index output_width) {
  int space = 0;
  for (std::size_t i = t; i < stream.tasks.size(); ++i) {
    space = std::max(space, stream.tasks[i].spec.label_space());
  }
  const int width = static_cast<int>(output_width);
  return required_output_width(space, width) - width;
}

ArmRun run_arm(const TaskStream& stream, const ArmConfig& arm,
               const ExperimentSetup& setup, std::uint64_t seed) {
  ArmRun run;
  run.outcome.name = arm.name;
  // Fairness: every arm starts from the same init draw of the run seed.
  run.outcome.net =
      init_network(setup.widths, setup.activations, seed);
  Network<double>& net = run.outcome.net;
  MutationLog& log = run.outcome.mutations;

  SplitRng growth_rng =
      SplitRng::substream(seed, "arm:" + arm.name + ":growth");
  SplitRng dropout_rng =
      SplitRng::substream(seed, "arm:" + arm.name + ":dropout");
  NewDataCursor cursor;
  int epoch = 0;

  auto emit = [&](int task, int ep, const std::string& split,
                  const std::string& metric, double value) {
    run.records.push_back({seed, arm.name, task, ep, split, metric, value});
  };

  for (std::size_t t = 0; t < stream.tasks.size(); ++t) {
    const TaskData& task = stream.tasks[t];
    const auto started = std::chrono::steady_clock::now();
    if (t > 0) ++cursor.arrived;
    const std::size_t events_before = log.events().size();

    try {
      // Wider label space than the current output: every arm accommodates,
      // it is the one structural change even the static arm needs to stay
      // well-defined on the new targets.
      const int width = static_cast<int>(net.output_width());
      const int deficit =
          required_output_width(task.spec.label_space(), width) - width;
      if (task.train.classification && deficit > 0) {
        log.set_epoch(epoch);
        grow_output_neurons(net, deficit, setup.policy.init_scale, growth_rng,
                            log, MutationTrigger::NewData);
      }

      LoopContext ctx{epoch, &cursor, nullptr};
      // Hidden growth in this task may not eat the headroom that later
      // class increments will need.
      PlasticityPolicy task_policy = setup.policy;
      task_policy.max_total_neurons -=
          pending_accommodation(stream, t + 1, net.output_width());
      LossHistory history;
      switch (arm.strategy) {
        case ArmStrategy::Static:
          history = static_loop(net, task.train, task.val, setup.sgd, 0.0,
                                nullptr, ctx);
          break;
        case ArmStrategy::Dropin:
          history = dropin_loop(net, task_policy, task.train, task.val,
                                setup.sgd, log, growth_rng, dropout_rng, ctx);
          break;
        case ArmStrategy::Neuroplasticity:
          history =
              neuroplasticity_loop(net, task_policy, task.train, task.val,
                                   setup.sgd, log, growth_rng, dropout_rng,
                                   ctx);
          break;
        case ArmStrategy::PruneRetrain:
          history = prune_retrain_loop(net, task_policy, task.train,
                                       task.val, setup.sgd, log, ctx);
          break;
      }

      const std::string val_metric =
          task.val.classification ? "accuracy" : "neg_loss";
      for (std::size_t i = 0; i < history.epochs.size(); ++i) {
        emit(static_cast<int>(t), history.epochs[i], "train", "loss",
             history.train_loss[i]);
      }
      for (std::size_t i = 0; i < history.val_epochs.size(); ++i) {
        emit(static_cast<int>(t), history.val_epochs[i], "val", val_metric,
             history.val_criterion[i]);
      }
      if (!history.epochs.empty()) epoch = history.epochs.back();

      // Accuracy matrix row: every task seen so far, measured now.
      for (std::size_t i = 0; i <= t; ++i) {
        emit(static_cast<int>(i), static_cast<int>(t), "test", "accuracy",
             accuracy(net, stream.tasks[i].test));
      }
    } catch (const NumericError&) {
      run.outcome.failed = true;
      emit(static_cast<int>(t), epoch, "status", "failed", 1.0);
      break;
    }

    // Structural events this task contributed, by kind.
    int grew = 0;
    int pruned = 0;
    int masked = 0;
    for (std::size_t e = events_before; e < log.events().size(); ++e) {
      switch (log.events()[e].kind) {
        case MutationKind::Grow: ++grew; break;
        case MutationKind::Prune: ++pruned; break;
        case MutationKind::Mask: ++masked; break;
      }
    }
    emit(static_cast<int>(t), epoch, "mutation", "grow",
         static_cast<double>(grew));
    emit(static_cast<int>(t), epoch, "mutation", "prune",
         static_cast<double>(pruned));
    emit(static_cast<int>(t), epoch, "mutation", "mask",
         static_cast<double>(masked));

    run.outcome.task_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      started)
            .count());
  }
  return run;
}

}  // namespace

ExperimentResult run_experiment(const TaskStream& stream,
                                const std::vector<ArmConfig>& arms,
                                const ExperimentSetup& setup,
                                std::uint64_t seed) {
  if (arms.empty()) throw ConfigError("arms: need at least one arm");
  if (stream.tasks.empty()) throw ConfigError("tasks: stream is empty");
  setup.policy.validate();
  int initial_total = 0;
  for (std::size_t i = 1; i < setup.widths.size(); ++i) {
    initial_total += setup.widths[i];
  }
  const int accommodation =
      required_output_width(stream.label_space(), setup.widths.back()) -
      setup.widths.back();
  if (setup.policy.max_total_neurons < initial_total + accommodation) {
    throw ConfigError(
        "max_total_neurons: stream needs at least " +
        std::to_string(initial_total + accommodation) +
        " neurons (initial plus output accommodation)");
  }

  const int threads = resolve_threads(setup.threads, arms.size());
  std::vector<ArmRun> runs(arms.size());

  // Bounded waves of concurrent arms; merge order stays the config order.
  for (std::size_t base = 0; base < arms.size();
       base += static_cast<std::size_t>(threads)) {
    const std::size_t end =
        std::min(arms.size(), base + static_cast<std::size_t>(threads));
    std::vector<std::future<ArmRun>> wave;
    for (std::size_t a = base; a < end; ++a) {
      wave.push_back(std::async(std::launch::async, [&, a] {
        return run_arm(stream, arms[a], setup, seed);
      }));
    }
    for (std::size_t a = base; a < end; ++a) {
      runs[a] = wave[a - base].get();
    }
  }

  ExperimentResult result;
  for (auto& run : runs) {
    result.log.records.insert(result.log.records.end(), run.records.begin(),
                              run.records.end());
    result.arms.push_back(std::move(run.outcome));
  }
  return result;
}

AccuracyMatrix accuracy_matrix(const ExperimentLog& log, std::uint64_t seed,
                               const std::string& arm) {
  int last_task = -1;
  for (const auto& r : log.records) {
    if (r.seed == seed && r.arm == arm && r.split == "test") {
      last_task = std::max(last_task, r.epoch);
    }
  }
  if (last_task < 0) {
    throw ParseError("no test records for arm '" + arm + "'");
  }
  AccuracyMatrix matrix(last_task + 1);
  for (int j = 0; j <= last_task; ++j) {
    matrix[j].assign(j + 1, std::nan(""));
  }
  for (const auto& r : log.records) {
    if (r.seed != seed || r.arm != arm || r.split != "test") continue;
    if (r.task < 0 || r.task > r.epoch) {
      throw ParseError("test record outside the lower-triangular matrix");
    }
    matrix[r.epoch][r.task] = r.value;
  }
  for (int j = 0; j <= last_task; ++j) {
    for (int i = 0; i <= j; ++i) {
      if (std::isnan(matrix[j][i])) {
        throw ParseError("accuracy matrix incomplete at (" +
                         std::to_string(j) + "," + std::to_string(i) + ")");
      }
    }
  }
  return matrix;
}

ForgettingMetrics forgetting_metrics(const AccuracyMatrix& matrix) {
  if (matrix.empty()) throw ParseError("empty accuracy matrix");
  const std::size_t last = matrix.size() - 1;
  for (std::size_t j = 0; j < matrix.size(); ++j) {
    if (matrix[j].size() != j + 1) {
      throw ParseError("accuracy matrix is not lower-triangular-complete");
    }
  }
  ForgettingMetrics metrics;
  const auto& final_row = matrix[last];
  metrics.average_final =
      std::accumulate(final_row.begin(), final_row.end(), 0.0) /
      static_cast<double>(final_row.size());
  if (last == 0) {
    metrics.backward_transfer = 0.0;
  } else {
    double bwt = 0.0;
    for (std::size_t i = 0; i < last; ++i) {
      bwt += final_row[i] - matrix[i][i];
    }
    metrics.backward_transfer = bwt / static_cast<double>(last);
  }
  metrics.per_task_forgetting.resize(matrix.size());
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    double best = -1.0;
    for (std::size_t j = i; j <= last; ++j) {
      best = std::max(best, matrix[j][i]);
    }
    metrics.per_task_forgetting[i] = best - final_row[i];
  }
  return metrics;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace

std::vector<ArmReportRow> compare_arms(
    const std::vector<std::pair<std::string, std::vector<ArmSeedResult>>>&
        per_arm) {
  if (per_arm.size() < 2) {
    throw ConfigError("arms: comparison needs at least two arms");
  }
  std::vector<ArmReportRow> rows;
  for (const auto& [name, results] : per_arm) {
    if (results.empty()) {
      throw ParseError("arm '" + name + "' has no results");
    }
    std::vector<double> finals;
    std::vector<double> bwts;
    std::vector<double> forgets;
    std::vector<double> neurons;
    for (const auto& r : results) {
      finals.push_back(r.metrics.average_final);
      bwts.push_back(r.metrics.backward_transfer);
      const auto& f = r.metrics.per_task_forgetting;
      forgets.push_back(std::accumulate(f.begin(), f.end(), 0.0) /
                        static_cast<double>(f.size()));
      neurons.push_back(static_cast<double>(r.total_neurons));
    }
    ArmReportRow row;
    row.arm = name;
    std::tie(row.avg_final_mean, row.avg_final_std) = mean_std(finals);
    std::tie(row.bwt_mean, row.bwt_std) = mean_std(bwts);
    row.forgetting_mean = mean_std(forgets).first;
    row.neurons_mean = mean_std(neurons).first;
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ArmReportRow& a, const ArmReportRow& b) {
                     if (a.avg_final_mean != b.avg_final_mean) {
                       return a.avg_final_mean > b.avg_final_mean;
                     }
                     return a.neurons_mean < b.neurons_mean;
                   });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].rank = static_cast<int>(i) + 1;
    rows[i].delta_vs_next =
        i + 1 < rows.size()
            ? rows[i].avg_final_mean - rows[i + 1].avg_final_mean
            : 0.0;
  }
  return rows;
}

namespace {

json record_to_json(const MetricRecord& r) {
  json j;
  j["seed"] = r.seed;
  j["arm"] = r.arm;
  j["task"] = r.task;
  j["epoch"] = r.epoch;
  j["split"] = r.split;
  j["metric"] = r.metric;
  j["value"] = r.value;
  return j;
}

}  // namespace

void write_jsonl(const std::vector<MetricRecord>& records,
                 const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path.string() + " for writing");
  for (const auto& r : records) {
    out << record_to_json(r).dump() << '\n';
  }
}

std::vector<MetricRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<MetricRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      MetricRecord r;
      r.seed = j.at("seed").get<std::uint64_t>();
      r.arm = j.at("arm").get<std::string>();
      r.task = j.at("task").get<int>();
      r.epoch = j.at("epoch").get<int>();
      r.split = j.at("split").get<std::string>();
      r.metric = j.at("metric").get<std::string>();
      r.value = j.at("value").get<double>();
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError("jsonl line " + std::to_string(line_no) + ": " +
                       e.what());
    }
  }
  return records;
}

void write_mutations_jsonl(const std::vector<ArmMutations>& mutations,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path.string() + " for writing");
  for (const auto& am : mutations) {
    for (const auto& ev : am.events) {
      json j;
      j["seed"] = am.seed;
      j["arm"] = am.arm;
      j["epoch"] = ev.epoch;
      j["kind"] = to_string(ev.kind);
      j["layer"] = ev.layer;
      j["trigger"] = to_string(ev.trigger);
      if (ev.kind == MutationKind::Grow) {
        j["count"] = ev.count;
      } else {
        j["indices"] = ev.indices;
      }
      out << j.dump() << '\n';
    }
  }
}

std::vector<ArmMutations> read_mutations_jsonl(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<ArmMutations> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      const std::uint64_t seed = j.at("seed").get<std::uint64_t>();
      const std::string arm = j.at("arm").get<std::string>();
      MutationEvent ev;
      ev.epoch = j.at("epoch").get<int>();
      ev.kind = mutation_kind_from_string(j.at("kind").get<std::string>());
      ev.layer = j.at("layer").get<int>();
      ev.trigger =
          mutation_trigger_from_string(j.at("trigger").get<std::string>());
      if (ev.kind == MutationKind::Grow) {
        ev.count = j.at("count").get<int>();
      } else {
        ev.indices = j.at("indices").get<std::vector<int>>();
      }
      auto it = std::find_if(out.begin(), out.end(), [&](const ArmMutations& m) {
        return m.seed == seed && m.arm == arm;
      });
      if (it == out.end()) {
        out.push_back({seed, arm, {}});
        it = out.end() - 1;
      }
      it->events.push_back(std::move(ev));
    } catch (const json::exception& e) {
      throw ParseError("mutations line " + std::to_string(line_no) + ": " +
                       e.what());
    }
  }
  return out;
}

void write_matrix_csv(const ExperimentLog& log,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path.string() + " for writing");
  out << "seed,arm,after_task,eval_task,accuracy\n";
  out.precision(17);
  for (const auto& r : log.records) {
    if (r.split != "test") continue;
    out << r.seed << ',' << r.arm << ',' << r.epoch << ',' << r.task << ','
        << r.value << '\n';
  }
}

void write_metrics_csv(const std::vector<ArmReportRow>& rows,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path.string() + " for writing");
  out << "arm,rank,avg_final_mean,avg_final_std,bwt_mean,bwt_std,"
         "forgetting_mean,neurons_mean,delta_vs_next\n";
  out.precision(17);
  for (const auto& row : rows) {
    out << row.arm << ',' << row.rank << ',' << row.avg_final_mean << ','
        << row.avg_final_std << ',' << row.bwt_mean << ',' << row.bwt_std
        << ',' << row.forgetting_mean << ',' << row.neurons_mean << ','
        << row.delta_vs_next << '\n';
  }
}

std::vector<TriggerAuditIssue> audit_growth_triggers(
    const std::vector<MetricRecord>& records,
    const std::vector<ArmMutations>& mutations, double delta,
    int epochs_per_round) {
  std::vector<TriggerAuditIssue> issues;
  for (const auto& am : mutations) {
    // Training losses by epoch and first epochs of each task, this arm.
    std::map<int, double> loss_by_epoch;
    std::map<int, int> task_first_epoch;
    for (const auto& r : records) {
      if (r.seed != am.seed || r.arm != am.arm) continue;
      if (r.split == "train" && r.metric == "loss") {
        loss_by_epoch[r.epoch] = r.value;
        auto [it, inserted] = task_first_epoch.try_emplace(r.task, r.epoch);
        if (!inserted) it->second = std::min(it->second, r.epoch);
      }
    }
    for (const auto& ev : am.events) {
      if (ev.kind != MutationKind::Grow) continue;
      if (ev.trigger == MutationTrigger::Convergence) {
        auto cur = loss_by_epoch.find(ev.epoch);
        auto prev = loss_by_epoch.find(ev.epoch - 1);
        if (cur == loss_by_epoch.end() || prev == loss_by_epoch.end()) {
          issues.push_back({am.seed, am.arm, ev,
                            "no loss records around the grow epoch"});
        } else if (!(std::abs(cur->second - prev->second) < delta)) {
          issues.push_back({am.seed, am.arm, ev,
                            "loss delta not below the threshold"});
        }
      } else if (ev.trigger == MutationTrigger::NewData) {
        bool at_boundary = false;
        for (const auto& [task, first] : task_first_epoch) {
          if (task == 0) continue;
          if (ev.epoch >= first - 1 &&
              ev.epoch <= first + epochs_per_round - 1) {
            at_boundary = true;
            break;
          }
        }
        if (!at_boundary) {
          issues.push_back(
              {am.seed, am.arm, ev, "grow event not at a new-data boundary"});
        }
      } else {
        issues.push_back(
            {am.seed, am.arm, ev, "grow event with a validation trigger"});
      }
    }
  }
  return issues;
}

}  // namespace plasticnn
