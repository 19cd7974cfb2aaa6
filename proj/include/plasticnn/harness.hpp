// Experiment harness: runs arms (static / dropin / neuroplasticity /
// prune_retrain) over a task stream from identically-seeded initial
// networks, records per-epoch metrics and the full after-task accuracy
// matrix, and computes forgetting metrics. Arms may execute concurrently;
// records are merged in arm order, so the persisted byte stream depends
// only on (stream seed, run seed), never on scheduling.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "plasticnn/engine.hpp"
#include "plasticnn/mutation.hpp"
#include "plasticnn/network.hpp"
#include "plasticnn/policy.hpp"
#include "plasticnn/tasks.hpp"

namespace plasticnn {

enum class ArmStrategy { Static, Dropin, Neuroplasticity, PruneRetrain };

std::string to_string(ArmStrategy s);
ArmStrategy arm_strategy_from_string(const std::string& s);

struct ArmConfig {
  ArmStrategy strategy = ArmStrategy::Static;
  std::string name;  // defaults to the strategy string

  bool operator==(const ArmConfig&) const = default;
};

/// One JSONL line. split is train/val/test/mutation/status; test records
/// reuse `epoch` as the index of the task just finished, which makes the
/// accuracy matrix A[epoch][task] recoverable from the flat stream.
struct MetricRecord {
  std::uint64_t seed = 0;
  std::string arm;
  int task = 0;
  int epoch = 0;
  std::string split;
  std::string metric;
  double value = 0.0;

  bool operator==(const MetricRecord&) const = default;
};

struct ExperimentLog {
  std::vector<MetricRecord> records;
};

struct ArmOutcome {
  std::string name;
  Network<double> net;
  MutationLog mutations;
  bool failed = false;
  std::vector<double> task_seconds;  // wall clock per task; reporting only,
                                     // never part of the persisted log
};

struct ExperimentResult {
  ExperimentLog log;
  std::vector<ArmOutcome> arms;
};

struct ExperimentSetup {
  std::vector<int> widths;
  std::vector<Activation> activations;
  SgdOptions sgd;
  PlasticityPolicy policy;
  int threads = 0;  // 0 = PLASTICNN_THREADS env var, else hardware
};

ExperimentResult run_experiment(const TaskStream& stream,
                                const std::vector<ArmConfig>& arms,
                                const ExperimentSetup& setup,
                                std::uint64_t seed);

// ---- forgetting metrics ----------------------------------------------

/// Row j holds the test accuracies of tasks 0..j measured after task j.
using AccuracyMatrix = std::vector<std::vector<double>>;

/// Rebuilds the matrix for one (seed, arm) from the flat records; throws
/// on an incomplete matrix.
AccuracyMatrix accuracy_matrix(const ExperimentLog& log, std::uint64_t seed,
                               const std::string& arm);

struct ForgettingMetrics {
  double average_final = 0.0;    // mean_i A[last][i]
  double backward_transfer = 0.0;  // mean_{i<last}(A[last][i] - A[i][i])
  std::vector<double> per_task_forgetting;  // max_j A[j][i] - A[last][i]
};

ForgettingMetrics forgetting_metrics(const AccuracyMatrix& matrix);

// ---- arm comparison ---------------------------------------------------

struct ArmSeedResult {
  std::uint64_t seed = 0;
  ForgettingMetrics metrics;
  int total_neurons = 0;
};

struct ArmReportRow {
  std::string arm;
  int rank = 0;
  double avg_final_mean = 0.0;
  double avg_final_std = 0.0;
  double bwt_mean = 0.0;
  double bwt_std = 0.0;
  double forgetting_mean = 0.0;
  double neurons_mean = 0.0;
  double delta_vs_next = 0.0;  // lead in avg final accuracy over next rank
};

/// Ranks arms by mean final accuracy, ties by fewer neurons. Needs at
/// least two arms. Input order fixes tie-of-ties.
std::vector<ArmReportRow> compare_arms(
    const std::vector<std::pair<std::string, std::vector<ArmSeedResult>>>&
        per_arm);

// ---- persistence ------------------------------------------------------

void write_jsonl(const std::vector<MetricRecord>& records,
                 const std::filesystem::path& path);
std::vector<MetricRecord> read_jsonl(const std::filesystem::path& path);

struct ArmMutations {
  std::uint64_t seed = 0;
  std::string arm;
  std::vector<MutationEvent> events;
};

void write_mutations_jsonl(const std::vector<ArmMutations>& mutations,
                           const std::filesystem::path& path);
std::vector<ArmMutations> read_mutations_jsonl(
    const std::filesystem::path& path);

void write_matrix_csv(const ExperimentLog& log,
                      const std::filesystem::path& path);
void write_metrics_csv(const std::vector<ArmReportRow>& rows,
                       const std::filesystem::path& path);

// ---- trigger audit ----------------------------------------------------

struct TriggerAuditIssue {
  std::uint64_t seed = 0;
  std::string arm;
  MutationEvent event;
  std::string reason;
};

/// Checks, purely from persisted data, that every grow event either
/// coincides with a convergence round (|loss_E - loss_{E-1}| < delta) or
/// sits at a new-data boundary. Returns the violations; empty means clean.
std::vector<TriggerAuditIssue> audit_growth_triggers(
    const std::vector<MetricRecord>& records,
    const std::vector<ArmMutations>& mutations, double delta,
    int epochs_per_round);

}  // namespace plasticnn
