// Synthetic 2-D task generators and deterministic task streams.
//
// A stream is an ordered list of tasks, each with disjoint train/val/test
// splits generated from a named sub-stream of the stream seed, so the same
// (specs, seed) pair always reproduces the same bytes. Features are
// standardized to the train split's mean/variance, except for the xor
// generator, which emits its exact corner coordinates.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plasticnn/dataset.hpp"
#include "plasticnn/rng.hpp"

namespace plasticnn {

enum class TaskKind { Xor, TwoMoons, GaussianBlobs, RotatedBlobs };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& s);

struct TaskSpec {
  TaskKind kind = TaskKind::GaussianBlobs;
  int samples = 200;
  double noise = 0.0;
  int classes = 2;        // classes generated by this task
  int class_offset = 0;   // first global label; later tasks can add classes
  double rotation = 0.0;  // radians
  double mean_shift = 0.0;

  bool operator==(const TaskSpec&) const = default;

  /// Smallest output width that can represent this task's labels.
  int label_space() const { return class_offset + classes; }

  void validate() const;
};

struct TaskData {
  TaskSpec spec;
  Dataset train;
  Dataset val;
  Dataset test;
};

struct TaskStream {
  std::vector<TaskData> tasks;
  std::uint64_t seed = 0;

  /// Output width needed to represent every label in the stream.
  int label_space() const;
};

/// The raw generated dataset (no split, no standardization); classes are
/// interleaved sample-by-sample.
Dataset generate_task_dataset(const TaskSpec& spec, SplitRng& rng);

/// Deterministic stream: per-task datasets split 70/15/15 in generation
/// order and standardized on the train split (xor excepted).
TaskStream make_task_stream(const std::vector<TaskSpec>& specs,
                            std::uint64_t seed);

}  // namespace plasticnn
