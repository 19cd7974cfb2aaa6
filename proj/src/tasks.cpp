#include "plasticnn/tasks.hpp"

#include <algorithm>
#include <cmath>

namespace plasticnn {

namespace {

constexpr double kPi = 3.14159265358979323846;
// Golden-angle spacing keeps blob centers distinct for any label index.
constexpr double kGoldenAngle = 2.39996322972865332;
constexpr double kBlobRadius = 2.0;

}  // namespace

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::Xor: return "xor";
    case TaskKind::TwoMoons: return "two_moons";
    case TaskKind::GaussianBlobs: return "gaussian_blobs";
    case TaskKind::RotatedBlobs: return "rotated_blobs";
  }
  return "gaussian_blobs";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "xor") return TaskKind::Xor;
  if (s == "two_moons") return TaskKind::TwoMoons;
  if (s == "gaussian_blobs") return TaskKind::GaussianBlobs;
  if (s == "rotated_blobs") return TaskKind::RotatedBlobs;
  throw ParseError("unknown task kind '" + s + "'");
}

void TaskSpec::validate() const {
  const int min_samples = kind == TaskKind::Xor ? 4 : 10;
  if (samples < min_samples) {
    throw ConfigError("samples: " + to_string(kind) + " needs at least " +
                      std::to_string(min_samples));
  }
  if (noise < 0.0) throw ConfigError("noise: must be >= 0");
  if (kind == TaskKind::Xor || kind == TaskKind::TwoMoons) {
    if (classes != 2) {
      throw ConfigError("classes: " + to_string(kind) + " is binary");
    }
  } else if (classes < 1) {
    throw ConfigError("classes: must be >= 1");
  }
  if (class_offset < 0) throw ConfigError("class_offset: must be >= 0");
}

Dataset generate_task_dataset(const TaskSpec& spec, SplitRng& rng) {
  spec.validate();
  Dataset data;
  data.classification = true;
  data.features.resize(2, spec.samples);
  data.labels.resize(spec.samples);

  for (int i = 0; i < spec.samples; ++i) {
    double x = 0.0;
    double y = 0.0;
    int label = 0;
    switch (spec.kind) {
      case TaskKind::Xor: {
        const int corner = i % 4;
        x = static_cast<double>(corner & 1);
        y = static_cast<double>((corner >> 1) & 1);
        label = (corner & 1) ^ ((corner >> 1) & 1);
        x += spec.noise * rng.normal();
        y += spec.noise * rng.normal();
        break;
      }
      case TaskKind::TwoMoons: {
        const int cls = i % 2;
        const double t = kPi * rng.uniform();
        if (cls == 0) {
          x = std::cos(t);
          y = std::sin(t);
        } else {
          x = 1.0 - std::cos(t);
          y = 0.5 - std::sin(t);
        }
        x += spec.noise * rng.normal();
        y += spec.noise * rng.normal();
        label = cls;
        break;
      }
      case TaskKind::GaussianBlobs: {
        const int cls = i % spec.classes;
        const int global = spec.class_offset + cls;
        const double angle = global * kGoldenAngle + spec.rotation;
        x = kBlobRadius * std::cos(angle) + spec.noise * rng.normal() +
            spec.mean_shift;
        y = kBlobRadius * std::sin(angle) + spec.noise * rng.normal() +
            spec.mean_shift;
        label = global;
        break;
      }
      case TaskKind::RotatedBlobs: {
        const int cls = i % spec.classes;
        const int global = spec.class_offset + cls;
        const double angle = global * kGoldenAngle;
        const double bx =
            kBlobRadius * std::cos(angle) + spec.noise * rng.normal();
        const double by =
            kBlobRadius * std::sin(angle) + spec.noise * rng.normal();
        // Rigid rotation of the whole task plane.
        x = std::cos(spec.rotation) * bx - std::sin(spec.rotation) * by +
            spec.mean_shift;
        y = std::sin(spec.rotation) * bx + std::cos(spec.rotation) * by +
            spec.mean_shift;
        label = global;
        break;
      }
    }
    if (spec.kind == TaskKind::Xor || spec.kind == TaskKind::TwoMoons) {
      label += spec.class_offset;
    }
    data.features(0, i) = x;
    data.features(1, i) = y;
    data.labels[i] = label;
  }
  return data;
}

namespace {

Dataset slice(const Dataset& data, Eigen::Index begin, Eigen::Index count) {
  Dataset out;
  out.classification = data.classification;
  out.features = data.features.middleCols(begin, count);
  out.labels = data.labels.segment(begin, count);
  return out;
}

void standardize(Dataset& train, Dataset& val, Dataset& test) {
  const Eigen::VectorXd mean = train.features.rowwise().mean();
  Eigen::VectorXd stdev(mean.size());
  for (Eigen::Index r = 0; r < mean.size(); ++r) {
    const double var =
        (train.features.row(r).array() - mean[r]).square().mean();
    stdev[r] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  auto apply = [&](Dataset& d) {
    if (d.size() == 0) return;
    d.features = (d.features.colwise() - mean).array().colwise() /
                 stdev.array();
  };
  apply(train);
  apply(val);
  apply(test);
}

}  // namespace

TaskStream make_task_stream(const std::vector<TaskSpec>& specs,
                            std::uint64_t seed) {
  if (specs.empty()) throw ConfigError("tasks: need at least one task spec");
  TaskStream stream;
  stream.seed = seed;
  for (std::size_t t = 0; t < specs.size(); ++t) {
    SplitRng rng =
        SplitRng::substream(seed, "data:task" + std::to_string(t));
    Dataset all = generate_task_dataset(specs[t], rng);
    const Eigen::Index n = all.size();
    const Eigen::Index n_val = n * 15 / 100;
    const Eigen::Index n_test = n * 15 / 100;
    const Eigen::Index n_train = n - n_val - n_test;

    TaskData task;
    task.spec = specs[t];
    task.train = slice(all, 0, n_train);
    task.val = n_val > 0 ? slice(all, n_train, n_val) : task.train;
    task.test = n_test > 0 ? slice(all, n_train + n_val, n_test) : task.train;
    if (specs[t].kind != TaskKind::Xor) {
      standardize(task.train, task.val, task.test);
    }
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

int TaskStream::label_space() const {
  int space = 0;
  for (const auto& task : tasks) {
    space = std::max(space, task.spec.label_space());
  }
  return space;
}

}  // namespace plasticnn
