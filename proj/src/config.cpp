#include "plasticnn/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace plasticnn {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream stream(s);
  std::string item;
  while (std::getline(stream, item, sep)) parts.push_back(trim(item));
  if (!s.empty() && s.back() == sep) parts.push_back("");
  return parts;
}

struct KeyValue {
  std::string value;
  int line = 0;
};

[[noreturn]] void fail(const std::string& origin, int line,
                       const std::string& message) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": " + message);
}

double parse_double(const std::string& origin, const KeyValue& kv,
                    const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(kv.value, &used);
    if (used != kv.value.size() || !std::isfinite(v)) throw std::exception();
    return v;
  } catch (...) {
    fail(origin, kv.line, key + ": not a finite number ('" + kv.value + "')");
  }
}

long long parse_int(const std::string& origin, const KeyValue& kv,
                    const std::string& key) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(kv.value, &used);
    if (used != kv.value.size()) throw std::exception();
    return v;
  } catch (...) {
    fail(origin, kv.line, key + ": not an integer ('" + kv.value + "')");
  }
}

bool parse_bool(const std::string& origin, const KeyValue& kv,
                const std::string& key) {
  if (kv.value == "true") return true;
  if (kv.value == "false") return false;
  fail(origin, kv.line, key + ": expected true or false ('" + kv.value + "')");
}

const std::set<std::string>& scalar_keys() {
  static const std::set<std::string> keys = {
      "widths",          "activations",
      "loss",            "learning_rate",
      "epochs_per_round", "max_rounds",
      "seeds",           "arms",
      "delta",           "growth_k",
      "init_scale",      "patience",
      "dropout_p",       "dropout_during_growth",
      "prune_criterion", "prune_fraction",
      "min_width",       "max_total_neurons",
      "probe_batch",     "lrp_epsilon",
      "out_dir",         "checkpoint_interval",
      "train_csv",       "val_csv",
  };
  return keys;
}

const std::set<std::string>& task_keys() {
  static const std::set<std::string> keys = {
      "kind",   "samples",      "noise",     "classes",
      "class_offset", "rotation", "mean_shift",
  };
  return keys;
}

}  // namespace

RunConfig parse_config_text(const std::string& text,
                            const std::string& origin) {
  std::map<std::string, KeyValue> scalars;
  std::map<int, std::map<std::string, KeyValue>> task_fields;

  std::istringstream stream(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(stream, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(origin, line_no, "expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(origin, line_no, "empty key");

    if (key.rfind("task.", 0) == 0) {
      const auto rest = key.substr(5);
      const auto dot = rest.find('.');
      if (dot == std::string::npos) {
        fail(origin, line_no, "task keys look like task.<index>.<field>");
      }
      int index = 0;
      const auto idx_str = rest.substr(0, dot);
      auto [p, ec] = std::from_chars(idx_str.data(),
                                     idx_str.data() + idx_str.size(), index);
      if (ec != std::errc() || p != idx_str.data() + idx_str.size() ||
          index < 0) {
        fail(origin, line_no, "bad task index '" + idx_str + "'");
      }
      const std::string field = rest.substr(dot + 1);
      if (task_keys().count(field) == 0) {
        fail(origin, line_no, "unknown key 'task." + idx_str + "." + field +
                                  "'");
      }
      if (!task_fields[index].emplace(field, KeyValue{value, line_no}).second) {
        fail(origin, line_no, "duplicate key '" + key + "'");
      }
      continue;
    }

    if (scalar_keys().count(key) == 0) {
      fail(origin, line_no, "unknown key '" + key + "'");
    }
    if (!scalars.emplace(key, KeyValue{value, line_no}).second) {
      fail(origin, line_no, "duplicate key '" + key + "'");
    }
  }

  RunConfig config;
  auto take = [&](const std::string& key) -> const KeyValue* {
    auto it = scalars.find(key);
    return it == scalars.end() ? nullptr : &it->second;
  };

  // Required keys.
  const KeyValue* widths_kv = take("widths");
  if (widths_kv == nullptr) {
    throw ConfigError(origin + ": missing required key 'widths'");
  }
  for (const auto& part : split(widths_kv->value, ',')) {
    config.widths.push_back(
        static_cast<int>(parse_int(origin, {part, widths_kv->line}, "widths")));
  }
  const KeyValue* acts_kv = take("activations");
  if (acts_kv == nullptr) {
    throw ConfigError(origin + ": missing required key 'activations'");
  }
  for (const auto& part : split(acts_kv->value, ',')) {
    try {
      config.activations.push_back(activation_from_string(part));
    } catch (const ParseError& e) {
      fail(origin, acts_kv->line, std::string("activations: ") + e.what());
    }
  }

  if (const auto* kv = take("loss")) {
    try {
      config.loss = loss_from_string(kv->value);
    } catch (const ParseError& e) {
      fail(origin, kv->line, std::string("loss: ") + e.what());
    }
  }
  if (const auto* kv = take("learning_rate")) {
    config.learning_rate = parse_double(origin, *kv, "learning_rate");
    if (config.learning_rate <= 0.0) {
      fail(origin, kv->line, "learning_rate: must be > 0");
    }
  }
  if (const auto* kv = take("epochs_per_round")) {
    config.epochs_per_round =
        static_cast<int>(parse_int(origin, *kv, "epochs_per_round"));
    if (config.epochs_per_round < 1) {
      fail(origin, kv->line, "epochs_per_round: must be >= 1");
    }
  }
  if (const auto* kv = take("max_rounds")) {
    config.max_rounds = static_cast<int>(parse_int(origin, *kv, "max_rounds"));
    if (config.max_rounds < 1) fail(origin, kv->line, "max_rounds: must be >= 1");
  }
  if (const auto* kv = take("seeds")) {
    config.seeds.clear();
    for (const auto& part : split(kv->value, ',')) {
      const long long v = parse_int(origin, {part, kv->line}, "seeds");
      if (v < 0) fail(origin, kv->line, "seeds: must be >= 0");
      config.seeds.push_back(static_cast<std::uint64_t>(v));
    }
    if (config.seeds.empty()) fail(origin, kv->line, "seeds: empty list");
  }
  if (const auto* kv = take("arms")) {
    std::set<std::string> seen;
    for (const auto& part : split(kv->value, ',')) {
      try {
        config.arms.push_back({arm_strategy_from_string(part), part});
      } catch (const ParseError& e) {
        fail(origin, kv->line, std::string("arms: ") + e.what());
      }
      if (!seen.insert(part).second) {
        fail(origin, kv->line, "arms: duplicate arm '" + part + "'");
      }
    }
  }

  if (const auto* kv = take("delta")) {
    config.policy.delta = parse_double(origin, *kv, "delta");
    if (config.policy.delta < 0.0) fail(origin, kv->line, "delta: must be >= 0");
  }
  if (const auto* kv = take("growth_k")) {
    config.policy.growth_k =
        static_cast<int>(parse_int(origin, *kv, "growth_k"));
    if (config.policy.growth_k < 0) {
      fail(origin, kv->line, "growth_k: must be >= 0 (0 = proportional)");
    }
  }
  if (const auto* kv = take("init_scale")) {
    config.policy.init_scale = parse_double(origin, *kv, "init_scale");
    if (config.policy.init_scale <= 0.0) {
      fail(origin, kv->line, "init_scale: must be > 0");
    }
  }
  if (const auto* kv = take("patience")) {
    config.policy.patience =
        static_cast<int>(parse_int(origin, *kv, "patience"));
    if (config.policy.patience < 1) {
      fail(origin, kv->line, "patience: must be >= 1");
    }
  }
  if (const auto* kv = take("dropout_p")) {
    config.policy.dropout_p = parse_double(origin, *kv, "dropout_p");
    if (config.policy.dropout_p < 0.0 || config.policy.dropout_p >= 1.0) {
      fail(origin, kv->line, "dropout_p: must lie in [0,1)");
    }
  }
  if (const auto* kv = take("dropout_during_growth")) {
    config.policy.dropout_during_growth =
        parse_bool(origin, *kv, "dropout_during_growth");
  }
  if (const auto* kv = take("prune_criterion")) {
    try {
      config.policy.prune.kind = prune_criterion_from_string(kv->value);
    } catch (const ParseError& e) {
      fail(origin, kv->line, std::string("prune_criterion: ") + e.what());
    }
  }
  if (const auto* kv = take("prune_fraction")) {
    config.policy.prune.fraction = parse_double(origin, *kv, "prune_fraction");
    if (!(config.policy.prune.fraction > 0.0 &&
          config.policy.prune.fraction < 1.0)) {
      fail(origin, kv->line, "prune_fraction: must lie in (0,1)");
    }
  }
  if (const auto* kv = take("min_width")) {
    config.policy.prune.min_width =
        static_cast<int>(parse_int(origin, *kv, "min_width"));
    if (config.policy.prune.min_width < 1) {
      fail(origin, kv->line, "min_width: must be >= 1");
    }
  }
  if (const auto* kv = take("max_total_neurons")) {
    config.policy.max_total_neurons =
        static_cast<int>(parse_int(origin, *kv, "max_total_neurons"));
    if (config.policy.max_total_neurons < 1) {
      fail(origin, kv->line, "max_total_neurons: must be >= 1");
    }
  }
  if (const auto* kv = take("probe_batch")) {
    config.policy.probe_batch =
        static_cast<int>(parse_int(origin, *kv, "probe_batch"));
    if (config.policy.probe_batch < 1) {
      fail(origin, kv->line, "probe_batch: must be >= 1");
    }
  }
  if (const auto* kv = take("lrp_epsilon")) {
    config.policy.lrp_epsilon = parse_double(origin, *kv, "lrp_epsilon");
    if (config.policy.lrp_epsilon <= 0.0) {
      fail(origin, kv->line, "lrp_epsilon: must be > 0");
    }
  }
  if (const auto* kv = take("out_dir")) config.out_dir = kv->value;
  if (const auto* kv = take("checkpoint_interval")) {
    config.checkpoint_interval =
        static_cast<int>(parse_int(origin, *kv, "checkpoint_interval"));
    if (config.checkpoint_interval < 0) {
      fail(origin, kv->line, "checkpoint_interval: must be >= 0");
    }
  }
  if (const auto* kv = take("train_csv")) config.train_csv = kv->value;
  if (const auto* kv = take("val_csv")) config.val_csv = kv->value;

  // Tasks: indices must be contiguous from zero.
  for (const auto& [index, fields] : task_fields) {
    if (index != static_cast<int>(config.tasks.size())) {
      throw ConfigError(origin + ": task indices must be contiguous from 0; "
                        "missing task." +
                        std::to_string(config.tasks.size()));
    }
    TaskSpec spec;
    const std::string prefix = "task." + std::to_string(index) + ".";
    for (const auto& [field, kv] : fields) {
      if (field == "kind") {
        try {
          spec.kind = task_kind_from_string(kv.value);
        } catch (const ParseError& e) {
          fail(origin, kv.line, prefix + "kind: " + e.what());
        }
      } else if (field == "samples") {
        spec.samples = static_cast<int>(parse_int(origin, kv, prefix + "samples"));
      } else if (field == "noise") {
        spec.noise = parse_double(origin, kv, prefix + "noise");
      } else if (field == "classes") {
        spec.classes = static_cast<int>(parse_int(origin, kv, prefix + "classes"));
      } else if (field == "class_offset") {
        spec.class_offset =
            static_cast<int>(parse_int(origin, kv, prefix + "class_offset"));
      } else if (field == "rotation") {
        spec.rotation = parse_double(origin, kv, prefix + "rotation");
      } else if (field == "mean_shift") {
        spec.mean_shift = parse_double(origin, kv, prefix + "mean_shift");
      }
    }
    try {
      spec.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ": task." + std::to_string(index) + ": " +
                        e.what());
    }
    config.tasks.push_back(spec);
  }

  // Cross-field checks.
  if (config.widths.size() < 2) {
    throw ConfigError(origin + ": widths: need at least input and output");
  }
  for (int w : config.widths) {
    if (w < 1) throw ConfigError(origin + ": widths: every width must be >= 1");
  }
  if (config.activations.size() + 1 != config.widths.size()) {
    throw ConfigError(origin + ": activations: need exactly " +
                      std::to_string(config.widths.size() - 1) + " entries");
  }
  if (config.loss == Loss::CrossEntropy &&
      (config.activations.back() != Activation::Softmax ||
       config.widths.back() < 2)) {
    throw ConfigError(origin +
                      ": loss: cross_entropy needs a softmax output of "
                      "width >= 2");
  }
  int initial_total = 0;
  for (std::size_t i = 1; i < config.widths.size(); ++i) {
    initial_total += config.widths[i];
  }
  if (config.policy.max_total_neurons == 0) {
    config.policy.max_total_neurons = 4 * initial_total;
  }
  if (config.policy.max_total_neurons < initial_total) {
    throw ConfigError(origin +
                      ": max_total_neurons: below the initial neuron count");
  }
  if (!config.train_csv.empty() || !config.val_csv.empty()) {
    if (config.train_csv.empty() || config.val_csv.empty()) {
      throw ConfigError(origin +
                        ": train_csv/val_csv: set both or neither");
    }
    for (const auto& p : {config.train_csv, config.val_csv}) {
      if (!std::filesystem::exists(p)) {
        throw ConfigError(origin + ": referenced file does not exist: " + p);
      }
    }
  }
  config.policy.validate();
  return config;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path.filename().string());
}

namespace {

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  out << "widths=";
  for (std::size_t i = 0; i < c.widths.size(); ++i) {
    out << (i ? "," : "") << c.widths[i];
  }
  out << "\nactivations=";
  for (std::size_t i = 0; i < c.activations.size(); ++i) {
    out << (i ? "," : "") << to_string(c.activations[i]);
  }
  out << "\nloss=" << to_string(c.loss);
  out << "\nlearning_rate=" << format_double(c.learning_rate);
  out << "\nepochs_per_round=" << c.epochs_per_round;
  out << "\nmax_rounds=" << c.max_rounds;
  out << "\nseeds=";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) {
    out << (i ? "," : "") << c.seeds[i];
  }
  if (!c.arms.empty()) {
    out << "\narms=";
    for (std::size_t i = 0; i < c.arms.size(); ++i) {
      out << (i ? "," : "") << c.arms[i].name;
    }
  }
  out << "\ndelta=" << format_double(c.policy.delta);
  out << "\ngrowth_k=" << c.policy.growth_k;
  out << "\ninit_scale=" << format_double(c.policy.init_scale);
  out << "\npatience=" << c.policy.patience;
  out << "\ndropout_p=" << format_double(c.policy.dropout_p);
  out << "\ndropout_during_growth="
      << (c.policy.dropout_during_growth ? "true" : "false");
  out << "\nprune_criterion=" << to_string(c.policy.prune.kind);
  out << "\nprune_fraction=" << format_double(c.policy.prune.fraction);
  out << "\nmin_width=" << c.policy.prune.min_width;
  out << "\nmax_total_neurons=" << c.policy.max_total_neurons;
  out << "\nprobe_batch=" << c.policy.probe_batch;
  out << "\nlrp_epsilon=" << format_double(c.policy.lrp_epsilon);
  out << "\nout_dir=" << c.out_dir;
  out << "\ncheckpoint_interval=" << c.checkpoint_interval;
  if (!c.train_csv.empty()) out << "\ntrain_csv=" << c.train_csv;
  if (!c.val_csv.empty()) out << "\nval_csv=" << c.val_csv;
  for (std::size_t t = 0; t < c.tasks.size(); ++t) {
    const auto& spec = c.tasks[t];
    const std::string p = "\ntask." + std::to_string(t) + ".";
    out << p << "kind=" << to_string(spec.kind);
    out << p << "samples=" << spec.samples;
    out << p << "noise=" << format_double(spec.noise);
    out << p << "classes=" << spec.classes;
    out << p << "class_offset=" << spec.class_offset;
    out << p << "rotation=" << format_double(spec.rotation);
    out << p << "mean_shift=" << format_double(spec.mean_shift);
  }
  out << '\n';
  return out.str();
}

}  // namespace plasticnn
