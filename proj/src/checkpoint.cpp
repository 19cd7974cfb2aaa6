#include "plasticnn/checkpoint.hpp"

#include <fstream>
#include <string>

#include "json.hpp"

namespace plasticnn {

using nlohmann::json;

namespace {

json event_to_json(const MutationEvent& ev) {
  json j;
  j["epoch"] = ev.epoch;
  j["kind"] = to_string(ev.kind);
  j["layer"] = ev.layer;
  j["trigger"] = to_string(ev.trigger);
  if (ev.kind == MutationKind::Grow) {
    j["count"] = ev.count;
  } else {
    j["indices"] = ev.indices;
  }
  return j;
}

MutationEvent event_from_json(const json& j) {
  MutationEvent ev;
  try {
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
  } catch (const json::exception& e) {
    throw ParseError(std::string("mutation event: ") + e.what());
  }
  return ev;
}

MutationLog log_from_events(const std::vector<MutationEvent>& events) {
  MutationLog log;
  for (const auto& ev : events) {
    log.set_epoch(ev.epoch);
    switch (ev.kind) {
      case MutationKind::Grow:
        log.append_grow(ev.layer, ev.count, ev.trigger);
        break;
      case MutationKind::Prune:
        log.append_prune(ev.layer, ev.indices, ev.trigger);
        break;
      case MutationKind::Mask:
        log.append_mask(ev.layer, ev.indices, ev.trigger);
        break;
    }
  }
  return log;
}

}  // namespace

void save_checkpoint(const Network<double>& net, const MutationLog& log,
                     const std::filesystem::path& path) {
  json doc;
  doc["version"] = 1;
  doc["input_width"] = static_cast<std::int64_t>(net.input_width);
  doc["seed"] = net.seed;
  doc["layers"] = json::array();
  for (const auto& layer : net.layers) {
    json jl;
    jl["out"] = static_cast<std::int64_t>(layer.out_width());
    jl["in"] = static_cast<std::int64_t>(layer.in_width());
    jl["activation"] = to_string(layer.activation);
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(layer.weights.size()));
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
        flat.push_back(layer.weights(i, j));
      }
    }
    jl["weights"] = flat;
    jl["bias"] = std::vector<double>(layer.bias.data(),
                                     layer.bias.data() + layer.bias.size());
    doc["layers"].push_back(std::move(jl));
  }
  doc["mutations"] = json::array();
  for (const auto& ev : log.events()) {
    doc["mutations"].push_back(event_to_json(ev));
  }

  std::ofstream out(path);
  if (!out) {
    throw ParseError("cannot open checkpoint for writing: " + path.string());
  }
  out << doc.dump(2) << '\n';
}

std::pair<Network<double>, MutationLog> load_checkpoint(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open checkpoint: " + path.string());
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("checkpoint parse error: " + std::string(e.what()));
  }

  Network<double> net;
  try {
    if (doc.at("version").get<int>() != 1) {
      throw ParseError("unsupported checkpoint version");
    }
    net.input_width = doc.at("input_width").get<std::int64_t>();
    net.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& jl : doc.at("layers")) {
      DenseLayer<double> layer;
      const Eigen::Index out = jl.at("out").get<std::int64_t>();
      const Eigen::Index in = jl.at("in").get<std::int64_t>();
      layer.activation =
          activation_from_string(jl.at("activation").get<std::string>());
      const auto flat = jl.at("weights").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(flat.size()) != out * in) {
        throw ParseError("field 'weights': expected " +
                         std::to_string(out * in) + " entries, got " +
                         std::to_string(flat.size()));
      }
      layer.weights.resize(out, in);
      for (Eigen::Index i = 0; i < out; ++i) {
        for (Eigen::Index j = 0; j < in; ++j) {
          layer.weights(i, j) = flat[static_cast<std::size_t>(i * in + j)];
        }
      }
      const auto bias = jl.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(bias.size()) != out) {
        throw ParseError("field 'bias': length does not match 'out'");
      }
      layer.bias =
          Eigen::Map<const Eigen::VectorXd>(bias.data(), out);
      net.layers.push_back(std::move(layer));
    }
  } catch (const json::exception& e) {
    throw ParseError("checkpoint schema error: " + std::string(e.what()));
  }
  validate(net);

  std::vector<MutationEvent> events;
  try {
    for (const auto& je : doc.at("mutations")) {
      events.push_back(event_from_json(je));
    }
  } catch (const json::exception& e) {
    throw ParseError("checkpoint schema error: " + std::string(e.what()));
  }
  return {std::move(net), log_from_events(events)};
}

void save_mutation_log_jsonl(const MutationLog& log,
                             const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw ParseError("cannot open mutation log for writing: " + path.string());
  }
  for (const auto& ev : log.events()) {
    out << event_to_json(ev).dump() << '\n';
  }
}

MutationLog load_mutation_log_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open mutation log: " + path.string());
  }
  std::vector<MutationEvent> events;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      events.push_back(event_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ParseError("mutation log line " + std::to_string(line_no) + ": " +
                       e.what());
    }
  }
  return log_from_events(events);
}

}  // namespace plasticnn
