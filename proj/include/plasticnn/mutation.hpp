// Append-only record of structural events (grow / prune / mask) with epoch
// stamps. Replaying the grow/prune events against the initial layer widths
// must reproduce the final widths, which makes architecture history
// auditable from the persisted log alone.
#pragma once

#include <string>
#include <vector>

#include "plasticnn/errors.hpp"

namespace plasticnn {

enum class MutationKind { Grow, Prune, Mask };
enum class MutationTrigger { Convergence, NewData, Validation };

inline std::string to_string(MutationKind k) {
  switch (k) {
    case MutationKind::Grow: return "grow";
    case MutationKind::Prune: return "prune";
    case MutationKind::Mask: return "mask";
  }
  return "grow";
}

inline MutationKind mutation_kind_from_string(const std::string& s) {
  if (s == "grow") return MutationKind::Grow;
  if (s == "prune") return MutationKind::Prune;
  if (s == "mask") return MutationKind::Mask;
  throw ParseError("unknown mutation kind '" + s + "'");
}

inline std::string to_string(MutationTrigger t) {
  switch (t) {
    case MutationTrigger::Convergence: return "convergence";
    case MutationTrigger::NewData: return "new_data";
    case MutationTrigger::Validation: return "validation";
  }
  return "convergence";
}

inline MutationTrigger mutation_trigger_from_string(const std::string& s) {
  if (s == "convergence") return MutationTrigger::Convergence;
  if (s == "new_data") return MutationTrigger::NewData;
  if (s == "validation") return MutationTrigger::Validation;
  throw ParseError("unknown mutation trigger '" + s + "'");
}

struct MutationEvent {
  int epoch = 0;
  MutationKind kind = MutationKind::Grow;
  int layer = 0;
  int count = 0;             // grow: neurons added
  std::vector<int> indices;  // prune/mask: affected neuron indices
  MutationTrigger trigger = MutationTrigger::Convergence;

  bool operator==(const MutationEvent&) const = default;
};

class MutationLog {
 public:
  /// Moves the epoch cursor; events appended afterwards carry this stamp.
  /// Epochs never go backwards.
  void set_epoch(int epoch) {
    if (epoch < epoch_) {
      throw PolicyError("mutation log epoch cursor may not decrease");
    }
    epoch_ = epoch;
  }
  int epoch() const { return epoch_; }

  void append_grow(int layer, int count, MutationTrigger trigger) {
    events_.push_back({epoch_, MutationKind::Grow, layer, count, {}, trigger});
  }
  void append_prune(int layer, std::vector<int> indices,
                    MutationTrigger trigger) {
    events_.push_back({epoch_, MutationKind::Prune, layer, 0,
                       std::move(indices), trigger});
  }
  void append_mask(int layer, std::vector<int> indices,
                   MutationTrigger trigger) {
    events_.push_back(
        {epoch_, MutationKind::Mask, layer, 0, std::move(indices), trigger});
  }

  const std::vector<MutationEvent>& events() const { return events_; }
  bool empty() const { return events_.empty(); }

  /// Grow events only, in order; handy for trigger audits.
  std::vector<MutationEvent> grow_events() const {
    std::vector<MutationEvent> out;
    for (const auto& ev : events_) {
      if (ev.kind == MutationKind::Grow) out.push_back(ev);
    }
    return out;
  }

 private:
  int epoch_ = 0;
  std::vector<MutationEvent> events_;
};

/// Applies grow/prune events to the given initial widths. Mask events do
/// not change widths. Throws if an event refers to a layer that does not
/// exist or would empty one.
inline std::vector<int> replay_widths(std::vector<int> widths,
                                      const std::vector<MutationEvent>& events) {
  for (const auto& ev : events) {
    if (ev.kind == MutationKind::Mask) continue;
    if (ev.layer < 0 || ev.layer >= static_cast<int>(widths.size())) {
      throw ParseError("mutation event references layer " +
                       std::to_string(ev.layer) + " outside the network");
    }
    if (ev.kind == MutationKind::Grow) {
      widths[ev.layer] += ev.count;
    } else {
      widths[ev.layer] -= static_cast<int>(ev.indices.size());
      if (widths[ev.layer] < 1) {
        throw LayerCollapseError("replay empties layer " +
                                 std::to_string(ev.layer));
      }
    }
  }
  return widths;
}

}  // namespace plasticnn
