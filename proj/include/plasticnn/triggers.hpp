// Training history and the three decisions the plasticity loops make from
// it: the convergence trigger |loss_e - loss_{e-1}| < delta, the new-data
// trigger, and the validation monitor that stops growth after enough
// consecutive declines.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "plasticnn/errors.hpp"

namespace plasticnn {

struct LossHistory {
  std::vector<int> epochs;            // global epoch ids, ascending
  std::vector<double> train_loss;
  std::vector<int> val_epochs;        // epoch at which each criterion was read
  std::vector<double> val_criterion;  // accuracy, or -loss for regression
  std::string stop_cause;             // set by the loops: "", "validation",
                                      // "budget", "rounds"

  void record_train(int epoch, double loss) {
    if (!epochs.empty() && epoch <= epochs.back()) {
      throw PolicyError("training epochs must be recorded in ascending order");
    }
    if (!std::isfinite(loss)) throw NumericError("non-finite training loss");
    epochs.push_back(epoch);
    train_loss.push_back(loss);
  }

  void record_val(int epoch, double criterion) {
    if (!std::isfinite(criterion)) {
      throw NumericError("non-finite validation criterion");
    }
    val_epochs.push_back(epoch);
    val_criterion.push_back(criterion);
  }
};

enum class TriggerCause { None, Convergence, NewData };

struct TriggerDecision {
  bool fired = false;
  TriggerCause cause = TriggerCause::None;
};

/// Fires when the last two recorded training losses differ by less than
/// delta. Needs at least two epochs of history.
inline TriggerDecision convergence_trigger(const LossHistory& history,
                                           double delta) {
  if (history.train_loss.size() < 2) {
    throw NotEnoughHistoryError(
        "convergence trigger needs at least two recorded epochs");
  }
  const double latest = history.train_loss[history.train_loss.size() - 1];
  const double previous = history.train_loss[history.train_loss.size() - 2];
  if (std::abs(latest - previous) < delta) {
    return {true, TriggerCause::Convergence};
  }
  return {false, TriggerCause::None};
}

/// Position of a task/data stream relative to what the consumer has
/// integrated so far.
struct NewDataCursor {
  std::int64_t arrived = 0;
  std::int64_t consumed = 0;
};

/// Fires while an unconsumed segment exists.
inline TriggerDecision new_data_trigger(std::int64_t stream_position,
                                        std::int64_t last_consumed) {
  if (stream_position > last_consumed) return {true, TriggerCause::NewData};
  return {false, TriggerCause::None};
}

enum class MonitorDecision { Continue, Stop };

/// Stops once the tail of the validation series shows `patience`
/// consecutive strict declines.
inline MonitorDecision validation_monitor(const LossHistory& history,
                                          int patience) {
  if (history.val_criterion.empty()) {
    throw NotEnoughHistoryError("validation monitor needs at least one record");
  }
  if (patience < 1) throw PolicyError("patience must be >= 1");
  const auto& v = history.val_criterion;
  int declines = 0;
  for (std::size_t i = v.size(); i-- > 1;) {
    if (v[i] < v[i - 1]) {
      ++declines;
      if (declines >= patience) return MonitorDecision::Stop;
    } else {
      break;
    }
  }
  return MonitorDecision::Continue;
}

}  // namespace plasticnn
