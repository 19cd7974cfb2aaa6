// Every tunable the plasticity loops consume, with validated ranges.
#pragma once

#include <cmath>

#include "plasticnn/errors.hpp"
#include "plasticnn/grow_prune.hpp"

namespace plasticnn {

struct PlasticityPolicy {
  double delta = 1e-3;       // convergence threshold on |loss_e - loss_{e-1}|
  int growth_k = 0;          // neurons per grow event; 0 = proportional rule
  double init_scale = 0.1;   // new-neuron incoming weight range
  int patience = 2;          // consecutive validation declines that stop growth
  double dropout_p = 0.0;    // Bernoulli drop rate for random dropout
  bool dropout_during_growth = false;
  PruneCriterion prune{};
  int max_total_neurons = 0;  // growth budget over all non-input neurons
  int probe_batch = 32;       // samples used for relevance / pruning stats
  double lrp_epsilon = 1e-6;

  bool operator==(const PlasticityPolicy&) const = default;

  /// Neurons to add in one grow event on a layer of the given width:
  /// a fixed count when growth_k > 0, otherwise max(1, ceil(width/4)).
  int growth_count(int layer_width) const {
    if (growth_k > 0) return growth_k;
    return std::max(1, static_cast<int>(std::ceil(0.25 * layer_width)));
  }

  void validate() const {
    if (delta < 0.0) throw ConfigError("delta: must be >= 0");
    if (growth_k < 0) throw ConfigError("growth_k: must be >= 0");
    if (init_scale <= 0.0) throw ConfigError("init_scale: must be > 0");
    if (patience < 1) throw ConfigError("patience: must be >= 1");
    if (dropout_p < 0.0 || dropout_p >= 1.0) {
      throw ConfigError("dropout_p: must lie in [0,1)");
    }
    prune.validate();
    if (max_total_neurons < 1) {
      throw ConfigError("max_total_neurons: must be >= 1");
    }
    if (probe_batch < 1) throw ConfigError("probe_batch: must be >= 1");
    if (lrp_epsilon <= 0.0) throw ConfigError("lrp_epsilon: must be > 0");
  }
};

}  // namespace plasticnn
