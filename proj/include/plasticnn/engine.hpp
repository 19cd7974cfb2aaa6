// Training loops. All of them run full-batch SGD in rounds of
// epochs_per_round epochs with a validation read after each round;
// they differ in which structural operators run between rounds:
//
//   static_loop           plain SGD, no structural change
//   dropin_loop           grows neurons when the convergence or new-data
//                         trigger fires; stops on validation declines or
//                         an exhausted growth budget
//   neuroplasticity_loop  dropin growth phase, then relevance-guided
//                         activation masking whenever validation declines
//   prune_retrain_loop    trains, prunes once by the configured criterion,
//                         retrains
//
// Loops own their network exclusively and do no file I/O; callers persist
// results and can observe rounds/masks through LoopHooks.
#pragma once

#include <functional>
#include <vector>

#include "plasticnn/dataset.hpp"
#include "plasticnn/dropout.hpp"
#include "plasticnn/grow_prune.hpp"
#include "plasticnn/network.hpp"
#include "plasticnn/policy.hpp"
#include "plasticnn/relevance.hpp"
#include "plasticnn/rng.hpp"
#include "plasticnn/triggers.hpp"

namespace plasticnn {

struct SgdOptions {
  Loss loss = Loss::MeanSquaredError;
  double learning_rate = 0.1;
  int epochs_per_round = 50;
  int max_rounds = 20;

  bool operator==(const SgdOptions&) const = default;
};

struct LoopHooks {
  // Called after each round with the global epoch.
  std::function<void(int epoch, const Network<double>& net,
                     const MutationLog& log)>
      on_round_end;
  // Called when a relevance mask is derived, with the map it came from.
  std::function<void(int epoch, const std::vector<std::vector<int>>& masked,
                     const RelevanceMap<double>& map)>
      on_mask;
};

struct LoopContext {
  int start_epoch = 0;
  NewDataCursor* cursor = nullptr;
  LoopHooks* hooks = nullptr;
};

/// Validation criterion: accuracy for classification sets, negative loss
/// otherwise. dropout_p > 0 evaluates through the (1-p)-scaled inference
/// pass instead of the plain one.
double validation_criterion(const Network<double>& net, const Dataset& val,
                            Loss loss, double dropout_p = 0.0);

LossHistory static_loop(Network<double>& net, const Dataset& train,
                        const Dataset& val, const SgdOptions& opt,
                        double dropout_p = 0.0, SplitRng* dropout_rng = nullptr,
                        const LoopContext& ctx = {});

LossHistory dropin_loop(Network<double>& net, const PlasticityPolicy& policy,
                        const Dataset& train, const Dataset& val,
                        const SgdOptions& opt, MutationLog& log,
                        SplitRng& growth_rng, SplitRng& dropout_rng,
                        const LoopContext& ctx = {});

LossHistory neuroplasticity_loop(Network<double>& net,
                                 const PlasticityPolicy& policy,
                                 const Dataset& train, const Dataset& val,
                                 const SgdOptions& opt, MutationLog& log,
                                 SplitRng& growth_rng, SplitRng& dropout_rng,
                                 const LoopContext& ctx = {});

LossHistory prune_retrain_loop(Network<double>& net,
                               const PlasticityPolicy& policy,
                               const Dataset& train, const Dataset& val,
                               const SgdOptions& opt, MutationLog& log,
                               const LoopContext& ctx = {});

}  // namespace plasticnn
