#include "plasticnn/engine.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

namespace plasticnn {

namespace {

// One full-batch SGD epoch; returns the loss measured on this epoch's
// forward pass (before the update).
double train_one_epoch(Network<double>& net, const Eigen::MatrixXd& features,
                       const Eigen::MatrixXd& targets, const SgdOptions& opt,
                       const DropoutMask<double>* mask) {
  BatchTrace<double> trace = mask != nullptr
                                 ? masked_forward_batch(net, features, *mask)
                                 : forward_batch(net, features);
  const double loss = loss_eval_batch(trace.output(), targets, opt.loss);
  if (!std::isfinite(loss)) throw NumericError("training loss diverged");
  GradientSet<double> grads = backward(net, trace, targets, opt.loss);
  sgd_step(net, grads, opt.learning_rate);
  return loss;
}

Eigen::MatrixXd probe_columns(const Dataset& train, int probe_batch) {
  const Eigen::Index n =
      std::min<Eigen::Index>(probe_batch, train.features.cols());
  return train.features.leftCols(n);
}

// Growth layer: relevance argmax-over-mean when it speaks, otherwise the
// widest non-output layer. Returns -1 when the network has no growable
// layer at all.
int choose_growth_layer(const Network<double>& net, const Dataset& train,
                        const PlasticityPolicy& policy) {
  if (net.layers.size() < 2) return -1;
  RelevanceMap<double> map = average_relevance(
      net, Eigen::MatrixXd(probe_columns(train, policy.probe_batch)),
      policy.lrp_epsilon);
  if (auto chosen = select_growth_layer(layer_relevance(map))) {
    return *chosen;
  }
  int widest = 0;
  for (std::size_t l = 1; l + 1 < net.layers.size(); ++l) {
    if (net.layers[l].out_width() > net.layers[widest].out_width()) {
      widest = static_cast<int>(l);
    }
  }
  return widest;
}

struct GrowthStep {
  bool stopped = false;  // budget exhausted; growth cannot continue
  bool grew = false;
};

// Trigger check and at most one grow event. New data outranks convergence;
// the count is clamped to the remaining budget.
GrowthStep maybe_grow(Network<double>& net, const PlasticityPolicy& policy,
                      const Dataset& train, const LossHistory& history,
                      MutationLog& log, SplitRng& growth_rng,
                      NewDataCursor* cursor, int epoch) {
  TriggerCause cause = TriggerCause::None;
  if (cursor != nullptr &&
      new_data_trigger(cursor->arrived, cursor->consumed).fired) {
    cause = TriggerCause::NewData;
    cursor->consumed = cursor->arrived;
  } else if (history.train_loss.size() >= 2 &&
             convergence_trigger(history, policy.delta).fired) {
    cause = TriggerCause::Convergence;
  }
  if (cause == TriggerCause::None) return {};

  const int budget_left =
      policy.max_total_neurons - static_cast<int>(total_neurons(net));
  if (budget_left <= 0) return {.stopped = true, .grew = false};

  const int layer = choose_growth_layer(net, train, policy);
  if (layer < 0) return {};  // nothing growable (single-layer network)
  const int width = static_cast<int>(net.layers[layer].out_width());
  const int k = std::min(policy.growth_count(width), budget_left);
  log.set_epoch(epoch);
  grow_neurons(net, layer, k, policy.init_scale, growth_rng, log,
               cause == TriggerCause::NewData ? MutationTrigger::NewData
                                              : MutationTrigger::Convergence);
  return {.stopped = false, .grew = true};
}

DropoutMask<double> mask_from_selection(
    const Network<double>& net, const std::vector<std::vector<int>>& selected) {
  DropoutMask<double> mask;
  mask.rate = 0.0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Eigen::VectorXd keep = Eigen::VectorXd::Ones(net.layers[l].out_width());
    if (l < selected.size()) {
      for (int idx : selected[l]) keep[idx] = 0.0;
    }
    mask.keep.push_back(std::move(keep));
  }
  return mask;
}

void round_end(const LoopContext& ctx, int epoch, const Network<double>& net,
               const MutationLog& log) {
  if (ctx.hooks != nullptr && ctx.hooks->on_round_end) {
    ctx.hooks->on_round_end(epoch, net, log);
  }
}

}  // namespace

double validation_criterion(const Network<double>& net, const Dataset& val,
                            Loss loss, double dropout_p) {
  if (val.classification) {
    if (dropout_p <= 0.0) return accuracy(net, val);
    const Eigen::MatrixXd out =
        inference_forward_scaled_batch(net, val.features, dropout_p);
    Eigen::Index correct = 0;
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      int predicted;
      if (out.rows() == 1) {
        predicted = out(0, c) >= 0.5 ? 1 : 0;
      } else {
        Eigen::Index arg = 0;
        out.col(c).maxCoeff(&arg);
        predicted = static_cast<int>(arg);
      }
      if (predicted == val.labels[c]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(out.cols());
  }
  const Eigen::MatrixXd out =
      dropout_p > 0.0
          ? inference_forward_scaled_batch(net, val.features, dropout_p)
          : forward_batch(net, val.features).output();
  return -loss_eval_batch(Eigen::MatrixXd(out),
                          targets_for(val, net.output_width()), loss);
}

LossHistory static_loop(Network<double>& net, const Dataset& train,
                        const Dataset& val, const SgdOptions& opt,
                        double dropout_p, SplitRng* dropout_rng,
                        const LoopContext& ctx) {
  if (dropout_p > 0.0 && dropout_rng == nullptr) {
    throw PolicyError("dropout training needs a random source");
  }
  LossHistory history;
  int epoch = ctx.start_epoch;
  for (int round = 0; round < opt.max_rounds; ++round) {
    const Eigen::MatrixXd targets = targets_for(train, net.output_width());
    for (int e = 0; e < opt.epochs_per_round; ++e) {
      std::optional<DropoutMask<double>> mask;
      if (dropout_p > 0.0) {
        mask = sample_dropout_mask(net, dropout_p, *dropout_rng);
      }
      const double loss = train_one_epoch(net, train.features, targets, opt,
                                          mask ? &*mask : nullptr);
      history.record_train(++epoch, loss);
    }
    history.record_val(epoch,
                       validation_criterion(net, val, opt.loss, dropout_p));
    round_end(ctx, epoch, net, MutationLog{});
  }
  history.stop_cause = "rounds";
  return history;
}

LossHistory dropin_loop(Network<double>& net, const PlasticityPolicy& policy,
                        const Dataset& train, const Dataset& val,
                        const SgdOptions& opt, MutationLog& log,
                        SplitRng& growth_rng, SplitRng& dropout_rng,
                        const LoopContext& ctx) {
  policy.validate();
  LossHistory history;
  int epoch = ctx.start_epoch;
  const bool random_dropout =
      policy.dropout_during_growth && policy.dropout_p > 0.0;
  for (int round = 0; round < opt.max_rounds; ++round) {
    const Eigen::MatrixXd targets = targets_for(train, net.output_width());
    for (int e = 0; e < opt.epochs_per_round; ++e) {
      std::optional<DropoutMask<double>> mask;
      if (random_dropout) {
        mask = sample_dropout_mask(net, policy.dropout_p, dropout_rng);
      }
      const double loss = train_one_epoch(net, train.features, targets, opt,
                                          mask ? &*mask : nullptr);
      history.record_train(++epoch, loss);
    }
    // Validation reads use all neurons, unmasked and unscaled.
    history.record_val(epoch, validation_criterion(net, val, opt.loss));

    const GrowthStep step = maybe_grow(net, policy, train, history, log,
                                       growth_rng, ctx.cursor, epoch);
    round_end(ctx, epoch, net, log);
    if (step.stopped) {
      history.stop_cause = "budget";
      break;
    }
    if (validation_monitor(history, policy.patience) == MonitorDecision::Stop) {
      history.stop_cause = "validation";
      break;
    }
  }
  if (history.stop_cause.empty()) history.stop_cause = "rounds";
  return history;
}

LossHistory neuroplasticity_loop(Network<double>& net,
                                 const PlasticityPolicy& policy,
                                 const Dataset& train, const Dataset& val,
                                 const SgdOptions& opt, MutationLog& log,
                                 SplitRng& growth_rng, SplitRng& dropout_rng,
                                 const LoopContext& ctx) {
  policy.validate();
  LossHistory history;
  int epoch = ctx.start_epoch;
  const bool random_dropout =
      policy.dropout_during_growth && policy.dropout_p > 0.0;
  bool growing = true;
  std::optional<DropoutMask<double>> relevance_mask;

  for (int round = 0; round < opt.max_rounds; ++round) {
    if (!growing) {
      // Mask phase: a single validation decline re-derives the mask from
      // the least-relevant neurons.
      const auto& v = history.val_criterion;
      if (v.size() >= 2 && v[v.size() - 1] < v[v.size() - 2]) {
        RelevanceMap<double> map = average_relevance(
            net, Eigen::MatrixXd(probe_columns(train, policy.probe_batch)),
            policy.lrp_epsilon);
        const auto selected = select_prunable_neurons(
            map, policy.prune.fraction, policy.prune.min_width);
        log.set_epoch(epoch);
        for (std::size_t l = 0; l < selected.size(); ++l) {
          if (!selected[l].empty()) {
            log.append_mask(static_cast<int>(l), selected[l],
                            MutationTrigger::Validation);
          }
        }
        if (ctx.hooks != nullptr && ctx.hooks->on_mask) {
          ctx.hooks->on_mask(epoch, selected, map);
        }
        relevance_mask = mask_from_selection(net, selected);
      }
    }

    const Eigen::MatrixXd targets = targets_for(train, net.output_width());
    for (int e = 0; e < opt.epochs_per_round; ++e) {
      std::optional<DropoutMask<double>> random_mask;
      const DropoutMask<double>* mask = nullptr;
      if (growing && random_dropout) {
        random_mask = sample_dropout_mask(net, policy.dropout_p, dropout_rng);
        mask = &*random_mask;
      } else if (!growing && relevance_mask) {
        mask = &*relevance_mask;
      }
      const double loss =
          train_one_epoch(net, train.features, targets, opt, mask);
      history.record_train(++epoch, loss);
    }
    history.record_val(epoch, validation_criterion(net, val, opt.loss));

    if (growing) {
      const GrowthStep step = maybe_grow(net, policy, train, history, log,
                                         growth_rng, ctx.cursor, epoch);
      if (step.stopped) {
        growing = false;
        history.stop_cause = "budget";
      } else if (validation_monitor(history, policy.patience) ==
                 MonitorDecision::Stop) {
        growing = false;
        history.stop_cause = "validation";
      }
    }
    round_end(ctx, epoch, net, log);
  }
  if (history.stop_cause.empty()) history.stop_cause = "rounds";
  return history;
}

LossHistory prune_retrain_loop(Network<double>& net,
                               const PlasticityPolicy& policy,
                               const Dataset& train, const Dataset& val,
                               const SgdOptions& opt, MutationLog& log,
                               const LoopContext& ctx) {
  policy.validate();
  LossHistory history;
  int epoch = ctx.start_epoch;
  const int first_phase = std::max(1, opt.max_rounds / 2);

  auto run_rounds = [&](int rounds) {
    for (int round = 0; round < rounds; ++round) {
      const Eigen::MatrixXd targets = targets_for(train, net.output_width());
      for (int e = 0; e < opt.epochs_per_round; ++e) {
        history.record_train(
            ++epoch, train_one_epoch(net, train.features, targets, opt,
                                     nullptr));
      }
      history.record_val(epoch, validation_criterion(net, val, opt.loss));
      round_end(ctx, epoch, net, log);
    }
  };

  run_rounds(first_phase);

  const Eigen::MatrixXd probe = probe_columns(train, policy.probe_batch);
  PruneStats stats;
  switch (policy.prune.kind) {
    case PruneCriterionKind::Magnitude:
      stats = std::monostate{};
      break;
    case PruneCriterionKind::Activation:
      stats = collect_activation_stats(net, probe);
      break;
    case PruneCriterionKind::Gradient: {
      Dataset probe_set = train;
      probe_set.features = probe;
      if (train.classification) {
        probe_set.labels = train.labels.head(probe.cols());
      } else {
        probe_set.targets = train.targets.leftCols(probe.cols());
      }
      stats = accumulate_abs_gradients(
          net, probe, targets_for(probe_set, net.output_width()), opt.loss);
      break;
    }
    case PruneCriterionKind::Relevance:
      stats = average_relevance(net, probe, policy.lrp_epsilon);
      break;
  }
  const auto candidates = pruning_candidates(net, stats, policy.prune);
  log.set_epoch(epoch);
  for (std::size_t l = 0; l < candidates.size(); ++l) {
    if (!candidates[l].empty()) {
      prune_neurons(net, static_cast<int>(l), candidates[l], log,
                    MutationTrigger::Validation);
    }
  }

  run_rounds(opt.max_rounds - first_phase);
  history.stop_cause = "rounds";
  return history;
}

}  // namespace plasticnn
