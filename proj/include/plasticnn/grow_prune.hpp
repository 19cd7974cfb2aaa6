// Structural mutation operators and pruning-candidate selection.
//
// Growth appends k rows to a layer (random incoming weights, zero bias)
// and k zero columns to the next layer, so the network's input-output map
// is unchanged at the instant of growth. Pruning permanently removes rows
// and the matching next-layer columns. Candidate selection reduces each
// criterion to one nonnegative score per neuron and takes the lowest
// scores per layer, never cutting below the minimum width.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <variant>
#include <vector>

#include "plasticnn/backward.hpp"
#include "plasticnn/mutation.hpp"
#include "plasticnn/network.hpp"
#include "plasticnn/relevance.hpp"
#include "plasticnn/rng.hpp"

namespace plasticnn {

/// Per-neuron mean absolute activation over a probe batch.
template <typename Scalar>
struct ActivationStats {
  std::vector<VectorX<Scalar>> mean_abs;
};

enum class PruneCriterionKind { Magnitude, Activation, Gradient, Relevance };

inline std::string to_string(PruneCriterionKind k) {
  switch (k) {
    case PruneCriterionKind::Magnitude: return "magnitude";
    case PruneCriterionKind::Activation: return "activation";
    case PruneCriterionKind::Gradient: return "gradient";
    case PruneCriterionKind::Relevance: return "relevance";
  }
  return "magnitude";
}

inline PruneCriterionKind prune_criterion_from_string(const std::string& s) {
  if (s == "magnitude") return PruneCriterionKind::Magnitude;
  if (s == "activation") return PruneCriterionKind::Activation;
  if (s == "gradient") return PruneCriterionKind::Gradient;
  if (s == "relevance") return PruneCriterionKind::Relevance;
  throw ParseError("unknown prune criterion '" + s + "'");
}

struct PruneCriterion {
  PruneCriterionKind kind = PruneCriterionKind::Magnitude;
  double fraction = 0.25;
  int min_width = 1;

  bool operator==(const PruneCriterion&) const = default;

  void validate() const {
    if (!(fraction > 0.0 && fraction < 1.0)) {
      throw ConfigError("prune_fraction: must lie in (0,1)");
    }
    if (min_width < 1) throw ConfigError("min_width: must be >= 1");
  }
};

/// Adds k neurons to a non-output layer: k new rows with incoming weights
/// uniform in (-init_scale, init_scale) and zero bias, plus k zero columns
/// in the next layer, which keeps every forward output bit-identical.
template <typename Scalar>
void grow_neurons(Network<Scalar>& net, int layer, int k, double init_scale,
                  SplitRng& rng, MutationLog& log, MutationTrigger trigger) {
  if (layer < 0 || layer >= static_cast<int>(net.layers.size())) {
    throw DimensionError("grow: layer index out of range");
  }
  if (layer + 1 == static_cast<int>(net.layers.size())) {
    throw PolicyError("grow: the output layer cannot be grown here");
  }
  if (k < 1) throw PolicyError("grow: k must be >= 1");

  DenseLayer<Scalar>& grown = net.layers[layer];
  const Eigen::Index old_out = grown.out_width();
  grown.weights.conservativeResize(old_out + k, Eigen::NoChange);
  grown.bias.conservativeResize(old_out + k);
  for (Eigen::Index i = old_out; i < old_out + k; ++i) {
    for (Eigen::Index j = 0; j < grown.in_width(); ++j) {
      grown.weights(i, j) =
          static_cast<Scalar>(rng.uniform(-init_scale, init_scale));
    }
    grown.bias[i] = Scalar(0);
  }

  DenseLayer<Scalar>& next = net.layers[layer + 1];
  next.weights.conservativeResize(Eigen::NoChange, old_out + k);
  next.weights.rightCols(k).setZero();

  log.append_grow(layer, k, trigger);
}

/// Appends k output neurons (random incoming weights, zero bias). The one
/// sanctioned use is accommodating a wider label space on new-data
/// arrival; there is no next layer to keep quiet, so the new outputs are
/// live immediately.
template <typename Scalar>
void grow_output_neurons(Network<Scalar>& net, int k, double init_scale,
                         SplitRng& rng, MutationLog& log,
                         MutationTrigger trigger = MutationTrigger::NewData) {
  if (k < 1) throw PolicyError("grow: k must be >= 1");
  DenseLayer<Scalar>& out = net.layers.back();
  const Eigen::Index old_out = out.out_width();
  out.weights.conservativeResize(old_out + k, Eigen::NoChange);
  out.bias.conservativeResize(old_out + k);
  for (Eigen::Index i = old_out; i < old_out + k; ++i) {
    for (Eigen::Index j = 0; j < out.in_width(); ++j) {
      out.weights(i, j) =
          static_cast<Scalar>(rng.uniform(-init_scale, init_scale));
    }
    out.bias[i] = Scalar(0);
  }
  log.append_grow(static_cast<int>(net.layers.size()) - 1, k, trigger);
}

/// Permanently removes the given neurons of a layer (rows there, columns
/// in the next layer). Refuses to empty the layer.
template <typename Scalar>
void prune_neurons(Network<Scalar>& net, int layer,
                   const std::vector<int>& indices, MutationLog& log,
                   MutationTrigger trigger = MutationTrigger::Validation) {
  if (layer < 0 || layer >= static_cast<int>(net.layers.size())) {
    throw DimensionError("prune: layer index out of range");
  }
  if (indices.empty()) return;
  DenseLayer<Scalar>& pruned = net.layers[layer];
  const Eigen::Index width = pruned.out_width();
  std::vector<int> sorted = indices;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (sorted.front() < 0 || sorted.back() >= width) {
    throw DimensionError("prune: neuron index out of range");
  }
  if (width - static_cast<Eigen::Index>(sorted.size()) < 1) {
    throw LayerCollapseError("prune would empty layer " +
                             std::to_string(layer));
  }

  std::vector<Eigen::Index> kept;
  kept.reserve(width - sorted.size());
  for (Eigen::Index i = 0, s = 0; i < width; ++i) {
    if (s < static_cast<Eigen::Index>(sorted.size()) &&
        sorted[static_cast<std::size_t>(s)] == i) {
      ++s;
      continue;
    }
    kept.push_back(i);
  }

  MatrixX<Scalar> new_w(kept.size(), pruned.in_width());
  VectorX<Scalar> new_b(kept.size());
  for (std::size_t r = 0; r < kept.size(); ++r) {
    new_w.row(r) = pruned.weights.row(kept[r]);
    new_b[r] = pruned.bias[kept[r]];
  }
  pruned.weights = std::move(new_w);
  pruned.bias = std::move(new_b);

  if (layer + 1 < static_cast<int>(net.layers.size())) {
    DenseLayer<Scalar>& next = net.layers[layer + 1];
    MatrixX<Scalar> next_w(next.out_width(), kept.size());
    for (std::size_t c = 0; c < kept.size(); ++c) {
      next_w.col(c) = next.weights.col(kept[c]);
    }
    next.weights = std::move(next_w);
  }

  log.append_prune(layer, sorted, trigger);
}

/// Mean |activation| per neuron over the probe batch.
template <typename Scalar>
ActivationStats<Scalar> collect_activation_stats(const Network<Scalar>& net,
                                                 const MatrixX<Scalar>& inputs) {
  auto trace = forward_batch(net, inputs);
  ActivationStats<Scalar> stats;
  for (const auto& h : trace.post) {
    stats.mean_abs.push_back(h.cwiseAbs().rowwise().mean());
  }
  return stats;
}

/// Sum of |per-sample gradients| over the probe batch, shaped like the
/// network. Per-sample to keep sign cancellation out of the score.
template <typename Scalar>
GradientSet<Scalar> accumulate_abs_gradients(const Network<Scalar>& net,
                                             const MatrixX<Scalar>& inputs,
                                             const MatrixX<Scalar>& targets,
                                             Loss loss) {
  GradientSet<Scalar> acc = zero_gradients(net);
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
    auto trace = forward(net, VectorX<Scalar>(inputs.col(c)));
    auto grads =
        backward(net, trace, VectorX<Scalar>(targets.col(c)), loss);
    for (std::size_t l = 0; l < acc.weights.size(); ++l) {
      acc.weights[l] += grads.weights[l].cwiseAbs();
      acc.bias[l] += grads.bias[l].cwiseAbs();
    }
  }
  return acc;
}

using PruneStats = std::variant<std::monostate, ActivationStats<double>,
                                GradientSet<double>, RelevanceMap<double>>;

/// Per-layer candidate sets for permanent pruning under the chosen
/// criterion. Scores: magnitude = L2 norm of the neuron's incoming-weight
/// row (needs no stats); activation = mean |activation|; gradient = L1 sum
/// of the neuron's accumulated incoming-weight |gradients|; relevance =
/// |relevance|. The stats object must match the criterion. The output
/// layer is never a candidate.
inline std::vector<std::vector<int>> pruning_candidates(
    const Network<double>& net, const PruneStats& stats,
    const PruneCriterion& criterion) {
  criterion.validate();
  const std::size_t layer_count = net.layers.size();
  std::vector<std::vector<int>> selected(layer_count);

  auto scores_for = [&](std::size_t l) -> Eigen::VectorXd {
    switch (criterion.kind) {
      case PruneCriterionKind::Magnitude:
        if (!std::holds_alternative<std::monostate>(stats)) {
          throw PolicyError("magnitude pruning takes no stats");
        }
        return net.layers[l].weights.rowwise().norm();
      case PruneCriterionKind::Activation: {
        const auto* a = std::get_if<ActivationStats<double>>(&stats);
        if (a == nullptr || a->mean_abs.size() != layer_count) {
          throw PolicyError("activation pruning needs activation stats");
        }
        return a->mean_abs[l];
      }
      case PruneCriterionKind::Gradient: {
        const auto* g = std::get_if<GradientSet<double>>(&stats);
        if (g == nullptr || !shape_congruent(net, *g)) {
          throw PolicyError(
              "gradient pruning needs accumulated gradients for this network");
        }
        return g->weights[l].cwiseAbs().rowwise().sum();
      }
      case PruneCriterionKind::Relevance: {
        const auto* r = std::get_if<RelevanceMap<double>>(&stats);
        if (r == nullptr || r->layers.size() != layer_count) {
          throw PolicyError("relevance pruning needs a relevance map");
        }
        return r->layers[l].cwiseAbs();
      }
    }
    throw PolicyError("unknown prune criterion");
  };

  for (std::size_t l = 0; l + 1 < layer_count; ++l) {
    Eigen::VectorXd scores = scores_for(l);
    if (scores.size() != net.layers[l].out_width()) {
      throw PolicyError("pruning stats are stale for layer " +
                        std::to_string(l));
    }
    selected[l] = detail::lowest_score_indices(scores, criterion.fraction,
                                               criterion.min_width);
  }
  return selected;
}

/// Keeps shaped training state congruent with the network across a
/// structural event: grow inserts zero rows (and zero columns in the next
/// layer), prune deletes them.
template <typename Scalar>
void resize_optimizer_state(GradientSet<Scalar>& state,
                            const MutationEvent& event) {
  const int layer = event.layer;
  if (layer < 0 || layer >= static_cast<int>(state.weights.size())) {
    throw StalenessError("state resize: event layer out of range");
  }
  if (event.kind == MutationKind::Mask) return;
  if (event.kind == MutationKind::Grow) {
    MatrixX<Scalar>& w = state.weights[layer];
    const Eigen::Index old_out = w.rows();
    w.conservativeResize(old_out + event.count, Eigen::NoChange);
    w.bottomRows(event.count).setZero();
    VectorX<Scalar>& b = state.bias[layer];
    b.conservativeResize(old_out + event.count);
    b.tail(event.count).setZero();
    if (layer + 1 < static_cast<int>(state.weights.size())) {
      MatrixX<Scalar>& next = state.weights[layer + 1];
      next.conservativeResize(Eigen::NoChange, old_out + event.count);
      next.rightCols(event.count).setZero();
    }
    return;
  }

  // Prune: drop rows here, columns in the next layer.
  std::vector<int> sorted = event.indices;
  std::sort(sorted.begin(), sorted.end());
  MatrixX<Scalar>& w = state.weights[layer];
  const Eigen::Index width = w.rows();
  if (!sorted.empty() && (sorted.front() < 0 || sorted.back() >= width)) {
    throw StalenessError("state resize: prune indices out of range");
  }
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0, s = 0; i < width; ++i) {
    if (s < static_cast<Eigen::Index>(sorted.size()) &&
        sorted[static_cast<std::size_t>(s)] == i) {
      ++s;
      continue;
    }
    kept.push_back(i);
  }
  MatrixX<Scalar> new_w(kept.size(), w.cols());
  VectorX<Scalar> new_b(kept.size());
  for (std::size_t r = 0; r < kept.size(); ++r) {
    new_w.row(r) = w.row(kept[r]);
    new_b[r] = state.bias[layer][kept[r]];
  }
  w = std::move(new_w);
  state.bias[layer] = std::move(new_b);
  if (layer + 1 < static_cast<int>(state.weights.size())) {
    MatrixX<Scalar>& next = state.weights[layer + 1];
    MatrixX<Scalar> next_w(next.rows(), kept.size());
    for (std::size_t c = 0; c < kept.size(); ++c) {
      next_w.col(c) = next.col(kept[c]);
    }
    next = std::move(next_w);
  }
}

}  // namespace plasticnn
