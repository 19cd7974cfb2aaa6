// Layer-wise relevance propagation with the epsilon stabilizer rule.
//
// Relevance is anchored at the maximal output neuron's activation and
// redistributed input-ward in proportion to each connection's weighted
// activation z_ij = h_i * w_ij, with the denominator stabilized by a
// sign-matched epsilon. Per-layer relevance sums are conserved up to the
// epsilon leakage. Layer sums drive growth-layer selection; per-neuron
// magnitudes drive mask/prune selection.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <vector>

#include "plasticnn/forward.hpp"
#include "plasticnn/network.hpp"

namespace plasticnn {

template <typename Scalar>
struct RelevanceMap {
  VectorX<Scalar> input;                  // relevance over input features
  std::vector<VectorX<Scalar>> layers;    // one vector per layer's outputs
  Scalar output_relevance = Scalar(0);
};

namespace detail {

template <typename Scalar>
VectorX<Scalar> propagate_relevance(const MatrixX<Scalar>& weights,
                                    const VectorX<Scalar>& below,
                                    const VectorX<Scalar>& relevance,
                                    Scalar epsilon) {
  // s_j = sum_i below_i * w_ji; stabilize with sign-matched epsilon
  // (sign(0) treated as +).
  VectorX<Scalar> s = weights * below;
  VectorX<Scalar> denom(s.size());
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    denom[j] = s[j] + (s[j] < Scalar(0) ? -epsilon : epsilon);
  }
  VectorX<Scalar> ratio = relevance.cwiseQuotient(denom);
  return below.cwiseProduct(weights.transpose() * ratio);
}

}  // namespace detail

/// Relevance scores for every layer of the network, from a trace produced
/// by this exact network state.
template <typename Scalar>
RelevanceMap<Scalar> lrp_scores(const Network<Scalar>& net,
                                const ForwardTrace<Scalar>& trace,
                                Scalar stabilizer_epsilon) {
  if (stabilizer_epsilon <= Scalar(0)) {
    throw PolicyError("lrp stabilizer epsilon must be positive");
  }
  if (trace.post.size() != net.layers.size() ||
      trace.input.size() != net.input_width) {
    throw StalenessError("trace does not match network shape");
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (trace.post[l].size() != net.layers[l].out_width()) {
      throw StalenessError("trace stale at layer " + std::to_string(l));
    }
  }

  RelevanceMap<Scalar> map;
  map.layers.resize(net.layers.size());

  // Anchor: the maximal output activation, all other outputs zero.
  const VectorX<Scalar>& out = trace.post.back();
  Eigen::Index anchor = 0;
  out.maxCoeff(&anchor);
  map.output_relevance = out[anchor];
  VectorX<Scalar> rel = VectorX<Scalar>::Zero(out.size());
  rel[anchor] = out[anchor];
  map.layers.back() = rel;

  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const VectorX<Scalar>& below =
        l == 0 ? trace.input : trace.post[l - 1];
    rel = detail::propagate_relevance(net.layers[l].weights, below, rel,
                                      stabilizer_epsilon);
    if (l == 0) {
      map.input = rel;
    } else {
      map.layers[l - 1] = rel;
    }
  }
  return map;
}

/// Relevance averaged over a probe batch (one lrp_scores run per column).
template <typename Scalar>
RelevanceMap<Scalar> average_relevance(const Network<Scalar>& net,
                                       const MatrixX<Scalar>& inputs,
                                       Scalar stabilizer_epsilon) {
  if (inputs.cols() == 0) throw DimensionError("empty probe batch");
  RelevanceMap<Scalar> acc;
  acc.input = VectorX<Scalar>::Zero(net.input_width);
  for (const auto& layer : net.layers) {
    acc.layers.push_back(VectorX<Scalar>::Zero(layer.out_width()));
  }
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
    auto trace = forward(net, VectorX<Scalar>(inputs.col(c)));
    auto map = lrp_scores(net, trace, stabilizer_epsilon);
    acc.input += map.input;
    for (std::size_t l = 0; l < acc.layers.size(); ++l) {
      acc.layers[l] += map.layers[l];
    }
    acc.output_relevance += map.output_relevance;
  }
  const Scalar n = static_cast<Scalar>(inputs.cols());
  acc.input /= n;
  for (auto& v : acc.layers) v /= n;
  acc.output_relevance /= n;
  return acc;
}

/// Per-layer sums of absolute neuron relevances.
template <typename Scalar>
std::vector<Scalar> layer_relevance(const RelevanceMap<Scalar>& map) {
  std::vector<Scalar> sums;
  sums.reserve(map.layers.size());
  for (const auto& v : map.layers) sums.push_back(v.cwiseAbs().sum());
  return sums;
}

/// The layer to grow: the argmax over non-output layers, but only when its
/// sum strictly exceeds the mean over those layers; ties go to the
/// smallest index; nullopt when nothing exceeds the mean (all equal, or a
/// single eligible layer).
template <typename Scalar>
std::optional<int> select_growth_layer(const std::vector<Scalar>& sums) {
  if (sums.size() < 2) return std::nullopt;
  const std::size_t eligible = sums.size() - 1;  // output layer excluded
  Scalar mean = std::accumulate(sums.begin(), sums.begin() + eligible,
                                Scalar(0)) /
                static_cast<Scalar>(eligible);
  int best = 0;
  for (std::size_t l = 1; l < eligible; ++l) {
    if (sums[l] > sums[best]) best = static_cast<int>(l);
  }
  if (sums[best] > mean) return best;
  return std::nullopt;
}

namespace detail {

/// Indices of the floor(fraction*width) lowest scores, never cutting the
/// layer below min_width; ties broken by the smaller index.
template <typename Scalar>
std::vector<int> lowest_score_indices(const VectorX<Scalar>& scores,
                                      double fraction, int min_width) {
  const int width = static_cast<int>(scores.size());
  int take = static_cast<int>(fraction * width);
  take = std::min(take, width - min_width);
  if (take <= 0) return {};
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[a] < scores[b];
  });
  order.resize(take);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace detail

/// Per-layer sets of the least-relevant neurons (by |relevance|), capped
/// by fraction and the minimum layer width. The output layer is never a
/// candidate (its set stays empty).
template <typename Scalar>
std::vector<std::vector<int>> select_prunable_neurons(
    const RelevanceMap<Scalar>& map, double fraction, int min_width) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw PolicyError("prune fraction must lie in (0,1)");
  }
  if (min_width < 1) throw PolicyError("min_width must be >= 1");
  std::vector<std::vector<int>> selected(map.layers.size());
  for (std::size_t l = 0; l + 1 < map.layers.size(); ++l) {
    VectorX<Scalar> magnitude = map.layers[l].cwiseAbs();
    selected[l] =
        detail::lowest_score_indices(magnitude, fraction, min_width);
  }
  return selected;
}

/// CSV dump, columns layer,neuron,relevance; the input features appear as
/// layer -1.
template <typename Scalar>
void write_relevance_csv(const RelevanceMap<Scalar>& map,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path.string() + " for writing");
  out << "layer,neuron,relevance\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < map.input.size(); ++i) {
    out << -1 << ',' << i << ',' << map.input[i] << '\n';
  }
  for (std::size_t l = 0; l < map.layers.size(); ++l) {
    for (Eigen::Index i = 0; i < map.layers[l].size(); ++i) {
      out << l << ',' << i << ',' << map.layers[l][i] << '\n';
    }
  }
}

}  // namespace plasticnn
