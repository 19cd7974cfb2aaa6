// Dense feed-forward network: an ordered stack of (weights, bias,
// activation) layers. This is the single mutable object every structural
// operation acts on; the shape-chain invariant (layer l's output width
// equals layer l+1's input width) must hold after every operation and is
// checked by validate().
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include "plasticnn/activation.hpp"
#include "plasticnn/errors.hpp"
#include "plasticnn/rng.hpp"

namespace plasticnn {

template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> weights;  // out_width x in_width
  VectorX<Scalar> bias;     // out_width
  Activation activation = Activation::Identity;

  Eigen::Index in_width() const { return weights.cols(); }
  Eigen::Index out_width() const { return weights.rows(); }
};

template <typename Scalar>
struct Network {
  std::vector<DenseLayer<Scalar>> layers;
  Eigen::Index input_width = 0;
  std::uint64_t seed = 0;

  Eigen::Index layer_count() const {
    return static_cast<Eigen::Index>(layers.size());
  }
  Eigen::Index output_width() const { return layers.back().out_width(); }
};

/// Neurons across all layers (input features excluded); the quantity the
/// growth budget caps.
template <typename Scalar>
Eigen::Index total_neurons(const Network<Scalar>& net) {
  Eigen::Index n = 0;
  for (const auto& layer : net.layers) n += layer.out_width();
  return n;
}

/// Per-layer output widths, in layer order.
template <typename Scalar>
std::vector<int> layer_widths(const Network<Scalar>& net) {
  std::vector<int> widths;
  widths.reserve(net.layers.size());
  for (const auto& layer : net.layers)
    widths.push_back(static_cast<int>(layer.out_width()));
  return widths;
}

/// Checks the shape chain, bias lengths, finiteness, and the
/// softmax-only-on-output rule. Throws on the first violation.
template <typename Scalar>
void validate(const Network<Scalar>& net) {
  if (net.layers.empty()) throw DimensionError("network has no layers");
  if (net.input_width < 1) throw DimensionError("input width must be >= 1");
  if (net.layers.front().in_width() != net.input_width) {
    throw DimensionError("first layer input width does not match network");
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    if (layer.out_width() < 1 || layer.in_width() < 1) {
      throw DimensionError("layer " + std::to_string(l) + " has empty shape");
    }
    if (layer.bias.size() != layer.out_width()) {
      throw DimensionError("layer " + std::to_string(l) +
                           " bias length does not match weight rows");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw NumericError("layer " + std::to_string(l) +
                         " contains non-finite parameters");
    }
    if (layer.activation == Activation::Softmax &&
        l + 1 != net.layers.size()) {
      throw PolicyError("softmax is only legal on the output layer");
    }
    if (l + 1 < net.layers.size() &&
        layer.out_width() != net.layers[l + 1].in_width()) {
      throw DimensionError("shape chain broken between layers " +
                           std::to_string(l) + " and " + std::to_string(l + 1));
    }
  }
}

/// Builds a network with uniform Glorot-style weights, scale
/// sqrt(6/(in+out)) per layer, and zero biases. Weights are drawn in
/// layer order, row-major within a layer, from the "init" sub-stream of
/// the seed, so the same (widths, seed) pair is bitwise reproducible.
template <typename Scalar = double>
Network<Scalar> init_network(const std::vector<int>& widths,
                             const std::vector<Activation>& activations,
                             std::uint64_t seed) {
  if (widths.size() < 2) {
    throw ConfigError("widths: need at least input and output width");
  }
  for (int w : widths) {
    if (w < 1) throw ConfigError("widths: every width must be >= 1");
  }
  if (activations.size() + 1 != widths.size()) {
    throw ConfigError("activations: need exactly one per layer (" +
                      std::to_string(widths.size() - 1) + ")");
  }

  Network<Scalar> net;
  net.input_width = widths.front();
  net.seed = seed;
  SplitRng rng = SplitRng::substream(seed, "init");
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer<Scalar> layer;
    const Eigen::Index in = widths[l];
    const Eigen::Index out = widths[l + 1];
    const double scale = std::sqrt(6.0 / static_cast<double>(in + out));
    layer.weights.resize(out, in);
    for (Eigen::Index i = 0; i < out; ++i) {
      for (Eigen::Index j = 0; j < in; ++j) {
        layer.weights(i, j) = static_cast<Scalar>(rng.uniform(-scale, scale));
      }
    }
    layer.bias = VectorX<Scalar>::Zero(out);
    layer.activation = activations[l];
    net.layers.push_back(std::move(layer));
  }
  validate(net);
  return net;
}

}  // namespace plasticnn
