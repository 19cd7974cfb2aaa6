// Dropout operators: Bernoulli mask sampling over hidden layers and the
// deterministic inference pass that scales hidden activations by (1-p)
// after the nonlinearity (non-inverted dropout). Masked training itself is
// masked_forward / masked_forward_batch in forward.hpp.
#pragma once

#include <Eigen/Dense>

#include "plasticnn/forward.hpp"
#include "plasticnn/network.hpp"
#include "plasticnn/rng.hpp"

namespace plasticnn {

/// Each hidden entry keeps with probability 1-p; the output layer is
/// always kept. Draws hidden layers in order, entry order within a layer.
template <typename Scalar = double>
DropoutMask<Scalar> sample_dropout_mask(const Network<Scalar>& net, double p,
                                        SplitRng& rng) {
  if (p < 0.0 || p > 1.0) {
    throw PolicyError("dropout rate must lie in [0,1]");
  }
  DropoutMask<Scalar> mask;
  mask.rate = p;
  mask.keep.reserve(net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Eigen::Index width = net.layers[l].out_width();
    VectorX<Scalar> keep = VectorX<Scalar>::Ones(width);
    if (l + 1 < net.layers.size()) {
      for (Eigen::Index i = 0; i < width; ++i) {
        keep[i] = rng.bernoulli(1.0 - p) ? Scalar(1) : Scalar(0);
      }
    }
    mask.keep.push_back(std::move(keep));
  }
  return mask;
}

/// Deterministic forward with every hidden activation scaled by (1-p)
/// after the nonlinearity; the output layer is not scaled.
template <typename Scalar>
MatrixX<Scalar> inference_forward_scaled_batch(const Network<Scalar>& net,
                                               const MatrixX<Scalar>& input,
                                               double p) {
  if (p < 0.0 || p >= 1.0) {
    throw PolicyError("scaled inference needs dropout rate in [0,1)");
  }
  if (input.rows() != net.input_width) {
    throw DimensionError("input width does not match network");
  }
  MatrixX<Scalar> h = input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    MatrixX<Scalar> z = (layer.weights * h).colwise() + layer.bias;
    h = apply_activation(layer.activation, z);
    if (l + 1 < net.layers.size()) h *= Scalar(1.0 - p);
  }
  return h;
}

template <typename Scalar>
VectorX<Scalar> inference_forward_scaled(const Network<Scalar>& net,
                                         const VectorX<Scalar>& input,
                                         double p) {
  return inference_forward_scaled_batch<Scalar>(net, input, p).col(0);
}

}  // namespace plasticnn
