// Analytic backpropagation and the plain SGD update. Gradients are of the
// batch-mean loss. Softmax couples output dimensions, so it is either
// short-circuited against cross-entropy (delta = prediction - target) or
// pushed through its full Jacobian for other losses.
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "plasticnn/forward.hpp"
#include "plasticnn/loss.hpp"
#include "plasticnn/network.hpp"

namespace plasticnn {

template <typename Scalar>
struct GradientSet {
  std::vector<MatrixX<Scalar>> weights;
  std::vector<VectorX<Scalar>> bias;
};

template <typename Scalar>
bool shape_congruent(const Network<Scalar>& net,
                     const GradientSet<Scalar>& grads) {
  if (grads.weights.size() != net.layers.size() ||
      grads.bias.size() != net.layers.size()) {
    return false;
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (grads.weights[l].rows() != net.layers[l].weights.rows() ||
        grads.weights[l].cols() != net.layers[l].weights.cols() ||
        grads.bias[l].size() != net.layers[l].bias.size()) {
      return false;
    }
  }
  return true;
}

template <typename Scalar>
GradientSet<Scalar> zero_gradients(const Network<Scalar>& net) {
  GradientSet<Scalar> grads;
  for (const auto& layer : net.layers) {
    grads.weights.push_back(
        MatrixX<Scalar>::Zero(layer.weights.rows(), layer.weights.cols()));
    grads.bias.push_back(VectorX<Scalar>::Zero(layer.bias.size()));
  }
  return grads;
}

namespace detail {

// dL/dz for a softmax layer given dL/dh: per column,
// dz = h .* dh - h * (h . dh).
template <typename Scalar>
MatrixX<Scalar> softmax_jacobian_pullback(const MatrixX<Scalar>& h,
                                          const MatrixX<Scalar>& dh) {
  MatrixX<Scalar> hdh = h.cwiseProduct(dh);
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> colsum = hdh.colwise().sum();
  return hdh - h.cwiseProduct(MatrixX<Scalar>(colsum.replicate(h.rows(), 1)));
}

}  // namespace detail

template <typename Scalar>
GradientSet<Scalar> backward(const Network<Scalar>& net,
                             const BatchTrace<Scalar>& trace,
                             const MatrixX<Scalar>& targets, Loss loss) {
  const std::size_t layer_count = net.layers.size();
  if (trace.post.size() != layer_count) {
    throw StalenessError("trace layer count does not match network");
  }
  for (std::size_t l = 0; l < layer_count; ++l) {
    if (trace.post[l].rows() != net.layers[l].out_width()) {
      throw StalenessError("trace widths stale at layer " + std::to_string(l));
    }
    if (!trace.post[l].allFinite() || !trace.pre[l].allFinite()) {
      throw NumericError("non-finite values in forward trace");
    }
  }
  if (targets.rows() != net.output_width() ||
      targets.cols() != trace.batch_size()) {
    throw DimensionError("target shape does not match network output");
  }
  const Scalar batch = static_cast<Scalar>(trace.batch_size());
  const auto& out_layer = net.layers.back();
  const MatrixX<Scalar>& prediction = trace.post.back();

  MatrixX<Scalar> delta;  // dL/dz at the current layer
  if (loss == Loss::CrossEntropy) {
    if (out_layer.activation != Activation::Softmax) {
      throw PolicyError("cross-entropy requires a softmax output layer");
    }
    detail::check_cross_entropy_targets(targets);
    delta = (prediction - targets) / batch;
  } else {
    const Scalar dims = static_cast<Scalar>(prediction.rows());
    MatrixX<Scalar> dh =
        Scalar(2) * (prediction - targets) / (dims * batch);
    if (out_layer.activation == Activation::Softmax) {
      delta = detail::softmax_jacobian_pullback(prediction, dh);
    } else {
      delta = dh.cwiseProduct(activation_derivative(
          out_layer.activation, trace.pre.back(), prediction));
    }
  }

  GradientSet<Scalar> grads;
  grads.weights.resize(layer_count);
  grads.bias.resize(layer_count);
  for (std::size_t l = layer_count; l-- > 0;) {
    const MatrixX<Scalar>& below =
        l == 0 ? trace.input : trace.post[l - 1];
    grads.weights[l] = delta * below.transpose();
    grads.bias[l] = delta.rowwise().sum();
    if (l > 0) {
      MatrixX<Scalar> dh = net.layers[l].weights.transpose() * delta;
      delta = dh.cwiseProduct(activation_derivative(
          net.layers[l - 1].activation, trace.pre[l - 1], trace.post[l - 1]));
      if (!trace.mask.empty()) {
        delta = trace.mask[l - 1].asDiagonal() * delta;
      }
    }
  }
  return grads;
}

template <typename Scalar>
GradientSet<Scalar> backward(const Network<Scalar>& net,
                             const ForwardTrace<Scalar>& trace,
                             const VectorX<Scalar>& target, Loss loss) {
  BatchTrace<Scalar> batch;
  batch.input = trace.input;
  for (const auto& z : trace.pre) batch.pre.push_back(z);
  for (const auto& h : trace.post) batch.post.push_back(h);
  for (const auto& m : trace.mask) batch.mask.push_back(m);
  return backward<Scalar>(net, batch, MatrixX<Scalar>(target), loss);
}

/// In-place W -= lr * dW, b -= lr * db. Rejects gradients whose shapes no
/// longer match the network (stale after a structural mutation).
template <typename Scalar>
void sgd_step(Network<Scalar>& net, const GradientSet<Scalar>& grads,
              Scalar learning_rate) {
  if (!shape_congruent(net, grads)) {
    throw StalenessError(
        "gradient shapes do not match network (stale after mutation?)");
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    net.layers[l].weights -= learning_rate * grads.weights[l];
    net.layers[l].bias -= learning_rate * grads.bias[l];
  }
}

}  // namespace plasticnn
