// Forward passes. The batch variants treat one sample per column; the
// vector variants are the single-sample special case. Traces keep the
// pre-activations and activations of every layer so the backward pass and
// relevance propagation can run without recomputation. When a dropout
// mask was applied, the trace keeps it: activations are stored masked and
// gradients flow through the mask.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "plasticnn/network.hpp"

namespace plasticnn {

template <typename Scalar>
struct BatchTrace {
  MatrixX<Scalar> input;                 // in_width x batch
  std::vector<MatrixX<Scalar>> pre;      // z per layer
  std::vector<MatrixX<Scalar>> post;     // h per layer (masked if masked)
  std::vector<VectorX<Scalar>> mask;     // per-layer keep mask; empty if none

  const MatrixX<Scalar>& output() const { return post.back(); }
  Eigen::Index batch_size() const { return input.cols(); }
};

template <typename Scalar>
struct ForwardTrace {
  VectorX<Scalar> input;
  std::vector<VectorX<Scalar>> pre;
  std::vector<VectorX<Scalar>> post;
  std::vector<VectorX<Scalar>> mask;

  const VectorX<Scalar>& output() const { return post.back(); }
};

/// Per-layer 0/1 keep vectors. The output layer is always all ones.
template <typename Scalar>
struct DropoutMask {
  std::vector<VectorX<Scalar>> keep;
  double rate = 0.0;
};

namespace detail {

template <typename Scalar>
BatchTrace<Scalar> run_forward(const Network<Scalar>& net,
                               const MatrixX<Scalar>& input,
                               const DropoutMask<Scalar>* mask) {
  if (input.rows() != net.input_width) {
    throw DimensionError("input width " + std::to_string(input.rows()) +
                         " does not match network input width " +
                         std::to_string(net.input_width));
  }
  if (mask != nullptr &&
      mask->keep.size() != net.layers.size()) {
    throw DimensionError("dropout mask layer count does not match network");
  }

  BatchTrace<Scalar> trace;
  trace.input = input;
  trace.pre.reserve(net.layers.size());
  trace.post.reserve(net.layers.size());
  const MatrixX<Scalar>* h = &trace.input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    MatrixX<Scalar> z = (layer.weights * (*h)).colwise() + layer.bias;
    MatrixX<Scalar> a = apply_activation(layer.activation, z);
    if (mask != nullptr) {
      const VectorX<Scalar>& m = mask->keep[l];
      if (m.size() != layer.out_width()) {
        throw DimensionError("dropout mask width mismatch at layer " +
                             std::to_string(l));
      }
      a = m.asDiagonal() * a;
      trace.mask.push_back(m);
    }
    trace.pre.push_back(std::move(z));
    trace.post.push_back(std::move(a));
    h = &trace.post.back();
  }
  if (!trace.post.back().allFinite()) {
    throw NumericError("forward pass produced non-finite activations");
  }
  return trace;
}

template <typename Scalar>
ForwardTrace<Scalar> to_vector_trace(BatchTrace<Scalar>&& batch) {
  ForwardTrace<Scalar> trace;
  trace.input = batch.input.col(0);
  for (auto& z : batch.pre) trace.pre.push_back(z.col(0));
  for (auto& h : batch.post) trace.post.push_back(h.col(0));
  for (auto& m : batch.mask) trace.mask.push_back(m);
  return trace;
}

}  // namespace detail

template <typename Scalar>
BatchTrace<Scalar> forward_batch(const Network<Scalar>& net,
                                 const MatrixX<Scalar>& input) {
  return detail::run_forward<Scalar>(net, input, nullptr);
}

template <typename Scalar>
ForwardTrace<Scalar> forward(const Network<Scalar>& net,
                             const VectorX<Scalar>& input) {
  return detail::to_vector_trace(
      detail::run_forward<Scalar>(net, input, nullptr));
}

template <typename Scalar>
BatchTrace<Scalar> masked_forward_batch(const Network<Scalar>& net,
                                        const MatrixX<Scalar>& input,
                                        const DropoutMask<Scalar>& mask) {
  return detail::run_forward<Scalar>(net, input, &mask);
}

template <typename Scalar>
ForwardTrace<Scalar> masked_forward(const Network<Scalar>& net,
                                    const VectorX<Scalar>& input,
                                    const DropoutMask<Scalar>& mask) {
  return detail::to_vector_trace(
      detail::run_forward<Scalar>(net, input, &mask));
}

}  // namespace plasticnn
