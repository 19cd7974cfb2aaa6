// Activation kinds and their elementwise application/derivatives.
// Softmax is column-wise and is only legal on the output layer; its
// derivative is handled explicitly in the backward pass rather than here.
#pragma once

#include <Eigen/Dense>
#include <string>

#include "plasticnn/errors.hpp"

namespace plasticnn {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class Activation { Identity, Relu, Sigmoid, Tanh, Softmax };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Softmax: return "softmax";
  }
  return "identity";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "tanh") return Activation::Tanh;
  if (s == "softmax") return Activation::Softmax;
  throw ParseError("unknown activation kind '" + s + "'");
}

/// Applies the nonlinearity to a matrix of pre-activations, one sample per
/// column. Softmax normalizes each column with the max-subtraction trick.
template <typename Scalar>
MatrixX<Scalar> apply_activation(Activation kind, const MatrixX<Scalar>& z) {
  switch (kind) {
    case Activation::Identity:
      return z;
    case Activation::Relu:
      return z.cwiseMax(Scalar(0));
    case Activation::Sigmoid:
      return ((Scalar(1) + (-z.array()).exp()).inverse()).matrix();
    case Activation::Tanh:
      return z.array().tanh().matrix();
    case Activation::Softmax: {
      MatrixX<Scalar> out(z.rows(), z.cols());
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        VectorX<Scalar> shifted =
            (z.col(c).array() - z.col(c).maxCoeff()).exp();
        out.col(c) = shifted / shifted.sum();
      }
      return out;
    }
  }
  return z;
}

/// Elementwise derivative f'(z) expressed from (z, f(z)). relu'(0) is 0.
/// Not defined for softmax, which never takes this path.
template <typename Scalar>
MatrixX<Scalar> activation_derivative(Activation kind, const MatrixX<Scalar>& z,
                                      const MatrixX<Scalar>& h) {
  switch (kind) {
    case Activation::Identity:
      return MatrixX<Scalar>::Ones(z.rows(), z.cols());
    case Activation::Relu:
      return (z.array() > Scalar(0)).template cast<Scalar>().matrix();
    case Activation::Sigmoid:
      return (h.array() * (Scalar(1) - h.array())).matrix();
    case Activation::Tanh:
      return (Scalar(1) - h.array().square()).matrix();
    case Activation::Softmax:
      throw PolicyError("softmax has no elementwise derivative");
  }
  return MatrixX<Scalar>::Ones(z.rows(), z.cols());
}

}  // namespace plasticnn
