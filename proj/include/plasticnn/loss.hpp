// Loss evaluation. MSE is the mean of squared differences over output
// dimensions (and over samples in the batch form); cross-entropy is
// -sum(target * log(prediction)) with predictions floored at 1e-12, and is
// only legal against a softmax output of width >= 2.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "plasticnn/activation.hpp"
#include "plasticnn/errors.hpp"

namespace plasticnn {

enum class Loss { MeanSquaredError, CrossEntropy };

inline std::string to_string(Loss kind) {
  return kind == Loss::MeanSquaredError ? "mean_squared_error"
                                        : "cross_entropy";
}

inline Loss loss_from_string(const std::string& s) {
  if (s == "mean_squared_error") return Loss::MeanSquaredError;
  if (s == "cross_entropy") return Loss::CrossEntropy;
  throw ParseError("unknown loss kind '" + s + "'");
}

inline constexpr double kCrossEntropyFloor = 1e-12;

namespace detail {

template <typename Scalar>
void check_cross_entropy_targets(const MatrixX<Scalar>& targets) {
  if (targets.rows() < 2) {
    throw DimensionError("cross-entropy needs output width >= 2");
  }
  for (Eigen::Index c = 0; c < targets.cols(); ++c) {
    if (targets.col(c).minCoeff() < Scalar(0) ||
        std::abs(static_cast<double>(targets.col(c).sum()) - 1.0) > 1e-6) {
      throw DimensionError(
          "cross-entropy target is not a distribution (column " +
          std::to_string(c) + ")");
    }
  }
}

}  // namespace detail

/// Mean loss over the batch (columns are samples).
template <typename Scalar>
Scalar loss_eval_batch(const MatrixX<Scalar>& predictions,
                       const MatrixX<Scalar>& targets, Loss kind) {
  if (predictions.rows() != targets.rows() ||
      predictions.cols() != targets.cols()) {
    throw DimensionError("prediction/target shape mismatch");
  }
  if (predictions.cols() == 0) throw DimensionError("empty batch");
  switch (kind) {
    case Loss::MeanSquaredError:
      return (predictions - targets).array().square().mean();
    case Loss::CrossEntropy: {
      detail::check_cross_entropy_targets(targets);
      auto floored =
          predictions.array().max(Scalar(kCrossEntropyFloor));
      return -(targets.array() * floored.log()).colwise().sum().mean();
    }
  }
  return Scalar(0);
}

template <typename Scalar>
Scalar loss_eval(const VectorX<Scalar>& prediction,
                 const VectorX<Scalar>& target, Loss kind) {
  return loss_eval_batch<Scalar>(prediction, target, kind);
}

}  // namespace plasticnn
