// In-memory labeled dataset, one sample per column. Classification sets
// carry integer labels and build one-hot (or single-sigmoid) target
// matrices against whatever output width the network currently has, so a
// grown output layer keeps working against older tasks. Regression sets
// carry the raw target matrix.
#pragma once

#include <Eigen/Dense>

#include "plasticnn/errors.hpp"
#include "plasticnn/forward.hpp"
#include "plasticnn/network.hpp"

namespace plasticnn {

struct Dataset {
  Eigen::MatrixXd features;  // dim x n
  Eigen::VectorXi labels;    // classification labels (empty for regression)
  Eigen::MatrixXd targets;   // regression targets (empty for classification)
  bool classification = true;

  Eigen::Index size() const { return features.cols(); }
  Eigen::Index feature_width() const { return features.rows(); }

  int max_label() const {
    return labels.size() == 0 ? -1 : labels.maxCoeff();
  }
};

/// Target matrix for the given output width: one-hot for multi-class,
/// the 0/1 label row for a width-1 output, or the stored regression
/// targets.
inline Eigen::MatrixXd targets_for(const Dataset& data,
                                   Eigen::Index output_width) {
  if (!data.classification) {
    if (data.targets.rows() != output_width) {
      throw DimensionError("regression target width does not match network");
    }
    return data.targets;
  }
  if (output_width == 1) {
    Eigen::MatrixXd t(1, data.size());
    for (Eigen::Index c = 0; c < data.size(); ++c) {
      if (data.labels[c] < 0 || data.labels[c] > 1) {
        throw DimensionError("width-1 output needs binary labels");
      }
      t(0, c) = static_cast<double>(data.labels[c]);
    }
    return t;
  }
  if (data.max_label() >= output_width) {
    throw DimensionError("label " + std::to_string(data.max_label()) +
                         " does not fit output width " +
                         std::to_string(output_width));
  }
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(output_width, data.size());
  for (Eigen::Index c = 0; c < data.size(); ++c) {
    t(data.labels[c], c) = 1.0;
  }
  return t;
}

/// Fraction of samples classified correctly under a plain forward pass:
/// argmax for multi-class outputs, threshold 0.5 for a width-1 output.
inline double accuracy(const Network<double>& net, const Dataset& data) {
  if (!data.classification) {
    throw PolicyError("accuracy is only defined for classification sets");
  }
  if (data.size() == 0) throw DimensionError("empty dataset");
  const Eigen::MatrixXd out = forward_batch(net, data.features).output();
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
    if (predicted == data.labels[c]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(out.cols());
}

}  // namespace plasticnn
