#include "plasticnn/dataset_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace plasticnn {

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double parse_cell(const std::string& cell, int row, int col) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::exception();
    if (!std::isfinite(v)) throw std::exception();
    return v;
  } catch (...) {
    throw ParseError("row " + std::to_string(row) + ", column " +
                     std::to_string(col) + ": not a finite number ('" + cell +
                     "')");
  }
}

}  // namespace

Dataset load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset: " + path.string());

  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(path.string() + ": empty file (missing header)");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_row(line);
  if (header.size() < 2 || header.back() != "label") {
    throw ParseError(path.string() +
                     ": header must be feature columns followed by 'label'");
  }
  const int feature_width = static_cast<int>(header.size()) - 1;

  std::vector<std::vector<double>> features;
  std::vector<double> raw_labels;
  int row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_row(line);
    if (static_cast<int>(cells.size()) != feature_width + 1) {
      throw ParseError("row " + std::to_string(row_no) + ": expected " +
                       std::to_string(feature_width + 1) + " fields, got " +
                       std::to_string(cells.size()));
    }
    std::vector<double> row(feature_width);
    for (int c = 0; c < feature_width; ++c) {
      row[c] = parse_cell(cells[c], row_no, c);
    }
    features.push_back(std::move(row));
    raw_labels.push_back(parse_cell(cells.back(), row_no, feature_width));
  }
  if (features.empty()) {
    throw ParseError(path.string() + ": no data rows (empty dataset)");
  }

  Dataset data;
  const Eigen::Index n = static_cast<Eigen::Index>(features.size());
  data.features.resize(feature_width, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    for (int r = 0; r < feature_width; ++r) {
      data.features(r, c) = features[static_cast<std::size_t>(c)][r];
    }
  }

  bool integral = true;
  for (double v : raw_labels) {
    if (v != std::floor(v) || v < 0.0 || v > 1e9) {
      integral = false;
      break;
    }
  }
  data.classification = integral;
  if (integral) {
    data.labels.resize(n);
    for (Eigen::Index c = 0; c < n; ++c) {
      data.labels[c] = static_cast<int>(raw_labels[static_cast<std::size_t>(c)]);
    }
  } else {
    data.targets.resize(1, n);
    for (Eigen::Index c = 0; c < n; ++c) {
      data.targets(0, c) = raw_labels[static_cast<std::size_t>(c)];
    }
  }
  return data;
}

void write_dataset_csv(const Dataset& data,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path.string() + " for writing");
  for (Eigen::Index r = 0; r < data.feature_width(); ++r) {
    out << 'f' << r << ',';
  }
  out << "label\n";
  out.precision(17);
  for (Eigen::Index c = 0; c < data.size(); ++c) {
    for (Eigen::Index r = 0; r < data.feature_width(); ++r) {
      out << data.features(r, c) << ',';
    }
    if (data.classification) {
      out << data.labels[c];
    } else {
      out << data.targets(0, c);
    }
    out << '\n';
  }
}

}  // namespace plasticnn
