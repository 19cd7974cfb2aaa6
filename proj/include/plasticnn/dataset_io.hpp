// CSV dataset ingestion and emission. Layout: header f0..fn,label; feature
// cells are decimal reals; the label column is either an integer class
// (all rows integral and nonnegative -> classification) or a real target
// (-> regression). Writes use 17 significant digits so a written dataset
// reloads to the same doubles.
#pragma once

#include <filesystem>

#include "plasticnn/dataset.hpp"

namespace plasticnn {

Dataset load_dataset_csv(const std::filesystem::path& path);

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);

}  // namespace plasticnn
