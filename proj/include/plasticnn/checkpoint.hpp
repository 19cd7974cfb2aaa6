// Checkpoint persistence: one JSON document holding the network (weights
// row-major, layer index ascending) and its mutation log. Weights survive
// a save/load round trip bit-exactly. The mutation log alone can also be
// written as JSONL, one event per line.
#pragma once

#include <filesystem>
#include <utility>

#include "plasticnn/mutation.hpp"
#include "plasticnn/network.hpp"

namespace plasticnn {

void save_checkpoint(const Network<double>& net, const MutationLog& log,
                     const std::filesystem::path& path);

std::pair<Network<double>, MutationLog> load_checkpoint(
    const std::filesystem::path& path);

void save_mutation_log_jsonl(const MutationLog& log,
                             const std::filesystem::path& path);

MutationLog load_mutation_log_jsonl(const std::filesystem::path& path);

}  // namespace plasticnn
