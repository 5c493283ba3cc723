#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "exnet/nn/network.hpp"
#include "json.hpp"

namespace exnet::nn {

// Checkpoint file layout (little-endian):
//   bytes 0..3   magic "EXNT"
//   bytes 4..7   format version (u32, currently 1)
//   bytes 8..15  JSON header length in bytes (u64)
//   ...          JSON header: {"config": ..., "metadata": ...,
//                              "tensors": [{"name","shape","offset"}, ...]}
//   ...          raw float32 tensor data, at the stated offsets relative to
//                the end of the header
// The tensor list covers both learnable parameters and batch-norm running
// statistics.

void save_checkpoint(const std::string& path, Network& net, const nlohmann::json& metadata);

struct LoadedCheckpoint {
    std::unique_ptr<Network> network;
    nlohmann::json config;
    nlohmann::json metadata;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

// FNV-1a over the raw bytes of every tensor whose name is outside the
// classifier head (anything not starting with "head."), in parameter order
// then buffer order. Identifies a trunk independent of the attached head.
uint64_t trunk_checksum(Network& net);

}  // namespace exnet::nn
