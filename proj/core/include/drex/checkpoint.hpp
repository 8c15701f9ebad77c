#pragma once

#include <filesystem>
#include <vector>

#include "drex/model.hpp"

namespace drex {

/// Raw little-endian weight container, bit-exact across save/load.
void save_weights(const std::filesystem::path& path,
                  const std::vector<nn::Parameter*>& params);
void load_weights(const std::filesystem::path& path,
                  const std::vector<nn::Parameter*>& params);

/// Checkpoint directory layout:
///   encoder.bin    encoder + masked-LM head weights
///   bridge.bin     bridge weights
///   decoder.bin    decoder weights
///   vocab.txt      tokenizer vocabulary
///   verbalizer.tsv verbalizer mapping copy
///   manifest.json  model config, aggregation rule, tie-break order
void save_checkpoint(const JointModel& model, const std::filesystem::path& dir);

JointModel load_checkpoint(const std::filesystem::path& dir);

/// Loads checkpoint weights into an existing, architecture-compatible model.
void load_checkpoint_weights(JointModel& model, const std::filesystem::path& dir);

} // namespace drex
