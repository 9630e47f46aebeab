#pragma once
#include <filesystem>

#include "policy.hpp"

namespace polo {

// Binary model file: magic, format version, the policy shape, then every
// parameter matrix as a named row-major block. Loading rebuilds the exact
// parameters and the PolicyConfig they require; any mismatch between the
// recorded shapes and the recorded config is a data error.
void save_checkpoint(const std::filesystem::path& path, const PolicyConfig& cfg,
                     const PolicyParams& params);

struct Checkpoint {
  PolicyConfig config;
  PolicyParams params;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace polo
