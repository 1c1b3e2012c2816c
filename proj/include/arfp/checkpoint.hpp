#pragma once

// Versioned binary checkpoint: magic, format version, kind tag, architecture
// config (JSON text), then named parameter groups, then an FNV-1a trailer over
// all preceding bytes.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "arfp/nn.hpp"

namespace arfp {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::string kind;
    nlohmann::json arch;
    // group name -> ordered (parameter name, value)
    std::map<std::string, std::vector<std::pair<std::string, Tensor>>> groups;
};

void save_checkpoint(const std::string& path, const std::string& kind, const nlohmann::json& arch,
                     const std::vector<std::pair<std::string, const ParamSet*>>& groups);
Checkpoint read_checkpoint(const std::string& path);
// Copies a stored group into params; names and shapes must match exactly.
void restore_group(const Checkpoint& ckpt, const std::string& group, ParamSet& params);

std::uint64_t file_hash(const std::string& path);

}  // namespace arfp
