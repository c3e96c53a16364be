#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "themescreen/numeric/matrix.hpp"

namespace themescreen::numeric {

// Named matrices plus the configuration that produced them. On disk: JSON with
// shapes and base64 little-endian float64 buffers per parameter.
struct Checkpoint {
  std::map<std::string, Matrix> params;
  nlohmann::json config;
  std::uint64_t seed = 0;
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace themescreen::numeric
