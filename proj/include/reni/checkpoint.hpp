#pragma once

#include "reni/vad.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>

namespace reni {

inline constexpr int kCheckpointVersion = 1;

nlohmann::json to_json(const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::filesystem::path& path);

nlohmann::json to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json latent_to_json(const LatentCode& z);
LatentCode latent_from_json(const nlohmann::json& j);

}  // namespace reni
