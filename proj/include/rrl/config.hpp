#pragma once

#include <filesystem>

#include <nlohmann/json_fwd.hpp>

#include "rrl/env.hpp"
#include "rrl/trainer.hpp"

namespace rrl {

inline constexpr int kConfigSchemaVersion = 1;

/// Training configuration file. Every section and key is optional and falls
/// back to the defaults; unknown keys are rejected with a ConfigError naming
/// them. Network grid_size and input_planes, when not given, follow the env
/// frame size and history. Layout:
///
///   {"schema_version": 1,
///    "trainer": {"sync", "learners", "envs_per_entry", "discount", "lr",
///                "entropy_coef", "optimizer", "grad_clip", "total_episodes",
///                "layout", "entries", "seed", "curriculum_stage",
///                "checkpoint_every", "ma_window"},
///    "network": {"grid_size", "input_planes", "conv", "trunk_width", "merge_width", "seed"},
///    "env": {"world": {...}, "passive": {...}, "traffic": {...}, "comfort": {...},
///            "reward": {...}, "frame": {"grid_size", "window"}, "history",
///            "path_noise": {...}, "perception_noise": {...}}}
nlohmann::json env_config_to_json(const EnvConfig& cfg);
EnvConfig env_config_from_json(const nlohmann::json& j);

nlohmann::json trainer_config_to_json(const TrainerConfig& cfg);
/// Applies the curriculum stage on top of the explicit noise settings.
TrainerConfig trainer_config_from_json(const nlohmann::json& j);

/// Throws ConfigError naming the path when it is missing or unreadable.
TrainerConfig load_trainer_config(const std::filesystem::path& path);
void save_trainer_config(const std::filesystem::path& path, const TrainerConfig& cfg);

}  // namespace rrl
