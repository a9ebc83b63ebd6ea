#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "dealmvc/networks.hpp"
#include "dealmvc/trainer.hpp"

namespace dealmvc {

// Checkpoint file: MessagePack-encoded object with
//   schema      integer, currently 1
//   config      the TrainConfig used
//   view_dims   encoder input widths
//   params      parameter arrays keyed by module path ({rows, cols, data})
//   fusion      a, q, r, w, t
inline constexpr int kCheckpointSchema = 1;

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

struct Checkpoint {
  ModelState model;
  TrainConfig config;
};

void save_checkpoint(const std::filesystem::path& path, const ModelState& model,
                     const TrainConfig& config);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dealmvc
