#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "protorm/training.hpp"

namespace protorm {

inline constexpr std::string_view kCheckpointMagic = "PROTORM-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

// Line-oriented text format. Reals are written as hexadecimal floats, so a
// state survives a save/load cycle bit for bit.
std::string serialize_checkpoint(const TrainState& state);
TrainState parse_checkpoint(std::string_view text);

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace protorm
