#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "protorm/data.hpp"
#include "protorm/training.hpp"

namespace protorm {

// Every setting a CLI run can take, with defaults. Keys are flat and match the
// names accepted in a JSON config file.
struct RunConfig {
  TrainSetup setup;
  std::string data;
  std::string checkpoint;
  std::string out;
  double fraction = 1.0;
  std::vector<double> fractions{0.05, 0.10, 0.20, 1.0};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  SynthConfig synth;

  // Keys set by a config file or flag rather than left at their default.
  std::set<std::string> explicit_keys;

  // Applies every key of `object`; unknown keys and ill-typed values throw
  // ConfigError.
  void apply(const nlohmann::json& object);
  void apply_file(const std::filesystem::path& path);
  void validate() const;

  bool is_explicit(const std::string& key) const {
    return explicit_keys.contains(key);
  }

  nlohmann::ordered_json to_json() const;
};

// Names of every accepted key, in documentation order.
const std::vector<std::string>& run_config_keys();

}  // namespace protorm
