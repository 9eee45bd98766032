// Copyright 2026 The scalefuse Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include "scalefuse/datagen.hpp"
#include "scalefuse/model.hpp"

namespace scalefuse {

// One experiment: where the data comes from, how the model is built, how it
// is trained and how many folds to run. Stored on disk as flat key=value
// lines with dotted section prefixes; see docs/config.md for every key.
struct ExperimentConfig {
  enum class Source { Synthetic, Manifest };

  Source source = Source::Synthetic;
  std::string preset = "default";  // default | complementary | outlier
  datagen::TaskSpec task = datagen::default_task();
  std::string manifest_path;
  // classes and raw_dims are taken from the dataset at run time.
  ModelConfig model;
  TrainOptions train;
  std::size_t folds = 5;
  std::string output_dir = "out";

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

datagen::TaskSpec preset_task(std::string_view name);

// Unknown keys and unparsable values raise ConfigError naming the line.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Every key, one per line, in a fixed order; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

}  // namespace scalefuse
