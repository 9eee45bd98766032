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

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scalefuse/record.hpp"

namespace scalefuse::datagen {

struct ModalitySpec {
  std::size_t raw_dim = 16;
  // Token rows per patient; ignored for TEM, whose row count is the bag size.
  std::size_t tokens = 8;
  // Class-mean spacing in units of the within-class standard deviation.
  double separability = 2.5;
  // class_groups[c] is the mean shared by class c; classes in the same group
  // are indistinguishable in this modality. Empty means every class has its
  // own mean.
  std::vector<std::size_t> class_groups;

  bool operator==(const ModalitySpec&) const = default;
};

struct TaskSpec {
  std::vector<std::string> class_names = {"IgAN", "MN", "LN"};
  std::size_t patients_per_class = 30;
  std::array<ModalitySpec, 3> modalities;  // indexed by Modality
  std::size_t bag_min = 6;
  std::size_t bag_max = 12;
  double outlier_rate = 0.0;
  double outlier_scale = 10.0;
  std::uint64_t seed = 1;

  std::size_t class_count() const { return class_names.size(); }
  ModalitySpec& modality(Modality m) { return modalities[static_cast<std::size_t>(m)]; }
  const ModalitySpec& modality(Modality m) const {
    return modalities[static_cast<std::size_t>(m)];
  }
  // Throws ConfigError on the first invalid field.
  void validate() const;
  bool operator==(const TaskSpec&) const = default;
};

// Three balanced classes, 30 patients each, separability 2.5 everywhere,
// bags of 6 to 12 instances.
TaskSpec default_task();
// Each modality separates one class from the other two: OM isolates class
// 0, IM class 1, TEM class 2, all at separability 1.5. Any two modalities
// can name all three classes, but with less redundancy than the full set.
TaskSpec complementary_task();
// Default task with a displaced instance in 30% of bags at 10x dispersion.
TaskSpec outlier_task();

// Every token of a class-c patient is the class mean plus unit Gaussian
// noise, drawn independently; for TEM the tokens are the bag instances and
// the bag size is uniform in [bag_min, bag_max]. Deterministic in spec.seed.
Dataset generate_dataset(const TaskSpec& spec);

// Writes manifest.json plus one little-endian float32 row-major file per
// OM/IM token matrix and per TEM instance.
void write_manifest(const Dataset& dataset, const std::filesystem::path& directory);
// Inverse of write_manifest. Throws ManifestParseError, ShapeMismatchError,
// NonFiniteDataError or IoError.
Dataset read_manifest(const std::filesystem::path& directory);

}  // namespace scalefuse::datagen
