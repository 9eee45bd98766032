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
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scalefuse/tensor.hpp"

namespace scalefuse {

enum class Modality { OM = 0, IM = 1, TEM = 2 };

inline constexpr std::array<Modality, 3> kAllModalities = {Modality::OM, Modality::IM,
                                                           Modality::TEM};

std::string_view modality_name(Modality m);  // "om", "im", "tem"
std::optional<Modality> parse_modality(std::string_view name);

// Raw row-major feature block: token rows for OM/IM, instance rows for a
// TEM bag.
struct TokenMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * cols, cols);
  }
  Tensor to_tensor() const { return Tensor::matrix(rows, cols, values); }
  bool operator==(const TokenMatrix&) const = default;
};

struct PatientRecord {
  std::string id;
  std::size_t label = 0;
  TokenMatrix om;
  TokenMatrix im;
  TokenMatrix tem_bag;  // one row per instance, at least one row

  const TokenMatrix& features(Modality m) const;
  bool operator==(const PatientRecord&) const = default;
};

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<PatientRecord> records;

  std::size_t class_count() const { return class_names.size(); }
};

// Set of modalities a model consumes.
class ModalityMask {
 public:
  constexpr ModalityMask() = default;
  constexpr ModalityMask(bool om, bool im, bool tem) : bits_{om, im, tem} {}
  static constexpr ModalityMask all() { return {true, true, true}; }
  static ModalityMask only(Modality m);
  // Comma separated names, e.g. "om,tem".
  static ModalityMask parse(std::string_view text);

  bool has(Modality m) const { return bits_[static_cast<std::size_t>(m)]; }
  std::size_t count() const;
  bool empty() const { return count() == 0; }
  std::string to_string() const;
  bool operator==(const ModalityMask&) const = default;

 private:
  std::array<bool, 3> bits_{true, true, true};
};

}  // namespace scalefuse
