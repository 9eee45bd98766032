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

#include "scalefuse/record.hpp"

#include "scalefuse/errors.hpp"

namespace scalefuse {

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::OM:
      return "om";
    case Modality::IM:
      return "im";
    case Modality::TEM:
      return "tem";
  }
  return "?";
}

std::optional<Modality> parse_modality(std::string_view name) {
  for (auto m : kAllModalities) {
    if (modality_name(m) == name) return m;
  }
  return std::nullopt;
}

const TokenMatrix& PatientRecord::features(Modality m) const {
  switch (m) {
    case Modality::OM:
      return om;
    case Modality::IM:
      return im;
    case Modality::TEM:
      return tem_bag;
  }
  return om;
}

ModalityMask ModalityMask::only(Modality m) {
  return {m == Modality::OM, m == Modality::IM, m == Modality::TEM};
}

ModalityMask ModalityMask::parse(std::string_view text) {
  ModalityMask mask(false, false, false);
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    auto token = text.substr(start, end - start);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    if (!token.empty()) {
      auto m = parse_modality(token);
      if (!m) throw ConfigError("unknown modality '" + std::string(token) + "'");
      mask.bits_[static_cast<std::size_t>(*m)] = true;
    }
    start = end + 1;
  }
  if (mask.empty()) throw ConfigError("modality mask must name at least one modality");
  return mask;
}

std::size_t ModalityMask::count() const {
  return static_cast<std::size_t>(bits_[0]) + bits_[1] + bits_[2];
}

std::string ModalityMask::to_string() const {
  std::string out;
  for (auto m : kAllModalities) {
    if (!has(m)) continue;
    if (!out.empty()) out += ",";
    out += modality_name(m);
  }
  return out;
}

}  // namespace scalefuse
