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

#include <filesystem>
#include <string>
#include <vector>

#include "scalefuse/harness.hpp"

namespace scalefuse::report {

// What a results directory holds: one cross-validation run, or the rows of
// an ablation suite.
struct Document {
  std::string kind;   // "cv" | "ablation"
  std::string suite;  // ablation only
  std::vector<harness::CvSummary> rows;
};

Document from_cv(const harness::CvSummary& summary);
Document from_ablation(const harness::AblationTable& table);

std::string to_json(const Document& doc);
// Throws DataError on malformed input.
Document parse_json(const std::string& text);
Document read_summary(const std::filesystem::path& path);

// Mean±sd in percent with two decimals per metric; for ablations also the
// p-value against the reference row ("Ref." on that row).
std::string render_table(const Document& doc);

// Writes summary.json, table.txt and per-fold confusion_fold<k>.csv and
// roc_fold<k>.csv (under rows/<index>_<name>/ for ablations). Output bytes
// depend only on the document.
void emit(const Document& doc, const std::filesystem::path& dir);

}  // namespace scalefuse::report
