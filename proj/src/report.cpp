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

#include "scalefuse/report.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "scalefuse/errors.hpp"

namespace scalefuse::report {

namespace {

using nlohmann::json;

json report_json(const metrics::EvalReport& r) {
  json j;
  j["fold"] = r.fold;
  for (auto m : harness::kMetricNames) j[std::string(m)] = harness::metric_value(r, m);
  json per_class = json::array();
  for (const auto& c : r.per_class) {
    per_class.push_back({{"precision", c.precision},
                         {"recall", c.recall},
                         {"specificity", c.specificity},
                         {"f1", c.f1}});
  }
  j["per_class"] = per_class;
  json class_auc = json::array();
  for (const auto& a : r.class_auc) class_auc.push_back(a ? json(*a) : json(nullptr));
  j["class_auc"] = class_auc;
  json roc = json::array();
  for (const auto& curve : r.roc) {
    json pts = json::array();
    for (const auto& p : curve) pts.push_back({p.fpr, p.tpr});
    roc.push_back(pts);
  }
  j["roc"] = roc;
  j["confusion"] = {{"classes", r.confusion.classes}, {"counts", r.confusion.counts}};
  j["warnings"] = r.warnings;
  return j;
}

metrics::EvalReport report_from(const json& j) {
  metrics::EvalReport r;
  r.fold = j.at("fold").get<int>();
  r.acc = j.at("acc").get<double>();
  r.auc = j.at("auc").get<double>();
  r.pre = j.at("pre").get<double>();
  r.rec = j.at("rec").get<double>();
  r.spe = j.at("spe").get<double>();
  r.f1 = j.at("f1").get<double>();
  for (const auto& c : j.at("per_class")) {
    r.per_class.push_back({c.at("precision").get<double>(), c.at("recall").get<double>(),
                           c.at("specificity").get<double>(), c.at("f1").get<double>()});
  }
  for (const auto& a : j.at("class_auc")) {
    r.class_auc.push_back(a.is_null() ? std::nullopt : std::optional<double>(a.get<double>()));
  }
  for (const auto& curve : j.at("roc")) {
    std::vector<metrics::RocPoint> pts;
    for (const auto& p : curve) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    r.roc.push_back(std::move(pts));
  }
  r.confusion.classes = j.at("confusion").at("classes").get<std::size_t>();
  r.confusion.counts = j.at("confusion").at("counts").get<std::vector<std::size_t>>();
  if (r.confusion.counts.size() != r.confusion.classes * r.confusion.classes) {
    throw DataError("confusion matrix has the wrong number of cells");
  }
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

std::string percent(const harness::MetricStat& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f±%.2f", 100.0 * s.mean, 100.0 * s.sd);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  // Column widths count code points, not bytes, so the ± sign lines up.
  std::size_t cps = 0;
  for (unsigned char ch : s) cps += (ch & 0xC0) != 0x80;
  if (cps < width) s.append(width - cps, ' ');
  return s;
}

std::string slug(const std::string& name) {
  std::string out;
  for (char ch : name) {
    const bool keep = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                      (ch >= '0' && ch <= '9') || ch == '.' || ch == '-';
    out += keep ? ch : '_';
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError(path.string(), "cannot write");
}

std::string confusion_csv(const metrics::ConfusionMatrix& cm) {
  std::string s = "true\\pred";
  for (std::size_t c = 0; c < cm.classes; ++c) s += "," + std::to_string(c);
  s += "\n";
  for (std::size_t t = 0; t < cm.classes; ++t) {
    s += std::to_string(t);
    for (std::size_t p = 0; p < cm.classes; ++p) s += "," + std::to_string(cm.at(t, p));
    s += "\n";
  }
  return s;
}

std::string roc_csv(const metrics::EvalReport& r) {
  std::string s = "class,fpr,tpr\n";
  char buf[96];
  for (std::size_t c = 0; c < r.roc.size(); ++c) {
    for (const auto& p : r.roc[c]) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", c, p.fpr, p.tpr);
      s += buf;
    }
  }
  return s;
}

void emit_folds(const harness::CvSummary& row, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& f : row.folds) {
    const auto k = std::to_string(f.fold);
    write_file(dir / ("confusion_fold" + k + ".csv"), confusion_csv(f.confusion));
    write_file(dir / ("roc_fold" + k + ".csv"), roc_csv(f));
  }
}

}  // namespace

Document from_cv(const harness::CvSummary& summary) { return {"cv", "", {summary}}; }

Document from_ablation(const harness::AblationTable& table) {
  return {"ablation", table.suite, table.rows};
}

std::string to_json(const Document& doc) {
  json j;
  j["kind"] = doc.kind;
  if (doc.kind == "ablation") j["suite"] = doc.suite;
  json rows = json::array();
  for (const auto& row : doc.rows) {
    json r;
    r["name"] = row.name;
    r["class_names"] = row.class_names;
    r["reference"] = row.reference;
    r["p_value"] = row.p_value ? json(*row.p_value) : json(nullptr);
    json stats;
    for (std::size_t i = 0; i < harness::kMetricNames.size(); ++i) {
      stats[std::string(harness::kMetricNames[i])] = {{"mean", row.stats[i].mean},
                                                      {"sd", row.stats[i].sd}};
    }
    r["stats"] = stats;
    json folds = json::array();
    for (const auto& f : row.folds) folds.push_back(report_json(f));
    r["folds"] = folds;
    rows.push_back(r);
  }
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

Document parse_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    Document doc;
    doc.kind = j.at("kind").get<std::string>();
    if (doc.kind != "cv" && doc.kind != "ablation") {
      throw DataError("unknown summary kind '" + doc.kind + "'");
    }
    if (doc.kind == "ablation") doc.suite = j.at("suite").get<std::string>();
    for (const auto& r : j.at("rows")) {
      std::vector<metrics::EvalReport> folds;
      for (const auto& f : r.at("folds")) folds.push_back(report_from(f));
      if (folds.empty()) throw DataError("summary row '" + r.at("name").get<std::string>() + "' has no folds");
      auto row = harness::summarize(r.at("name").get<std::string>(),
                                    r.at("class_names").get<std::vector<std::string>>(),
                                    std::move(folds));
      row.reference = r.at("reference").get<bool>();
      if (!r.at("p_value").is_null()) row.p_value = r.at("p_value").get<double>();
      doc.rows.push_back(std::move(row));
    }
    if (doc.rows.empty()) throw DataError("summary has no rows");
    return doc;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed summary: ") + e.what());
  }
}

Document read_summary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str());
}

std::string render_table(const Document& doc) {
  const bool ablation = doc.kind == "ablation";
  std::size_t name_width = 4;
  for (const auto& r : doc.rows) name_width = std::max(name_width, r.name.size() + 2);
  std::string out;
  if (ablation) out += "suite: " + doc.suite + "\n";
  out += pad("row", name_width);
  for (auto m : harness::kMetricNames) {
    std::string head(m);
    for (auto& ch : head) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    out += pad(head, 14);
  }
  if (ablation) out += "p";
  while (!out.empty() && out.back() == ' ') out.pop_back();
  out += "\n";
  for (const auto& r : doc.rows) {
    std::string line = pad(r.name, name_width);
    for (const auto& s : r.stats) line += pad(percent(s), 14);
    if (ablation) {
      if (r.reference) {
        line += "Ref.";
      } else if (r.p_value) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", *r.p_value);
        line += buf;
      } else {
        line += "-";
      }
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

void emit(const Document& doc, const std::filesystem::path& dir) {
  if (doc.rows.empty()) throw ContractError("report has no rows");
  for (const auto& r : doc.rows) {
    if (r.folds.empty()) throw ContractError("report row '" + r.name + "' has no folds");
  }
  std::filesystem::create_directories(dir);
  write_file(dir / "summary.json", to_json(doc));
  write_file(dir / "table.txt", render_table(doc));
  if (doc.kind == "ablation") {
    for (std::size_t i = 0; i < doc.rows.size(); ++i) {
      char idx[16];
      std::snprintf(idx, sizeof idx, "%02zu_", i);
      emit_folds(doc.rows[i], dir / "rows" / (idx + slug(doc.rows[i].name)));
    }
  } else {
    emit_folds(doc.rows.front(), dir);
  }
}

}  // namespace scalefuse::report
