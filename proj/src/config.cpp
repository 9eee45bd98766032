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

#include "scalefuse/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "scalefuse/errors.hpp"

namespace scalefuse {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(',', start);
    if (end == std::string_view::npos) end = s.size();
    const auto item = trim(s.substr(start, end - start));
    if (!item.empty()) out.emplace_back(item);
    start = end + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key " + key + ": cannot parse '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("config key " + key + ": expected true/false, got '" + std::string(v) + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& items) {
  std::string out;
  for (auto s : items) out += (out.empty() ? "" : ",") + std::to_string(s);
  return out;
}

void apply(ExperimentConfig& c, const std::string& key, std::string_view v) {
  auto sz = [&] { return parse_number<std::size_t>(key, v); };
  auto dbl = [&] { return parse_number<double>(key, v); };
  auto& t = c.task;
  auto& m = c.model;

  if (key == "task.source") {
    if (v == "synthetic") {
      c.source = ExperimentConfig::Source::Synthetic;
    } else if (v == "manifest") {
      c.source = ExperimentConfig::Source::Manifest;
    } else {
      throw ConfigError("task.source must be synthetic or manifest");
    }
  } else if (key == "task.manifest") {
    c.manifest_path = std::string(v);
  } else if (key == "task.classes") {
    t.class_names = split_list(v);
  } else if (key == "task.patients_per_class") {
    t.patients_per_class = sz();
  } else if (key == "task.bag_min") {
    t.bag_min = sz();
  } else if (key == "task.bag_max") {
    t.bag_max = sz();
  } else if (key == "task.outlier_rate") {
    t.outlier_rate = dbl();
  } else if (key == "task.outlier_scale") {
    t.outlier_scale = dbl();
  } else if (key == "task.seed") {
    t.seed = parse_number<std::uint64_t>(key, v);
  } else if (key.starts_with("task.") && key.find('.', 5) != std::string::npos) {
    const auto dot = key.find('.', 5);
    const auto mod = parse_modality(std::string_view(key).substr(5, dot - 5));
    if (!mod) throw ConfigError("unknown config key " + key);
    auto& ms = t.modality(*mod);
    const auto field = key.substr(dot + 1);
    if (field == "raw_dim") {
      ms.raw_dim = sz();
    } else if (field == "tokens") {
      ms.tokens = sz();
    } else if (field == "separability") {
      ms.separability = dbl();
    } else if (field == "groups") {
      ms.class_groups.clear();
      for (const auto& g : split_list(v)) ms.class_groups.push_back(parse_number<std::size_t>(key, g));
    } else {
      throw ConfigError("unknown config key " + key);
    }
  } else if (key == "model.dim") {
    m.dim = sz();
  } else if (key == "model.heads") {
    m.heads = sz();
  } else if (key == "model.modalities") {
    m.modalities = ModalityMask::parse(v);
  } else if (key == "model.fusion") {
    m.fusion = cmsa::parse_variant(v);
  } else if (key == "model.output_projection") {
    m.output_projection = parse_bool(key, v);
  } else if (key == "model.smil") {
    m.use_smil = parse_bool(key, v);
  } else if (key == "model.smil_threshold") {
    m.smil_threshold = dbl();
  } else if (key == "model.smil_detach_weights") {
    m.smil_detach_weights = parse_bool(key, v);
  } else if (key == "model.weighted_loss") {
    m.weighted_loss = parse_bool(key, v);
  } else if (key == "model.alpha") {
    m.loss_weights.alpha = dbl();
  } else if (key == "model.beta") {
    m.loss_weights.beta = dbl();
  } else if (key == "model.gamma") {
    m.loss_weights.gamma = dbl();
  } else if (key == "train.epochs") {
    c.train.epochs = parse_number<std::uint32_t>(key, v);
  } else if (key == "train.batch_size") {
    c.train.batch_size = sz();
  } else if (key == "train.lr") {
    c.train.lr0 = dbl();
  } else if (key == "train.weight_decay") {
    c.train.weight_decay = dbl();
  } else if (key == "train.seed") {
    c.train.seed = parse_number<std::uint64_t>(key, v);
  } else if (key == "cv.folds") {
    c.folds = sz();
  } else if (key == "output.dir") {
    c.output_dir = std::string(v);
  } else {
    throw ConfigError("unknown config key " + key);
  }
}

}  // namespace

datagen::TaskSpec preset_task(std::string_view name) {
  if (name == "default") return datagen::default_task();
  if (name == "complementary") return datagen::complementary_task();
  if (name == "outlier") return datagen::outlier_task();
  throw ConfigError("unknown task preset '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  if (folds < 2) throw ConfigError("cv.folds must be at least 2");
  if (source == Source::Manifest && manifest_path.empty()) {
    throw ConfigError("task.manifest is required when task.source=manifest");
  }
  if (source == Source::Synthetic) task.validate();
  if (train.epochs == 0) throw ConfigError("train.epochs must be positive");
  if (train.batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(train.lr0 >= 0.0)) throw ConfigError("train.lr must be non-negative");
  if (!(train.weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be non-negative");
  ModelConfig probe = model;
  probe.classes = std::max<std::size_t>(2, task.class_count());
  probe.validate();
}

ExperimentConfig parse_config(std::string_view text) {
  // Collect first so the preset can be applied before any override.
  struct Entry {
    int line;
    std::string key, value;
  };
  std::vector<Entry> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    entries.push_back(
        {lineno, std::string(trim(s.substr(0, eq))), std::string(trim(s.substr(eq + 1)))});
  }
  ExperimentConfig c;
  auto at_line = [](const Entry& e, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& err) {
      throw ConfigError("config line " + std::to_string(e.line) + ": " + err.what());
    }
  };
  for (const auto& e : entries) {
    if (e.key == "task.preset") {
      at_line(e, [&] {
        c.preset = e.value;
        c.task = preset_task(e.value);
      });
    }
  }
  for (const auto& e : entries) {
    if (e.key != "task.preset") at_line(e, [&] { apply(c, e.key, e.value); });
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream o;
  const auto& t = c.task;
  o << "task.source=" << (c.source == ExperimentConfig::Source::Synthetic ? "synthetic" : "manifest")
    << "\n";
  o << "task.preset=" << c.preset << "\n";
  o << "task.manifest=" << c.manifest_path << "\n";
  o << "task.classes=" << join(t.class_names) << "\n";
  o << "task.patients_per_class=" << t.patients_per_class << "\n";
  for (auto m : kAllModalities) {
    const auto& ms = t.modality(m);
    const std::string p = "task." + std::string(modality_name(m)) + ".";
    o << p << "raw_dim=" << ms.raw_dim << "\n";
    o << p << "tokens=" << ms.tokens << "\n";
    o << p << "separability=" << fmt_double(ms.separability) << "\n";
    o << p << "groups=" << join_sizes(ms.class_groups) << "\n";
  }
  o << "task.bag_min=" << t.bag_min << "\n";
  o << "task.bag_max=" << t.bag_max << "\n";
  o << "task.outlier_rate=" << fmt_double(t.outlier_rate) << "\n";
  o << "task.outlier_scale=" << fmt_double(t.outlier_scale) << "\n";
  o << "task.seed=" << t.seed << "\n";
  const auto& m = c.model;
  o << "model.dim=" << m.dim << "\n";
  o << "model.heads=" << m.heads << "\n";
  o << "model.modalities=" << m.modalities.to_string() << "\n";
  o << "model.fusion=" << cmsa::variant_name(m.fusion) << "\n";
  o << "model.output_projection=" << (m.output_projection ? "true" : "false") << "\n";
  o << "model.smil=" << (m.use_smil ? "true" : "false") << "\n";
  o << "model.smil_threshold=" << fmt_double(m.smil_threshold) << "\n";
  o << "model.smil_detach_weights=" << (m.smil_detach_weights ? "true" : "false") << "\n";
  o << "model.weighted_loss=" << (m.weighted_loss ? "true" : "false") << "\n";
  o << "model.alpha=" << fmt_double(m.loss_weights.alpha) << "\n";
  o << "model.beta=" << fmt_double(m.loss_weights.beta) << "\n";
  o << "model.gamma=" << fmt_double(m.loss_weights.gamma) << "\n";
  o << "train.epochs=" << c.train.epochs << "\n";
  o << "train.batch_size=" << c.train.batch_size << "\n";
  o << "train.lr=" << fmt_double(c.train.lr0) << "\n";
  o << "train.weight_decay=" << fmt_double(c.train.weight_decay) << "\n";
  o << "train.seed=" << c.train.seed << "\n";
  o << "cv.folds=" << c.folds << "\n";
  o << "output.dir=" << c.output_dir << "\n";
  return o.str();
}

}  // namespace scalefuse
