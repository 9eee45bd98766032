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

#include "scalefuse/datagen.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "scalefuse/errors.hpp"
#include "scalefuse/rng.hpp"

namespace scalefuse::datagen {

namespace fs = std::filesystem;

void TaskSpec::validate() const {
  if (class_names.size() < 2) throw ConfigError("task needs at least 2 classes");
  if (patients_per_class == 0) throw ConfigError("patients_per_class must be positive");
  if (bag_min < 1) throw ConfigError("bag_min must be at least 1");
  if (bag_max < bag_min) throw ConfigError("bag_max must be >= bag_min");
  if (!(outlier_rate >= 0.0 && outlier_rate <= 1.0)) {
    throw ConfigError("outlier_rate must lie in [0, 1]");
  }
  if (!(outlier_scale > 1.0)) throw ConfigError("outlier_scale must exceed 1");
  for (auto m : kAllModalities) {
    const auto& ms = modality(m);
    const std::string name(modality_name(m));
    if (ms.raw_dim == 0) throw ConfigError(name + ": raw_dim must be positive");
    if (m != Modality::TEM && ms.tokens == 0) throw ConfigError(name + ": tokens must be positive");
    if (!(ms.separability >= 0.0)) throw ConfigError(name + ": separability must be >= 0");
    if (!ms.class_groups.empty() && ms.class_groups.size() != class_count()) {
      throw ConfigError(name + ": class_groups needs one entry per class");
    }
    const std::set<std::size_t> groups(ms.class_groups.begin(), ms.class_groups.end());
    const std::size_t n_groups = ms.class_groups.empty() ? class_count() : groups.size();
    if (n_groups > ms.raw_dim) {
      throw ConfigError(name + ": raw_dim must be at least the number of class groups");
    }
  }
}

TaskSpec default_task() { return TaskSpec{}; }

TaskSpec complementary_task() {
  TaskSpec spec;
  spec.modality(Modality::OM).class_groups = {0, 1, 1};
  spec.modality(Modality::IM).class_groups = {1, 0, 1};
  spec.modality(Modality::TEM).class_groups = {1, 1, 0};
  for (auto& ms : spec.modalities) ms.separability = 1.5;
  return spec;
}

TaskSpec outlier_task() {
  TaskSpec spec;
  spec.outlier_rate = 0.3;
  spec.outlier_scale = 10.0;
  return spec;
}

namespace {

// Orthonormal directions, one per group, by Gram-Schmidt on Gaussian draws.
std::vector<std::vector<double>> orthonormal_directions(std::size_t count, std::size_t dim,
                                                        Rng& rng) {
  std::vector<std::vector<double>> dirs;
  while (dirs.size() < count) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    for (const auto& u : dirs) {
      double dot = 0.0;
      for (std::size_t k = 0; k < dim; ++k) dot += v[k] * u[k];
      for (std::size_t k = 0; k < dim; ++k) v[k] -= dot * u[k];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (auto& x : v) x /= norm;
    dirs.push_back(std::move(v));
  }
  return dirs;
}

TokenMatrix scatter(const std::vector<double>& centre, std::size_t rows, double noise,
                    Rng& rng) {
  TokenMatrix t{rows, centre.size(), {}};
  t.values.reserve(rows * centre.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (double c : centre) t.values.push_back(c + noise * rng.normal());
  }
  return t;
}

void displace_outlier(TokenMatrix& bag, double outlier_scale, Rng& rng) {
  const std::size_t n = bag.rows, d = bag.cols;
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += bag.values[i * d + k];
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = bag.values[i * d + k] - mean[k];
      ss += diff * diff;
    }
  }
  // RMS distance of instances from the bag mean; one unit when the bag has
  // no spread.
  double dispersion = std::sqrt(ss / static_cast<double>(n));
  if (dispersion <= 0.0) dispersion = 1.0;
  const auto dir = orthonormal_directions(1, d, rng)[0];
  const auto victim = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
  for (std::size_t k = 0; k < d; ++k) {
    bag.values[victim * d + k] += outlier_scale * dispersion * dir[k];
  }
}

}  // namespace

Dataset generate_dataset(const TaskSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t classes = spec.class_count();

  // class_means[m][c]
  std::array<std::vector<std::vector<double>>, 3> class_means;
  for (auto m : kAllModalities) {
    const auto& ms = spec.modality(m);
    std::vector<std::size_t> groups = ms.class_groups;
    if (groups.empty()) {
      for (std::size_t c = 0; c < classes; ++c) groups.push_back(c);
    }
    std::size_t n_groups = 0;
    for (auto g : groups) n_groups = std::max(n_groups, g + 1);
    const auto dirs = orthonormal_directions(n_groups, ms.raw_dim, rng);
    // Orthonormal directions scaled by s / sqrt(2) sit exactly s apart.
    const double radius = ms.separability / std::sqrt(2.0);
    auto& means = class_means[static_cast<std::size_t>(m)];
    for (std::size_t c = 0; c < classes; ++c) {
      std::vector<double> mu(ms.raw_dim);
      for (std::size_t k = 0; k < ms.raw_dim; ++k) mu[k] = radius * dirs[groups[c]][k];
      means.push_back(std::move(mu));
    }
  }

  Dataset ds;
  ds.class_names = spec.class_names;
  std::size_t serial = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t p = 0; p < spec.patients_per_class; ++p) {
      PatientRecord rec;
      char id[32];
      std::snprintf(id, sizeof id, "P%04zu", serial++);
      rec.id = id;
      rec.label = c;
      for (auto m : kAllModalities) {
        const auto& ms = spec.modality(m);
        const auto& mean = class_means[static_cast<std::size_t>(m)][c];
        switch (m) {
          case Modality::OM:
            rec.om = scatter(mean, ms.tokens, 1.0, rng);
            break;
          case Modality::IM:
            rec.im = scatter(mean, ms.tokens, 1.0, rng);
            break;
          case Modality::TEM: {
            const auto n = static_cast<std::size_t>(rng.uniform_int(
                static_cast<std::int64_t>(spec.bag_min), static_cast<std::int64_t>(spec.bag_max)));
            rec.tem_bag = scatter(mean, n, 1.0, rng);
            if (spec.outlier_rate > 0.0 && rng.uniform() < spec.outlier_rate) {
              displace_outlier(rec.tem_bag, spec.outlier_scale, rng);
            }
            break;
          }
        }
      }
      ds.records.push_back(std::move(rec));
    }
  }
  return ds;
}

namespace {

void write_f32(const fs::path& path, std::span<const double> values) {
  std::vector<unsigned char> bytes;
  bytes.reserve(values.size() * 4);
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<unsigned char>(bits >> (8 * b)));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string(), "write failed");
}

std::vector<double> read_f32(const fs::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "tensor file missing or unreadable");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() != expected * 4) {
    throw ShapeMismatchError(path.string() + ": expected " + std::to_string(expected * 4) +
                             " bytes, found " + std::to_string(bytes.size()));
  }
  std::vector<double> values(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[i * 4 + b]) << (8 * b);
    const float f = std::bit_cast<float>(bits);
    if (!std::isfinite(f)) {
      throw NonFiniteDataError(path.string() + ": non-finite value at element " +
                               std::to_string(i));
    }
    values[i] = f;
  }
  return values;
}

nlohmann::json tensor_entry(const Shape& shape, const std::string& file) {
  return {{"shape", shape}, {"file", file}};
}

}  // namespace

void write_manifest(const Dataset& dataset, const fs::path& directory) {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw IoError(directory.string(), "cannot create directory: " + ec.message());

  nlohmann::json doc;
  doc["version"] = 1;
  doc["classes"] = dataset.class_names;
  auto& patients = doc["patients"] = nlohmann::json::array();
  for (const auto& rec : dataset.records) {
    nlohmann::json p;
    p["id"] = rec.id;
    p["label"] = rec.label;
    for (auto m : {Modality::OM, Modality::IM}) {
      const auto& t = rec.features(m);
      const std::string file = rec.id + "_" + std::string(modality_name(m)) + ".f32";
      write_f32(directory / file, t.values);
      p[std::string(modality_name(m))] = tensor_entry({t.rows, t.cols}, file);
    }
    auto& tem = p["tem"] = nlohmann::json::array();
    for (std::size_t i = 0; i < rec.tem_bag.rows; ++i) {
      const std::string file = rec.id + "_tem_" + std::to_string(i) + ".f32";
      write_f32(directory / file, rec.tem_bag.row(i));
      tem.push_back(tensor_entry({rec.tem_bag.cols}, file));
    }
    patients.push_back(std::move(p));
  }
  const auto path = directory / "manifest.json";
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << doc.dump(1) << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

Dataset read_manifest(const fs::path& directory) {
  const auto path = directory / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "manifest missing or unreadable");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ManifestParseError(path.string() + ": malformed JSON: " + e.what());
  }

  Dataset ds;
  try {
    if (doc.at("version").get<int>() != 1) {
      throw ManifestParseError(path.string() + ": unsupported manifest version");
    }
    ds.class_names = doc.at("classes").get<std::vector<std::string>>();
    for (const auto& p : doc.at("patients")) {
      PatientRecord rec;
      rec.id = p.at("id").get<std::string>();
      rec.label = p.at("label").get<std::size_t>();
      if (rec.label >= ds.class_names.size()) {
        throw ManifestParseError(path.string() + ": patient " + rec.id +
                                 " has a label outside the class list");
      }
      for (auto m : {Modality::OM, Modality::IM}) {
        const auto& e = p.at(std::string(modality_name(m)));
        const auto shape = e.at("shape").get<Shape>();
        if (shape.size() != 2 || shape[0] == 0 || shape[1] == 0) {
          throw ShapeMismatchError(path.string() + ": patient " + rec.id + " " +
                                   std::string(modality_name(m)) + " shape must be [rows, cols]");
        }
        TokenMatrix t{shape[0], shape[1], {}};
        t.values = read_f32(directory / e.at("file").get<std::string>(), shape[0] * shape[1]);
        (m == Modality::OM ? rec.om : rec.im) = std::move(t);
      }
      const auto& tem = p.at("tem");
      if (tem.empty()) {
        throw ShapeMismatchError(path.string() + ": patient " + rec.id + " has an empty TEM bag");
      }
      for (const auto& e : tem) {
        const auto shape = e.at("shape").get<Shape>();
        if (shape.size() != 1 || shape[0] == 0) {
          throw ShapeMismatchError(path.string() + ": patient " + rec.id +
                                   " TEM instance shape must be [dim]");
        }
        if (rec.tem_bag.rows > 0 && shape[0] != rec.tem_bag.cols) {
          throw ShapeMismatchError(path.string() + ": patient " + rec.id +
                                   " TEM instances differ in width");
        }
        const auto values = read_f32(directory / e.at("file").get<std::string>(), shape[0]);
        rec.tem_bag.cols = shape[0];
        rec.tem_bag.rows += 1;
        rec.tem_bag.values.insert(rec.tem_bag.values.end(), values.begin(), values.end());
      }
      ds.records.push_back(std::move(rec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ManifestParseError(path.string() + ": " + e.what());
  }
  return ds;
}

}  // namespace scalefuse::datagen
