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

#include "scalefuse/model.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "scalefuse/errors.hpp"
#include "scalefuse/ops.hpp"
#include "scalefuse/rng.hpp"

namespace scalefuse {

namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(fan_in * fan_out);
  for (auto& x : v) x = rng.uniform(-limit, limit);
  return Tensor::matrix(fan_in, fan_out, std::move(v), true);
}

Affine make_affine(std::size_t in, std::size_t out, Rng& rng) {
  return {glorot(in, out, rng), Tensor::zeros({out}, true)};
}

std::size_t idx(Modality m) { return static_cast<std::size_t>(m); }

}  // namespace

void ModelConfig::validate() const {
  if (classes < 2) throw ConfigError("model needs at least 2 classes");
  if (dim == 0) throw ConfigError("model dimension must be positive");
  cmsa::check_heads(dim, heads);
  if (modalities.empty()) throw ConfigError("modality mask is empty");
  for (auto m : kAllModalities) {
    if (modalities.has(m) && raw_dims[idx(m)] == 0) {
      throw ConfigError("raw dimension of modality " + std::string(modality_name(m)) +
                        " must be positive");
    }
  }
  if (!(smil_threshold > 0.0)) throw ConfigError("smil threshold must be positive");
  const auto& w = loss_weights;
  if (w.alpha < 0.0 || w.beta < 0.0 || w.gamma < 0.0) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (std::abs(w.alpha + w.beta + w.gamma - 1.0) > 1e-9) {
    throw ConfigError("loss weights must sum to 1");
  }
}

Tensor Encoder::operator()(const Tensor& x) const {
  if (identity()) return x;
  return linear(relu(linear(x, w1, b1)), w2, b2);
}

Tensor Affine::operator()(const Tensor& x) const { return linear(x, w, b); }

CmusModel::CmusModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  const std::size_t d = config_.dim;
  for (auto m : kAllModalities) {
    if (!config_.modalities.has(m)) continue;
    const std::size_t raw = config_.raw_dims[idx(m)];
    if (raw == d) continue;
    auto& e = encoders_[idx(m)];
    e.w1 = glorot(raw, d, rng);
    e.b1 = Tensor::zeros({d}, true);
    e.w2 = glorot(d, d, rng);
    e.b2 = Tensor::zeros({d}, true);
  }
  fusion_ = cmsa::make_fusion_params(config_.fusion, d, config_.heads,
                                     config_.output_projection, rng);
  const std::size_t fused = config_.modalities.count() * d;
  classifier_[0] = make_affine(fused, d, rng);
  classifier_[1] = make_affine(d, config_.classes, rng);
  if (config_.weighted_loss) {
    for (auto m : kAllModalities) {
      if (config_.modalities.has(m)) aux_heads_[idx(m)] = make_affine(d, config_.classes, rng);
    }
  }
  register_parameters();
}

void CmusModel::register_parameters() {
  params_.clear();
  for (auto m : kAllModalities) {
    const auto& e = encoders_[idx(m)];
    if (e.identity()) continue;
    const std::string p = "encoder." + std::string(modality_name(m));
    params_.push_back({p + ".w1", e.w1});
    params_.push_back({p + ".b1", e.b1});
    params_.push_back({p + ".w2", e.w2});
    params_.push_back({p + ".b2", e.b2});
  }
  fusion_.collect(params_);
  params_.push_back({"classifier.0.w", classifier_[0].w});
  params_.push_back({"classifier.0.b", classifier_[0].b});
  params_.push_back({"classifier.1.w", classifier_[1].w});
  params_.push_back({"classifier.1.b", classifier_[1].b});
  for (auto m : kAllModalities) {
    if (!aux_heads_[idx(m)]) continue;
    const std::string p = "aux." + std::string(modality_name(m));
    params_.push_back({p + ".w", aux_heads_[idx(m)]->w});
    params_.push_back({p + ".b", aux_heads_[idx(m)]->b});
  }
}

std::size_t CmusModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

ForwardResult CmusModel::forward(const PatientRecord& record) const {
  const std::size_t d = config_.dim;
  ForwardResult result;
  cmsa::FusionInputs inputs;
  for (auto m : kAllModalities) {
    if (!config_.modalities.has(m)) continue;
    const TokenMatrix& raw = record.features(m);
    if (raw.rows == 0 || raw.cols != config_.raw_dims[idx(m)] ||
        raw.values.size() != raw.rows * raw.cols) {
      throw ConfigError("patient " + record.id + ": modality " +
                        std::string(modality_name(m)) + " has " + std::to_string(raw.rows) +
                        "x" + std::to_string(raw.cols) + " features, model expects width " +
                        std::to_string(config_.raw_dims[idx(m)]));
    }
    cmsa::ModalityFeature f{m, encoders_[idx(m)](raw.to_tensor())};
    if (f.tokens.size(1) != d) {
      throw ConfigError("modality " + std::string(modality_name(m)) +
                        " encodes to the wrong width");
    }
    switch (m) {
      case Modality::OM:
        inputs.om = std::move(f);
        break;
      case Modality::IM:
        inputs.im = std::move(f);
        break;
      case Modality::TEM:
        if (config_.use_smil) {
          auto agg = smil::aggregate_bag(
              f.tokens, {config_.smil_threshold, 1e-8, config_.smil_detach_weights});
          inputs.tem_aggregated = agg.feature;
          result.smil = std::move(agg.diagnostics);
        } else {
          inputs.tem_aggregated = smil::mean_pool(f.tokens);
        }
        inputs.tem = std::move(f);
        break;
    }
  }

  auto fused = cmsa::fusion_variant_apply(inputs, fusion_);
  result.fused = fused.fused;
  result.logits = classifier_[1](relu(classifier_[0](fused.fused)));
  for (auto m : kAllModalities) {
    if (aux_heads_[idx(m)] && fused.per_modality[idx(m)]) {
      result.aux_logits[idx(m)] = (*aux_heads_[idx(m)])(*fused.per_modality[idx(m)]);
    }
  }
  return result;
}

std::vector<double> CmusModel::predict_proba(const PatientRecord& record) const {
  const auto out = forward(record);
  return softmax_values(out.logits.data());
}

LossBreakdown compute_losses(const Tensor& logits,
                             const std::array<std::optional<Tensor>, 3>& aux_logits,
                             std::size_t label, const LossWeights& weights) {
  LossBreakdown out;
  const Tensor fusion = cross_entropy(logits, label);
  out.fusion = fusion.item();
  std::vector<Tensor> terms;
  const std::array<double, 3> coef = {weights.alpha, weights.beta, weights.gamma};
  for (auto m : kAllModalities) {
    const auto& aux = aux_logits[idx(m)];
    if (!aux) continue;
    const Tensor l = cross_entropy(*aux, label);
    out.modality[idx(m)] = l.item();
    terms.push_back(scale(l, coef[idx(m)]));
  }
  terms.push_back(fusion);
  out.total = add_n(terms);
  return out;
}

double train_step(CmusModel& model, std::span<const PatientRecord* const> batch,
                  OptimizerState& state, double lr) {
  if (batch.empty()) throw ContractError("train_step: empty batch");
  auto params = model.parameters();
  zero_grads(params);
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  auto batch_ids = [&] {
    std::string ids;
    for (const auto* r : batch) ids += (ids.empty() ? "" : ", ") + r->id;
    return ids;
  };
  try {
    for (const auto* rec : batch) {
      const auto out = model.forward(*rec);
      const auto losses =
          compute_losses(out.logits, out.aux_logits, rec->label, model.config().loss_weights);
      const double value = losses.total.item();
      if (!std::isfinite(value)) {
        throw DivergenceError("non-finite loss in batch [" + batch_ids() + "]");
      }
      total += value;
      scale(losses.total, inv).backward();
    }
  } catch (const InvalidValueError& e) {
    throw DivergenceError(std::string(e.what()) + " in batch [" + batch_ids() + "]");
  }
  try {
    adam_step(params, state, lr);
  } catch (const DivergenceError& e) {
    throw DivergenceError(std::string(e.what()) + " in batch [" + batch_ids() + "]");
  }
  zero_grads(params);
  return total * inv;
}

TrainHistory train_model(CmusModel& model, std::span<const PatientRecord> records,
                         const TrainOptions& options) {
  if (records.empty()) throw ContractError("train_model: no records");
  if (options.batch_size == 0) throw ConfigError("batch size must be positive");
  if (options.epochs == 0) throw ConfigError("epoch count must be positive");
  OptimizerState state(model.parameters(), AdamOptions{options.weight_decay});
  const LrSchedule sched{options.lr0, options.epochs, 0.0};
  Rng rng(options.seed);
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  TrainHistory history;
  std::vector<const PatientRecord*> batch;
  for (std::uint32_t epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order);
    const double lr = cosine_lr(epoch, sched);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      batch.clear();
      const auto stop = std::min(order.size(), start + options.batch_size);
      for (auto i = start; i < stop; ++i) batch.push_back(&records[order[i]]);
      loss_sum += train_step(model, batch, state, lr);
      ++steps;
    }
    history.epoch_loss.push_back(loss_sum / static_cast<double>(steps));
  }
  return history;
}

namespace {

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"classes", c.classes},
          {"dim", c.dim},
          {"heads", c.heads},
          {"raw_dims", c.raw_dims},
          {"modalities", c.modalities.to_string()},
          {"fusion", std::string(cmsa::variant_name(c.fusion))},
          {"output_projection", c.output_projection},
          {"use_smil", c.use_smil},
          {"smil_threshold", c.smil_threshold},
          {"smil_detach_weights", c.smil_detach_weights},
          {"weighted_loss", c.weighted_loss},
          {"alpha", c.loss_weights.alpha},
          {"beta", c.loss_weights.beta},
          {"gamma", c.loss_weights.gamma}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.classes = j.at("classes").get<std::size_t>();
  c.dim = j.at("dim").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.raw_dims = j.at("raw_dims").get<std::array<std::size_t, 3>>();
  c.modalities = ModalityMask::parse(j.at("modalities").get<std::string>());
  c.fusion = cmsa::parse_variant(j.at("fusion").get<std::string>());
  c.output_projection = j.at("output_projection").get<bool>();
  c.use_smil = j.at("use_smil").get<bool>();
  c.smil_threshold = j.at("smil_threshold").get<double>();
  c.smil_detach_weights = j.at("smil_detach_weights").get<bool>();
  c.weighted_loss = j.at("weighted_loss").get<bool>();
  c.loss_weights = {j.at("alpha").get<double>(), j.at("beta").get<double>(),
                    j.at("gamma").get<double>()};
  return c;
}

}  // namespace

void save_checkpoint(const CmusModel& model, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["format"] = "scalefuse.checkpoint";
  doc["version"] = 1;
  doc["config"] = config_to_json(model.config());
  auto& params = doc["parameters"] = nlohmann::json::array();
  for (const auto& p : model.parameters()) {
    params.push_back({{"name", p.name},
                      {"shape", p.value.shape()},
                      {"data", p.value.to_vector()}});
  }
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open checkpoint for writing");
  out << doc.dump(1) << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

CmusModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open checkpoint");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
    if (doc.at("format") != "scalefuse.checkpoint" || doc.at("version") != 1) {
      throw ManifestParseError(path.string() + ": not a version 1 checkpoint");
    }
    CmusModel model(config_from_json(doc.at("config")), 0);
    const auto& stored = doc.at("parameters");
    auto params = model.parameters();
    if (stored.size() != params.size()) {
      throw ShapeMismatchError(path.string() + ": checkpoint has " +
                               std::to_string(stored.size()) + " tensors, model expects " +
                               std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& s = stored[i];
      if (s.at("name").get<std::string>() != params[i].name ||
          s.at("shape").get<Shape>() != params[i].value.shape()) {
        throw ShapeMismatchError(path.string() + ": tensor " + params[i].name +
                                 " does not match the configured model");
      }
      const auto values = s.at("data").get<std::vector<double>>();
      auto dst = params[i].value.data();
      if (values.size() != dst.size()) {
        throw ShapeMismatchError(path.string() + ": tensor " + params[i].name +
                                 " has the wrong number of values");
      }
      std::copy(values.begin(), values.end(), dst.begin());
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ManifestParseError(path.string() + ": malformed checkpoint: " + e.what());
  }
}

}  // namespace scalefuse
