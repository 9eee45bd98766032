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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scalefuse/cmsa.hpp"
#include "scalefuse/optim.hpp"
#include "scalefuse/record.hpp"
#include "scalefuse/smil.hpp"
#include "scalefuse/tensor.hpp"

namespace scalefuse {

struct LossWeights {
  double alpha = 0.3;  // OM
  double beta = 0.5;   // IM
  double gamma = 0.2;  // TEM

  bool operator==(const LossWeights&) const = default;
};

struct ModelConfig {
  std::size_t classes = 3;
  std::size_t dim = 64;
  std::size_t heads = 4;
  // Raw input widths per modality, indexed by Modality.
  std::array<std::size_t, 3> raw_dims = {16, 16, 16};
  ModalityMask modalities = ModalityMask::all();
  cmsa::FusionVariant fusion = cmsa::FusionVariant::Cmsa;
  bool output_projection = false;
  bool use_smil = true;  // false: mean-pool the TEM bag
  double smil_threshold = 1.5;
  bool smil_detach_weights = false;
  bool weighted_loss = true;  // false: total loss is the fusion term alone
  LossWeights loss_weights;

  // Throws ConfigError describing the first violated constraint.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Encoder for one modality: raw -> d -> d with a relu in between, or the
// identity when raw == d.
struct Encoder {
  Tensor w1, b1, w2, b2;
  bool identity() const { return !w1.defined(); }
  Tensor operator()(const Tensor& x) const;
};

struct Affine {
  Tensor w, b;
  Tensor operator()(const Tensor& x) const;
};

struct ForwardResult {
  Tensor logits;                                // C
  std::array<std::optional<Tensor>, 3> aux_logits;  // per modality, when trained with WL
  Tensor fused;                                 // present_count * d
  std::optional<smil::SmilDiagnostics> smil;
};

class CmusModel {
 public:
  CmusModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  // Every learnable tensor, each exactly once, in a fixed order.
  std::span<Parameter> parameters() { return params_; }
  std::span<const Parameter> parameters() const { return params_; }
  std::size_t parameter_count() const;

  ForwardResult forward(const PatientRecord& record) const;
  // Softmax of the fusion logits; no graph is kept.
  std::vector<double> predict_proba(const PatientRecord& record) const;

  // The final classifier layer, exposed for tests that pin its weights.
  Affine& classifier_output() { return classifier_[1]; }

 private:
  void register_parameters();

  ModelConfig config_;
  std::array<Encoder, 3> encoders_;
  cmsa::FusionParams fusion_;
  std::array<Affine, 2> classifier_;
  std::array<std::optional<Affine>, 3> aux_heads_;
  std::vector<Parameter> params_;
};

struct LossBreakdown {
  Tensor total;
  double fusion = 0.0;
  std::array<double, 3> modality{0.0, 0.0, 0.0};  // indexed by Modality
};

// total = alpha * L_OM + beta * L_IM + gamma * L_TEM + L_fusion with every
// term a categorical cross-entropy. Missing auxiliary logits contribute
// nothing.
LossBreakdown compute_losses(const Tensor& logits,
                             const std::array<std::optional<Tensor>, 3>& aux_logits,
                             std::size_t label, const LossWeights& weights);

// Mean total loss over the batch, accumulated into the parameter grads,
// followed by one Adam step and a grad reset. Returns the pre-step loss.
// Throws DivergenceError listing the batch's patient ids on non-finite loss.
double train_step(CmusModel& model, std::span<const PatientRecord* const> batch,
                  OptimizerState& state, double lr);

struct TrainOptions {
  std::uint32_t epochs = 60;
  std::size_t batch_size = 4;
  double lr0 = 5e-5;
  double weight_decay = 5e-5;
  std::uint64_t seed = 0;  // shuffling

  bool operator==(const TrainOptions&) const = default;
};

struct TrainHistory {
  std::vector<double> epoch_loss;  // mean train_step loss per epoch
};

// Shuffled mini-batch training with a per-epoch cosine learning rate.
TrainHistory train_model(CmusModel& model, std::span<const PatientRecord> records,
                         const TrainOptions& options);

// JSON document holding the config and every parameter tensor. Values are
// written with round-trip precision so loading is bit-exact.
void save_checkpoint(const CmusModel& model, const std::filesystem::path& path);
CmusModel load_checkpoint(const std::filesystem::path& path);

}  // namespace scalefuse
