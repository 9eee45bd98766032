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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scalefuse/optim.hpp"
#include "scalefuse/record.hpp"
#include "scalefuse/rng.hpp"
#include "scalefuse/tensor.hpp"

// Cross-modal attention fusion. The aggregated TEM feature queries the OM
// and IM token sets; each branch adds its attention output back onto the
// pooled tokens of its modality.
namespace scalefuse::cmsa {

// Tokens of one modality after encoding: L x d, L >= 1.
struct ModalityFeature {
  Modality modality = Modality::OM;
  Tensor tokens;

  // Token mean; identity for a single token.
  Tensor pooled() const;
};

// Q/K/V projections for one attention block. Each W is d x d with a bias.
struct AttentionParams {
  std::size_t heads = 4;
  Tensor wq, bq, wk, bk, wv, bv;
  // Output projection, present only when enabled.
  std::optional<Tensor> wo, bo;

  std::size_t dim() const { return wq.size(0); }
  // Appends the tensors under prefix + ".wq" etc.
  void collect(const std::string& prefix, std::vector<Parameter>& out) const;
};

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
AttentionParams make_attention_params(std::size_t dim, std::size_t heads,
                                      bool output_projection, Rng& rng);
// All weights and biases zero; used for the residual-only property.
AttentionParams zero_attention_params(std::size_t dim, std::size_t heads,
                                      bool output_projection);

// Throws ConfigError unless heads >= 1 divides dim.
void check_heads(std::size_t dim, std::size_t heads);

struct AttentionOutput {
  Tensor output;                              // d-vector
  std::vector<std::vector<double>> weights;   // per head, one per kv token
};

// Multi-head attention of a single query vector over L key/value tokens:
// head_h = softmax(q_h K_h^T / sqrt(d/h)) V_h, heads concatenated, then the
// optional output projection.
AttentionOutput cross_attention_heads(const Tensor& query, const Tensor& kv_tokens,
                                      const AttentionParams& params);

struct CmsaParams {
  AttentionParams om;  // TEM -> OM branch
  AttentionParams im;  // TEM -> IM branch
};

struct CmsaOutput {
  Tensor om;  // f'_OM
  Tensor im;  // f'_IM
};

// f'_k = cross_attention_heads(tem, tokens_k) + pooled(tokens_k), k in {OM, IM}.
CmsaOutput cmsa_fuse(const Tensor& tem_feature, const ModalityFeature& om,
                     const ModalityFeature& im, const CmsaParams& params);

enum class FusionVariant { None, SelfAttention, ModalityAttention, BidirectionalCross, Cmsa };

std::string_view variant_name(FusionVariant v);
// Accepts the names printed by variant_name; throws ConfigError otherwise.
FusionVariant parse_variant(std::string_view name);
inline constexpr std::array<FusionVariant, 5> kAllVariants = {
    FusionVariant::None, FusionVariant::SelfAttention, FusionVariant::ModalityAttention,
    FusionVariant::BidirectionalCross, FusionVariant::Cmsa};

// Learnable state for whichever variant is configured. Only the members the
// variant uses are populated.
struct FusionParams {
  FusionVariant variant = FusionVariant::Cmsa;
  std::optional<CmsaParams> cmsa;
  // SelfAttention: one block per modality, indexed by Modality.
  std::vector<AttentionParams> self_attention;
  // ModalityAttention: one gate logit per modality.
  std::optional<Tensor> gate_logits;
  // BidirectionalCross: block [q * 3 + kv] lets modality q attend over kv.
  std::vector<AttentionParams> cross_pairs;

  void collect(std::vector<Parameter>& out) const;
};

FusionParams make_fusion_params(FusionVariant variant, std::size_t dim, std::size_t heads,
                                bool output_projection, Rng& rng);

// Inputs to a fusion variant: encoded tokens for every present modality
// (TEM tokens are the encoded bag instances) and the aggregated TEM vector.
struct FusionInputs {
  std::optional<ModalityFeature> om;
  std::optional<ModalityFeature> im;
  std::optional<ModalityFeature> tem;
  std::optional<Tensor> tem_aggregated;  // required whenever tem is present

  bool has(Modality m) const;
  const ModalityFeature& feature(Modality m) const;
  // Aggregated TEM vector, or the token mean for OM/IM.
  Tensor pooled(Modality m) const;
};

struct FusionOutput {
  Tensor fused;  // concatenation in OM, TEM, IM order over present modalities
  // Per-modality features f'_k feeding the auxiliary heads, indexed by Modality.
  std::array<std::optional<Tensor>, 3> per_modality;
};

// With all three modalities the fused vector has length 3d for every
// variant. With fewer, present modalities are concatenated (OM, TEM, IM
// order) after the variant's per-modality transform; Cmsa needs TEM and
// falls back to plain concatenation without it, and a single modality
// bypasses fusion.
FusionOutput fusion_variant_apply(const FusionInputs& inputs, const FusionParams& params);

}  // namespace scalefuse::cmsa
