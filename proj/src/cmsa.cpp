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

#include "scalefuse/cmsa.hpp"

#include <cmath>

#include "scalefuse/errors.hpp"
#include "scalefuse/ops.hpp"

namespace scalefuse::cmsa {

Tensor ModalityFeature::pooled() const { return mean_rows(tokens); }

namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(fan_in * fan_out);
  for (auto& x : v) x = rng.uniform(-limit, limit);
  return Tensor::matrix(fan_in, fan_out, std::move(v), true);
}

Tensor zero_bias(std::size_t n) { return Tensor::zeros({n}, true); }

}  // namespace

void check_heads(std::size_t dim, std::size_t heads) {
  if (heads == 0 || dim == 0 || dim % heads != 0) {
    throw ConfigError("feature dimension " + std::to_string(dim) +
                      " is not divisible by head count " + std::to_string(heads));
  }
}

void AttentionParams::collect(const std::string& prefix, std::vector<Parameter>& out) const {
  out.push_back({prefix + ".wq", wq});
  out.push_back({prefix + ".bq", bq});
  out.push_back({prefix + ".wk", wk});
  out.push_back({prefix + ".bk", bk});
  out.push_back({prefix + ".wv", wv});
  out.push_back({prefix + ".bv", bv});
  if (wo) {
    out.push_back({prefix + ".wo", *wo});
    out.push_back({prefix + ".bo", *bo});
  }
}

AttentionParams make_attention_params(std::size_t dim, std::size_t heads,
                                      bool output_projection, Rng& rng) {
  check_heads(dim, heads);
  AttentionParams p;
  p.heads = heads;
  p.wq = glorot(dim, dim, rng);
  p.bq = zero_bias(dim);
  p.wk = glorot(dim, dim, rng);
  p.bk = zero_bias(dim);
  p.wv = glorot(dim, dim, rng);
  p.bv = zero_bias(dim);
  if (output_projection) {
    p.wo = glorot(dim, dim, rng);
    p.bo = zero_bias(dim);
  }
  return p;
}

AttentionParams zero_attention_params(std::size_t dim, std::size_t heads,
                                      bool output_projection) {
  check_heads(dim, heads);
  AttentionParams p;
  p.heads = heads;
  p.wq = Tensor::zeros({dim, dim}, true);
  p.bq = zero_bias(dim);
  p.wk = Tensor::zeros({dim, dim}, true);
  p.bk = zero_bias(dim);
  p.wv = Tensor::zeros({dim, dim}, true);
  p.bv = zero_bias(dim);
  if (output_projection) {
    p.wo = Tensor::zeros({dim, dim}, true);
    p.bo = zero_bias(dim);
  }
  return p;
}

AttentionOutput cross_attention_heads(const Tensor& query, const Tensor& kv_tokens,
                                      const AttentionParams& params) {
  const std::size_t d = params.dim();
  check_heads(d, params.heads);
  Tensor q = query;
  if (q.dim() == 2) {
    if (q.size(0) != 1) throw ContractError("cross attention query must be a single token");
    q = row(q, 0);
  }
  if (q.dim() != 1 || q.size(0) != d) {
    throw DimensionError("cross attention query has shape " + shape_to_string(query.shape()) +
                         ", expected " + std::to_string(d));
  }
  if (kv_tokens.dim() != 2 || kv_tokens.size(1) != d) {
    throw DimensionError("cross attention tokens have shape " +
                         shape_to_string(kv_tokens.shape()));
  }

  const Tensor qp = linear(q, params.wq, params.bq);
  const Tensor kp = linear(kv_tokens, params.wk, params.bk);
  const Tensor vp = linear(kv_tokens, params.wv, params.bv);
  const std::size_t dh = d / params.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  AttentionOutput out;
  std::vector<Tensor> heads;
  heads.reserve(params.heads);
  for (std::size_t h = 0; h < params.heads; ++h) {
    const Tensor qh = slice(qp, h * dh, dh);
    const Tensor scores = scale(matmul(slice_cols(kp, h * dh, dh), qh), inv_sqrt);
    const Tensor attn = softmax(scores);
    out.weights.push_back(attn.to_vector());
    heads.push_back(matmul(attn, slice_cols(vp, h * dh, dh)));
  }
  Tensor joined = concat(heads);
  if (params.wo) joined = linear(joined, *params.wo, *params.bo);
  out.output = std::move(joined);
  return out;
}

CmsaOutput cmsa_fuse(const Tensor& tem_feature, const ModalityFeature& om,
                     const ModalityFeature& im, const CmsaParams& params) {
  CmsaOutput out;
  out.om = add(cross_attention_heads(tem_feature, om.tokens, params.om).output, om.pooled());
  out.im = add(cross_attention_heads(tem_feature, im.tokens, params.im).output, im.pooled());
  return out;
}

std::string_view variant_name(FusionVariant v) {
  switch (v) {
    case FusionVariant::None:
      return "none";
    case FusionVariant::SelfAttention:
      return "self_attention";
    case FusionVariant::ModalityAttention:
      return "modality_attention";
    case FusionVariant::BidirectionalCross:
      return "bidirectional_cross";
    case FusionVariant::Cmsa:
      return "cmsa";
  }
  return "?";
}

FusionVariant parse_variant(std::string_view name) {
  for (auto v : kAllVariants) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigError("unknown fusion variant '" + std::string(name) + "'");
}

void FusionParams::collect(std::vector<Parameter>& out) const {
  if (cmsa) {
    cmsa->om.collect("cmsa.om", out);
    cmsa->im.collect("cmsa.im", out);
  }
  for (std::size_t m = 0; m < self_attention.size(); ++m) {
    self_attention[m].collect(
        "self_attention." + std::string(modality_name(static_cast<Modality>(m))), out);
  }
  if (gate_logits) out.push_back({"modality_attention.gates", *gate_logits});
  for (std::size_t i = 0; i < cross_pairs.size(); ++i) {
    const auto q = static_cast<Modality>(i / 3), kv = static_cast<Modality>(i % 3);
    if (q == kv) continue;
    cross_pairs[i].collect("cross." + std::string(modality_name(q)) + "_" +
                               std::string(modality_name(kv)),
                           out);
  }
}

FusionParams make_fusion_params(FusionVariant variant, std::size_t dim, std::size_t heads,
                                bool output_projection, Rng& rng) {
  check_heads(dim, heads);
  FusionParams p;
  p.variant = variant;
  switch (variant) {
    case FusionVariant::None:
      break;
    case FusionVariant::Cmsa: {
      CmsaParams c;
      c.om = make_attention_params(dim, heads, output_projection, rng);
      c.im = make_attention_params(dim, heads, output_projection, rng);
      p.cmsa = std::move(c);
      break;
    }
    case FusionVariant::SelfAttention:
      for (std::size_t m = 0; m < 3; ++m) {
        p.self_attention.push_back(make_attention_params(dim, heads, output_projection, rng));
      }
      break;
    case FusionVariant::ModalityAttention:
      p.gate_logits = Tensor::zeros({3}, true);
      break;
    case FusionVariant::BidirectionalCross:
      // Diagonal blocks are unused placeholders so indexing stays q * 3 + kv.
      for (std::size_t i = 0; i < 9; ++i) {
        if (i / 3 == i % 3) {
          p.cross_pairs.emplace_back();
        } else {
          p.cross_pairs.push_back(make_attention_params(dim, heads, output_projection, rng));
        }
      }
      break;
  }
  return p;
}

bool FusionInputs::has(Modality m) const {
  switch (m) {
    case Modality::OM:
      return om.has_value();
    case Modality::IM:
      return im.has_value();
    case Modality::TEM:
      return tem.has_value();
  }
  return false;
}

const ModalityFeature& FusionInputs::feature(Modality m) const {
  if (!has(m)) {
    throw ContractError("fusion input for modality " + std::string(modality_name(m)) +
                        " is missing");
  }
  switch (m) {
    case Modality::OM:
      return *om;
    case Modality::IM:
      return *im;
    case Modality::TEM:
      return *tem;
  }
  return *om;
}

Tensor FusionInputs::pooled(Modality m) const {
  if (m == Modality::TEM) {
    if (!tem_aggregated) throw ContractError("aggregated TEM feature missing");
    return *tem_aggregated;
  }
  return feature(m).pooled();
}

namespace {

// Pooled self-attention output plus residual. Mean pooling commutes with the
// per-token output projection, so heads are pooled before projecting.
Tensor self_attend(const Tensor& tokens, const Tensor& residual, const AttentionParams& p) {
  const std::size_t d = p.dim();
  const std::size_t dh = d / p.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const Tensor qp = linear(tokens, p.wq, p.bq);
  const Tensor kp = linear(tokens, p.wk, p.bk);
  const Tensor vp = linear(tokens, p.wv, p.bv);
  std::vector<Tensor> heads;
  for (std::size_t h = 0; h < p.heads; ++h) {
    const Tensor scores =
        scale(matmul(slice_cols(qp, h * dh, dh), transpose(slice_cols(kp, h * dh, dh))),
              inv_sqrt);
    heads.push_back(mean_rows(matmul(softmax(scores), slice_cols(vp, h * dh, dh))));
  }
  Tensor joined = concat(heads);
  if (p.wo) joined = linear(joined, *p.wo, *p.bo);
  return add(joined, residual);
}

}  // namespace

FusionOutput fusion_variant_apply(const FusionInputs& inputs, const FusionParams& params) {
  std::vector<Modality> present;
  for (auto m : {Modality::OM, Modality::TEM, Modality::IM}) {
    if (inputs.has(m)) present.push_back(m);
  }
  if (present.empty()) throw ContractError("fusion needs at least one modality");

  FusionOutput out;
  auto& per = out.per_modality;
  auto idx = [](Modality m) { return static_cast<std::size_t>(m); };

  if (present.size() == 1) {
    per[idx(present[0])] = inputs.pooled(present[0]);
  } else {
    switch (params.variant) {
      case FusionVariant::None:
        for (auto m : present) per[idx(m)] = inputs.pooled(m);
        break;
      case FusionVariant::Cmsa: {
        if (!params.cmsa) throw ConfigError("cmsa parameters missing");
        for (auto m : present) per[idx(m)] = inputs.pooled(m);
        if (inputs.has(Modality::TEM)) {
          const Tensor query = inputs.pooled(Modality::TEM);
          if (inputs.has(Modality::OM)) {
            const auto& f = inputs.feature(Modality::OM);
            per[idx(Modality::OM)] =
                add(cross_attention_heads(query, f.tokens, params.cmsa->om).output, f.pooled());
          }
          if (inputs.has(Modality::IM)) {
            const auto& f = inputs.feature(Modality::IM);
            per[idx(Modality::IM)] =
                add(cross_attention_heads(query, f.tokens, params.cmsa->im).output, f.pooled());
          }
        }
        break;
      }
      case FusionVariant::SelfAttention:
        if (params.self_attention.size() != 3) throw ConfigError("self-attention parameters missing");
        for (auto m : present) {
          per[idx(m)] = self_attend(inputs.feature(m).tokens, inputs.pooled(m),
                                    params.self_attention[idx(m)]);
        }
        break;
      case FusionVariant::ModalityAttention: {
        if (!params.gate_logits) throw ConfigError("modality gate parameters missing");
        std::vector<Tensor> logits;
        for (auto m : present) logits.push_back(slice(*params.gate_logits, idx(m), 1));
        const Tensor gates = softmax(concat(logits));
        for (std::size_t i = 0; i < present.size(); ++i) {
          per[idx(present[i])] = mul_scalar(inputs.pooled(present[i]), slice(gates, i, 1));
        }
        break;
      }
      case FusionVariant::BidirectionalCross: {
        if (params.cross_pairs.size() != 9) throw ConfigError("cross-attention parameters missing");
        for (auto q : present) {
          const Tensor query = inputs.pooled(q);
          std::vector<Tensor> attended;
          for (auto kv : present) {
            if (kv == q) continue;
            attended.push_back(cross_attention_heads(query, inputs.feature(kv).tokens,
                                                     params.cross_pairs[idx(q) * 3 + idx(kv)])
                                   .output);
          }
          const Tensor avg = scale(add_n(attended), 1.0 / static_cast<double>(attended.size()));
          per[idx(q)] = add(avg, query);
        }
        break;
      }
    }
  }

  std::vector<Tensor> parts;
  for (auto m : present) parts.push_back(*per[idx(m)]);
  out.fused = concat(parts);
  return out;
}

}  // namespace scalefuse::cmsa
