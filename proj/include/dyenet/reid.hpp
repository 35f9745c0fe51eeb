#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dyenet/geometry.hpp"
#include "dyenet/param_store.hpp"
#include "dyenet/tape.hpp"
#include "dyenet/tensor.hpp"

namespace dyenet {

// Re-identification: per-proposal mask prediction and identity embedding,
// cosine matching against the template set, OIM training loss.

// m x m bilinear samples at the cell centers of `box` (frame coordinates,
// divided by 8 to address the feature map — no rounding). feature is
// C x H/8 x W/8; result C x m x m.
template <typename T>
TensorPtr<T> roi_align(Tape<T>* tape, const TensorPtr<T>& feature, const Box& box, int m);

// Parameter groups. reid.mask.*: two 3x3 stride-1 convs + 1-channel output
// conv (strides decreased on the roi). reid.embed.*: 3x3 stride-1 conv, 3x3
// stride-2 conv (original strides kept), global average pooling, fully
// connected to d_embed.
template <typename T>
void init_reid_heads(ParamStore<T>& params, int feat_width, int head_width, int embed_dim,
                     Rng& rng);

template <typename T>
TensorPtr<T> mask_head_logits(Tape<T>* tape, const TensorPtr<T>& roi, const ParamStore<T>& params);

// Probabilities in (0,1): sigmoid over the logits.
template <typename T>
TensorPtr<T> mask_head(Tape<T>* tape, const TensorPtr<T>& roi, const ParamStore<T>& params);

// Unit-norm embedding; throws DegenerateEmbedding when the pre-normalization
// norm is below 1e-8 (callers reject the proposal).
template <typename T>
TensorPtr<T> embed_head(Tape<T>* tape, const TensorPtr<T>& roi, const ParamStore<T>& params);

struct Template {
    std::vector<float> embedding;  // unit length
    int identity = 0;
    int provenance = 0;  // 0 = first frame, t >= 1 = expanded at iteration t
};

using TemplateSet = std::vector<Template>;

struct MatchResult {
    int identity = 0;
    double similarity = 0.0;
};

// Identity of the template with maximum cosine similarity when that maximum
// exceeds rho_reid, otherwise nullopt.
std::optional<MatchResult> match_templates(const std::vector<float>& embedding,
                                           const TemplateSet& templates, double rho_reid);

double cosine(const std::vector<float>& a, const std::vector<float>& b);

// OIM loss over a batch of unit embeddings. lut is the K x d lookup table of
// per-identity running-mean embeddings (rows unit length); labels are 0-based
// row indices. Returns the scalar loss; `updated_lut` (if non-null) receives
// row <- normalize(mu*row + (1-mu)*embedding) applied per sample in order —
// the input lut is not mutated, so the loss stays a pure function for
// gradient checking. Gradients flow into the embeddings only.
template <typename T>
TensorPtr<T> oim_loss(Tape<T>* tape, const std::vector<TensorPtr<T>>& embeddings,
                      const std::vector<int>& labels, const Tensor<T>& lut, double tau, double mu,
                      Tensor<T>* updated_lut);

// Random unit rows, one per identity.
template <typename T>
Tensor<T> make_oim_lut(int num_identities, int embed_dim, Rng& rng);

}  // namespace dyenet
