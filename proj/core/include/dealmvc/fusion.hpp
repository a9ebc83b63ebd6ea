#pragma once

#include <span>

#include "dealmvc/autodiff.hpp"
#include "dealmvc/networks.hpp"

namespace dealmvc {

// Attention distribution over views from the stacked view embeddings.
// All tape quantities are 1 x V rows.
ad::Var attention_weights(ad::Tape& tape, const BoundAttention& att,
                          std::span<const ad::Var> z_views);
Vector attention_weights(const AttentionNet& att, std::span<const Matrix> z_views);

// q' = softmax(MLP_gamma(q)). The incoming q is treated as a constant; only
// gamma receives gradients.
ad::Var view_sampling_probs(ad::Tape& tape, const BoundMlp& gamma, const Vector& q);
Vector view_sampling_probs(const Mlp& gamma, const Vector& q);

// r = a .* q, exact entrywise product.
ad::Var regulatory_factor(ad::Tape& tape, ad::Var a, ad::Var q);
Vector regulatory_factor(const Vector& a, const Vector& q);

// w~ = r .* w ; w' = w~ / sum(w~) ; Z^G = sum_v w'_v Z^v.
struct BoundFusion {
  ad::Var w_next;  // 1 x V
  ad::Var zg;      // N x D
};
BoundFusion fuse(ad::Tape& tape, std::span<const ad::Var> z_views, const Vector& w, ad::Var r);

struct FuseResult {
  Vector w_next;
  Matrix zg;
};
FuseResult fuse(std::span<const Matrix> z_views, const Vector& w, const Vector& r);

// Inference-time fusion: convex combination with the stored weight vector.
Matrix fuse_with_weights(std::span<const Matrix> z_views, const Vector& w);

}  // namespace dealmvc
