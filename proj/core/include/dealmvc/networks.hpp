#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dealmvc/autodiff.hpp"

namespace dealmvc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct LinearLayer {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out

  int in_dim() const { return static_cast<int>(weight.rows()); }
  int out_dim() const { return static_cast<int>(weight.cols()); }
};

// Multilayer perceptron: rectified-linear between layers, linear output.
struct Mlp {
  std::vector<LinearLayer> layers;

  int in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  int out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
};

// View-weighting network: layer norm over the embedding dimension, one
// self-attention head across the view axis, mean pooling over samples, and
// a feed-forward map to per-view logits.
struct AttentionNet {
  Matrix ln_gain, ln_bias;  // 1 x D
  Matrix wq, wk, wv;        // D x D
  Mlp ffn;                  // D -> hidden -> 1
};

// Per-step fusion quantities. w and q persist across batches; a and r are
// recomputed every step. t counts completed fusion updates.
struct FusionState {
  Vector a, q, r, w;
  long t = 0;
};

struct ModelState {
  std::vector<Mlp> encoders;  // d_v -> hidden... -> D
  std::vector<Mlp> decoders;  // D -> reversed hidden... -> d_v
  LinearLayer head;           // D -> K, shared by all views and the fused feature
  AttentionNet attention;
  Mlp sampling_net;  // V -> hidden -> V
  FusionState fusion;

  int view_count() const { return static_cast<int>(encoders.size()); }
  int embed_dim() const { return encoders.empty() ? 0 : encoders.front().out_dim(); }
  int cluster_count() const { return head.out_dim(); }
  bool has_head() const { return head.weight.size() > 0; }

  static ModelState init(const std::vector<int>& view_dims, int embed_dim, int clusters,
                         const std::vector<int>& hidden, std::uint64_t seed);

  enum class ParamGroup { autoencoder, contrastive, all };

  // Stable named traversal; the optimizer, checkpoints and gradient tests
  // all rely on this order.
  void for_each_param(ParamGroup group,
                      const std::function<void(const std::string&, Matrix&)>& fn);
  void for_each_param(ParamGroup group,
                      const std::function<void(const std::string&, const Matrix&)>& fn) const;
};

// Tape bindings: parameters registered as leaves (trainable) or constants.
struct BoundLinear {
  ad::Var weight, bias;
};
struct BoundMlp {
  std::vector<BoundLinear> layers;
};
struct BoundAttention {
  ad::Var ln_gain, ln_bias, wq, wk, wv;
  BoundMlp ffn;
};
struct BoundModel {
  std::vector<BoundMlp> encoders, decoders;
  BoundLinear head;
  BoundAttention attention;
  BoundMlp sampling_net;
  // same order as ModelState::for_each_param(all)
  std::vector<std::pair<std::string, ad::Var>> params;
};

BoundModel bind_model(ad::Tape& tape, const ModelState& model, bool trainable);

ad::Var linear_forward(ad::Tape& tape, const BoundLinear& layer, ad::Var x);
ad::Var mlp_forward(ad::Tape& tape, const BoundMlp& mlp, ad::Var x);

// Z^v = f(X^v; theta^v)
ad::Var encode(ad::Tape& tape, const BoundMlp& encoder, ad::Var x);
Matrix encode(const Mlp& encoder, const Matrix& x);

// X~^v = g(Z^v; phi^v)
ad::Var decode(ad::Tape& tape, const BoundMlp& decoder, ad::Var z);
Matrix decode(const Mlp& decoder, const Matrix& z);

// sum_v ||X^v - X~^v||_F^2
ad::Var reconstruction_loss(ad::Tape& tape, std::span<const ad::Var> xs,
                            std::span<const ad::Var> xhats);
double reconstruction_loss(std::span<const Matrix> xs, std::span<const Matrix> xhats);

// Row-stochastic class probabilities p = softmax(Z W + b).
ad::Var classify(ad::Tape& tape, const BoundLinear& head, ad::Var z);
Matrix classify(const LinearLayer& head, const Matrix& z);

}  // namespace dealmvc
