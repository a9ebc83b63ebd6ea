#include "dealmvc/networks.hpp"

#include <random>

#include "dealmvc/errors.hpp"
#include "dealmvc/random.hpp"

namespace dealmvc {

namespace {

// Uniform He-style fan-in initialization: U(+-sqrt(6 / fan_in)).
Matrix he_uniform(int rows, int cols, int fan_in, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / std::max(1, fan_in));
  std::uniform_real_distribution<double> u(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = u(rng);
  return m;
}

LinearLayer make_linear(int in, int out, std::mt19937_64& rng) {
  LinearLayer layer;
  layer.weight = he_uniform(in, out, in, rng);
  layer.bias = Matrix::Zero(1, out);
  return layer;
}

Mlp make_mlp(const std::vector<int>& dims, std::mt19937_64& rng) {
  Mlp mlp;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    mlp.layers.push_back(make_linear(dims[i], dims[i + 1], rng));
  }
  return mlp;
}

}  // namespace

ModelState ModelState::init(const std::vector<int>& view_dims, int embed_dim, int clusters,
                            const std::vector<int>& hidden, std::uint64_t seed) {
  require(!view_dims.empty(), ErrorKind::InvalidShape, "need at least one view");
  require(embed_dim >= 1, ErrorKind::InvalidShape, "embed_dim must be positive");
  require(clusters >= 1, ErrorKind::InvalidShape, "cluster count must be positive");

  auto rng = make_rng(seed, rng_stream::init);
  const int v_count = static_cast<int>(view_dims.size());

  ModelState model;
  for (int v = 0; v < v_count; ++v) {
    std::vector<int> enc_dims;
    enc_dims.push_back(view_dims[static_cast<std::size_t>(v)]);
    enc_dims.insert(enc_dims.end(), hidden.begin(), hidden.end());
    enc_dims.push_back(embed_dim);
    model.encoders.push_back(make_mlp(enc_dims, rng));

    std::vector<int> dec_dims(enc_dims.rbegin(), enc_dims.rend());
    model.decoders.push_back(make_mlp(dec_dims, rng));
  }
  model.head = make_linear(embed_dim, clusters, rng);

  model.attention.ln_gain = Matrix::Ones(1, embed_dim);
  model.attention.ln_bias = Matrix::Zero(1, embed_dim);
  model.attention.wq = he_uniform(embed_dim, embed_dim, embed_dim, rng);
  model.attention.wk = he_uniform(embed_dim, embed_dim, embed_dim, rng);
  model.attention.wv = he_uniform(embed_dim, embed_dim, embed_dim, rng);
  model.attention.ffn = make_mlp({embed_dim, 64, 1}, rng);

  const int gamma_hidden = std::max(16, 4 * v_count);
  model.sampling_net = make_mlp({v_count, gamma_hidden, v_count}, rng);

  model.fusion.w = Vector::Constant(v_count, 1.0 / v_count);
  model.fusion.q = Vector::Constant(v_count, 1.0 / v_count);
  model.fusion.a = Vector::Constant(v_count, 1.0 / v_count);
  model.fusion.r = model.fusion.a.cwiseProduct(model.fusion.q);
  model.fusion.t = 0;
  return model;
}

namespace {

template <class Model, class Fn>
void traverse_params(Model& model, ModelState::ParamGroup group, Fn&& fn) {
  using Group = ModelState::ParamGroup;
  const bool want_ae = group == Group::autoencoder || group == Group::all;
  const bool want_ct = group == Group::contrastive || group == Group::all;

  auto visit_mlp = [&](auto& mlp, const std::string& prefix) {
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
      fn(prefix + ".layer." + std::to_string(l) + ".weight", mlp.layers[l].weight);
      fn(prefix + ".layer." + std::to_string(l) + ".bias", mlp.layers[l].bias);
    }
  };

  if (want_ae) {
    for (std::size_t v = 0; v < model.encoders.size(); ++v)
      visit_mlp(model.encoders[v], "encoder." + std::to_string(v));
    for (std::size_t v = 0; v < model.decoders.size(); ++v)
      visit_mlp(model.decoders[v], "decoder." + std::to_string(v));
  }
  if (want_ct) {
    fn("head.weight", model.head.weight);
    fn("head.bias", model.head.bias);
    fn("attention.ln_gain", model.attention.ln_gain);
    fn("attention.ln_bias", model.attention.ln_bias);
    fn("attention.wq", model.attention.wq);
    fn("attention.wk", model.attention.wk);
    fn("attention.wv", model.attention.wv);
    visit_mlp(model.attention.ffn, "attention.ffn");
    visit_mlp(model.sampling_net, "sampling_net");
  }
}

}  // namespace

void ModelState::for_each_param(ParamGroup group,
                                const std::function<void(const std::string&, Matrix&)>& fn) {
  traverse_params(*this, group, fn);
}

void ModelState::for_each_param(
    ParamGroup group, const std::function<void(const std::string&, const Matrix&)>& fn) const {
  traverse_params(*this, group, fn);
}

BoundModel bind_model(ad::Tape& tape, const ModelState& model, bool trainable) {
  BoundModel bound;
  auto reg = [&](const std::string& name, const Matrix& m) -> ad::Var {
    ad::Var v = trainable ? tape.leaf(m) : tape.constant(m);
    bound.params.emplace_back(name, v);
    return v;
  };

  auto bind_mlp = [&](const Mlp& mlp, const std::string& prefix) {
    BoundMlp bm;
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
      BoundLinear bl;
      bl.weight = reg(prefix + ".layer." + std::to_string(l) + ".weight", mlp.layers[l].weight);
      bl.bias = reg(prefix + ".layer." + std::to_string(l) + ".bias", mlp.layers[l].bias);
      bm.layers.push_back(bl);
    }
    return bm;
  };

  for (std::size_t v = 0; v < model.encoders.size(); ++v)
    bound.encoders.push_back(bind_mlp(model.encoders[v], "encoder." + std::to_string(v)));
  for (std::size_t v = 0; v < model.decoders.size(); ++v)
    bound.decoders.push_back(bind_mlp(model.decoders[v], "decoder." + std::to_string(v)));
  bound.head.weight = reg("head.weight", model.head.weight);
  bound.head.bias = reg("head.bias", model.head.bias);
  bound.attention.ln_gain = reg("attention.ln_gain", model.attention.ln_gain);
  bound.attention.ln_bias = reg("attention.ln_bias", model.attention.ln_bias);
  bound.attention.wq = reg("attention.wq", model.attention.wq);
  bound.attention.wk = reg("attention.wk", model.attention.wk);
  bound.attention.wv = reg("attention.wv", model.attention.wv);
  bound.attention.ffn = bind_mlp(model.attention.ffn, "attention.ffn");
  bound.sampling_net = bind_mlp(model.sampling_net, "sampling_net");
  return bound;
}

ad::Var linear_forward(ad::Tape& tape, const BoundLinear& layer, ad::Var x) {
  return tape.add_rowvec(tape.matmul(x, layer.weight), layer.bias);
}

ad::Var mlp_forward(ad::Tape& tape, const BoundMlp& mlp, ad::Var x) {
  require(!mlp.layers.empty(), ErrorKind::UntrainedModel, "MLP has no layers");
  ad::Var h = x;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    h = linear_forward(tape, mlp.layers[l], h);
    if (l + 1 < mlp.layers.size()) h = tape.relu(h);
  }
  return h;
}

ad::Var encode(ad::Tape& tape, const BoundMlp& encoder, ad::Var x) {
  require(tape.value(x).cols() == tape.value(encoder.layers.front().weight).rows(),
          ErrorKind::ShapeMismatch, "encode: input width does not match encoder");
  return mlp_forward(tape, encoder, x);
}

ad::Var decode(ad::Tape& tape, const BoundMlp& decoder, ad::Var z) {
  require(tape.value(z).cols() == tape.value(decoder.layers.front().weight).rows(),
          ErrorKind::ShapeMismatch, "decode: input width does not match decoder");
  return mlp_forward(tape, decoder, z);
}

namespace {

Matrix run_mlp(const Mlp& mlp, const Matrix& x, const char* what) {
  require(!mlp.layers.empty(), ErrorKind::UntrainedModel, std::string(what) + ": no layers");
  require(x.cols() == mlp.layers.front().weight.rows(), ErrorKind::ShapeMismatch,
          std::string(what) + ": input width " + std::to_string(x.cols()) + " vs " +
              std::to_string(mlp.layers.front().weight.rows()));
  Matrix h = x;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    h = (h * mlp.layers[l].weight).rowwise() + mlp.layers[l].bias.row(0);
    if (l + 1 < mlp.layers.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

}  // namespace

Matrix encode(const Mlp& encoder, const Matrix& x) { return run_mlp(encoder, x, "encode"); }

Matrix decode(const Mlp& decoder, const Matrix& z) { return run_mlp(decoder, z, "decode"); }

ad::Var reconstruction_loss(ad::Tape& tape, std::span<const ad::Var> xs,
                            std::span<const ad::Var> xhats) {
  require(xs.size() == xhats.size() && !xs.empty(), ErrorKind::ShapeMismatch,
          "reconstruction_loss: view count mismatch");
  ad::Var total;
  for (std::size_t v = 0; v < xs.size(); ++v) {
    ad::Var term = tape.sum_squares(tape.sub(xs[v], xhats[v]));
    total = v == 0 ? term : tape.add(total, term);
  }
  return total;
}

double reconstruction_loss(std::span<const Matrix> xs, std::span<const Matrix> xhats) {
  require(xs.size() == xhats.size() && !xs.empty(), ErrorKind::ShapeMismatch,
          "reconstruction_loss: view count mismatch");
  double total = 0.0;
  for (std::size_t v = 0; v < xs.size(); ++v) {
    require(xs[v].rows() == xhats[v].rows() && xs[v].cols() == xhats[v].cols(),
            ErrorKind::ShapeMismatch, "reconstruction_loss: view " + std::to_string(v));
    total += (xs[v] - xhats[v]).squaredNorm();
  }
  return total;
}

ad::Var classify(ad::Tape& tape, const BoundLinear& head, ad::Var z) {
  require(tape.value(z).cols() == tape.value(head.weight).rows(), ErrorKind::ShapeMismatch,
          "classify: embedding width does not match head");
  return tape.softmax_rows(linear_forward(tape, head, z));
}

Matrix classify(const LinearLayer& head, const Matrix& z) {
  require(head.weight.size() > 0, ErrorKind::UntrainedModel, "classification head is empty");
  require(z.cols() == head.weight.rows(), ErrorKind::ShapeMismatch,
          "classify: embedding width " + std::to_string(z.cols()) + " vs head " +
              std::to_string(head.weight.rows()));
  require(z.allFinite(), ErrorKind::InvalidInput, "classify: non-finite embedding");
  Matrix logits = (z * head.weight).rowwise() + head.bias.row(0);
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::ArrayXd row = logits.row(i).array() - logits.row(i).maxCoeff();
    Eigen::ArrayXd e = row.exp();
    p.row(i) = (e / e.sum()).matrix();
  }
  return p;
}

}  // namespace dealmvc
