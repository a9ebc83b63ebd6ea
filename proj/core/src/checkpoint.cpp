#include "dealmvc/checkpoint.hpp"

#include <fstream>

#include "dealmvc/errors.hpp"

namespace dealmvc {

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
  j = nlohmann::json{{"batch_size", cfg.batch_size},
                     {"learning_rate", cfg.learning_rate},
                     {"pretrain_epochs", cfg.pretrain_epochs},
                     {"train_epochs", cfg.train_epochs},
                     {"alpha", cfg.alpha},
                     {"beta", cfg.beta},
                     {"mu", cfg.mu},
                     {"tau", cfg.tau},
                     {"embed_dim", cfg.embed_dim},
                     {"clusters", cfg.clusters},
                     {"hidden", cfg.hidden},
                     {"seed", cfg.seed},
                     {"disable_local", cfg.disable_local},
                     {"disable_global", cfg.disable_global},
                     {"disable_consistency", cfg.disable_consistency},
                     {"disable_sampling_net", cfg.disable_sampling_net},
                     {"disable_attention", cfg.disable_attention},
                     {"deterministic", cfg.deterministic},
                     {"kmeans_head_init", cfg.kmeans_head_init}};
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
  j.at("batch_size").get_to(cfg.batch_size);
  j.at("learning_rate").get_to(cfg.learning_rate);
  j.at("pretrain_epochs").get_to(cfg.pretrain_epochs);
  j.at("train_epochs").get_to(cfg.train_epochs);
  j.at("alpha").get_to(cfg.alpha);
  j.at("beta").get_to(cfg.beta);
  j.at("mu").get_to(cfg.mu);
  j.at("tau").get_to(cfg.tau);
  j.at("embed_dim").get_to(cfg.embed_dim);
  j.at("clusters").get_to(cfg.clusters);
  j.at("hidden").get_to(cfg.hidden);
  j.at("seed").get_to(cfg.seed);
  j.at("disable_local").get_to(cfg.disable_local);
  j.at("disable_global").get_to(cfg.disable_global);
  j.at("disable_consistency").get_to(cfg.disable_consistency);
  j.at("disable_sampling_net").get_to(cfg.disable_sampling_net);
  j.at("disable_attention").get_to(cfg.disable_attention);
  j.at("deterministic").get_to(cfg.deterministic);
  j.at("kmeans_head_init").get_to(cfg.kmeans_head_init);
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  std::vector<double> data(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      data[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
  return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  require(static_cast<Eigen::Index>(data.size()) == rows * cols, ErrorKind::IOFailure,
          "checkpoint matrix size mismatch");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[static_cast<std::size_t>(i * cols + c)];
  return m;
}

nlohmann::json vector_to_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector vector_from_json(const nlohmann::json& j) {
  const auto data = j.get<std::vector<double>>();
  Vector v(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) v(static_cast<Eigen::Index>(i)) = data[i];
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelState& model,
                     const TrainConfig& config) {
  nlohmann::json j;
  j["schema"] = kCheckpointSchema;
  j["config"] = config;
  j["clusters"] = model.cluster_count();
  j["view_dims"] = [&] {
    std::vector<int> dims;
    for (const Mlp& enc : model.encoders) dims.push_back(enc.in_dim());
    return dims;
  }();
  nlohmann::json params = nlohmann::json::object();
  model.for_each_param(ModelState::ParamGroup::all,
                       [&](const std::string& name, const Matrix& m) { params[name] = matrix_to_json(m); });
  j["params"] = std::move(params);
  j["fusion"] = nlohmann::json{{"a", vector_to_json(model.fusion.a)},
                               {"q", vector_to_json(model.fusion.q)},
                               {"r", vector_to_json(model.fusion.r)},
                               {"w", vector_to_json(model.fusion.w)},
                               {"t", model.fusion.t}};

  std::vector<std::uint8_t> bytes = nlohmann::json::to_msgpack(j);
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::IOFailure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(ErrorKind::IOFailure, "write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    raise(ErrorKind::MissingCheckpoint, path.string() + " does not exist");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::MissingCheckpoint, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  nlohmann::json j;
  try {
    j = nlohmann::json::from_msgpack(bytes);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::IOFailure, "corrupt checkpoint " + path.string() + ": " + e.what());
  }
  require(j.value("schema", -1) == kCheckpointSchema, ErrorKind::IOFailure,
          "unsupported checkpoint schema in " + path.string());

  Checkpoint ckpt;
  ckpt.config = j.at("config").get<TrainConfig>();
  const auto view_dims = j.at("view_dims").get<std::vector<int>>();
  const int clusters = j.at("clusters").get<int>();
  ckpt.model = ModelState::init(view_dims, ckpt.config.embed_dim, clusters, ckpt.config.hidden,
                                ckpt.config.seed);
  const nlohmann::json& params = j.at("params");
  ckpt.model.for_each_param(ModelState::ParamGroup::all,
                            [&](const std::string& name, Matrix& m) {
                              require(params.contains(name), ErrorKind::IOFailure,
                                      "checkpoint missing parameter " + name);
                              Matrix loaded = matrix_from_json(params.at(name));
                              require(loaded.rows() == m.rows() && loaded.cols() == m.cols(),
                                      ErrorKind::IOFailure, "checkpoint shape mismatch for " + name);
                              m = std::move(loaded);
                            });
  const nlohmann::json& fusion = j.at("fusion");
  ckpt.model.fusion.a = vector_from_json(fusion.at("a"));
  ckpt.model.fusion.q = vector_from_json(fusion.at("q"));
  ckpt.model.fusion.r = vector_from_json(fusion.at("r"));
  ckpt.model.fusion.w = vector_from_json(fusion.at("w"));
  ckpt.model.fusion.t = fusion.at("t").get<long>();
  return ckpt;
}

}  // namespace dealmvc
