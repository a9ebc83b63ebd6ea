#include <filesystem>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "dealmvc/checkpoint.hpp"
#include "dealmvc/errors.hpp"
#include "doctest.h"

using namespace dealmvc;

namespace {

std::filesystem::path temp_file(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  return std::filesystem::temp_directory_path() /
         ("dealmvc_" + tag + "_" + std::to_string(rng()) + ".dmvc");
}

}  // namespace

TEST_CASE("checkpoint round trip preserves parameters, config and fusion state") {
  TrainConfig cfg;
  cfg.embed_dim = 6;
  cfg.hidden = {10};
  cfg.clusters = 4;
  cfg.alpha = 0.5;
  cfg.tau = 0.66;
  cfg.seed = 123;
  cfg.disable_attention = true;

  ModelState model = ModelState::init({3, 5}, cfg.embed_dim, 4, cfg.hidden, cfg.seed);
  model.fusion.w << 0.7, 0.3;
  model.fusion.q << 0.4, 0.6;
  model.fusion.a << 0.9, 0.1;
  model.fusion.r = model.fusion.a.cwiseProduct(model.fusion.q);
  model.fusion.t = 17;

  auto path = temp_file("roundtrip");
  save_checkpoint(path, model, cfg);
  Checkpoint back = load_checkpoint(path);
  std::filesystem::remove(path);

  CHECK(back.config.alpha == cfg.alpha);
  CHECK(back.config.tau == cfg.tau);
  CHECK(back.config.hidden == cfg.hidden);
  CHECK(back.config.disable_attention == cfg.disable_attention);
  CHECK(back.model.cluster_count() == 4);
  CHECK(back.model.view_count() == 2);
  CHECK(back.model.fusion.t == 17);
  CHECK((back.model.fusion.w - model.fusion.w).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.model.fusion.r - model.fusion.r).cwiseAbs().maxCoeff() == 0.0);

  bool params_equal = true;
  model.for_each_param(ModelState::ParamGroup::all,
                       [&](const std::string& name, const Matrix& m) {
                         back.model.for_each_param(
                             ModelState::ParamGroup::all,
                             [&](const std::string& name2, Matrix& m2) {
                               if (name == name2 && (m - m2).cwiseAbs().maxCoeff() != 0.0) {
                                 params_equal = false;
                               }
                             });
                       });
  CHECK(params_equal);
}

TEST_CASE("checkpoint: missing file") {
  try {
    load_checkpoint("/nonexistent/path/model.dmvc");
    FAIL("expected MissingCheckpoint");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingCheckpoint);
  }
}

TEST_CASE("checkpoint: corrupt payload") {
  auto path = temp_file("corrupt");
  std::ofstream(path) << "not a checkpoint";
  try {
    load_checkpoint(path);
    FAIL("expected IOFailure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IOFailure);
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint: unsupported schema") {
  nlohmann::json j;
  j["schema"] = kCheckpointSchema + 1;
  auto bytes = nlohmann::json::to_msgpack(j);
  auto path = temp_file("schema");
  std::ofstream(path, std::ios::binary)
      .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  try {
    load_checkpoint(path);
    FAIL("expected IOFailure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IOFailure);
  }
  std::filesystem::remove(path);
}
