#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"
#include "vrrae/dataset.hpp"
#include "vrrae/optim.hpp"

using namespace vrrae;

namespace {

ModelSpec tiny_spec(Variant v) {
  ModelSpec spec;
  spec.variant = v;
  spec.input_dim = 16;
  spec.latent_dim = is_svd_family(v) ? 6 : 2;
  spec.bottleneck = 2;
  spec.encoder_hidden = {12};
  spec.decoder_hidden = {12, 12};
  spec.beta = 1e-3;
  return spec;
}

Matrix tiny_data(Index n = 24) {
  BumpParams p;
  p.image_size = 4;
  p.sigma = 0.2;
  Rng rng(1234);
  return gen_test_bumps(p, n, rng).x;
}

}  // namespace

TEST_CASE("adabelief: zero gradient from zero state leaves parameters unchanged") {
  std::vector<NamedParam> params;
  params.push_back({"w", Matrix::constant(2, 2, 1.5)});
  Matrix before = params[0].value;
  AdaBeliefState state;
  adabelief_step(params, {Matrix(2, 2)}, state, 0.1, 0.9, 0.999, 1e-16);
  CHECK(params[0].value == before);
}

TEST_CASE("adabelief: converges on the scalar quadratic (w-3)^2") {
  std::vector<NamedParam> params;
  params.push_back({"w", Matrix(1, 1)});
  AdaBeliefState state;
  for (int step = 0; step < 500; ++step) {
    Matrix g(1, 1);
    g(0, 0) = 2.0 * (params[0].value(0, 0) - 3.0);
    adabelief_step(params, {g}, state, 0.1, 0.9, 0.999, 1e-16);
  }
  CHECK(std::abs(params[0].value(0, 0) - 3.0) < 1e-3);
}

TEST_CASE("adabelief: same inputs give bit-identical parameters") {
  auto run = [] {
    Rng rng(5);
    std::vector<NamedParam> params;
    params.push_back({"w", rng.normal_matrix(3, 3)});
    AdaBeliefState state;
    for (int step = 0; step < 10; ++step) {
      Matrix g = rng.normal_matrix(3, 3);
      adabelief_step(params, {g}, state, 0.01, 0.9, 0.999, 1e-16);
    }
    return params[0].value;
  };
  CHECK(run() == run());
}

TEST_CASE("adabelief: non-finite gradients name the parameter") {
  std::vector<NamedParam> params;
  params.push_back({"dec0.w", Matrix(1, 1)});
  AdaBeliefState state;
  Matrix g(1, 1);
  g(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS(adabelief_step(params, {g}, state, 0.1, 0.9, 0.999, 1e-16),
                       "adabelief_step: non-finite gradient for parameter dec0.w",
                       ValueError);
}

TEST_CASE("shuffle is a seeded permutation") {
  Rng rng(77);
  std::vector<Index> v(100);
  std::iota(v.begin(), v.end(), Index{0});
  rng.shuffle(v);
  std::vector<bool> seen(100, false);
  for (Index x : v) {
    REQUIRE(x < 100);
    CHECK_FALSE(seen[x]);
    seen[x] = true;
  }
  Rng rng2(77);
  std::vector<Index> w(100);
  std::iota(w.begin(), w.end(), Index{0});
  rng2.shuffle(w);
  CHECK(v == w);
}

TEST_CASE("training reduces the reconstruction loss after one epoch") {
  Matrix data = tiny_data();
  for (Variant v : {Variant::Ae, Variant::Vae, Variant::Rrae, Variant::Vrrae}) {
    CAPTURE(variant_id(v));
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e-2;
    cfg.seed = 3;
    TrainResult r = train(tiny_spec(v), data, cfg);
    REQUIRE(r.history.size() == 1);
    CHECK(r.history[0].loss.rec < r.initial_rec);
  }
}

TEST_CASE("beta = 0 runs have total equal to rec in every epoch") {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-3;
  cfg.seed = 4;
  TrainResult r = train(tiny_spec(Variant::VrraeBetaZero), tiny_data(), cfg);
  for (const auto& row : r.history) {
    CHECK(row.loss.total == row.loss.rec);
    CHECK(row.loss.kl >= 0.0);  // still reported
  }
}

TEST_CASE("loss history is fully determined by seed, config, and data") {
  Matrix data = tiny_data();
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-3;
  cfg.seed = 5;
  TrainResult a = train(tiny_spec(Variant::Vrrae), data, cfg);
  TrainResult b = train(tiny_spec(Variant::Vrrae), data, cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (Index i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].loss.rec == b.history[i].loss.rec);
    CHECK(a.history[i].loss.kl == b.history[i].loss.kl);
    CHECK(a.history[i].loss.total == b.history[i].loss.total);
  }
  for (Index i = 0; i < a.model.params.size(); ++i)
    CHECK(a.model.params[i].value == b.model.params[i].value);
}

TEST_CASE("the closed-form KL route matches the direct one on every epoch") {
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-3;
  cfg.seed = 6;
  TrainResult r = train(tiny_spec(Variant::Vrrae), tiny_data(), cfg);
  for (const auto& row : r.history) CHECK(row.kl_route_gap < 1e-6);
}

TEST_CASE("SVD variants drop the trailing partial batch; dense ones keep it") {
  Matrix data = tiny_data(21);  // 21 = 2*8 + 5
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-3;
  cfg.seed = 7;
  // both must finish; the partial batch of 5 exceeds k*=2 either way, the
  // SVD path drops it by protocol
  CHECK_NOTHROW(train(tiny_spec(Variant::Rrae), data, cfg));
  CHECK_NOTHROW(train(tiny_spec(Variant::Vae), data, cfg));
}

TEST_CASE("divergence aborts with a structured error and a checkpoint dump") {
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e200;  // overflows the forward pass
  cfg.seed = 8;
  cfg.divergence_dump_path = (std::filesystem::temp_directory_path() /
                              "vrrae_divergence_test.ckpt").string();
  std::filesystem::remove(cfg.divergence_dump_path);
  CHECK_THROWS_AS(train(tiny_spec(Variant::Vae), tiny_data(), cfg), ValueError);
  CHECK(std::filesystem::exists(cfg.divergence_dump_path));
  std::filesystem::remove(cfg.divergence_dump_path);
}

TEST_CASE("config cross-checks") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(train(tiny_spec(Variant::Ae), tiny_data(), cfg), ValueError);
  cfg.epochs = 1;
  cfg.batch_size = 1000;
  CHECK_THROWS_AS(train(tiny_spec(Variant::Ae), tiny_data(), cfg), ValueError);
  cfg.batch_size = 8;
  cfg.k_star = 3;  // disagrees with the spec's k*=2
  CHECK_THROWS_AS(train(tiny_spec(Variant::Vrrae), tiny_data(), cfg), ValueError);
  cfg.k_star = 0;
  cfg.batch_size = 1;  // below k* for an SVD variant
  CHECK_THROWS_AS(train(tiny_spec(Variant::Vrrae), tiny_data(), cfg), ValueError);
}

TEST_CASE("history CSV export") {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-3;
  cfg.seed = 9;
  TrainResult r = train(tiny_spec(Variant::Vrrae), tiny_data(), cfg);
  auto path = (std::filesystem::temp_directory_path() / "vrrae_hist_test.csv").string();
  save_history_csv(path, r.history);
  std::FILE* f = std::fopen(path.c_str(), "r");
  REQUIRE(f);
  char line[256];
  REQUIRE(std::fgets(line, sizeof line, f));
  CHECK(std::string(line) == "epoch,rec,kl,total\n");
  int rows = 0;
  while (std::fgets(line, sizeof line, f)) ++rows;
  std::fclose(f);
  CHECK(rows == 2);
  std::filesystem::remove(path);
}
