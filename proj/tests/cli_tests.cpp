// End-to-end checks of the command-line front end: spawns the real binary,
// inspects exit codes and produced files.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "vrrae/checkpoint.hpp"
#include "vrrae/dataset.hpp"

namespace fs = std::filesystem;
using namespace vrrae;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string output;
};

fs::path work_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "vrrae_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

CmdResult run_cli(const std::string& args) {
  fs::path out_file = work_dir() / "last_output.txt";
  std::string cmd = std::string(VRRAE_CLI_PATH) + " " + args + " > " +
                    out_file.string() + " 2>&1";
  int raw = std::system(cmd.c_str());
  CmdResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(out_file);
  r.output.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return r;
}

std::string tiny_flags() {
  return "--grid_points 4 --image_size 8 --bump_sigma 0.15 --k_star 2 --latent_L 6 "
         "--enc_hidden 8 --dec_hidden 8,8 --epochs 3 --batch_size 8 "
         "--learning_rate 1e-3";
}

std::vector<char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("no-such-command").exit_code == 2);
  CHECK(run_cli("train --no_such_key 1").exit_code == 2);
  CHECK(run_cli("dataset --kind nonsense").exit_code == 2);
  CHECK(run_cli("eval").exit_code == 2);  // missing --checkpoint
}

TEST_CASE("dataset synthetic writes the 100-sample default set") {
  fs::path out = work_dir() / "ds_default";
  CmdResult r = run_cli("dataset --kind synthetic --output_dir " + out.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("100 samples") != std::string::npos);
  Dataset ds = load_dataset_csv((out / "synthetic.csv").string());
  CHECK(ds.count() == 100);
  CHECK(ds.dim() == 1024);
  CHECK(fs::exists(out / "run_config.txt"));
}

TEST_CASE("dataset idx conversion of a 3-image fixture") {
  fs::path fixture = work_dir() / "fixture_idx";
  {
    std::ofstream f(fixture, std::ios::binary);
    unsigned char header[16] = {0, 0, 8, 3, 0, 0, 0, 3, 0, 0, 0, 4, 0, 0, 0, 4};
    f.write(reinterpret_cast<char*>(header), 16);
    for (int i = 0; i < 48; ++i) {
      unsigned char px = static_cast<unsigned char>(i * 5);
      f.write(reinterpret_cast<char*>(&px), 1);
    }
  }
  fs::path out = work_dir() / "ds_idx";
  CmdResult r = run_cli("dataset --kind idx --images " + fixture.string() +
                        " --output_dir " + out.string());
  CHECK(r.exit_code == 0);
  Dataset ds = load_dataset_csv((out / "dataset.csv").string());
  CHECK(ds.count() == 3);
  CHECK(ds.height == 4);
}

TEST_CASE("train writes checkpoint, loss history, and collapse report") {
  fs::path out = work_dir() / "train_vrrae";
  CmdResult r = run_cli("train --variant vrrae --dataset synthetic --seed 0 --beta 1e-3 " +
                        tiny_flags() + " --output_dir " + out.string());
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(out / "vrrae_seed0.ckpt"));
  CHECK(fs::exists(out / "vrrae_seed0_loss.csv"));
  CHECK(fs::exists(out / "vrrae_seed0_collapse.csv"));
  CHECK(fs::exists(out / "run_config.txt"));

  std::ifstream loss(out / "vrrae_seed0_loss.csv");
  std::string line;
  int rows = -1;  // header
  while (std::getline(loss, line)) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("train over a seed range produces one checkpoint per seed") {
  fs::path out = work_dir() / "train_seeds";
  CmdResult r = run_cli("train --variant ae --dataset synthetic --seeds 0..1 " +
                        tiny_flags() + " --output_dir " + out.string());
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(out / "ae_seed0.ckpt"));
  CHECK(fs::exists(out / "ae_seed1.ckpt"));
}

TEST_CASE("train on a missing dataset file exits with 1") {
  CmdResult r = run_cli("train --variant ae --dataset /nope/missing.csv " + tiny_flags());
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("not found") != std::string::npos);
}

TEST_CASE("config file values apply and flags override them") {
  fs::path conf = work_dir() / "run.conf";
  {
    std::ofstream f(conf);
    f << "# comment line\n"
      << "variant=ae\n"
      << "epochs=2\n"
      << "seed=0\n";
  }
  fs::path out = work_dir() / "train_conf";
  CmdResult r = run_cli("train --config " + conf.string() + " --dataset synthetic " +
                        tiny_flags() + " --epochs 1 --output_dir " + out.string());
  CHECK(r.exit_code == 0);
  std::ifstream loss(out / "ae_seed0_loss.csv");
  std::string line;
  int rows = -1;
  while (std::getline(loss, line)) ++rows;
  CHECK(rows == 1);  // the flag beat the file

  CHECK(run_cli("train --config " + work_dir().string() + "/absent.conf").exit_code == 1);
  {
    std::ofstream bad(conf);
    bad << "mystery_key=1\n";
  }
  CHECK(run_cli("train --config " + conf.string()).exit_code == 2);
}

TEST_CASE("eval prints a table row and a perfect model scores zero") {
  // identity autoencoder over a 4-pixel dataset
  ModelSpec spec;
  spec.variant = Variant::Ae;
  spec.input_dim = 4;
  spec.latent_dim = 4;
  spec.bottleneck = 4;
  spec.encoder_hidden = {};
  spec.decoder_hidden = {};
  TrainedModel model = init_model(spec, 0);
  model.param("enc0.w") = Matrix::identity(4);
  model.param("dec0.w") = Matrix::identity(4);
  fs::path ckpt = work_dir() / "identity.ckpt";
  save_checkpoint(model, ckpt.string());

  Dataset ds;
  ds.height = 2;
  ds.width = 2;
  Rng rng(5);
  ds.x = rng.uniform_matrix(4, 6, 0.1, 1.0);
  fs::path csv = work_dir() / "four_pixels.csv";
  save_dataset_csv(ds, csv.string());

  fs::path out = work_dir() / "eval_identity";
  CmdResult r = run_cli("eval --checkpoint " + ckpt.string() + " --dataset " +
                        csv.string() + " --output_dir " + out.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("test(%)") != std::string::npos);
  CHECK(r.output.find("0.00") != std::string::npos);

  CHECK(run_cli("eval --checkpoint /nope/missing.ckpt --dataset " + csv.string())
            .exit_code == 1);
}

TEST_CASE("eval: training reconstructions beat off-grid test reconstructions") {
  // needs a model that actually fit its training set
  fs::path train_out = work_dir() / "train_gap";
  CmdResult tr = run_cli(
      "train --variant ae --dataset synthetic --seed 0 --grid_points 4 --image_size 8 "
      "--bump_sigma 0.15 --k_star 2 --latent_L 6 --enc_hidden 16 --dec_hidden 16,16 "
      "--epochs 400 --batch_size 8 --learning_rate 3e-3 --output_dir " +
      train_out.string());
  REQUIRE(tr.exit_code == 0);
  fs::path ckpt = train_out / "ae_seed0.ckpt";
  REQUIRE(fs::exists(ckpt));

  // off-grid test set through the dataset command
  fs::path test_dir = work_dir() / "ds_test";
  CmdResult gen = run_cli(
      "dataset --kind synthetic-test --count 64 --seed 4242 --grid_points 4 "
      "--image_size 8 --bump_sigma 0.15 --output_dir " +
      test_dir.string());
  REQUIRE(gen.exit_code == 0);

  auto mean_of = [&](const std::string& dataset_arg) {
    fs::path out = work_dir() / ("eval_" + std::to_string(std::hash<std::string>{}(dataset_arg) % 1000));
    CmdResult r = run_cli("eval --checkpoint " + ckpt.string() + " --grid_points 4 " +
                          "--image_size 8 --bump_sigma 0.15 --dataset " + dataset_arg +
                          " --output_dir " + out.string());
    REQUIRE(r.exit_code == 0);
    std::ifstream csv(out / "eval.csv");
    std::string line;
    std::getline(csv, line);  // header
    double total = 0.0;
    int n = 0;
    while (std::getline(csv, line)) {
      total += std::stod(line.substr(line.find(',') + 1));
      ++n;
    }
    return total / n;
  };
  double train_err = mean_of("synthetic");
  double test_err = mean_of((test_dir / "synthetic_test.csv").string());
  CHECK(train_err <= test_err);
}

TEST_CASE("generate: zero count succeeds, small count writes a deterministic grid") {
  fs::path ckpt = work_dir() / "train_vrrae" / "vrrae_seed0.ckpt";
  REQUIRE(fs::exists(ckpt));
  std::string data_flags = " --grid_points 4 --image_size 8 --bump_sigma 0.15 ";

  fs::path out0 = work_dir() / "gen0";
  CmdResult r0 = run_cli("generate --checkpoint " + ckpt.string() + data_flags +
                         "--count 0 --output_dir " + out0.string());
  CHECK(r0.exit_code == 0);
  CHECK(r0.output.find("generated 0 samples") != std::string::npos);

  fs::path out1 = work_dir() / "gen1";
  fs::path out2 = work_dir() / "gen2";
  std::string common = "generate --checkpoint " + ckpt.string() + data_flags +
                       "--count 9 --gmm_K 2 --seed 7 --output_dir ";
  CHECK(run_cli(common + out1.string()).exit_code == 0);
  CHECK(run_cli(common + out2.string()).exit_code == 0);
  REQUIRE(fs::exists(out1 / "generated.pgm"));
  CHECK(file_bytes(out1 / "generated.pgm") == file_bytes(out2 / "generated.pgm"));
  CHECK(fs::exists(out1 / "gen_scores.csv"));
}

TEST_CASE("interpolate: frame count, identical endpoints, bad indices") {
  fs::path ckpt = work_dir() / "train_vrrae" / "vrrae_seed0.ckpt";
  REQUIRE(fs::exists(ckpt));
  std::string data_flags = " --grid_points 4 --image_size 8 --bump_sigma 0.15 ";

  fs::path out = work_dir() / "interp";
  CmdResult r = run_cli("interpolate --checkpoint " + ckpt.string() + data_flags +
                        "--idx_a 0 --idx_b 15 --steps 5 --output_dir " + out.string());
  CHECK(r.exit_code == 0);
  std::ifstream pgm(out / "interpolation.pgm");
  std::string magic;
  Index w = 0, h = 0, maxv = 0;
  pgm >> magic >> w >> h >> maxv;
  CHECK(magic == "P5");
  CHECK(w == 8 * 5);  // five frames side by side
  CHECK(h == 8);

  fs::path same = work_dir() / "interp_same";
  CmdResult rs = run_cli("interpolate --checkpoint " + ckpt.string() + data_flags +
                         "--idx_a 3 --idx_b 3 --steps 4 --output_dir " + same.string());
  CHECK(rs.exit_code == 0);
  std::ifstream spgm(same / "interpolation.pgm", std::ios::binary);
  std::string line;
  std::getline(spgm, line);  // P5
  std::getline(spgm, line);  // dims
  std::getline(spgm, line);  // maxval
  std::vector<unsigned char> px((8 * 4) * 8);
  spgm.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  for (Index r2 = 0; r2 < 8; ++r2)
    for (Index c = 0; c < 8; ++c)
      for (Index f = 1; f < 4; ++f)
        CHECK(px[r2 * 32 + f * 8 + c] == px[r2 * 32 + c]);

  CHECK(run_cli("interpolate --checkpoint " + ckpt.string() + data_flags +
                "--idx_a 0 --idx_b 99 --output_dir " + (work_dir() / "interp_bad").string())
            .exit_code == 1);
}

TEST_CASE("bench runs a reduced matrix and resumes from checkpoints") {
  fs::path out = work_dir() / "bench";
  std::string flags =
      "bench --seeds 0..1 --epochs 2 --test_count 32 --gen_count 8 --gmm_K 2 "
      "--threads 2 --grid_points 4 --image_size 8 --bump_sigma 0.15 --k_star 2 "
      "--latent_L 6 --enc_hidden 8 --dec_hidden 8,8 --batch_size 8 --output_dir " +
      out.string();
  CmdResult first = run_cli(flags);
  CHECK(first.exit_code == 0);
  CHECK(first.output.find("VRRAE") != std::string::npos);
  CHECK(fs::exists(out / "table.txt"));
  CHECK(fs::exists(out / "vrrae_seed1.ckpt"));

  // wipe one artifact; the rerun rebuilds only what is missing and reuses the rest
  fs::remove(out / "vrrae_seed1.ckpt");
  CmdResult second = run_cli(flags);
  CHECK(second.exit_code == 0);
  CHECK(fs::exists(out / "vrrae_seed1.ckpt"));

  std::ifstream table(out / "table.txt");
  std::string line;
  int rows = 0;
  while (std::getline(table, line)) ++rows;
  CHECK(rows == 2 + 8);  // header + separator + 4 variants x 2 metrics
}

TEST_CASE("bench --ablation adds the three ablation variants") {
  fs::path out = work_dir() / "bench_ablation";
  CmdResult r = run_cli(
      "bench --ablation 1 --seeds 0 --epochs 2 --test_count 16 --gen_count 4 --gmm_K 2 "
      "--threads 2 --grid_points 4 --image_size 8 --bump_sigma 0.15 --k_star 2 "
      "--latent_L 6 --enc_hidden 8 --dec_hidden 8,8 --batch_size 8 --output_dir " +
      out.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("RRAE+VAE") != std::string::npos);
  CHECK(r.output.find("VAE (f=I)") != std::string::npos);
  CHECK(r.output.find("VRRAE (beta=0)") != std::string::npos);
  std::ifstream table(out / "table.txt");
  std::string line;
  int rows = 0;
  while (std::getline(table, line)) ++rows;
  CHECK(rows == 2 + 14);  // header + separator + 7 variants x 2 metrics
}
