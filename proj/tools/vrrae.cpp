// Command-line front end: datasets, training, evaluation, generation,
// interpolation, and the full benchmark, wired for reproducible runs.
//
// Exit codes: 0 success, 1 runtime/IO error, 2 usage error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vrrae/checkpoint.hpp"
#include "vrrae/experiment.hpp"

namespace fs = std::filesystem;
using namespace vrrae;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "variant",     "dataset",     "kind",          "k_star",        "latent_L",
      "beta",        "epochs",      "batch_size",    "learning_rate", "seed",
      "seeds",       "gmm_K",       "output_dir",    "count",         "steps",
      "idx_a",       "idx_b",       "checkpoint",    "test_count",    "gen_count",
      "threads",     "ablation",    "subset",        "images",        "labels",
      "grid_points", "image_size",  "bump_sigma",    "magnitude",     "center_min",
      "center_max",  "enc_hidden",  "dec_hidden",    "beta_vae",      "beta_vrrae",
      "collapse_threshold"};
  return keys;
}

/// Flat key=value view: config file first, command-line flags override.
class RunConfig {
 public:
  void set(const std::string& key, const std::string& value) {
    if (!known_keys().count(key)) throw UsageError("unknown config key: " + key);
    values_[key] = value;
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path + ": cannot open config file");
    std::string line;
    while (std::getline(in, line)) {
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
      line.erase(std::remove_if(line.begin(), line.end(), is_space), line.end());
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw UsageError(path + ": expected key=value, got '" + line + "'");
      set(line.substr(0, eq), line.substr(eq + 1));
    }
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string str(const std::string& key, const std::string& fallback = "") const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double num(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::exception&) {
      throw UsageError("config key " + key + ": bad number '" + it->second + "'");
    }
  }

  Index idx(const std::string& key, Index fallback) const {
    double v = num(key, static_cast<double>(fallback));
    if (v < 0.0) throw UsageError("config key " + key + ": must be nonnegative");
    return static_cast<Index>(v);
  }

  bool flag(const std::string& key, bool fallback = false) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "1" || it->second == "true" || it->second == "yes") return true;
    if (it->second == "0" || it->second == "false" || it->second == "no") return false;
    throw UsageError("config key " + key + ": bad flag '" + it->second + "'");
  }

  std::vector<std::uint64_t> seed_list() const {
    std::string spec = has("seeds") ? str("seeds") : str("seed", "0");
    std::vector<std::uint64_t> out;
    try {
      auto range = spec.find("..");
      if (range != std::string::npos) {
        std::uint64_t lo = std::stoull(spec.substr(0, range));
        std::uint64_t hi = std::stoull(spec.substr(range + 2));
        if (hi < lo) throw UsageError("seeds: empty range " + spec);
        for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
        return out;
      }
      std::stringstream ss(spec);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stoull(tok));
      }
    } catch (const std::invalid_argument&) {
      throw UsageError("seeds: bad value '" + spec + "'");
    }
    if (out.empty()) throw UsageError("seeds: none given in '" + spec + "'");
    return out;
  }

  std::vector<Index> width_list(const std::string& key,
                                const std::vector<Index>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<Index> out;
    std::stringstream ss(str(key));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      out.push_back(static_cast<Index>(std::stoull(tok)));
    }
    return out;
  }

  void log_resolved(const std::string& dir) const {
    fs::create_directories(dir);
    std::ofstream out(dir + "/run_config.txt");
    for (const auto& [k, v] : values_) out << k << "=" << v << "\n";
  }

 private:
  std::map<std::string, std::string> values_;
};

RunConfig parse_args(int argc, char** argv, int first) {
  RunConfig cfg;
  // the config file applies first so flags can override it
  for (int i = first; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--config") {
      if (i + 1 >= argc) throw UsageError("--config needs a path");
      cfg.load_file(argv[++i]);
    } else if (arg.rfind("--config=", 0) == 0) {
      cfg.load_file(arg.substr(9));
    }
  }
  for (int i = first; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg.rfind("--", 0) != 0)
      throw UsageError("expected --key value or --key=value, got '" + arg + "'");
    arg = arg.substr(2);
    if (arg == "config") {
      ++i;
      continue;
    }
    if (arg.rfind("config=", 0) == 0) continue;
    auto eq = arg.find('=');
    if (eq != std::string::npos) {
      cfg.set(arg.substr(0, eq), arg.substr(eq + 1));
    } else {
      if (i + 1 >= argc) throw UsageError("flag --" + arg + " needs a value");
      cfg.set(arg, argv[++i]);
    }
  }
  return cfg;
}

BumpParams bump_params(const RunConfig& cfg) {
  BumpParams p;
  p.grid_points = cfg.idx("grid_points", p.grid_points);
  p.image_size = cfg.idx("image_size", p.image_size);
  p.sigma = cfg.num("bump_sigma", p.sigma);
  p.magnitude = cfg.num("magnitude", p.magnitude);
  p.center_min = cfg.num("center_min", p.center_min);
  p.center_max = cfg.num("center_max", p.center_max);
  return p;
}

bool looks_like_idx(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4)) return false;
  return b[0] == 0 && b[1] == 0 && b[2] == 8;
}

Dataset resolve_dataset(const RunConfig& cfg) {
  std::string name = cfg.str("dataset", "synthetic");
  if (name == "synthetic") return gen_gaussian_bumps(bump_params(cfg));
  if (!fs::exists(name)) throw IoError(name + ": dataset file not found");
  if (looks_like_idx(name)) {
    std::optional<std::string> labels;
    if (cfg.has("labels")) labels = cfg.str("labels");
    return load_idx(name, labels, cfg.idx("subset", 0));
  }
  return load_dataset_csv(name);
}

ModelSpec spec_from_config(const RunConfig& cfg, Index input_dim) {
  auto v = parse_variant(cfg.str("variant", "vrrae"));
  if (!v) throw UsageError("unknown variant '" + cfg.str("variant") + "'");
  ModelSpec spec;
  spec.variant = *v;
  spec.input_dim = input_dim;
  spec.bottleneck = cfg.idx("k_star", 2);
  spec.latent_dim = is_svd_family(*v) ? cfg.idx("latent_L", 200) : spec.bottleneck;
  spec.encoder_hidden = cfg.width_list("enc_hidden", {1024});
  spec.decoder_hidden = cfg.width_list("dec_hidden", {1024, 1024});
  spec.beta = cfg.num("beta", 1e-3);
  return spec;
}

void save_collapse_csv(const std::string& path, const std::vector<CollapseReport>& rows) {
  std::ofstream out(path);
  out << "epoch,dim,mean_of_means,std_of_means,bound,bound_gap,collapsed\n";
  char buf[160];
  for (Index e = 0; e < rows.size(); ++e) {
    const CollapseReport& r = rows[e];
    for (Index d = 0; d < r.mean_of_means.size(); ++d) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g,%.17g,%d\n", e + 1, d,
                    r.mean_of_means[d], r.std_of_means[d], r.bound[d], r.bound_gap[d],
                    static_cast<int>(r.collapsed[d]));
      out << buf;
    }
  }
}

void write_pgm_grid(const std::string& path, const Matrix& columns, Index height,
                    Index width, Index max_images = 64) {
  Index n = std::min(columns.cols(), max_images);
  if (n == 0) return;
  Index tiles = static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(n))));
  std::vector<double> canvas(tiles * height * tiles * width, 0.0);
  for (Index t = 0; t < n; ++t) {
    Index tr = t / tiles, tc = t % tiles;
    auto img = columns.col(t);
    for (Index r = 0; r < height; ++r)
      for (Index c = 0; c < width; ++c)
        canvas[(tr * height + r) * (tiles * width) + tc * width + c] = img[r * width + c];
  }
  write_pgm(path, canvas, tiles * height, tiles * width);
}

int cmd_dataset(const RunConfig& cfg) {
  std::string kind = cfg.str("kind", "synthetic");
  std::string out_dir = cfg.str("output_dir", "runs/dataset");
  if (kind != "synthetic" && kind != "synthetic-test" && kind != "idx")
    throw UsageError("unknown dataset kind '" + kind + "'");
  cfg.log_resolved(out_dir);
  if (kind == "synthetic") {
    Dataset ds = gen_gaussian_bumps(bump_params(cfg));
    save_dataset_csv(ds, out_dir + "/synthetic.csv");
    std::printf("wrote %zu samples (%zux%zu) to %s\n", ds.count(), ds.height, ds.width,
                (out_dir + "/synthetic.csv").c_str());
  } else if (kind == "synthetic-test") {
    Rng rng(derive_seed(cfg.idx("seed", 9000), 0x7e57));
    Dataset ds = gen_test_bumps(bump_params(cfg), cfg.idx("count", 10000), rng);
    save_dataset_csv(ds, out_dir + "/synthetic_test.csv");
    std::printf("wrote %zu test samples to %s\n", ds.count(),
                (out_dir + "/synthetic_test.csv").c_str());
  } else {
    if (!cfg.has("images")) throw UsageError("kind=idx needs --images <path>");
    std::optional<std::string> labels;
    if (cfg.has("labels")) labels = cfg.str("labels");
    Dataset ds = load_idx(cfg.str("images"), labels, cfg.idx("subset", 0));
    save_dataset_csv(ds, out_dir + "/dataset.csv");
    std::printf("converted %zu samples (%zux%zu) to %s\n", ds.count(), ds.height,
                ds.width, (out_dir + "/dataset.csv").c_str());
  }
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  Dataset ds = resolve_dataset(cfg);
  std::string out_dir = cfg.str("output_dir", "runs/train");
  cfg.log_resolved(out_dir);
  ModelSpec spec = spec_from_config(cfg, ds.dim());

  for (std::uint64_t seed : cfg.seed_list()) {
    TrainConfig tc;
    tc.epochs = cfg.idx("epochs", 1280);
    tc.batch_size = cfg.idx("batch_size", 64);
    tc.learning_rate = cfg.num("learning_rate", 1e-4);
    tc.beta = spec.beta;
    tc.seed = seed;
    tc.collapse_threshold = cfg.num("collapse_threshold", 0.05);
    std::string stem =
        out_dir + "/" + variant_id(spec.variant) + "_seed" + std::to_string(seed);
    tc.divergence_dump_path = stem + "_diverged.ckpt";

    TrainResult result = train(spec, ds.x, tc);
    save_checkpoint(result.model, stem + ".ckpt");
    save_history_csv(stem + "_loss.csv", result.history);
    save_collapse_csv(stem + "_collapse.csv", result.collapse_history);
    std::printf("%s seed %llu: rec %.5f -> %.5f over %zu epochs (checkpoint %s)\n",
                variant_id(spec.variant).c_str(), static_cast<unsigned long long>(seed),
                result.initial_rec, result.history.back().loss.rec,
                result.history.size(), (stem + ".ckpt").c_str());
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  if (!cfg.has("checkpoint")) throw UsageError("eval needs --checkpoint <path>");
  TrainedModel model = load_checkpoint(cfg.str("checkpoint"));
  Dataset ds = resolve_dataset(cfg);
  std::string out_dir = cfg.str("output_dir", "runs/eval");
  cfg.log_resolved(out_dir);

  Matrix recon = infer_recon_chunked(model, ds.x);
  RelativeErrorStats stats = relative_error(ds.x, recon);
  std::ofstream csv(out_dir + "/eval.csv");
  csv << "sample,relative_error_percent\n";
  for (Index j = 0; j < stats.per_sample.size(); ++j)
    csv << j << "," << stats.per_sample[j] << "\n";

  std::printf("model            metric        mean     std\n");
  std::printf("%-16s %-10s %8.2f %7.2f\n", variant_label(model.spec.variant).c_str(),
              "test(%)", stats.mean, stats.stddev);
  return 0;
}

int cmd_generate(const RunConfig& cfg) {
  if (!cfg.has("checkpoint")) throw UsageError("generate needs --checkpoint <path>");
  TrainedModel model = load_checkpoint(cfg.str("checkpoint"));
  Dataset ds = resolve_dataset(cfg);
  std::string out_dir = cfg.str("output_dir", "runs/generate");
  cfg.log_resolved(out_dir);
  const Index count = cfg.idx("count", 1250);

  if (count == 0) {
    std::printf("generated 0 samples\n");
    return 0;
  }
  ForwardOutput latents = forward_infer(model, ds.x);
  Rng rng(derive_seed(cfg.idx("seed", 0), 0x63a1));
  GaussianMixture gmm = gmm_fit(latents.mu, cfg.idx("gmm_K", 5), rng);
  Matrix sampled = gmm_sample(gmm, count, rng);
  Matrix decoded = decode_latents(model, sampled);

  write_pgm_grid(out_dir + "/generated.pgm", decoded, ds.height, ds.width);

  // bump-fit scores only make sense for bump-shaped data
  if (cfg.str("dataset", "synthetic") == "synthetic") {
    BumpParams p = bump_params(cfg);
    double mean = 0.0, var = 0.0;
    std::vector<double> errs(count);
    for (Index j = 0; j < count; ++j) {
      errs[j] = random_gen_error(decoded.col(j), p);
      mean += errs[j];
    }
    mean /= static_cast<double>(count);
    for (double e : errs) var += (e - mean) * (e - mean);
    std::ofstream csv(out_dir + "/gen_scores.csv");
    csv << "sample,random_gen_error_percent\n";
    for (Index j = 0; j < count; ++j) csv << j << "," << errs[j] << "\n";
    std::printf("%-16s %-10s %8.2f %7.2f\n", variant_label(model.spec.variant).c_str(),
                "gen(%)", mean, std::sqrt(var / static_cast<double>(count)));
  }
  std::printf("generated %zu samples -> %s\n", count,
              (out_dir + "/generated.pgm").c_str());
  return 0;
}

int cmd_interpolate(const RunConfig& cfg) {
  if (!cfg.has("checkpoint")) throw UsageError("interpolate needs --checkpoint <path>");
  TrainedModel model = load_checkpoint(cfg.str("checkpoint"));
  Dataset ds = resolve_dataset(cfg);
  std::string out_dir = cfg.str("output_dir", "runs/interpolate");
  cfg.log_resolved(out_dir);

  Index a = cfg.idx("idx_a", 0);
  Index b = cfg.idx("idx_b", ds.count() - 1);
  if (a >= ds.count() || b >= ds.count())
    throw ValueError("interpolate: sample index out of range (dataset has " +
                     std::to_string(ds.count()) + " samples)");
  Index steps = cfg.idx("steps", 5);

  Matrix pair(ds.dim(), 2);
  for (Index i = 0; i < ds.dim(); ++i) {
    pair(i, 0) = ds.x(i, a);
    pair(i, 1) = ds.x(i, b);
  }
  ForwardOutput out = forward_infer(model, pair);
  Matrix za(model.spec.bottleneck, 1), zb(model.spec.bottleneck, 1);
  for (Index i = 0; i < model.spec.bottleneck; ++i) {
    za(i, 0) = out.mu(i, 0);
    zb(i, 0) = out.mu(i, 1);
  }
  Matrix path = interpolate(za, zb, steps);
  Matrix decoded = decode_latents(model, path);
  write_pgm_strip(out_dir + "/interpolation.pgm", decoded, ds.height, ds.width);
  std::printf("interpolated %zu frames between samples %zu and %zu -> %s\n", steps, a, b,
              (out_dir + "/interpolation.pgm").c_str());
  return 0;
}

int cmd_bench(const RunConfig& cfg) {
  std::string out_dir = cfg.str("output_dir", "runs/bench");
  cfg.log_resolved(out_dir);

  ExperimentConfig ec;
  ec.bumps = bump_params(cfg);
  ec.latent_dim = cfg.idx("latent_L", 200);
  ec.bottleneck = cfg.idx("k_star", 2);
  ec.encoder_hidden = cfg.width_list("enc_hidden", ec.encoder_hidden);
  ec.decoder_hidden = cfg.width_list("dec_hidden", ec.decoder_hidden);
  ec.epochs = cfg.idx("epochs", 1280);
  ec.batch_size = cfg.idx("batch_size", 64);
  ec.learning_rate = cfg.num("learning_rate", 1e-4);
  ec.beta_vae = cfg.num("beta_vae", ec.beta_vae);
  ec.beta_vrrae = cfg.num("beta_vrrae", ec.beta_vrrae);
  if (cfg.has("seeds") || cfg.has("seed")) ec.seeds = cfg.seed_list();
  ec.ablation = cfg.flag("ablation");
  ec.test_count = cfg.idx("test_count", 10000);
  ec.gen_count = cfg.idx("gen_count", 1250);
  ec.gmm_components = cfg.idx("gmm_K", 5);
  ec.collapse_threshold = cfg.num("collapse_threshold", 0.05);
  ec.threads = cfg.idx("threads", 0);
  ec.checkpoint_dir = out_dir;

  ExperimentResult result = run_experiment(ec);
  std::string table = format_table(result);
  std::ofstream(out_dir + "/table.txt") << table;
  std::fputs(table.c_str(), stdout);
  for (const auto& s : result.summaries) {
    if (s.seeds_with_collapse > 0)
      std::printf("note: %s flagged a collapsed dimension on %zu of %zu seeds\n",
                  variant_label(s.variant).c_str(), s.seeds_with_collapse,
                  ec.seeds.size());
  }
  return 0;
}

void print_usage() {
  std::fputs(
      "usage: vrrae <command> [--config file] [--key value ...]\n"
      "\n"
      "commands:\n"
      "  dataset      generate or convert datasets (--kind synthetic|synthetic-test|idx)\n"
      "  train        train one variant over one or more seeds\n"
      "  eval         reconstruction errors of a checkpoint on a dataset\n"
      "  generate     fit a GMM in latent space, sample, decode, score\n"
      "  interpolate  linear latent interpolation between two samples\n"
      "  bench        the full multi-variant, multi-seed benchmark\n"
      "\n"
      "common keys: variant dataset k_star latent_L beta epochs batch_size\n"
      "             learning_rate seed seeds gmm_K output_dir\n",
      stderr);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    print_usage();
    return 2;
  }
  std::string cmd = argv[1];
  try {
    RunConfig cfg = parse_args(argc, argv, 2);
    if (cmd == "dataset") return cmd_dataset(cfg);
    if (cmd == "train") return cmd_train(cfg);
    if (cmd == "eval") return cmd_eval(cfg);
    if (cmd == "generate") return cmd_generate(cfg);
    if (cmd == "interpolate") return cmd_interpolate(cfg);
    if (cmd == "bench") return cmd_bench(cfg);
    print_usage();
    return 2;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
