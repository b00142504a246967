#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "lsm/config.hpp"
#include "lsm/error.hpp"
#include "lsm/parallel.hpp"
#include "lsm/pipeline.hpp"
#include "lsm/synthetic.hpp"

using namespace lsm;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() / ("lsm_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

std::vector<std::string> csv_lines(const fs::path& p) {
  std::vector<std::string> lines;
  std::stringstream ss(slurp(p));
  for (std::string l; std::getline(ss, l);) {
    if (!l.empty()) lines.push_back(l);
  }
  return lines;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
  return f;
}

constexpr const char* kFastConfig = R"([experiment]
seed = 11
output = out
search_draws = 2
cv_k = 3

[pso]
swarm_size = 6
iters = 5

[hho]
hawks = 5
iters = 4

[rfe]
cv_k = 3

[search.RF]
n_estimators = 50
max_depth = 5

[search.GBT]
n_estimators = 50
max_depth = 2, 5

[sampling]
min_dist_to_slide = 90
)";

// A small scene with derived factors and the fast config next to it.
fs::path make_scene(const fs::path& dir) {
  cmd_synth(dir, 60, 60, 30.0, 40, 5);
  std::string cfg = slurp(dir / "config.ini");
  cfg = cfg.substr(0, cfg.find("[sampling]"));
  cfg = cfg.substr(cfg.find("[inputs]"));
  spit(dir / "config.ini", std::string(kFastConfig) + "\n" + cfg);
  cmd_derive(load_config(dir / "config.ini"));
  return dir / "config.ini";
}

}  // namespace

TEST(Config, Defaults) {
  const auto cfg = parse_config("");
  EXPECT_EQ(cfg.cv_k, 5u);
  EXPECT_EQ(cfg.igr_top_k, 8u);
  EXPECT_EQ(cfg.pso.iters, 1000u);
  EXPECT_DOUBLE_EQ(cfg.pso.w, 0.9);
  EXPECT_DOUBLE_EQ(cfg.lasso.lambda, 0.02);
  EXPECT_DOUBLE_EQ(cfg.sampling.min_dist_to_slide, 1000.0);
  EXPECT_EQ(cfg.families.size(), 4u);
  EXPECT_EQ(cfg.spec(ModelFamily::kSVM).hyper.at("C"), "180");
}

TEST(Config, ErrorsNameTheField) {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const UsageError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("[pso]\nw = fast\n").find("pso.w"), std::string::npos);
  EXPECT_NE(message("[model.SVM]\nC = 5\n").find("model.SVM.C"), std::string::npos);
  EXPECT_NE(message("[search.RF]\nmax_depth = 2, 7\n").find("search.RF.max_depth"), std::string::npos);
  EXPECT_NE(message("[search.GBT]\nlearning_rate = 0.1\n").find("search.GBT.learning_rate"), std::string::npos);
  EXPECT_NE(message("[igr]\ntopk = 3\n").find("igr.topk"), std::string::npos);
  EXPECT_NE(message("[experiment]\ntrain = 0.8\n").find("experiment.train"), std::string::npos);
  EXPECT_NE(message("[sampling]\noversample_ratio = 5\n").find("sampling.oversample_ratio"), std::string::npos);
  EXPECT_NE(message("[factors]\nnames = a, b, a\n").find("factors.names"), std::string::npos);
  EXPECT_NE(message("[hho]\nhawks = 2\n").find("hho.hawks"), std::string::npos);
  EXPECT_NE(message("[nonsense]\nx = 1\n").find("nonsense"), std::string::npos);
  EXPECT_NE(message("[experiment]\nfamilies = LR, CNN\n").find("experiment.families"), std::string::npos);
}

TEST(Config, SearchGridAndSpec) {
  const auto cfg = parse_config("[search.SVM]\nkernel = linear\nC = 1, 10\n[model.LR]\nC = 0.1\n");
  EXPECT_EQ(cfg.grid(ModelFamily::kSVM).at("kernel"), std::vector<std::string>{"linear"});
  EXPECT_EQ(cfg.grid(ModelFamily::kSVM).at("C").size(), 2u);
  EXPECT_EQ(cfg.grid(ModelFamily::kSVM).at("gamma").size(), 4u);
  EXPECT_EQ(cfg.spec(ModelFamily::kLR).hyper.at("C"), "0.1");
  EXPECT_NO_THROW(validate_spec(cfg.spec(ModelFamily::kLR)));
}

TEST(SampleCsv, RoundTrip) {
  const auto t = synthetic_benchmark(50, 3);
  const auto back = parse_sample_csv(write_sample_csv(t));
  EXPECT_EQ(back.factor_names, t.factor_names);
  EXPECT_EQ(back.labels, t.labels);
  EXPECT_EQ(back.features.data(), t.features.data());
  EXPECT_THROW(parse_sample_csv("label,x_cell,y_cell,a\n1,0,0\n"), DataError);
  EXPECT_THROW(parse_sample_csv("label,x_cell,y_cell,a\n2,0,0,1\n"), DataError);
}

TEST(Derive, FlatDemGivesZeroSlopeAndIsIdempotent) {
  TempDir tmp("derive");
  Grid dem(8, 6, 0, 0, 10, -9999, std::vector<double>(48, 250.0));
  write_ascii_grid_file(dem, (tmp.path() / "dem.asc").string());
  spit(tmp.path() / "config.ini", "[inputs]\ndem = dem.asc\n");
  const auto cfg = load_config(tmp.path() / "config.ini");
  cmd_derive(cfg);
  const auto slope = read_ascii_grid_file((tmp.path() / "factors" / "slope.asc").string());
  for (std::size_t r = 1; r + 1 < slope.nrows(); ++r) {
    for (std::size_t c = 1; c + 1 < slope.ncols(); ++c) EXPECT_EQ(slope.at(r, c), 0.0);
  }
  const auto first = slurp(tmp.path() / "factors" / "slope.asc");
  const auto summary = slurp(tmp.path() / "out" / "factor_summary.csv");
  cmd_derive(cfg);
  EXPECT_EQ(slurp(tmp.path() / "factors" / "slope.asc"), first);
  EXPECT_EQ(slurp(tmp.path() / "out" / "factor_summary.csv"), summary);
  // Seven terrain layers; no feature masks were configured.
  EXPECT_EQ(csv_lines(tmp.path() / "out" / "factor_summary.csv").size(), 1u + 7u);
}

TEST(Derive, MissingDemNamesThePath) {
  TempDir tmp("derive_missing");
  spit(tmp.path() / "config.ini", "[inputs]\ndem = nowhere.asc\n");
  try {
    cmd_derive(load_config(tmp.path() / "config.ini"));
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("nowhere.asc"), std::string::npos);
  }
}

TEST(Derive, SummaryRowPerFactor) {
  TempDir tmp("derive_scene");
  make_scene(tmp.path());
  EXPECT_EQ(csv_lines(tmp.path() / "out" / "factor_summary.csv").size(), 1u + derived_factor_names().size());
}

TEST(Sample, BalancedAndDeterministic) {
  TempDir tmp("sample");
  const auto cfg = load_config(make_scene(tmp.path()));
  const auto a = prepare_data(cfg);
  const auto b = prepare_data(cfg);
  EXPECT_EQ(a.table.labels, b.table.labels);
  EXPECT_EQ(a.table.features.data(), b.table.features.data());
  const auto pos = std::count(a.table.labels.begin(), a.table.labels.end(), 1);
  EXPECT_EQ(static_cast<std::size_t>(pos) * 2, a.table.rows());
  cmd_sample(cfg);
  EXPECT_EQ(csv_lines(tmp.path() / "out" / "samples.csv").size(), a.table.rows() + 1);
}

class RunFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    tmp_ = new TempDir("run");
    config_ = make_scene(tmp_->path());
    auto cfg = load_config(config_);
    summary_ = new RunSummary(cmd_run(cfg));
  }
  static void TearDownTestSuite() {
    delete summary_;
    delete tmp_;
  }
  static fs::path out() { return tmp_->path() / "out"; }

  static TempDir* tmp_;
  static fs::path config_;
  static RunSummary* summary_;
};

TempDir* RunFixture::tmp_ = nullptr;
fs::path RunFixture::config_;
RunSummary* RunFixture::summary_ = nullptr;

TEST_F(RunFixture, RerunAndThreadCountAreByteIdentical) {
  auto cfg = load_config(config_);
  for (unsigned threads : {1u, 4u}) {
    cfg.output = tmp_->path() / ("again" + std::to_string(threads));
    set_thread_count(threads);
    cmd_run(cfg);
    set_thread_count(1);
    std::size_t compared = 0;
    for (const auto& line : csv_lines(out() / "manifest.csv")) {
      const auto rel = fields(line)[0];
      if (rel == "file") continue;
      EXPECT_EQ(slurp(out() / rel), slurp(cfg.output / rel)) << rel;
      ++compared;
    }
    EXPECT_GT(compared, 20u);
    EXPECT_EQ(slurp(out() / "manifest.csv"), slurp(cfg.output / "manifest.csv"));
  }
}

TEST_F(RunFixture, SelectionSummaryHasOneRowPerPair) {
  const auto cfg = load_config(config_);
  std::size_t pairs = 0;
  for (auto f : cfg.families) {
    pairs += 1 + cfg.methods.size();
    if (std::find(cfg.lasso_families.begin(), cfg.lasso_families.end(), f) == cfg.lasso_families.end()) --pairs;
  }
  EXPECT_EQ(csv_lines(out() / "selection_summary.csv").size(), 1 + pairs);
  EXPECT_EQ(summary_->outcomes.size(), pairs);
  for (const auto& o : summary_->outcomes) {
    EXPECT_GT(o.elapsed_seconds, 0.0);
    EXPECT_GE(popcount(o.mask), 1u);
  }
  const auto timing = csv_lines(out() / "timing.csv");
  ASSERT_EQ(timing.size(), 1 + pairs);
  for (std::size_t i = 1; i < timing.size(); ++i) EXPECT_GT(std::stod(fields(timing[i])[2]), 0.0);
}

TEST_F(RunFixture, MetricsRowsAndSeed) {
  const auto lines = csv_lines(out() / "metrics.csv");
  EXPECT_EQ(lines[0], "model,selection_method,fold,accuracy,precision,specificity_paper_eq12,recall,f1,kappa,auc,seed");
  // three folds + mean + test per pair
  EXPECT_EQ(lines.size(), 1 + 5 * summary_->outcomes.size());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = fields(lines[i]);
    ASSERT_EQ(f.size(), 11u);
    EXPECT_EQ(f.back(), "11");
    for (std::size_t j = 3; j < 10; ++j) {
      const double v = std::stod(f[j]);
      EXPECT_GE(v, j == 8 ? -1.0 : 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST_F(RunFixture, MapsAreValidAndReproducible) {
  std::size_t maps = 0;
  for (const auto& entry : fs::directory_iterator(out() / "maps")) {
    const auto name = entry.path().filename().string();
    if (name.find("_classes.asc") == std::string::npos) continue;
    ++maps;
    const auto g = read_ascii_grid_file(entry.path().string());
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g.is_nodata(i)) continue;
      EXPECT_TRUE(g[i] == 1 || g[i] == 2 || g[i] == 3 || g[i] == 4 || g[i] == 5);
    }
  }
  EXPECT_EQ(maps, 4u);

  // Per (model, method): both percentage columns sum to 100.
  std::map<std::string, std::pair<double, double>> sums;
  for (const auto& line : csv_lines(out() / "class_statistics.csv")) {
    const auto f = fields(line);
    if (f[0] == "model") continue;
    sums[f[0] + f[1]].first += std::stod(f[4]);
    sums[f[0] + f[1]].second += std::stod(f[5]);
  }
  for (const auto& [k, s] : sums) {
    EXPECT_NEAR(s.first, 100.0, 1e-9) << k;
    EXPECT_NEAR(s.second, 100.0, 1e-9) << k;
  }

  // Re-mapping a saved model reproduces the rasters written by run.
  auto cfg = load_config(config_);
  cfg.output = tmp_->path() / "remap";
  const auto prob = std::find_if(fs::directory_iterator(out() / "maps"), fs::directory_iterator{}, [](const auto& e) {
    return e.path().filename().string().find("_probability.asc") != std::string::npos;
  });
  ASSERT_NE(prob, fs::directory_iterator{});
  const auto stem = prob->path().filename().string().substr(0, prob->path().filename().string().find("_probability"));
  cmd_map(cfg, out() / "models" / (stem + ".model"));
  EXPECT_EQ(slurp(cfg.output / "maps" / (stem + "_probability.asc")), slurp(prob->path()));
  EXPECT_EQ(slurp(cfg.output / "maps" / (stem + "_classes.asc")),
            slurp(out() / "maps" / (stem + "_classes.asc")));
}

TEST_F(RunFixture, ModelArtifactsCarryFactorsAndNormalization) {
  for (const auto& o : summary_->outcomes) {
    const auto path = out() / "models" / (std::string(family_name(o.family)) + "_" + o.method + ".model");
    const auto m = FittedModel::deserialize(slurp(path));
    EXPECT_EQ(m.factor_count(), popcount(o.mask));
    ASSERT_TRUE(m.normalization());
    EXPECT_EQ(m.normalization()->size(), popcount(o.mask));
  }
}

TEST_F(RunFixture, MapRejectsMismatchedFactors) {
  auto cfg = load_config(config_);
  cfg.output = tmp_->path() / "bad_map";
  auto text = slurp(out() / "models" / "LR_ALL.model");
  const auto pos = text.find("slope");
  text.replace(pos, 5, "scree");
  spit(tmp_->path() / "bad.model", text);
  EXPECT_THROW(cmd_map(cfg, tmp_->path() / "bad.model"), DataError);
}

TEST(Exhaustive, FourFactorTableAndStats) {
  TempDir tmp("exhaustive");
  auto t = synthetic_benchmark(200, 4);
  t.features = t.features.select_cols(std::vector<std::size_t>{1, 3, 0, 2});
  t.factor_names = {"f1", "f3", "f0", "f2"};
  spit(tmp.path() / "table.csv", write_sample_csv(t));
  spit(tmp.path() / "config.ini",
       "[experiment]\nseed = 2\n[inputs]\nsamples = table.csv\n[exhaustive]\nfamilies = LR, GBT\n"
       "[model.GBT]\nn_estimators = 50\nmax_depth = 2\n");
  const auto cfg = load_config(tmp.path() / "config.ini");
  const auto s = cmd_exhaustive(cfg);
  ASSERT_EQ(s.records.size(), 5u);

  const auto lines = csv_lines(tmp.path() / "out" / "exhaustive_records.csv");
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[0], "mask,factor_count,LR,GBT,seed");
  double best = 0.0;
  for (std::size_t i = 1; i < lines.size(); ++i) best = std::max(best, std::stod(fields(lines[i])[2]));
  const auto best_rows = csv_lines(tmp.path() / "out" / "exhaustive_best.csv");
  EXPECT_EQ(std::stod(fields(best_rows[1])[4]), best);

  cmd_stats(tmp.path() / "out" / "exhaustive_records.csv", tmp.path() / "stats", experiment_factor_names(cfg));
  for (const char* f : {"exhaustive_boxplot.csv", "exhaustive_bands.csv", "exhaustive_top.csv",
                        "exhaustive_best.csv", "exhaustive_notes.txt"}) {
    EXPECT_EQ(slurp(tmp.path() / "out" / f), slurp(tmp.path() / "stats" / f)) << f;
  }
  EXPECT_NE(slurp(tmp.path() / "out" / "exhaustive_notes.txt").find("32602"), std::string::npos);
}

TEST(Exhaustive, TooManyFactors) {
  TempDir tmp("exhaustive_big");
  SampleTable t;
  t.features = Matrix(20, 21);
  for (std::size_t i = 0; i < 20; ++i) {
    t.labels.push_back(static_cast<int>(i % 2));
    t.coords.push_back({i, 0});
    for (std::size_t j = 0; j < 21; ++j) t.features(i, j) = static_cast<double>((i * 7 + j * 3) % 11);
  }
  for (std::size_t j = 0; j < 21; ++j) t.factor_names.push_back("g" + std::to_string(j));
  spit(tmp.path() / "t.csv", write_sample_csv(t));
  spit(tmp.path() / "config.ini", "[inputs]\nsamples = t.csv\n");
  EXPECT_THROW(cmd_exhaustive(load_config(tmp.path() / "config.ini")), UsageError);
}

TEST(Run, SampleCsvInputSkipsMaps) {
  TempDir tmp("run_csv");
  spit(tmp.path() / "b.csv", write_sample_csv(synthetic_benchmark(120, 9)));
  spit(tmp.path() / "config.ini",
       "[experiment]\nseed = 4\nfamilies = LR\nmethods = IGR, LASSO\nsearch_draws = 0\n"
       "wilcoxon_subsets = 6\n[inputs]\nsamples = b.csv\n");
  const auto s = cmd_run(load_config(tmp.path() / "config.ini"));
  EXPECT_EQ(s.outcomes.size(), 3u);
  EXPECT_FALSE(fs::exists(tmp.path() / "out" / "maps"));
  EXPECT_EQ(csv_lines(tmp.path() / "out" / "wilcoxon.csv").size(), 1u + 3u);
}
