#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "lsm/config.hpp"
#include "lsm/error.hpp"
#include "lsm/parallel.hpp"
#include "lsm/pipeline.hpp"
#include "lsm/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool need_config) {
  auto* opt = cmd->add_option("--config", c.config, "experiment configuration (INI)");
  if (need_config) opt->required();
  cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "output directory (overrides the config)");
}

lsm::ExperimentConfig load(const Common& c) {
  auto cfg = lsm::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output = fs::absolute(c.out);
  return cfg;
}

void report(const std::vector<fs::path>& files) {
  for (const auto& f : files) spdlog::info("wrote {}", f.string());
}

int run(int argc, char** argv) {
  CLI::App app{"Landslide susceptibility factor-selection toolkit"};
  app.require_subcommand(1);
  Common c;

  auto* derive = app.add_subcommand("derive", "derive terrain and distance factors from the DEM");
  add_common(derive, c, true);
  auto* sample = app.add_subcommand("sample", "build the landslide / non-landslide sample table");
  add_common(sample, c, true);
  auto* run_cmd = app.add_subcommand("run", "tune, select factors, evaluate and map");
  add_common(run_cmd, c, true);
  auto* exh = app.add_subcommand("exhaustive", "evaluate every factor combination");
  add_common(exh, c, true);

  auto* map = app.add_subcommand("map", "susceptibility and class rasters for a saved model");
  add_common(map, c, true);
  std::string model_path;
  map->add_option("--model", model_path, "model artifact written by run")->required();

  auto* stats = app.add_subcommand("stats", "recompute exhaustive summaries from a records CSV");
  add_common(stats, c, false);
  std::string records;
  stats->add_option("--records", records, "exhaustive_records.csv")->required();

  auto* synth = app.add_subcommand("synth", "write a synthetic scene or selection benchmark");
  add_common(synth, c, false);
  std::size_t rows = 200, cols = 200, slides = 120, bench_rows = 2000;
  double cellsize = 30.0, noise = 0.25;
  bool benchmark = false;
  synth->add_option("--rows", rows, "scene rows");
  synth->add_option("--cols", cols, "scene columns");
  synth->add_option("--cellsize", cellsize, "cell size in metres");
  synth->add_option("--slides", slides, "landslide count");
  synth->add_flag("--benchmark", benchmark, "write the 10-factor selection benchmark table instead");
  synth->add_option("--samples", bench_rows, "benchmark rows");
  synth->add_option("--noise", noise, "benchmark label noise (sd)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  lsm::set_thread_count(c.threads);

  if (derive->parsed()) report(lsm::cmd_derive(load(c)));
  if (sample->parsed()) report(lsm::cmd_sample(load(c)));
  if (run_cmd->parsed()) {
    const auto s = lsm::cmd_run(load(c));
    report(s.files);
  }
  if (exh->parsed()) {
    const auto s = lsm::cmd_exhaustive(load(c));
    spdlog::info("exhaustive: {} records", s.records.size());
    report(s.files);
  }
  if (map->parsed()) report(lsm::cmd_map(load(c), model_path));
  if (stats->parsed()) {
    std::vector<std::string> names;
    fs::path out = c.out.empty() ? fs::path(records).parent_path() : fs::path(c.out);
    if (!c.config.empty()) {
      const auto cfg = load(c);
      names = lsm::experiment_factor_names(cfg);
      if (c.out.empty()) out = cfg.resolve(cfg.output);
    }
    report(lsm::cmd_stats(records, out, names));
  }
  if (synth->parsed()) {
    const std::uint64_t seed = c.seed.value_or(1);
    const fs::path dir = c.out.empty() ? fs::path("synthetic") : fs::path(c.out);
    if (benchmark) {
      fs::create_directories(dir);
      const auto table = lsm::synthetic_benchmark(bench_rows, seed, noise);
      std::ofstream(dir / "benchmark.csv", std::ios::binary) << lsm::write_sample_csv(table);
      std::ofstream(dir / "config.ini", std::ios::binary)
          << fmt::format("[experiment]\nseed = {}\noutput = out\n\n[inputs]\nsamples = benchmark.csv\n", seed);
      spdlog::info("wrote {} and config.ini", (dir / "benchmark.csv").string());
    } else {
      report(lsm::cmd_synth(dir, rows, cols, cellsize, slides, seed));
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_pattern("[%l] %v");
  try {
    return run(argc, argv);
  } catch (const lsm::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const lsm::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const lsm::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
}
