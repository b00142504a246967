#include "lsm/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "lsm/error.hpp"
#include "lsm/rng.hpp"
#include "lsm/synthetic.hpp"
#include "lsm/terrain.hpp"

namespace lsm {

namespace fs = std::filesystem;

namespace {

// Re-raises toolkit errors with the pipeline stage prepended, keeping the
// error category (and so the exit code).
template <typename Fn>
auto stage(std::string_view name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const UsageError& e) {
    throw UsageError(fmt::format("{}: {}", name, e.what()));
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", name, e.what()));
  } catch (const NumericError& e) {
    throw NumericError(fmt::format("{}: {}", name, e.what()));
  }
}

class Csv {
 public:
  explicit Csv(std::string_view header) { fmt::format_to(std::back_inserter(buf_), "{}\n", header); }

  template <typename... Args>
  void row(fmt::format_string<Args...> f, Args&&... args) {
    fmt::format_to(std::back_inserter(buf_), f, std::forward<Args>(args)...);
    buf_.push_back('\n');
  }

  std::string str() const { return fmt::to_string(buf_); }

 private:
  fmt::memory_buffer buf_;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw DataError(fmt::format("write failed for '{}'", path.string()));
}

// Collects output paths and writes the manifest last.
class Outputs {
 public:
  Outputs(fs::path dir, std::uint64_t seed) : dir_(std::move(dir)), seed_(seed) { fs::create_directories(dir_); }

  fs::path path(const fs::path& rel) const { return dir_ / rel; }

  void text(const fs::path& rel, const std::string& content) {
    write_text(path(rel), content);
    files_.push_back(path(rel));
    rel_.push_back(rel.generic_string());
  }

  void grid(const fs::path& rel, const Grid& g) { text(rel, write_ascii_grid(g)); }

  std::vector<fs::path> finish() {
    Csv m("file,seed");
    for (const auto& r : rel_) m.row("{},{}", r, seed_);
    write_text(path("manifest.csv"), m.str());
    files_.push_back(path("manifest.csv"));
    return files_;
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::uint64_t seed_;
  std::vector<fs::path> files_;
  std::vector<std::string> rel_;
};

fs::path output_dir(const ExperimentConfig& cfg) { return cfg.resolve(cfg.output); }

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::vector<std::string> selected_names(const std::vector<std::string>& names, const FactorMask& mask) {
  std::vector<std::string> out;
  for (auto j : mask_indices(mask)) out.push_back(names[j]);
  return out;
}

std::vector<int> gather(std::span<const int> labels, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(labels[i]);
  return out;
}

std::vector<CellIndex> slide_cells(const ExperimentConfig& cfg, const Grid& reference) {
  if (!cfg.inventory) throw UsageError("inputs.inventory is required");
  const auto path = cfg.resolve(*cfg.inventory);
  if (!fs::exists(path)) throw DataError(fmt::format("inventory not found: '{}'", path.string()));
  return inventory_cells(read_inventory_csv(path.string()), reference);
}

std::string report_row(const EvalReport& r) {
  return fmt::format("{},{},{},{},{},{},{}", r.accuracy, r.precision, r.specificity, r.recall, r.f1, r.kappa,
                     r.auc);
}

EvalReport mean_report(std::span<const EvalReport> reports) {
  EvalReport m;
  const double n = static_cast<double>(reports.size());
  for (const auto& r : reports) {
    m.accuracy += r.accuracy / n;
    m.precision += r.precision / n;
    m.specificity += r.specificity / n;
    m.recall += r.recall / n;
    m.f1 += r.f1 / n;
    m.kappa += r.kappa / n;
    m.auc += r.auc / n;
  }
  return m;
}

EvalReport evaluate_model(const FittedModel& model, const Matrix& X, std::span<const int> y) {
  const auto proba = model.predict_proba(X);
  const auto pred = model.predict(X);
  return evaluate(proba, pred, y);
}

std::string grid_stats_row(const std::string& name, const Grid& g) {
  std::vector<double> v;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.is_nodata(i)) v.push_back(g[i]);
  }
  if (v.empty()) return fmt::format("{},0,{},,,,,,,", name, g.size());
  const auto q = five_number_summary(v);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return fmt::format("{},{},{},{},{},{},{},{},{},{}", name, v.size(), g.size() - v.size(), q[0], q[1], q[2], q[3],
                     q[4], mean, std::sqrt(ss / static_cast<double>(v.size())));
}

void write_exhaustive_summaries(Outputs& out, std::span<const ExhaustiveRecord> records,
                                const std::vector<std::string>& families, const std::vector<std::string>& names,
                                std::uint64_t seed) {
  const std::size_t p = names.size();
  Csv box("model,factor_count,masks,q0,q1,q2,q3,q4,seed");
  Csv bands("model,factor,name,band_q0_q1,band_q1_q2,band_q2_q3,band_q3_q4,seed");
  Csv top("model,factor,name,top100,top1000,seed");
  Csv best("model,mask,factor_count,factors,accuracy,seed");
  for (std::size_t m = 0; m < families.size(); ++m) {
    const auto a = analyze_exhaustive(records, m, p);
    for (const auto& c : a.by_count) {
      box.row("{},{},{},{},{},{},{},{},{}", families[m], c.factor_count, c.masks, c.q[0], c.q[1], c.q[2], c.q[3],
              c.q[4], seed);
    }
    for (std::size_t j = 0; j < p; ++j) {
      const auto& b = a.band_counts[j];
      bands.row("{},{},{},{},{},{},{},{}", families[m], j, names[j], b[0], b[1], b[2], b[3], seed);
      top.row("{},{},{},{},{},{}", families[m], j, names[j], a.top100[j], a.top1000[j], seed);
    }
    const auto& r = records[a.best];
    best.row("{},{},{},{},{},{}", families[m], mask_string(r.mask), r.factor_count,
             join(selected_names(names, r.mask), ";"), r.accuracy[m], seed);
  }
  out.text("exhaustive_boxplot.csv", box.str());
  out.text("exhaustive_bands.csv", bands.str());
  out.text("exhaustive_top.csv", top.str());
  out.text("exhaustive_best.csv", best.str());

  const std::size_t min_count = records.empty() ? 0 : records.front().factor_count;
  std::string notes = fmt::format("records: {}\nfactors: {}\nminimum factors per mask: {}\n", records.size(), p,
                                  min_count);
  notes +=
      "note: 15 factors with at least 3 per mask give 2^15 - 1 - 15 - 105 = 32647 masks; the figure 32602 "
      "sometimes quoted for this setting is inconsistent with that count and is not reproduced here.\n";
  out.text("exhaustive_notes.txt", notes);
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<std::string> experiment_factor_names(const ExperimentConfig& cfg) {
  if (!cfg.factors.empty()) return cfg.factors;
  if (cfg.samples) {
    const auto path = cfg.resolve(*cfg.samples);
    std::ifstream in(path);
    std::string header;
    if (!in || !std::getline(in, header)) throw DataError(fmt::format("cannot read samples '{}'", path.string()));
    if (!header.empty() && header.back() == '\r') header.pop_back();
    std::vector<std::string> names;
    std::stringstream ss(header);
    for (std::string item; std::getline(ss, item, ',');) names.push_back(item);
    if (names.size() < 4) throw DataError("samples: header has no factor columns");
    return {names.begin() + 3, names.end()};
  }
  return derived_factor_names();
}

FactorStack load_factor_stack(const ExperimentConfig& cfg, const std::vector<std::string>& names) {
  const auto dir = cfg.factor_directory();
  std::vector<Grid> layers;
  for (const auto& n : names) {
    const auto path = dir / (n + ".asc");
    if (!fs::exists(path)) throw DataError(fmt::format("factor grid not found: '{}'", path.string()));
    layers.push_back(read_ascii_grid_file(path.string()));
  }
  return FactorStack(names, std::move(layers));
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  PreparedData d;
  if (cfg.samples) {
    const auto path = cfg.resolve(*cfg.samples);
    if (!fs::exists(path)) throw DataError(fmt::format("samples not found: '{}'", path.string()));
    d.table = stage("samples", [&] { return read_sample_csv(path.string()); });
    if (!cfg.factors.empty()) {
      std::vector<std::size_t> cols;
      for (const auto& n : cfg.factors) {
        auto it = std::find(d.table.factor_names.begin(), d.table.factor_names.end(), n);
        if (it == d.table.factor_names.end()) throw DataError(fmt::format("samples: no column '{}'", n));
        cols.push_back(static_cast<std::size_t>(it - d.table.factor_names.begin()));
      }
      d.table.features = d.table.features.select_cols(cols);
      d.table.factor_names = cfg.factors;
    }
  } else {
    const auto& names = cfg.factors.empty() ? derived_factor_names() : cfg.factors;
    d.stack = stage("load factors", [&] { return load_factor_stack(cfg, names); });
    d.slides = stage("inventory", [&] { return slide_cells(cfg, d.stack->reference()); });
    const auto negatives = stage("sample", [&] {
      return sample_non_landslides(d.slides, *d.stack, derive_seed(cfg.seed, "negatives"), cfg.sampling);
    });
    auto ex = stage("extract", [&] { return extract_samples(d.slides, negatives, *d.stack); });
    d.table = std::move(ex.table);
    d.dropped = ex.dropped;
  }
  d.table.categorical.assign(d.table.factors(), false);
  for (const auto& c : cfg.categorical) {
    auto it = std::find(d.table.factor_names.begin(), d.table.factor_names.end(), c);
    if (it != d.table.factor_names.end()) d.table.categorical[it - d.table.factor_names.begin()] = true;
  }
  d.split = stage("split", [&] { return split(d.table.labels, derive_seed(cfg.seed, "split"), cfg.ratios); });
  d.normalized = normalize(d.table, d.split.train_idx);
  return d;
}

MapProducts make_maps(const FittedModel& model, const FactorStack& stack, const FactorMask& mask,
                      std::span<const CellIndex> slides, const MappingOptions& opts, std::uint64_t seed) {
  if (!model.normalization()) throw DataError("model carries no normalization statistics");
  MapProducts m;
  m.probability = score_raster(model, stack, mask, *model.normalization(), opts.block_rows);
  std::vector<double> values;
  for (std::size_t i = 0; i < m.probability.size(); ++i) {
    if (!m.probability.is_nodata(i)) values.push_back(m.probability[i]);
  }
  m.breaks = jenks_breaks(values, opts.classes, opts.jenks_sample, derive_seed(seed, "jenks"));
  m.classes = classify_raster(m.probability, m.breaks);
  m.statistics = class_statistics(m.classes, slides, opts.classes);
  return m;
}

namespace {

void write_map_products(Outputs& out, const std::string& stem, const MapProducts& m, Csv& stats, Csv& breaks,
                        std::string_view label_cols, std::uint64_t seed) {
  out.grid(fs::path("maps") / (stem + "_probability.asc"), m.probability);
  out.grid(fs::path("maps") / (stem + "_classes.asc"), m.classes);
  const std::size_t k = m.statistics.slide_pct.size();
  for (std::size_t c = 0; c < k; ++c) {
    const char* label = k == kClassLabels.size() ? kClassLabels[c] : "";
    stats.row("{},{},{},{},{},{},{},{}", label_cols, c + 1, label, m.statistics.non_slide_pct[c],
              m.statistics.slide_pct[c], m.statistics.non_slide_cells[c], m.statistics.slide_cells[c], seed);
  }
  for (std::size_t c = 0; c < m.breaks.breaks.size(); ++c) {
    breaks.row("{},{},{},{},{}", label_cols, c + 1, m.breaks.breaks[c], m.breaks.sample_size, seed);
  }
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<fs::path> cmd_derive(const ExperimentConfig& cfg) {
  if (!cfg.dem) throw UsageError("inputs.dem is required for derive");
  const auto dem_path = cfg.resolve(*cfg.dem);
  if (!fs::exists(dem_path)) throw DataError(fmt::format("DEM not found: '{}'", dem_path.string()));
  const Grid dem = stage("dem", [&] { return read_ascii_grid_file(dem_path.string()); });

  std::vector<std::pair<std::string, Grid>> layers;
  stage("terrain", [&] {
    const Grid slope = terrain::slope(dem);
    const auto curv = terrain::curvatures(dem);
    const Grid acc = terrain::flow_accumulation(dem);
    layers.emplace_back("slope", slope);
    layers.emplace_back("aspect", terrain::aspect(dem));
    layers.emplace_back("plan_curvature", curv.plan);
    layers.emplace_back("profile_curvature", curv.profile);
    layers.emplace_back("spi", terrain::spi(acc, slope));
    layers.emplace_back("sti", terrain::sti(acc, slope));
    layers.emplace_back("twi", terrain::twi(acc, slope, cfg.twi_variant));
  });
  const std::pair<const char*, const std::optional<fs::path>*> masks[] = {
      {"dist_fault", &cfg.fault_mask}, {"dist_road", &cfg.road_mask}, {"dist_stream", &cfg.stream_mask}};
  for (const auto& [name, path] : masks) {
    if (!*path) continue;
    const auto p = cfg.resolve(**path);
    if (!fs::exists(p)) throw DataError(fmt::format("feature mask not found: '{}'", p.string()));
    stage(name, [&] {
      const Grid mask = read_ascii_grid_file(p.string());
      require_aligned(dem, mask, name);
      layers.emplace_back(name, distance_transform(mask));
    });
  }

  std::vector<fs::path> files;
  const auto dir = cfg.factor_directory();
  fs::create_directories(dir);
  Csv summary("factor,cells,nodata_cells,min,q1,median,q3,max,mean,sd,seed");
  for (const auto& [name, g] : layers) {
    const auto path = dir / (name + ".asc");
    write_ascii_grid_file(g, path.string());
    files.push_back(path);
    summary.row("{},{}", grid_stats_row(name, g), cfg.seed);
  }
  Outputs out(output_dir(cfg), cfg.seed);
  out.text("factor_summary.csv", summary.str());
  auto written = out.finish();
  files.insert(files.end(), written.begin(), written.end());
  return files;
}

std::vector<fs::path> cmd_sample(const ExperimentConfig& cfg) {
  const auto d = prepare_data(cfg);
  Outputs out(output_dir(cfg), cfg.seed);
  out.text("samples.csv", write_sample_csv(d.table));
  Csv s("row,part,label,seed");
  std::vector<std::pair<std::size_t, const char*>> parts;
  for (auto i : d.split.train_idx) parts.emplace_back(i, "train");
  for (auto i : d.split.valid_idx) parts.emplace_back(i, "valid");
  for (auto i : d.split.test_idx) parts.emplace_back(i, "test");
  std::sort(parts.begin(), parts.end());
  for (const auto& [i, part] : parts) s.row("{},{},{},{}", i, part, d.table.labels[i], cfg.seed);
  out.text("split.csv", s.str());
  spdlog::info("sample: {} rows ({} dropped for nodata)", d.table.rows(), d.dropped);
  return out.finish();
}

// ---------------------------------------------------------------------------

RunSummary cmd_run(const ExperimentConfig& cfg) {
  using clock = std::chrono::steady_clock;
  const auto d = prepare_data(cfg);
  const auto& names = d.table.factor_names;
  const std::size_t p = names.size();
  const auto& T = d.normalized;
  const auto& sp = d.split;

  WrapperData wd{T.features.select_rows(sp.train_idx), gather(T.labels, sp.train_idx),
                 T.features.select_rows(sp.valid_idx), gather(T.labels, sp.valid_idx)};
  const Matrix X_test = T.features.select_rows(sp.test_idx);
  const auto y_test = gather(T.labels, sp.test_idx);

  // Development rows (train + validation) for cross-validated metrics.
  std::vector<std::size_t> dev = sp.train_idx;
  dev.insert(dev.end(), sp.valid_idx.begin(), sp.valid_idx.end());
  std::sort(dev.begin(), dev.end());
  const Matrix X_dev = T.features.select_rows(dev);
  const auto y_dev = gather(T.labels, dev);
  const auto folds = stage("cv folds", [&] { return kfold(y_dev, cfg.cv_k, derive_seed(cfg.seed, "cv")); });

  // Disjoint random subsets of the test rows for paired significance tests.
  std::vector<std::vector<std::size_t>> subsets;
  if (cfg.wilcoxon_subsets > 0) {
    std::vector<std::size_t> order(y_test.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, "wilcoxon"));
    rng.shuffle(std::span(order));
    const std::size_t S = std::min(cfg.wilcoxon_subsets, order.size());
    for (std::size_t s = 0; s < S; ++s) {
      subsets.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(order.size() * s / S),
                           order.begin() + static_cast<std::ptrdiff_t>(order.size() * (s + 1) / S));
    }
  }

  RunSummary summary;
  summary.factor_names = names;
  Outputs out(output_dir(cfg), cfg.seed);
  out.text("samples.csv", write_sample_csv(d.table));

  {
    const auto train_table = select_rows(d.table, sp.train_idx);
    const auto rank = stage("IGR ranking", [&] { return igr_rank(train_table, cfg.igr_bins); });
    Csv c("rank,factor,name,vi,gain,split_info,seed");
    for (std::size_t r = 0; r < rank.size(); ++r) {
      c.row("{},{},{},{},{},{},{}", r + 1, rank[r].factor, names[rank[r].factor], rank[r].vi, rank[r].gain,
            rank[r].split_info, cfg.seed);
    }
    out.text("igr_rank.csv", c.str());
  }

  Csv search_csv("model,draw,spec,valid_accuracy,error,seed");
  Csv metrics_csv("model,selection_method,fold,accuracy,precision,specificity_paper_eq12,recall,f1,kappa,auc,seed");
  Csv selection_csv("model,selection_method,mask,factor_count,factors,validation_score,fits,params,spec,seed");
  Csv timing_csv("model,selection_method,elapsed_seconds");
  Csv stats_csv("model,selection_method,class,label,non_slide_pct,slide_pct,non_slide_cells,slide_cells,seed");
  Csv breaks_csv("model,selection_method,class,upper_break,sample_size,seed");

  std::vector<SelectionMethod> methods{SelectionMethod::kAll};
  for (auto m : cfg.methods) {
    if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
  }

  for (const auto family : cfg.families) {
    const std::string F(family_name(family));
    ModelSpec spec = cfg.spec(family);
    if (cfg.search_draws > 0) {
      const auto res = stage("random search " + F, [&] {
        return random_search(family, cfg.grid(family), wd.X_train, wd.y_train, wd.X_valid, wd.y_valid,
                             cfg.search_draws, derive_seed(cfg.seed, "search." + F));
      });
      for (std::size_t i = 0; i < res.trials.size(); ++i) {
        search_csv.row("{},{},{},{},{},{}", F, i, res.trials[i].spec.describe(), res.trials[i].valid_accuracy,
                       res.trials[i].error, cfg.seed);
      }
      spec = res.best;
    }
    validate_spec(spec);
    summary.tuned.push_back(spec);
    spdlog::info("{}: using {}", F, spec.describe());

    MaskFitness fitness(wd, spec, derive_seed(cfg.seed, "fitness." + F));
    std::size_t best_outcome = summary.outcomes.size();
    std::optional<FittedModel> best_model;

    for (const auto method : methods) {
      const std::string M(method_name(method));
      if (method == SelectionMethod::kLasso &&
          std::find(cfg.lasso_families.begin(), cfg.lasso_families.end(), family) == cfg.lasso_families.end()) {
        continue;
      }
      const auto seed = derive_seed(cfg.seed, "select." + F + "." + M);
      const auto t0 = clock::now();
      const std::string label = F + " " + M;
      SelectionResult sel = stage(label, [&]() -> SelectionResult {
        SelectionResult r;
        switch (method) {
          case SelectionMethod::kAll:
            r.method = "ALL";
            r.mask.assign(p, true);
            break;
          case SelectionMethod::kIgr:
            r.method = "IGR";
            r.mask = igr_select(select_rows(d.table, sp.train_idx), std::min(cfg.igr_top_k, p), cfg.igr_bins);
            break;
          case SelectionMethod::kRfe: return rfe(wd.X_train, wd.y_train, spec, cfg.rfe_cv_k, seed);
          case SelectionMethod::kPso: return pso_select(wd, spec, cfg.pso, seed);
          case SelectionMethod::kHho: return hho_select(wd, spec, cfg.hho, seed);
          case SelectionMethod::kLasso: return lasso_select(wd.X_train, wd.y_train, cfg.lasso, seed);
        }
        return r;
      });
      if (method == SelectionMethod::kAll || method == SelectionMethod::kIgr || method == SelectionMethod::kLasso) {
        sel.score = fitness(sel.mask);
        sel.fits = 1;
      }
      const double elapsed = std::chrono::duration<double>(clock::now() - t0).count();

      MethodOutcome o;
      o.family = family;
      o.method = M;
      o.mask = sel.mask;
      o.validation_score = sel.score;
      o.elapsed_seconds = elapsed;
      const auto cols = mask_indices(sel.mask);

      // Cross-validated metrics on the development rows.
      std::vector<EvalReport> fold_reports(folds.size());
      stage(label + " cv", [&] {
        for (std::size_t f = 0; f < folds.size(); ++f) {
          std::vector<std::size_t> fit_rows;
          for (std::size_t g = 0; g < folds.size(); ++g) {
            if (g != f) fit_rows.insert(fit_rows.end(), folds[g].begin(), folds[g].end());
          }
          std::sort(fit_rows.begin(), fit_rows.end());
          const Matrix Xf = X_dev.select_rows(fit_rows).select_cols(cols);
          const auto model = fit_model(spec, Xf, gather(y_dev, fit_rows), {},
                                       derive_seed(derive_seed(cfg.seed, "cv-fit." + F + "." + M), f));
          fold_reports[f] =
              evaluate_model(model, X_dev.select_rows(folds[f]).select_cols(cols), gather(y_dev, folds[f]));
        }
      });
      o.cv_mean = mean_report(fold_reports);

      // Final model on the training rows, scored on the test rows.
      auto model = stage(label + " fit", [&] {
        return fit_model(spec, wd.X_train.select_cols(cols), wd.y_train, selected_names(names, sel.mask),
                         derive_seed(cfg.seed, "fit." + F + "." + M));
      });
      std::vector<NormStat> norm;
      for (auto j : cols) norm.push_back((*T.normalization)[j]);
      model.set_normalization(norm);
      const Matrix X_test_sel = X_test.select_cols(cols);
      o.test = evaluate_model(model, X_test_sel, y_test);
      const auto pred = model.predict(X_test_sel);
      for (const auto& s : subsets) {
        std::size_t hit = 0;
        for (auto i : s) hit += pred[i] == y_test[i];
        o.subset_accuracy.push_back(static_cast<double>(hit) / static_cast<double>(s.size()));
      }

      for (std::size_t f = 0; f < fold_reports.size(); ++f) {
        metrics_csv.row("{},{},{},{},{}", F, M, f + 1, report_row(fold_reports[f]), cfg.seed);
      }
      metrics_csv.row("{},{},mean,{},{}", F, M, report_row(o.cv_mean), cfg.seed);
      metrics_csv.row("{},{},test,{},{}", F, M, report_row(o.test), cfg.seed);
      std::vector<std::string> params;
      for (const auto& [k, v] : sel.params) params.push_back(k + "=" + v);
      selection_csv.row("{},{},{},{},{},{},{},{},{},{}", F, M, mask_string(sel.mask), popcount(sel.mask),
                        join(selected_names(names, sel.mask), ";"), sel.score, sel.fits, join(params, ";"),
                        spec.describe(), cfg.seed);
      timing_csv.row("{},{},{}", F, M, elapsed);
      if (!sel.trace.empty()) {
        Csv trace("iteration,score,mean_score,mask,note,seed");
        for (const auto& t : sel.trace) {
          trace.row("{},{},{},{},{},{}", t.iteration, t.score, t.mean_score, t.mask, t.note, cfg.seed);
        }
        out.text(fs::path("traces") / (F + "_" + M + ".csv"), trace.str());
      }
      out.text(fs::path("models") / (F + "_" + M + ".model"), model.serialize());
      spdlog::info("{} {}: mask {} test accuracy {:.4f}", F, M, mask_string(sel.mask), o.test.accuracy);

      if (best_outcome == summary.outcomes.size() ||
          o.test.accuracy > summary.outcomes[best_outcome].test.accuracy) {
        best_outcome = summary.outcomes.size();
        best_model = std::move(model);
      }
      summary.outcomes.push_back(std::move(o));
    }

    if (d.stack && cfg.mapping.enabled && best_model) {
      const auto& o = summary.outcomes[best_outcome];
      const auto maps = stage("map " + F, [&] {
        return make_maps(*best_model, *d.stack, o.mask, d.slides, cfg.mapping, derive_seed(cfg.seed, "map." + F));
      });
      write_map_products(out, F + "_" + o.method, maps, stats_csv, breaks_csv, F + "," + o.method, cfg.seed);
    }
  }

  // Wilcoxon tests: methods within each family, then each family's best method
  // against the others.
  Csv wil("scope,a,b,n,w,p,exact,seed");
  auto test_pair = [&](const std::string& scope, const MethodOutcome& a, const MethodOutcome& b,
                       const std::string& na, const std::string& nb) {
    try {
      const auto r = wilcoxon_signed_rank(a.subset_accuracy, b.subset_accuracy);
      wil.row("{},{},{},{},{},{},{},{}", scope, na, nb, r.n, r.w, r.p, r.exact ? 1 : 0, cfg.seed);
    } catch (const Error&) {
      wil.row("{},{},{},NA,NA,NA,NA,{}", scope, na, nb, cfg.seed);
    }
  };
  std::vector<const MethodOutcome*> best_per_family;
  for (const auto family : cfg.families) {
    std::vector<const MethodOutcome*> fam;
    for (const auto& o : summary.outcomes) {
      if (o.family == family) fam.push_back(&o);
    }
    const std::string F(family_name(family));
    for (std::size_t i = 0; i < fam.size(); ++i) {
      for (std::size_t j = i + 1; j < fam.size(); ++j) {
        test_pair(F, *fam[i], *fam[j], fam[i]->method, fam[j]->method);
      }
    }
    const MethodOutcome* best = nullptr;
    for (const auto* o : fam) {
      if (!best || o->test.accuracy > best->test.accuracy) best = o;
    }
    if (best) best_per_family.push_back(best);
  }
  for (std::size_t i = 0; i < best_per_family.size(); ++i) {
    for (std::size_t j = i + 1; j < best_per_family.size(); ++j) {
      const auto* a = best_per_family[i];
      const auto* b = best_per_family[j];
      test_pair("models", *a, *b, fmt::format("{}:{}", family_name(a->family), a->method),
                fmt::format("{}:{}", family_name(b->family), b->method));
    }
  }

  if (cfg.search_draws > 0) out.text("search_trials.csv", search_csv.str());
  out.text("metrics.csv", metrics_csv.str());
  out.text("selection_summary.csv", selection_csv.str());
  out.text("wilcoxon.csv", wil.str());
  if (d.stack && cfg.mapping.enabled) {
    out.text("class_statistics.csv", stats_csv.str());
    out.text("jenks_breaks.csv", breaks_csv.str());
  }
  summary.files = out.finish();
  // Wall-clock timings vary between runs, so they stay out of the manifest.
  write_text(out.path("timing.csv"), timing_csv.str());
  summary.files.push_back(out.path("timing.csv"));
  return summary;
}

// ---------------------------------------------------------------------------

ExhaustiveSummary cmd_exhaustive(const ExperimentConfig& cfg) {
  const auto d = prepare_data(cfg);
  const auto& T = d.normalized;
  const auto& sp = d.split;
  ExhaustiveSummary s;
  s.factor_names = d.table.factor_names;
  s.families = cfg.exhaustive.families;
  std::vector<ModelSpec> specs;
  for (auto f : s.families) specs.push_back(cfg.spec(f));
  s.records = stage("exhaustive", [&] {
    return exhaustive(T.features.select_rows(sp.train_idx), gather(T.labels, sp.train_idx),
                      T.features.select_rows(sp.test_idx), gather(T.labels, sp.test_idx), specs,
                      cfg.exhaustive.min_factors, derive_seed(cfg.seed, "exhaustive"));
  });

  std::vector<std::string> fams;
  for (auto f : s.families) fams.emplace_back(family_name(f));
  std::string header = "mask,factor_count";
  for (const auto& f : fams) header += "," + f;
  header += ",seed";
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "{}\n", header);
  for (const auto& r : s.records) {
    fmt::format_to(std::back_inserter(buf), "{},{}", mask_string(r.mask), r.factor_count);
    for (double a : r.accuracy) fmt::format_to(std::back_inserter(buf), ",{}", a);
    fmt::format_to(std::back_inserter(buf), ",{}\n", cfg.seed);
  }
  Outputs out(output_dir(cfg), cfg.seed);
  out.text("exhaustive_records.csv", fmt::to_string(buf));
  write_exhaustive_summaries(out, s.records, fams, s.factor_names, cfg.seed);
  s.files = out.finish();
  return s;
}

ExhaustiveTable read_exhaustive_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open records '{}'", path.string()));
  ExhaustiveTable t;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  std::optional<std::size_t> seed_col;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string item; std::getline(ss, item, ',');) f.push_back(item);
    if (header.empty()) {
      header = f;
      if (header.size() < 3 || header[0] != "mask" || header[1] != "factor_count") {
        throw DataError("records: expected header 'mask,factor_count,<models...>'");
      }
      for (std::size_t j = 2; j < header.size(); ++j) {
        if (header[j] == "seed") seed_col = j;
        else t.families.push_back(header[j]);
      }
      continue;
    }
    if (f.size() != header.size()) {
      throw DataError(fmt::format("records line {}: expected {} fields, found {}", line_no, header.size(), f.size()));
    }
    ExhaustiveRecord r;
    try {
      r.mask = parse_mask(f[0]);
      r.factor_count = std::stoul(f[1]);
      for (std::size_t j = 2; j < f.size(); ++j) {
        if (seed_col && j == *seed_col) t.seed = std::stoull(f[j]);
        else r.accuracy.push_back(std::stod(f[j]));
      }
    } catch (const std::exception& e) {
      throw DataError(fmt::format("records line {}: {}", line_no, e.what()));
    }
    if (r.factor_count != popcount(r.mask)) {
      throw DataError(fmt::format("records line {}: factor_count does not match the mask", line_no));
    }
    if (!t.records.empty() && t.records.front().mask.size() != r.mask.size()) {
      throw DataError(fmt::format("records line {}: mask length differs", line_no));
    }
    t.records.push_back(std::move(r));
  }
  if (t.records.empty()) throw DataError("records: no rows");
  return t;
}

std::vector<fs::path> cmd_stats(const fs::path& records_csv, const fs::path& out_dir,
                                const std::vector<std::string>& names) {
  const auto t = read_exhaustive_records(records_csv);
  const std::size_t p = t.records.front().mask.size();
  std::vector<std::string> n = names;
  if (n.size() != p) {
    n.clear();
    for (std::size_t j = 0; j < p; ++j) n.push_back(fmt::format("factor{}", j));
  }
  Outputs out(out_dir, t.seed);
  write_exhaustive_summaries(out, t.records, t.families, n, t.seed);
  return out.finish();
}

// ---------------------------------------------------------------------------

std::vector<fs::path> cmd_map(const ExperimentConfig& cfg, const fs::path& model_path) {
  std::ifstream in(model_path, std::ios::binary);
  if (!in) throw DataError(fmt::format("model artifact not found: '{}'", model_path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  const auto model = stage("model", [&] { return FittedModel::deserialize(ss.str()); });
  const auto& names = model.factor_names();
  const auto stack = stage("load factors", [&] { return load_factor_stack(cfg, names); });
  const auto slides = stage("inventory", [&] { return slide_cells(cfg, stack.reference()); });
  const FactorMask all(names.size(), true);
  // Same seed stream as the maps written by `run` for this family.
  const std::string family(family_name(model.family()));
  const auto maps =
      stage("map", [&] { return make_maps(model, stack, all, slides, cfg.mapping, derive_seed(cfg.seed, "map." + family)); });

  Outputs out(output_dir(cfg), cfg.seed);
  Csv stats("model,selection_method,class,label,non_slide_pct,slide_pct,non_slide_cells,slide_cells,seed");
  Csv breaks("model,selection_method,class,upper_break,sample_size,seed");
  const std::string stem = model_path.stem().string();
  write_map_products(out, stem, maps, stats, breaks, family + "," + stem, cfg.seed);
  out.text(fs::path("maps") / (stem + "_class_statistics.csv"), stats.str());
  out.text(fs::path("maps") / (stem + "_jenks_breaks.csv"), breaks.str());
  return out.finish();
}

// ---------------------------------------------------------------------------

std::vector<fs::path> cmd_synth(const fs::path& dir, std::size_t nrows, std::size_t ncols, double cellsize,
                                std::size_t n_slides, std::uint64_t seed) {
  const auto scene = synthetic_scene(nrows, ncols, cellsize, n_slides, seed);
  fs::create_directories(dir);
  std::vector<fs::path> files;
  auto put_grid = [&](const char* name, const Grid& g) {
    write_ascii_grid_file(g, (dir / name).string());
    files.push_back(dir / name);
  };
  put_grid("dem.asc", scene.dem);
  put_grid("faults.asc", scene.fault_mask);
  put_grid("roads.asc", scene.road_mask);
  put_grid("streams.asc", scene.stream_mask);
  Csv inv("x,y");
  for (const auto& pt : scene.inventory.points) inv.row("{},{}", pt.x, pt.y);
  write_text(dir / "inventory.csv", inv.str());
  files.push_back(dir / "inventory.csv");

  // The scene spans a few kilometres, so the exclusion radius is scaled down
  // from the 1 km used on regional inventories.
  const std::string config = fmt::format(
      "# Synthetic scene {}x{} cells of {} m, {} landslides.\n"
      "[experiment]\n"
      "seed = {}\n"
      "output = out\n"
      "\n"
      "[inputs]\n"
      "dem = dem.asc\n"
      "fault_mask = faults.asc\n"
      "road_mask = roads.asc\n"
      "stream_mask = streams.asc\n"
      "inventory = inventory.csv\n"
      "\n"
      "[sampling]\n"
      "min_dist_to_slide = {}\n",
      nrows, ncols, cellsize, n_slides, seed, 4.0 * cellsize);
  write_text(dir / "config.ini", config);
  files.push_back(dir / "config.ini");
  return files;
}

}  // namespace lsm
