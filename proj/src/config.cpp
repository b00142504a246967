#include "lsm/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "lsm/error.hpp"

namespace lsm {

namespace fs = std::filesystem;

std::string_view method_name(SelectionMethod m) {
  switch (m) {
    case SelectionMethod::kAll: return "ALL";
    case SelectionMethod::kIgr: return "IGR";
    case SelectionMethod::kRfe: return "RFE";
    case SelectionMethod::kPso: return "PSO";
    case SelectionMethod::kHho: return "HHO";
    case SelectionMethod::kLasso: return "LASSO";
  }
  return "?";
}

SelectionMethod parse_method(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), ::toupper);
  for (auto m : {SelectionMethod::kAll, SelectionMethod::kIgr, SelectionMethod::kRfe, SelectionMethod::kPso,
                 SelectionMethod::kHho, SelectionMethod::kLasso}) {
    if (s == method_name(m)) return m;
  }
  throw UsageError(fmt::format("unknown selection method '{}'", name));
}

const std::vector<std::string>& derived_factor_names() {
  static const std::vector<std::string> names{"slope", "aspect",     "plan_curvature", "profile_curvature",
                                              "spi",   "sti",        "twi",            "dist_fault",
                                              "dist_road", "dist_stream"};
  return names;
}

fs::path ExperimentConfig::resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }

fs::path ExperimentConfig::factor_directory() const {
  return resolve(factor_dir.value_or("factors"));
}

const HyperGrid& ExperimentConfig::grid(ModelFamily f) const {
  auto it = grids.find(f);
  return it == grids.end() ? default_grid(f) : it->second;
}

const ModelSpec& ExperimentConfig::spec(ModelFamily f) const {
  static const std::map<ModelFamily, ModelSpec> defaults{{ModelFamily::kLR, default_spec(ModelFamily::kLR)},
                                                         {ModelFamily::kSVM, default_spec(ModelFamily::kSVM)},
                                                         {ModelFamily::kRF, default_spec(ModelFamily::kRF)},
                                                         {ModelFamily::kGBT, default_spec(ModelFamily::kGBT)}};
  auto it = specs.find(f);
  return it == specs.end() ? defaults.at(f) : it->second;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(',', start);
    if (end == std::string_view::npos) end = s.size();
    auto item = trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = end + 1;
  }
  return out;
}

// Reads one section, remembering which keys were consumed so that leftovers
// can be reported as unknown.
class Section {
 public:
  Section(std::string name, const boost::property_tree::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  std::optional<std::string> raw(const std::string& key) {
    if (!tree_) return std::nullopt;
    for (const auto& [k, v] : *tree_) {
      if (k == key) {
        used_.insert(key);
        return trim(v.data());
      }
    }
    return std::nullopt;
  }

  std::string field(const std::string& key) const { return name_ + "." + key; }

  [[noreturn]] void fail(const std::string& key, std::string_view what) const {
    throw UsageError(fmt::format("config: {}: {}", field(key), what));
  }

  template <typename T>
  void number(const std::string& key, T& out, double lo, double hi) {
    auto s = raw(key);
    if (!s) return;
    double v = 0;
    auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
    if (ec != std::errc() || ptr != s->data() + s->size() || !std::isfinite(v)) {
      fail(key, fmt::format("'{}' is not a number", *s));
    }
    if (v < lo || v > hi) fail(key, fmt::format("{} is outside [{}, {}]", *s, lo, hi));
    if constexpr (std::is_integral_v<T>) {
      if (v != std::floor(v)) fail(key, fmt::format("'{}' must be an integer", *s));
    }
    out = static_cast<T>(v);
  }

  void boolean(const std::string& key, bool& out) {
    auto s = raw(key);
    if (!s) return;
    std::string v = *s;
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "true" || v == "yes" || v == "1" || v == "on") out = true;
    else if (v == "false" || v == "no" || v == "0" || v == "off") out = false;
    else fail(key, fmt::format("'{}' is not a boolean", *s));
  }

  void path(const std::string& key, std::optional<fs::path>& out) {
    if (auto s = raw(key); s && !s->empty()) out = fs::path(*s);
  }

  template <typename T, typename Parse>
  void list(const std::string& key, std::vector<T>& out, Parse parse) {
    auto s = raw(key);
    if (!s) return;
    std::vector<T> v;
    try {
      for (const auto& item : split_list(*s)) v.push_back(parse(item));
    } catch (const UsageError& e) {
      fail(key, e.what());
    }
    out = std::move(v);
  }

  void check_unused() const {
    if (!tree_) return;
    for (const auto& [k, v] : *tree_) {
      if (!used_.count(k)) fail(k, "unknown key");
    }
  }

 private:
  std::string name_;
  const boost::property_tree::ptree* tree_;
  std::set<std::string> used_;
};

void parse_family_grid(ExperimentConfig& cfg, ModelFamily f, const boost::property_tree::ptree& tree,
                       const std::string& section) {
  HyperGrid grid = default_grid(f);
  for (const auto& [key, value] : tree) {
    if (!default_grid(f).count(key)) {
      throw UsageError(fmt::format("config: {}.{}: not a hyperparameter of {}", section, key, family_name(f)));
    }
    auto values = split_list(value.data());
    if (values.empty()) throw UsageError(fmt::format("config: {}.{}: empty value list", section, key));
    grid[key] = values;
    try {
      validate_grid(f, {{key, values}});
    } catch (const UsageError& e) {
      throw UsageError(fmt::format("config: {}.{}: {}", section, key, e.what()));
    }
  }
  cfg.grids[f] = std::move(grid);
}

void parse_family_spec(ExperimentConfig& cfg, ModelFamily f, const boost::property_tree::ptree& tree,
                       const std::string& section) {
  ModelSpec spec = default_spec(f);
  for (const auto& [key, value] : tree) {
    if (!default_grid(f).count(key)) {
      throw UsageError(fmt::format("config: {}.{}: not a hyperparameter of {}", section, key, family_name(f)));
    }
    spec.hyper[key] = trim(value.data());
    try {
      validate_grid(f, {{key, {spec.hyper[key]}}});
    } catch (const UsageError& e) {
      throw UsageError(fmt::format("config: {}.{}: {}", section, key, e.what()));
    }
  }
  cfg.specs[f] = std::move(spec);
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const fs::path& base_dir) {
  boost::property_tree::ptree pt;
  std::istringstream in{std::string(text)};
  try {
    boost::property_tree::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw UsageError(fmt::format("config: line {}: {}", e.line(), e.message()));
  }

  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  std::map<std::string, const boost::property_tree::ptree*> sections;
  for (const auto& [name, tree] : pt) {
    if (!tree.data().empty()) throw UsageError(fmt::format("config: '{}' appears outside any section", name));
    sections[name] = &tree;
  }
  auto section = [&](const std::string& name) {
    auto it = sections.find(name);
    return Section(name, it == sections.end() ? nullptr : it->second);
  };
  auto family_list = [](const std::string& s) { return parse_family(s); };
  constexpr double kBig = 1e12;

  {
    auto s = section("experiment");
    s.number("seed", cfg.seed, 0, 1.8e19);
    if (auto out = s.raw("output"); out && !out->empty()) cfg.output = *out;
    s.number("train", cfg.ratios.train, 0.0, 1.0);
    s.number("valid", cfg.ratios.valid, 0.0, 1.0);
    s.number("test", cfg.ratios.test, 0.0, 1.0);
    if (std::abs(cfg.ratios.train + cfg.ratios.valid + cfg.ratios.test - 1.0) > 1e-9) {
      s.fail("train", "train + valid + test must equal 1");
    }
    if (cfg.ratios.train <= 0 || cfg.ratios.valid <= 0 || cfg.ratios.test <= 0) {
      s.fail("train", "every split ratio must be positive");
    }
    s.number("cv_k", cfg.cv_k, 2, 100);
    s.list("families", cfg.families, family_list);
    s.list("methods", cfg.methods, [](const std::string& m) { return parse_method(m); });
    s.number("search_draws", cfg.search_draws, 0, 100000);
    s.number("wilcoxon_subsets", cfg.wilcoxon_subsets, 0, 1000);
    s.check_unused();
  }
  {
    auto s = section("inputs");
    s.path("dem", cfg.dem);
    s.path("fault_mask", cfg.fault_mask);
    s.path("road_mask", cfg.road_mask);
    s.path("stream_mask", cfg.stream_mask);
    s.path("inventory", cfg.inventory);
    s.path("factor_dir", cfg.factor_dir);
    s.path("samples", cfg.samples);
    s.check_unused();
  }
  {
    auto s = section("factors");
    s.list("names", cfg.factors, [](const std::string& n) { return n; });
    s.list("categorical", cfg.categorical, [](const std::string& n) { return n; });
    if (auto v = s.raw("twi_variant")) {
      if (*v == "degrees") cfg.twi_variant = terrain::TwiVariant::kSlopeDegrees;
      else if (*v == "tan") cfg.twi_variant = terrain::TwiVariant::kTanSlope;
      else s.fail("twi_variant", fmt::format("'{}' is not one of degrees, tan", *v));
    }
    std::set<std::string> seen;
    for (const auto& n : cfg.factors) {
      if (!seen.insert(n).second) s.fail("names", fmt::format("duplicate factor '{}'", n));
    }
    for (const auto& n : cfg.categorical) {
      if (!cfg.factors.empty() && !seen.count(n)) {
        s.fail("categorical", fmt::format("'{}' is not a listed factor", n));
      }
    }
    s.check_unused();
  }
  {
    auto s = section("sampling");
    s.number("oversample_ratio", cfg.sampling.oversample_ratio, 3.0, 4.0);
    s.number("min_dist_to_slide", cfg.sampling.min_dist_to_slide, 0.0, kBig);
    s.number("knn_k", cfg.sampling.knn_k, 1, 1000);
    s.number("knn_total_max", cfg.sampling.knn_total_max, 0.0, kBig);
    s.check_unused();
  }
  {
    auto s = section("igr");
    s.number("top_k", cfg.igr_top_k, 1, 100000);
    s.number("bins", cfg.igr_bins, 2, 100000);
    s.check_unused();
  }
  {
    auto s = section("rfe");
    s.number("cv_k", cfg.rfe_cv_k, 2, 100);
    s.check_unused();
  }
  {
    auto s = section("pso");
    s.number("swarm_size", cfg.pso.swarm_size, 1, 100000);
    s.number("iters", cfg.pso.iters, 1, 1e7);
    s.number("w", cfg.pso.w, -kBig, kBig);
    s.number("c1", cfg.pso.c1, 0.0, kBig);
    s.number("c2", cfg.pso.c2, 0.0, kBig);
    s.number("v_max", cfg.pso.v_max, 0.0, kBig);
    s.number("stagnation", cfg.pso.stagnation, 0, 1e7);
    s.check_unused();
  }
  {
    auto s = section("hho");
    s.number("hawks", cfg.hho.hawks, 3, 100000);
    s.number("iters", cfg.hho.iters, 1, 1e7);
    s.number("w", cfg.hho.w, -kBig, kBig);
    s.number("c1", cfg.hho.c1, 0.0, kBig);
    s.number("c2", cfg.hho.c2, 0.0, kBig);
    s.number("alpha", cfg.hho.alpha, 0.0, kBig);
    s.number("beta", cfg.hho.beta, 0.0, kBig);
    s.number("v_max", cfg.hho.v_max, 0.0, kBig);
    s.number("target", cfg.hho.target, 0.0, 1.0);
    s.number("stagnation", cfg.hho.stagnation, 0, 1e7);
    s.check_unused();
  }
  {
    auto s = section("lasso");
    s.number("lambda", cfg.lasso.lambda, 0.0, kBig);
    s.boolean("cv_lambda", cfg.lasso.cv_lambda);
    s.number("cv_k", cfg.lasso.cv_k, 2, 100);
    s.number("grid_points", cfg.lasso.grid_points, 2, 100000);
    s.list("families", cfg.lasso_families, family_list);
    s.check_unused();
  }
  {
    auto s = section("mapping");
    s.boolean("enabled", cfg.mapping.enabled);
    s.number("classes", cfg.mapping.classes, 1, 100);
    s.number("jenks_sample", cfg.mapping.jenks_sample, 10, 1e8);
    s.number("block_rows", cfg.mapping.block_rows, 1, 1e6);
    s.check_unused();
  }
  {
    auto s = section("exhaustive");
    s.list("families", cfg.exhaustive.families, family_list);
    s.number("min_factors", cfg.exhaustive.min_factors, 1, 20);
    s.check_unused();
  }

  static const std::set<std::string> known{"experiment", "inputs", "factors", "sampling", "igr",       "rfe",
                                           "pso",        "hho",    "lasso",   "mapping",  "exhaustive"};
  for (const auto& [name, tree] : sections) {
    if (known.count(name)) continue;
    const auto dot = name.find('.');
    const std::string prefix = name.substr(0, dot);
    if (dot == std::string::npos || (prefix != "search" && prefix != "model")) {
      throw UsageError(fmt::format("config: unknown section [{}]", name));
    }
    ModelFamily f;
    try {
      f = parse_family(name.substr(dot + 1));
    } catch (const UsageError&) {
      throw UsageError(fmt::format("config: [{}]: unknown model family", name));
    }
    if (prefix == "search") parse_family_grid(cfg, f, *tree, name);
    else parse_family_spec(cfg, f, *tree, name);
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open config file '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

}  // namespace lsm
