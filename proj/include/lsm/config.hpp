#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lsm/dataset.hpp"
#include "lsm/models.hpp"
#include "lsm/selection.hpp"
#include "lsm/terrain.hpp"

namespace lsm {

enum class SelectionMethod { kAll, kIgr, kRfe, kPso, kHho, kLasso };

std::string_view method_name(SelectionMethod m);
/// ALL, IGR, RFE, PSO, HHO, LASSO (case-insensitive).
SelectionMethod parse_method(std::string_view name);

/// Names of the layers written by `derive`, in their default order.
const std::vector<std::string>& derived_factor_names();

struct MappingOptions {
  std::size_t classes = 5;
  std::size_t jenks_sample = 100000;
  std::size_t block_rows = 64;
  bool enabled = true;
};

struct ExhaustiveOptions {
  std::vector<ModelFamily> families{ModelFamily::kLR};
  std::size_t min_factors = 3;
};

/// Everything an experiment needs. Relative paths are resolved against the
/// directory of the configuration file.
struct ExperimentConfig {
  std::filesystem::path base_dir = ".";
  std::uint64_t seed = 0;
  std::filesystem::path output = "out";

  // [inputs]
  std::optional<std::filesystem::path> dem, fault_mask, road_mask, stream_mask;
  std::optional<std::filesystem::path> inventory;
  std::optional<std::filesystem::path> factor_dir;  ///< defaults to "factors"
  std::optional<std::filesystem::path> samples;     ///< ready-made sample CSV

  // [factors]
  /// Empty means the derived layers (rasters) or every column (sample CSV).
  std::vector<std::string> factors;
  std::vector<std::string> categorical;
  terrain::TwiVariant twi_variant = terrain::TwiVariant::kSlopeDegrees;

  // [experiment]
  SplitRatios ratios;
  std::size_t cv_k = 5;
  std::vector<ModelFamily> families{ModelFamily::kLR, ModelFamily::kSVM, ModelFamily::kRF, ModelFamily::kGBT};
  std::vector<SelectionMethod> methods{SelectionMethod::kIgr, SelectionMethod::kRfe, SelectionMethod::kPso,
                                       SelectionMethod::kHho, SelectionMethod::kLasso};
  std::size_t search_draws = 20;
  std::size_t wilcoxon_subsets = 6;

  NegativeSampling sampling;
  std::size_t igr_top_k = 8;
  std::size_t igr_bins = 10;
  std::size_t rfe_cv_k = 5;
  PsoParams pso;
  HhoParams hho;
  LassoParams lasso;
  std::vector<ModelFamily> lasso_families{ModelFamily::kLR, ModelFamily::kSVM};

  /// Search grid per family (restriction of the published ranges).
  std::map<ModelFamily, HyperGrid> grids;
  /// Fixed configuration per family, used when search_draws is 0.
  std::map<ModelFamily, ModelSpec> specs;

  MappingOptions mapping;
  ExhaustiveOptions exhaustive;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  std::filesystem::path factor_directory() const;
  const HyperGrid& grid(ModelFamily f) const;
  const ModelSpec& spec(ModelFamily f) const;
};

/// Parses INI text: `[section]` headers, `key = value` lines, full-line
/// comments starting with '#' or ';'. Unknown sections or keys and values
/// outside their allowed range raise UsageError naming `section.key`.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace lsm
