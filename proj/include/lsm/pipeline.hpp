#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lsm/config.hpp"
#include "lsm/dataset.hpp"
#include "lsm/grid.hpp"
#include "lsm/mapping.hpp"
#include "lsm/metrics.hpp"
#include "lsm/models.hpp"
#include "lsm/selection.hpp"

namespace lsm {

/// The sample table of an experiment plus its split and normalized copy.
struct PreparedData {
  SampleTable table;
  SplitSpec split;
  SampleTable normalized;
  std::optional<FactorStack> stack;  ///< absent when samples come from a CSV
  std::vector<CellIndex> slides;
  std::size_t dropped = 0;
};

/// Factor names an experiment uses: the configured list, else the sample CSV
/// header, else the derived layers.
std::vector<std::string> experiment_factor_names(const ExperimentConfig& cfg);

/// Loads the factor grids named by the config from its factor directory.
FactorStack load_factor_stack(const ExperimentConfig& cfg, const std::vector<std::string>& names);

/// Sample table (from the sample CSV, or inventory + negative sampling over
/// the factor stack), stratified split and training-row normalization.
PreparedData prepare_data(const ExperimentConfig& cfg);

struct MapProducts {
  Grid probability;
  Grid classes;
  BreaksResult breaks;
  ClassStatistics statistics;
};

/// Scores the stack, cuts the probabilities with Jenks breaks and tallies the
/// landslide cells per class.
MapProducts make_maps(const FittedModel& model, const FactorStack& stack, const FactorMask& mask,
                      std::span<const CellIndex> slides, const MappingOptions& opts, std::uint64_t seed);

struct MethodOutcome {
  ModelFamily family = ModelFamily::kLR;
  std::string method;
  FactorMask mask;
  double validation_score = 0.0;
  double elapsed_seconds = 0.0;
  EvalReport cv_mean;
  EvalReport test;
  std::vector<double> subset_accuracy;  ///< one per Wilcoxon subset of the test rows
};

struct RunSummary {
  std::vector<std::string> factor_names;
  std::vector<ModelSpec> tuned;  ///< one per configured family
  std::vector<MethodOutcome> outcomes;
  std::vector<std::filesystem::path> files;  ///< every file written, in order
};

/// Writes slope, aspect, curvatures, SPI, STI, TWI and the distance layers
/// into the factor directory, and factor_summary.csv into the output.
std::vector<std::filesystem::path> cmd_derive(const ExperimentConfig& cfg);

/// Writes samples.csv and split.csv.
std::vector<std::filesystem::path> cmd_sample(const ExperimentConfig& cfg);

/// Full experiment: sampling, tuning, every selection method per family,
/// metrics, Wilcoxon tests, model artifacts and maps.
RunSummary cmd_run(const ExperimentConfig& cfg);

struct ExhaustiveSummary {
  std::vector<std::string> factor_names;
  std::vector<ModelFamily> families;
  std::vector<ExhaustiveRecord> records;
  std::vector<std::filesystem::path> files;
};

/// Enumerates every admissible mask for the configured families.
ExhaustiveSummary cmd_exhaustive(const ExperimentConfig& cfg);

/// Probability grid, class grid and class statistics for a saved model.
std::vector<std::filesystem::path> cmd_map(const ExperimentConfig& cfg, const std::filesystem::path& model_path);

/// Recomputes the exhaustive summaries from a records CSV into out_dir.
/// Factor names default to "factor<j>" when `names` is empty.
std::vector<std::filesystem::path> cmd_stats(const std::filesystem::path& records_csv,
                                             const std::filesystem::path& out_dir,
                                             const std::vector<std::string>& names = {});

struct ExhaustiveTable {
  std::vector<std::string> families;
  std::vector<ExhaustiveRecord> records;
  std::uint64_t seed = 0;
};

ExhaustiveTable read_exhaustive_records(const std::filesystem::path& path);

/// Writes a synthetic scene (DEM, feature masks, inventory) and a config
/// that runs on it.
std::vector<std::filesystem::path> cmd_synth(const std::filesystem::path& dir, std::size_t nrows, std::size_t ncols,
                                             double cellsize, std::size_t n_slides, std::uint64_t seed);

}  // namespace lsm
