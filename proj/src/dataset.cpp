#include "lsm/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "lsm/error.hpp"
#include "lsm/rng.hpp"

namespace lsm {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double to_double(std::string_view s, std::size_t line) {
  std::string tmp(trim(s));
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tmp, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != tmp.size()) throw DataError(fmt::format("inventory line {}: bad number '{}'", line, tmp));
  return v;
}

}  // namespace

Inventory parse_inventory_csv(std::string_view text) {
  Inventory inv;
  std::size_t line_no = 0;
  bool header = true;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    if (header) {
      header = false;
      std::string h(line);
      h.erase(std::remove_if(h.begin(), h.end(), ::isspace), h.end());
      std::transform(h.begin(), h.end(), h.begin(), ::tolower);
      if (h != "x,y") throw DataError("inventory: expected header 'x,y'");
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) throw DataError(fmt::format("inventory line {}: expected x,y", line_no));
    inv.points.push_back({to_double(line.substr(0, comma), line_no), to_double(line.substr(comma + 1), line_no)});
  }
  return inv;
}

Inventory read_inventory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open inventory: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_inventory_csv(ss.str());
}

std::vector<CellIndex> inventory_cells(const Inventory& inventory, const Grid& reference) {
  std::vector<CellIndex> cells;
  std::unordered_set<std::size_t> seen;
  const double cs = reference.cellsize();
  for (const auto& p : inventory.points) {
    const double fc = std::floor((p.x - reference.xllcorner()) / cs);
    const double fr = std::floor((p.y - reference.yllcorner()) / cs);
    if (fc < 0 || fr < 0 || fc >= static_cast<double>(reference.ncols()) ||
        fr >= static_cast<double>(reference.nrows())) {
      throw DataError(fmt::format("landslide point ({}, {}) lies outside the grid extent", p.x, p.y));
    }
    const auto col = static_cast<std::size_t>(fc);
    const auto row = reference.nrows() - 1 - static_cast<std::size_t>(fr);
    if (seen.insert(row * reference.ncols() + col).second) cells.push_back({row, col});
  }
  return cells;
}

SampleTable select_rows(const SampleTable& table, std::span<const std::size_t> rows) {
  SampleTable out;
  out.features = table.features.select_rows(rows);
  out.factor_names = table.factor_names;
  out.categorical = table.categorical;
  out.normalization = table.normalization;
  out.labels.reserve(rows.size());
  for (auto r : rows) {
    out.labels.push_back(table.labels[r]);
    if (!table.coords.empty()) out.coords.push_back(table.coords[r]);
  }
  return out;
}

std::string write_sample_csv(const SampleTable& table) {
  fmt::memory_buffer out;
  fmt::format_to(std::back_inserter(out), "label,x_cell,y_cell");
  for (const auto& n : table.factor_names) fmt::format_to(std::back_inserter(out), ",{}", n);
  out.push_back('\n');
  for (std::size_t i = 0; i < table.rows(); ++i) {
    const CellIndex c = table.coords.empty() ? CellIndex{} : table.coords[i];
    fmt::format_to(std::back_inserter(out), "{},{},{}", table.labels[i], c.col, c.row);
    for (double v : table.features.row(i)) fmt::format_to(std::back_inserter(out), ",{}", v);
    out.push_back('\n');
  }
  return fmt::to_string(out);
}

SampleTable parse_sample_csv(std::string_view text) {
  auto fields = [](std::string_view line) {
    std::vector<std::string_view> out;
    while (true) {
      const auto comma = line.find(',');
      out.push_back(trim(line.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      line.remove_prefix(comma + 1);
    }
    return out;
  };
  auto number = [](std::string_view s, std::size_t line) {
    std::string tmp(s);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tmp, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != tmp.size()) throw DataError(fmt::format("samples line {}: bad number '{}'", line, tmp));
    return v;
  };

  SampleTable t;
  std::vector<double> values;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    auto f = fields(line);
    if (t.factor_names.empty()) {
      if (f.size() < 4 || f[0] != "label" || f[1] != "x_cell" || f[2] != "y_cell") {
        throw DataError("samples: expected header 'label,x_cell,y_cell,<factors...>'");
      }
      for (std::size_t j = 3; j < f.size(); ++j) t.factor_names.emplace_back(f[j]);
      continue;
    }
    if (f.size() != t.factor_names.size() + 3) {
      throw DataError(fmt::format("samples line {}: expected {} fields, found {}", line_no,
                                  t.factor_names.size() + 3, f.size()));
    }
    const double label = number(f[0], line_no);
    if (label != 0.0 && label != 1.0) throw DataError(fmt::format("samples line {}: label must be 0 or 1", line_no));
    const double col = number(f[1], line_no), row = number(f[2], line_no);
    if (col < 0 || row < 0) throw DataError(fmt::format("samples line {}: negative cell index", line_no));
    t.labels.push_back(static_cast<int>(label));
    t.coords.push_back({static_cast<std::size_t>(row), static_cast<std::size_t>(col)});
    for (std::size_t j = 3; j < f.size(); ++j) values.push_back(number(f[j], line_no));
  }
  if (t.labels.empty()) throw DataError("samples: no rows");
  t.features = Matrix(t.labels.size(), t.factor_names.size(), std::move(values));
  return t;
}

SampleTable read_sample_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open samples: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_sample_csv(ss.str());
}

namespace {

// Sum of distances from each point to its k nearest other points.
std::vector<double> knn_total_distance(const std::vector<CellIndex>& pts, std::size_t k, double cellsize) {
  std::vector<double> totals(pts.size(), 0.0);
  std::vector<double> d;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    d.clear();
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j == i) continue;
      const double dr = static_cast<double>(pts[i].row) - static_cast<double>(pts[j].row);
      const double dc = static_cast<double>(pts[i].col) - static_cast<double>(pts[j].col);
      d.push_back(std::sqrt(dr * dr + dc * dc) * cellsize);
    }
    const std::size_t kk = std::min(k, d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
    totals[i] = std::accumulate(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), 0.0);
  }
  return totals;
}

}  // namespace

std::vector<CellIndex> sample_non_landslides(const std::vector<CellIndex>& slides, const FactorStack& stack,
                                             std::uint64_t seed, const NegativeSampling& opts) {
  if (slides.empty()) throw DataError("no landslide points");
  const Grid& ref = stack.reference();
  const std::size_t nc = ref.ncols();

  Grid slide_mask = Grid::like(ref, 0.0);
  for (const auto& s : slides) slide_mask.at(s.row, s.col) = 1.0;
  // The mask uses the reference sentinel; make sure no data value collides.
  if (slide_mask.nodata() == 0.0 || slide_mask.nodata() == 1.0) {
    slide_mask = Grid(ref.ncols(), ref.nrows(), ref.xllcorner(), ref.yllcorner(), ref.cellsize(), -1.0,
                      std::vector<double>(slide_mask.values().begin(), slide_mask.values().end()));
  }
  const Grid dist = distance_transform(slide_mask);

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (slide_mask[i] != 1.0 && !stack.any_nodata(i)) eligible.push_back(i);
  }
  const auto wanted = static_cast<std::size_t>(std::llround(opts.oversample_ratio * static_cast<double>(slides.size())));
  const std::size_t draws = std::min(wanted, eligible.size());
  Rng rng(seed);
  for (std::size_t i = 0; i < draws; ++i) {
    std::swap(eligible[i], eligible[i + rng.below(eligible.size() - i)]);
  }

  std::vector<CellIndex> candidates;
  for (std::size_t i = 0; i < draws; ++i) {
    if (dist[eligible[i]] >= opts.min_dist_to_slide) candidates.push_back({eligible[i] / nc, eligible[i] % nc});
  }
  const auto totals = knn_total_distance(candidates, opts.knn_k, ref.cellsize());

  double limit = opts.knn_total_max;
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::vector<CellIndex> kept;
    for (std::size_t i = 0; i < candidates.size() && kept.size() < slides.size(); ++i) {
      if (totals[i] <= limit) kept.push_back(candidates[i]);
    }
    if (kept.size() == slides.size()) return kept;
    if (attempt == 0) {
      spdlog::warn("negative sampling: only {} of {} candidates pass the isolation filter; relaxing limit to {} m",
                   kept.size(), slides.size(), 2.0 * limit);
    } else {
      throw DataError(fmt::format("insufficient non-landslide candidates: achieved {} of {}", kept.size(),
                                  slides.size()));
    }
    limit *= 2.0;
  }
  return {};
}

ExtractResult extract_samples(const std::vector<CellIndex>& slides, const std::vector<CellIndex>& negatives,
                              const FactorStack& stack) {
  const std::size_t p = stack.size();
  const std::size_t nc = stack.reference().ncols();
  std::vector<double> values;
  ExtractResult res;
  auto& t = res.table;
  t.factor_names = stack.names();
  auto add = [&](const CellIndex& cell, int label) {
    const std::size_t idx = cell.row * nc + cell.col;
    if (stack.any_nodata(idx)) {
      ++res.dropped;
      return;
    }
    for (std::size_t j = 0; j < p; ++j) values.push_back(stack.layer(j)[idx]);
    t.labels.push_back(label);
    t.coords.push_back(cell);
  };
  for (const auto& c : slides) add(c, 1);
  for (const auto& c : negatives) add(c, 0);
  if (t.labels.empty()) throw DataError("sample extraction produced no rows");
  if (res.dropped > 0) spdlog::warn("dropped {} sample rows touching nodata", res.dropped);
  t.features = Matrix(t.labels.size(), p, std::move(values));
  return res;
}

namespace {

// Per-class quotas summing to `total`, proportional to class sizes (largest
// remainder; ties go to the lower class label).
std::array<std::size_t, 2> quotas(std::size_t total, std::array<std::size_t, 2> sizes, std::size_t n,
                                  std::array<std::size_t, 2> cap) {
  std::array<std::size_t, 2> q{};
  std::array<double, 2> rem{};
  std::size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    const double exact = static_cast<double>(total) * static_cast<double>(sizes[c]) / static_cast<double>(n);
    q[c] = std::min(static_cast<std::size_t>(std::floor(exact)), cap[c]);
    rem[c] = exact - std::floor(exact);
    assigned += q[c];
  }
  while (assigned < total) {
    int best = -1;
    for (int c = 0; c < 2; ++c) {
      if (q[c] >= cap[c]) continue;
      if (best < 0 || rem[c] > rem[best]) best = c;
    }
    if (best < 0) break;
    ++q[best];
    rem[best] = -1.0;
    ++assigned;
  }
  return q;
}

std::array<std::vector<std::size_t>, 2> by_class(std::span<const int> labels, Rng& rng) {
  std::array<std::vector<std::size_t>, 2> cls;
  for (std::size_t i = 0; i < labels.size(); ++i) cls[labels[i] != 0 ? 1 : 0].push_back(i);
  for (auto& v : cls) rng.shuffle(std::span<std::size_t>(v));
  return cls;
}

}  // namespace

SplitSpec split(std::span<const int> labels, std::uint64_t seed, const SplitRatios& ratios) {
  const std::size_t n = labels.size();
  if (n < 10) throw DataError(fmt::format("split needs at least 10 rows, got {}", n));
  const double sum = ratios.train + ratios.valid + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9 || ratios.train <= 0 || ratios.valid < 0 || ratios.test < 0) {
    throw UsageError("split ratios must be non-negative and sum to 1");
  }
  Rng rng(seed);
  auto cls = by_class(labels, rng);
  const std::array<std::size_t, 2> sizes{cls[0].size(), cls[1].size()};
  const auto n_train = static_cast<std::size_t>(std::llround(ratios.train * static_cast<double>(n)));
  const auto n_valid = std::min(n - n_train, static_cast<std::size_t>(std::llround(ratios.valid * static_cast<double>(n))));
  const auto qt = quotas(n_train, sizes, n, sizes);
  const auto qv = quotas(n_valid, sizes, n, {sizes[0] - qt[0], sizes[1] - qt[1]});

  SplitSpec s;
  s.seed = seed;
  for (int c = 0; c < 2; ++c) {
    const auto& v = cls[c];
    s.train_idx.insert(s.train_idx.end(), v.begin(), v.begin() + static_cast<std::ptrdiff_t>(qt[c]));
    s.valid_idx.insert(s.valid_idx.end(), v.begin() + static_cast<std::ptrdiff_t>(qt[c]),
                       v.begin() + static_cast<std::ptrdiff_t>(qt[c] + qv[c]));
    s.test_idx.insert(s.test_idx.end(), v.begin() + static_cast<std::ptrdiff_t>(qt[c] + qv[c]), v.end());
  }
  std::sort(s.train_idx.begin(), s.train_idx.end());
  std::sort(s.valid_idx.begin(), s.valid_idx.end());
  std::sort(s.test_idx.begin(), s.test_idx.end());
  return s;
}

std::vector<std::vector<std::size_t>> kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw DataError("kfold: k must be at least 2");
  if (k > labels.size()) throw DataError(fmt::format("kfold: k = {} exceeds row count {}", k, labels.size()));
  Rng rng(seed);
  auto cls = by_class(labels, rng);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t next = 0;
  for (const auto& v : cls) {
    for (auto idx : v) {
      folds[next].push_back(idx);
      next = (next + 1) % k;
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

SampleTable normalize(const SampleTable& table, std::span<const std::size_t> stats_from) {
  if (stats_from.empty()) throw DataError("normalize: empty statistics row set");
  const std::size_t p = table.factors();
  std::vector<NormStat> stats(p);
  const double m = static_cast<double>(stats_from.size());
  for (std::size_t j = 0; j < p; ++j) {
    double mean = 0.0;
    for (auto r : stats_from) mean += table.features(r, j);
    mean /= m;
    double ss = 0.0;
    for (auto r : stats_from) {
      const double d = table.features(r, j) - mean;
      ss += d * d;
    }
    double sd = std::sqrt(ss / m);
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) sd = 0.0;
    stats[j] = {mean, sd};
  }
  SampleTable out = table;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t j = 0; j < p; ++j) out.features(r, j) = apply_norm(stats[j], table.features(r, j));
  }
  out.normalization = std::move(stats);
  return out;
}

}  // namespace lsm
