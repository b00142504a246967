#include "lsm/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "lsm/error.hpp"
#include "lsm/parallel.hpp"
#include "lsm/rng.hpp"

namespace lsm {

Grid score_raster(const FittedModel& model, const FactorStack& stack, const FactorMask& mask,
                  std::span<const NormStat> norm, std::size_t block_rows) {
  if (mask.size() != stack.size()) {
    throw DataError(fmt::format("factor mask has {} entries for {} factors", mask.size(), stack.size()));
  }
  const auto cols = mask_indices(mask);
  if (cols.empty()) throw DataError("empty factor mask");
  if (model.factor_count() != 0 && model.factor_count() != cols.size()) {
    throw DataError(fmt::format("model expects {} factors, mask selects {}", model.factor_count(), cols.size()));
  }
  for (std::size_t c = 0; c < cols.size() && model.factor_count() != 0; ++c) {
    if (model.factor_names()[c] != stack.names()[cols[c]]) {
      throw DataError(fmt::format("model factor '{}' does not match stack factor '{}'", model.factor_names()[c],
                                  stack.names()[cols[c]]));
    }
  }
  if (norm.size() != cols.size()) throw DataError("normalization statistics do not match the selected factors");
  if (block_rows == 0) block_rows = 1;

  const Grid& ref = stack.reference();
  Grid out = Grid::like(ref, ref.nodata());
  const std::size_t nrows = ref.nrows(), ncols = ref.ncols();
  const std::size_t blocks = (nrows + block_rows - 1) / block_rows;
  parallel_for(blocks, [&](std::size_t b) {
    std::vector<double> x(cols.size());
    const std::size_t r1 = std::min(nrows, (b + 1) * block_rows);
    for (std::size_t r = b * block_rows; r < r1; ++r) {
      for (std::size_t c = 0; c < ncols; ++c) {
        bool valid = true;
        for (std::size_t k = 0; k < cols.size() && valid; ++k) {
          const Grid& g = stack.layer(cols[k]);
          if (g.is_nodata(r, c)) valid = false;
          else x[k] = apply_norm(norm[k], g.at(r, c));
        }
        if (valid) out.at(r, c) = model.predict_proba(x);
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Weighted within-class SSE for distinct values v[i..j] via prefix sums.
struct SegmentCost {
  std::vector<double> w, s1, s2;

  SegmentCost(std::span<const double> v, std::span<const double> weight) : w(v.size() + 1), s1(v.size() + 1), s2(v.size() + 1) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      w[i + 1] = w[i] + weight[i];
      s1[i + 1] = s1[i] + weight[i] * v[i];
      s2[i + 1] = s2[i] + weight[i] * v[i] * v[i];
    }
  }
  double operator()(std::size_t i, std::size_t j) const {
    const double n = w[j + 1] - w[i], s = s1[j + 1] - s1[i];
    return std::max(0.0, (s2[j + 1] - s2[i]) - s * s / n);
  }
};

}  // namespace

double jenks_objective(std::span<const double> sorted, std::span<const double> breaks) {
  double total = 0.0;
  std::size_t i = 0;
  for (std::size_t c = 0; c <= breaks.size(); ++c) {
    std::size_t j = i;
    while (j < sorted.size() && (c == breaks.size() || sorted[j] <= breaks[c])) ++j;
    if (j > i) {
      double mean = 0.0;
      for (std::size_t t = i; t < j; ++t) mean += sorted[t];
      mean /= static_cast<double>(j - i);
      double part = 0.0;
      for (std::size_t t = i; t < j; ++t) part += (sorted[t] - mean) * (sorted[t] - mean);
      total += part;
    }
    i = j;
  }
  return total;
}

BreaksResult jenks_breaks(std::span<const double> values, std::size_t k, std::size_t max_sample, std::uint64_t seed) {
  if (k < 1) throw UsageError("jenks: k must be >= 1");
  std::vector<double> v(values.begin(), values.end());
  if (max_sample > 0 && v.size() > max_sample) {
    Rng rng(derive_seed(seed, "jenks"));
    for (std::size_t i = 0; i < max_sample; ++i) std::swap(v[i], v[i + rng.below(v.size() - i)]);
    v.resize(max_sample);
  }
  std::sort(v.begin(), v.end());

  std::vector<double> uniq, weight;
  for (double x : v) {
    if (!std::isfinite(x)) throw DataError("jenks: non-finite value");
    if (uniq.empty() || uniq.back() != x) {
      uniq.push_back(x);
      weight.push_back(1.0);
    } else {
      weight.back() += 1.0;
    }
  }
  const std::size_t m = uniq.size();
  if (m < k) throw DataError(fmt::format("jenks: {} distinct values, {} classes requested", m, k));

  // Centre the values so the prefix-sum cost keeps its precision.
  const double centre = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  std::vector<double> shifted(m);
  for (std::size_t i = 0; i < m; ++i) shifted[i] = uniq[i] - centre;
  const SegmentCost cost(shifted, weight);

  // D[c][j]: best cost of splitting uniq[0..j] into c+1 classes; the optimal
  // start of the last class is monotone in j, so each layer is filled by
  // divide and conquer.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> D(k, std::vector<double>(m, inf));
  std::vector<std::vector<std::size_t>> start(k, std::vector<std::size_t>(m, 0));
  for (std::size_t j = 0; j < m; ++j) D[0][j] = cost(0, j);

  for (std::size_t c = 1; c < k; ++c) {
    auto solve = [&](auto&& self, std::size_t jlo, std::size_t jhi, std::size_t ilo, std::size_t ihi) -> void {
      if (jlo > jhi) return;
      const std::size_t j = jlo + (jhi - jlo) / 2;
      std::size_t best_i = ilo;
      double best = inf;
      for (std::size_t i = std::max(ilo, c); i <= std::min(ihi, j); ++i) {
        const double val = D[c - 1][i - 1] + cost(i, j);
        if (val < best) {
          best = val;
          best_i = i;
        }
      }
      D[c][j] = best;
      start[c][j] = best_i;
      if (j > jlo) self(self, jlo, j - 1, ilo, best_i);
      self(self, j + 1, jhi, best_i, ihi);
    };
    solve(solve, c, m - 1, c, m - 1);
  }

  BreaksResult res;
  res.sample_size = v.size();
  res.breaks.resize(k - 1);
  std::size_t j = m - 1;
  for (std::size_t c = k - 1; c >= 1; --c) {
    const std::size_t i = start[c][j];
    res.breaks[c - 1] = uniq[i - 1];
    j = i - 1;
  }
  res.objective = jenks_objective(v, res.breaks);
  return res;
}

int classify_value(double v, std::span<const double> breaks) {
  return 1 + static_cast<int>(std::lower_bound(breaks.begin(), breaks.end(), v) - breaks.begin());
}

Grid classify_raster(const Grid& prob, const BreaksResult& breaks) {
  Grid out = Grid::like(prob, prob.nodata());
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (!prob.is_nodata(i)) out[i] = classify_value(prob[i], breaks.breaks);
  }
  return out;
}

ClassStatistics class_statistics(const Grid& classes, std::span<const CellIndex> slides, std::size_t k) {
  if (slides.empty()) throw DataError("class statistics: empty landslide inventory");
  ClassStatistics st;
  st.non_slide_cells.assign(k, 0);
  st.slide_cells.assign(k, 0);
  std::vector<bool> is_slide(classes.size());
  for (const auto& c : slides) {
    if (c.row >= classes.nrows() || c.col >= classes.ncols()) throw DataError("class statistics: cell outside grid");
    is_slide[c.row * classes.ncols() + c.col] = true;
  }
  auto class_of = [&](std::size_t i) {
    const double v = classes[i];
    if (v < 1 || v > static_cast<double>(k) || v != std::floor(v)) {
      throw DataError(fmt::format("class statistics: invalid class value {}", v));
    }
    return static_cast<std::size_t>(v) - 1;
  };
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes.is_nodata(i)) continue;
    (is_slide[i] ? st.slide_cells : st.non_slide_cells)[class_of(i)]++;
  }
  auto pct = [](const std::vector<std::size_t>& counts) {
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
    std::vector<double> out(counts.size(), 0.0);
    if (total > 0) {
      for (std::size_t c = 0; c < counts.size(); ++c) out[c] = 100.0 * static_cast<double>(counts[c]) / total;
    }
    return out;
  };
  if (std::accumulate(st.slide_cells.begin(), st.slide_cells.end(), std::size_t{0}) == 0) {
    throw DataError("class statistics: no landslide cell has a class");
  }
  st.non_slide_pct = pct(st.non_slide_cells);
  st.slide_pct = pct(st.slide_cells);
  return st;
}

}  // namespace lsm
