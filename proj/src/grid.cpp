#include "lsm/grid.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "lsm/error.hpp"

namespace lsm {

Grid::Grid(std::size_t ncols, std::size_t nrows, double xllcorner, double yllcorner,
           double cellsize, double nodata, std::vector<double> values)
    : ncols_(ncols),
      nrows_(nrows),
      xll_(xllcorner),
      yll_(yllcorner),
      cellsize_(cellsize),
      nodata_(nodata),
      values_(std::move(values)) {
  if (ncols_ == 0 || nrows_ == 0) throw DataError("grid dimensions must be positive");
  if (!(cellsize_ > 0.0) || !std::isfinite(cellsize_)) throw DataError("cellsize must be > 0");
  if (values_.size() != ncols_ * nrows_) {
    throw DataError(fmt::format("expected {} values, found {}", ncols_ * nrows_, values_.size()));
  }
}

Grid Grid::like(const Grid& like, double fill) {
  return Grid(like.ncols_, like.nrows_, like.xll_, like.yll_, like.cellsize_, like.nodata_,
              std::vector<double>(like.size(), fill));
}

bool Grid::aligned_with(const Grid& other) const {
  return ncols_ == other.ncols_ && nrows_ == other.nrows_ && xll_ == other.xll_ &&
         yll_ == other.yll_ && cellsize_ == other.cellsize_;
}

void require_aligned(const Grid& a, const Grid& b, std::string_view what) {
  if (!a.aligned_with(b)) throw DataError(fmt::format("{}: grids are not aligned", what));
}

FactorStack::FactorStack(std::vector<std::string> names, std::vector<Grid> layers)
    : names_(std::move(names)), layers_(std::move(layers)) {
  if (names_.empty()) throw DataError("factor stack needs at least one layer");
  if (names_.size() != layers_.size()) throw DataError("factor names and layers differ in count");
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw DataError("empty factor name");
    if (!seen.insert(names_[i]).second) throw DataError("duplicate factor name: " + names_[i]);
    if (!layers_[i].aligned_with(layers_[0])) {
      throw DataError(fmt::format("factor '{}' is not aligned with '{}'", names_[i], names_[0]));
    }
  }
}

std::size_t FactorStack::index_of(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw DataError(fmt::format("unknown factor '{}'", name));
  return static_cast<std::size_t>(it - names_.begin());
}

const Grid& FactorStack::layer(std::string_view name) const { return layers_[index_of(name)]; }

bool FactorStack::any_nodata(std::size_t cell) const {
  return std::any_of(layers_.begin(), layers_.end(),
                     [cell](const Grid& g) { return g.is_nodata(cell); });
}

namespace {

struct Token {
  std::string_view text;
  std::size_t line;
  std::size_t column;
};

// Splits text into whitespace-separated tokens, remembering 1-based positions.
std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t line = 1, col = 1, i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      col = 1;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++col;
      ++i;
    } else {
      const std::size_t start = i, start_col = col;
      while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) {
        ++i;
        ++col;
      }
      out.push_back({text.substr(start, i - start), line, start_col});
    }
  }
  return out;
}

std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

[[noreturn]] void parse_error(const Token& t, std::string_view msg) {
  throw DataError(fmt::format("line {}, column {}: {}", t.line, t.column, msg));
}

}  // namespace

Grid read_ascii_grid(std::string_view text) {
  const auto tokens = tokenize(text);
  std::optional<double> ncols, nrows, x, y, cellsize, nodata;
  bool x_center = false, y_center = false;
  std::size_t pos = 0;
  while (pos < tokens.size() && std::isalpha(static_cast<unsigned char>(tokens[pos].text.front()))) {
    const Token& key = tokens[pos];
    if (pos + 1 >= tokens.size()) parse_error(key, "header key without value");
    const Token& val = tokens[pos + 1];
    if (val.line != key.line) parse_error(key, "header key without value");
    auto v = parse_number(val.text);
    if (!v) parse_error(val, fmt::format("non-numeric header value '{}'", val.text));
    const std::string k = lower(key.text);
    std::optional<double>* slot = nullptr;
    if (k == "ncols") {
      slot = &ncols;
    } else if (k == "nrows") {
      slot = &nrows;
    } else if (k == "xllcorner" || k == "xllcenter") {
      slot = &x;
      x_center = k == "xllcenter";
    } else if (k == "yllcorner" || k == "yllcenter") {
      slot = &y;
      y_center = k == "yllcenter";
    } else if (k == "cellsize") {
      slot = &cellsize;
    } else if (k == "nodata_value") {
      slot = &nodata;
    } else {
      parse_error(key, fmt::format("unknown header key '{}'", key.text));
    }
    if (slot->has_value()) parse_error(key, fmt::format("duplicate header key '{}'", key.text));
    *slot = *v;
    pos += 2;
  }
  const Token eof{"", tokens.empty() ? 1 : tokens.back().line, 1};
  const Token& where = pos < tokens.size() ? tokens[pos] : eof;
  if (!ncols || !nrows || !x || !y || !cellsize) parse_error(where, "incomplete header");
  auto as_count = [&](double v, std::string_view name) {
    if (!(v >= 1.0) || v != std::floor(v)) parse_error(where, fmt::format("{} must be a positive integer", name));
    return static_cast<std::size_t>(v);
  };
  const std::size_t nc = as_count(*ncols, "ncols");
  const std::size_t nr = as_count(*nrows, "nrows");
  if (!(*cellsize > 0.0)) parse_error(where, "cellsize must be > 0");
  const double half = *cellsize / 2.0;
  const double xll = x_center ? *x - half : *x;
  const double yll = y_center ? *y - half : *y;

  std::vector<double> values;
  values.reserve(nc * nr);
  for (; pos < tokens.size(); ++pos) {
    auto v = parse_number(tokens[pos].text);
    if (!v) parse_error(tokens[pos], fmt::format("non-numeric value '{}'", tokens[pos].text));
    values.push_back(*v);
  }
  if (values.size() != nc * nr) {
    throw DataError(fmt::format("expected {} values, found {}", nc * nr, values.size()));
  }
  return Grid(nc, nr, xll, yll, *cellsize, nodata.value_or(-9999.0), std::move(values));
}

Grid read_ascii_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open grid file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return read_ascii_grid(ss.str());
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string write_ascii_grid(const Grid& grid) {
  fmt::memory_buffer out;
  fmt::format_to(std::back_inserter(out), "ncols {}\nnrows {}\nxllcorner {}\nyllcorner {}\n",
                 grid.ncols(), grid.nrows(), grid.xllcorner(), grid.yllcorner());
  fmt::format_to(std::back_inserter(out), "cellsize {}\nNODATA_value {}\n", grid.cellsize(),
                 grid.nodata());
  for (std::size_t r = 0; r < grid.nrows(); ++r) {
    for (std::size_t c = 0; c < grid.ncols(); ++c) {
      if (c) out.push_back(' ');
      fmt::format_to(std::back_inserter(out), "{:.10g}", grid.at(r, c));
    }
    out.push_back('\n');
  }
  return fmt::to_string(out);
}

void write_ascii_grid_file(const Grid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write grid file: " + path);
  out << write_ascii_grid(grid);
}

namespace {

// One-dimensional squared distance transform (lower envelope of parabolas).
// f holds 0 at features and +inf elsewhere on the first pass.
void edt_1d(std::span<const double> f, std::span<double> d, std::vector<std::size_t>& v,
            std::vector<double>& z) {
  const std::size_t n = f.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  std::size_t k = 0;
  // Skip leading infinite samples: a parabola rooted at +inf never wins.
  std::size_t first = 0;
  while (first < n && std::isinf(f[first])) ++first;
  if (first == n) {
    std::fill(d.begin(), d.end(), inf);
    return;
  }
  v[0] = first;
  z[0] = -inf;
  z[1] = inf;
  for (std::size_t q = first + 1; q < n; ++q) {
    if (std::isinf(f[q])) continue;
    const double qd = static_cast<double>(q);
    double s;
    while (true) {
      const double vk = static_cast<double>(v[k]);
      s = ((f[q] + qd * qd) - (f[v[k]] + vk * vk)) / (2.0 * qd - 2.0 * vk);
      if (k > 0 && s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    const double qd = static_cast<double>(q);
    while (z[k + 1] < qd) ++k;
    const double diff = qd - static_cast<double>(v[k]);
    d[q] = diff * diff + f[v[k]];
  }
}

}  // namespace

Grid distance_transform(const Grid& mask) {
  const std::size_t nr = mask.nrows(), nc = mask.ncols();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> sq(mask.size(), inf);
  bool any = false;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask.is_nodata(i) && mask[i] == 1.0) {
      sq[i] = 0.0;
      any = true;
    }
  }
  if (!any) throw DataError("distance transform: no feature cells");

  std::vector<std::size_t> v;
  std::vector<double> z;
  std::vector<double> f, d;
  // Columns first, then rows. Squared distances are integers, so the result is exact.
  f.resize(nr);
  d.resize(nr);
  for (std::size_t c = 0; c < nc; ++c) {
    for (std::size_t r = 0; r < nr; ++r) f[r] = sq[r * nc + c];
    edt_1d(f, d, v, z);
    for (std::size_t r = 0; r < nr; ++r) sq[r * nc + c] = d[r];
  }
  f.resize(nc);
  d.resize(nc);
  for (std::size_t r = 0; r < nr; ++r) {
    std::copy_n(sq.begin() + static_cast<std::ptrdiff_t>(r * nc), nc, f.begin());
    edt_1d(f, d, v, z);
    std::copy(d.begin(), d.end(), sq.begin() + static_cast<std::ptrdiff_t>(r * nc));
  }

  Grid out = Grid::like(mask, 0.0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    out[i] = mask.is_nodata(i) ? mask.nodata() : std::sqrt(sq[i]) * mask.cellsize();
  }
  return out;
}

}  // namespace lsm
