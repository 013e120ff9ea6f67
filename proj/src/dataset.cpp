#include "fpca/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "fpca/error.hpp"
#include "fpca/random.hpp"

namespace fpca {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Lines with their 1-based numbers; a trailing newline does not produce an empty line.
template <class F>
void for_each_line(std::string_view text, F&& f) {
  long number = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    f(number, text.substr(start, end - start));
    start = end + 1;
  }
}

Index parse_index(std::string_view s, long line) {
  Index v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) {
    throw ParseError("expected integer index, got '" + std::string(s) + "'", line);
  }
  if (v < 0) throw ParseError("negative index " + std::string(s), line);
  return v;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << content;
}

}  // namespace

ObservationSet::ObservationSet(Index n_rows, Index n_cols, std::vector<Cell> cells)
    : n_rows_(n_rows), n_cols_(n_cols), cells_(std::move(cells)) {
  if (n_rows_ <= 0 || n_cols_ <= 0) throw ValidationError("grid dimensions must be positive");
  if (cells_.empty()) throw ValidationError("no observations");
  for (const auto& c : cells_) {
    if (c.row < 0 || c.row >= n_rows_ || c.col < 0 || c.col >= n_cols_) {
      throw ValidationError("cell (" + std::to_string(c.row) + "," + std::to_string(c.col) +
                            ") outside " + std::to_string(n_rows_) + "x" + std::to_string(n_cols_) + " grid");
    }
  }
  std::stable_sort(cells_.begin(), cells_.end(),
                   [](const Cell& a, const Cell& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  for (std::size_t t = 1; t < cells_.size(); ++t) {
    if (cells_[t].row == cells_[t - 1].row && cells_[t].col == cells_[t - 1].col) {
      throw ValidationError("duplicate cell (" + std::to_string(cells_[t].row) + "," +
                            std::to_string(cells_[t].col) + ")");
    }
  }
}

std::vector<Index> ObservationSet::row_coverage() const {
  std::vector<Index> cover(static_cast<std::size_t>(n_rows_), 0);
  for (const auto& c : cells_) ++cover[static_cast<std::size_t>(c.row)];
  return cover;
}

std::vector<Index> ObservationSet::col_coverage() const {
  std::vector<Index> cover(static_cast<std::size_t>(n_cols_), 0);
  for (const auto& c : cells_) ++cover[static_cast<std::size_t>(c.col)];
  return cover;
}

std::optional<double> ObservationSet::value_at(Index row, Index col) const noexcept {
  auto it = std::lower_bound(cells_.begin(), cells_.end(), std::pair{row, col}, [](const Cell& c, const auto& key) {
    return c.row != key.first ? c.row < key.first : c.col < key.second;
  });
  if (it != cells_.end() && it->row == row && it->col == col) return it->value;
  return std::nullopt;
}

bool ObservationSet::contains(Index row, Index col) const noexcept { return value_at(row, col).has_value(); }

bool Rect::contains(const Rect& other) const noexcept {
  if (other.empty()) return true;
  return other.r0 >= r0 && other.c0 >= c0 && other.r1 <= r1 && other.c1 <= c1;
}

Rect parse_rect(std::string_view text) {
  const auto fields = split_fields(text);
  if (fields.size() != 4) throw InvalidArgument("rectangle must be r0,c0,r1,c1: '" + std::string(text) + "'");
  Rect r{parse_index(fields[0], 0), parse_index(fields[1], 0), parse_index(fields[2], 0), parse_index(fields[3], 0)};
  if (r.r1 < r.r0 || r.c1 < r.c0) throw InvalidArgument("rectangle corners out of order: '" + std::string(text) + "'");
  return r;
}

std::string CoverageReport::describe() const {
  std::ostringstream os;
  auto list = [&os](const char* what, const std::vector<Index>& v) {
    os << what << " [";
    for (std::size_t t = 0; t < v.size(); ++t) os << (t ? "," : "") << v[t];
    os << "]";
  };
  list("rows", deficient_rows);
  os << " ";
  list("columns", deficient_cols);
  return os.str();
}

CoverageReport check_coverage(const ObservationSet& s, const CoverageRequirement& req) {
  CoverageReport report;
  const auto rows = s.row_coverage();
  const auto cols = s.col_coverage();
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i] < req.min_per_row) report.deficient_rows.push_back(static_cast<Index>(i));
  for (std::size_t j = 0; j < cols.size(); ++j)
    if (cols[j] < req.min_per_col) report.deficient_cols.push_back(static_cast<Index>(j));
  return report;
}

void require_coverage(const ObservationSet& s, const CoverageRequirement& req) {
  const auto report = check_coverage(s, req);
  if (!report.ok()) {
    throw ValidationError("insufficient coverage (need " + std::to_string(req.min_per_row) + " per row, " +
                          std::to_string(req.min_per_col) + " per column): " + report.describe());
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw InvalidArgument("cannot format value");
  return std::string(buf, ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) throw InvalidArgument("not a number: '" + std::string(s) + "'");
  return v;
}

ObservationSet parse_coordinate_csv(std::string_view text, std::optional<std::pair<Index, Index>> dims) {
  std::vector<Cell> cells;
  bool header_seen = false;
  Index max_row = -1;
  Index max_col = -1;
  for_each_line(text, [&](long number, std::string_view line) {
    if (trim(line).empty()) return;
    const auto fields = split_fields(line);
    if (!header_seen) {
      if (fields.size() != 3 || fields[0] != "row" || fields[1] != "col" || fields[2] != "value") {
        throw ParseError("expected header 'row,col,value'", number);
      }
      header_seen = true;
      return;
    }
    if (fields.size() != 3) throw ParseError("expected 3 fields, got " + std::to_string(fields.size()), number);
    Cell c;
    c.row = parse_index(fields[0], number);
    c.col = parse_index(fields[1], number);
    try {
      c.value = parse_double(fields[2]);
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), number);
    }
    max_row = std::max(max_row, c.row);
    max_col = std::max(max_col, c.col);
    cells.push_back(c);
  });
  if (!header_seen) throw ParseError("missing header 'row,col,value'", 1);
  if (cells.empty()) throw ValidationError("no observations");
  const Index n = dims ? dims->first : max_row + 1;
  const Index p = dims ? dims->second : max_col + 1;
  return ObservationSet(n, p, std::move(cells));
}

ObservationSet load_coordinate_csv(const std::filesystem::path& path, std::optional<std::pair<Index, Index>> dims) {
  return parse_coordinate_csv(read_file(path), dims);
}

std::string format_coordinate_csv(const ObservationSet& s) {
  std::string out = "row,col,value\n";
  for (const auto& c : s.cells()) {
    out += std::to_string(c.row);
    out += ',';
    out += std::to_string(c.col);
    out += ',';
    out += format_double(c.value);
    out += '\n';
  }
  return out;
}

void write_coordinate_csv(const std::filesystem::path& path, const ObservationSet& s) {
  write_file(path, format_coordinate_csv(s));
}

ObservationSet parse_dense_csv(std::string_view text, std::string_view na_token) {
  std::vector<Cell> cells;
  Index rows = 0;
  Index width = -1;
  for_each_line(text, [&](long number, std::string_view line) {
    if (trim(line).empty()) return;
    const auto fields = split_fields(line);
    const auto n_fields = static_cast<Index>(fields.size());
    if (width < 0) width = n_fields;
    if (n_fields != width) {
      throw ParseError("ragged row: expected " + std::to_string(width) + " fields, got " + std::to_string(n_fields),
                       number);
    }
    for (Index j = 0; j < n_fields; ++j) {
      const auto f = fields[static_cast<std::size_t>(j)];
      if (f == na_token) continue;
      try {
        cells.push_back({rows, j, parse_double(f)});
      } catch (const InvalidArgument& e) {
        throw ParseError(e.what(), number);
      }
    }
    ++rows;
  });
  if (rows == 0 || cells.empty()) throw ValidationError("no observations");
  return ObservationSet(rows, width, std::move(cells));
}

ObservationSet load_dense_csv(const std::filesystem::path& path, std::string_view na_token) {
  return parse_dense_csv(read_file(path), na_token);
}

std::optional<ObservationSet> window_minus_window(const ObservationSet& full, const Rect& outer, const Rect& inner,
                                                  bool allow_empty) {
  const Rect grid{0, 0, full.n_rows(), full.n_cols()};
  if (outer.empty()) throw InvalidArgument("outer window is empty");
  if (!grid.contains(outer)) throw InvalidArgument("outer window exceeds the grid");
  if (!outer.contains(inner)) throw InvalidArgument("inner window is not contained in the outer window");
  std::vector<Cell> kept;
  for (const auto& c : full.cells()) {
    if (outer.contains(c.row, c.col) && !inner.contains(c.row, c.col)) kept.push_back(c);
  }
  if (kept.empty()) {
    if (allow_empty) return std::nullopt;
    throw ValidationError("window selection contains no observations");
  }
  return ObservationSet(full.n_rows(), full.n_cols(), std::move(kept));
}

ObservationSet apply_missing_mechanism(const ObservationSet& full, double tau, std::uint64_t seed) {
  if (!(tau >= 0.0 && tau < 1.0)) throw InvalidArgument("missing probability must lie in [0, 1)");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Cell> kept;
  kept.reserve(full.size());
  for (const auto& c : full.cells()) {
    if (!(unif(rng) < tau)) kept.push_back(c);
  }
  if (kept.empty()) throw ValidationError("no observations");
  return ObservationSet(full.n_rows(), full.n_cols(), std::move(kept));
}

SplitSet random_split(const ObservationSet& s, double q, std::uint64_t seed, const CoverageRequirement& train_req,
                      int max_draws) {
  if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("test probability q must lie in (0, 1)");
  if (max_draws < 1) throw InvalidArgument("max_draws must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  CoverageReport last;
  for (int draw = 0; draw < max_draws; ++draw) {
    std::vector<Cell> train;
    std::vector<Cell> test;
    for (const auto& c : s.cells()) (unif(rng) < q ? test : train).push_back(c);
    if (train.empty() || test.empty()) continue;
    ObservationSet train_set(s.n_rows(), s.n_cols(), std::move(train));
    last = check_coverage(train_set, train_req);
    if (!last.ok()) continue;
    return {std::move(train_set), ObservationSet(s.n_rows(), s.n_cols(), std::move(test))};
  }
  throw ValidationError("no split with sufficient training coverage after " + std::to_string(max_draws) +
                        " draws; deficient " + last.describe());
}

CompactSet compact(const ObservationSet& s) {
  const auto rows = s.row_coverage();
  const auto cols = s.col_coverage();
  std::vector<Index> row_new(rows.size(), -1);
  std::vector<Index> col_new(cols.size(), -1);
  CompactSet out{s, {}, {}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] > 0) {
      row_new[i] = static_cast<Index>(out.row_map.size());
      out.row_map.push_back(static_cast<Index>(i));
    }
  }
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] > 0) {
      col_new[j] = static_cast<Index>(out.col_map.size());
      out.col_map.push_back(static_cast<Index>(j));
    }
  }
  std::vector<Cell> cells;
  cells.reserve(s.size());
  for (const auto& c : s.cells()) {
    cells.push_back({row_new[static_cast<std::size_t>(c.row)], col_new[static_cast<std::size_t>(c.col)], c.value});
  }
  out.set = ObservationSet(static_cast<Index>(out.row_map.size()), static_cast<Index>(out.col_map.size()),
                           std::move(cells));
  return out;
}

}  // namespace fpca
