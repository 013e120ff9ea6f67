#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fpca {

using Index = std::ptrdiff_t;

struct Cell {
  Index row = 0;
  Index col = 0;
  double value = 0.0;

  friend bool operator==(const Cell&, const Cell&) = default;
};

/// The observed cells S of an n x p grid.
///
/// Cells are kept in row-major order. Construction validates that every
/// index is in range, no (row, col) pair repeats and at least one cell exists.
/// Immutable afterwards.
class ObservationSet {
 public:
  ObservationSet(Index n_rows, Index n_cols, std::vector<Cell> cells);

  Index n_rows() const noexcept { return n_rows_; }
  Index n_cols() const noexcept { return n_cols_; }
  std::size_t size() const noexcept { return cells_.size(); }
  std::span<const Cell> cells() const noexcept { return cells_; }

  std::vector<Index> row_coverage() const;
  std::vector<Index> col_coverage() const;

  bool contains(Index row, Index col) const noexcept;
  std::optional<double> value_at(Index row, Index col) const noexcept;

  friend bool operator==(const ObservationSet&, const ObservationSet&) = default;

 private:
  Index n_rows_;
  Index n_cols_;
  std::vector<Cell> cells_;
};

struct SplitSet {
  ObservationSet train;
  ObservationSet test;
};

/// Half-open rectangle [r0, r1) x [c0, c1) of grid cells.
struct Rect {
  Index r0 = 0;
  Index c0 = 0;
  Index r1 = 0;
  Index c1 = 0;

  bool empty() const noexcept { return r1 <= r0 || c1 <= c0; }
  bool contains(Index r, Index c) const noexcept { return r >= r0 && r < r1 && c >= c0 && c < c1; }
  bool contains(const Rect& other) const noexcept;
};

/// Parses "r0,c0,r1,c1".
Rect parse_rect(std::string_view text);

/// Minimum number of observations each row and column must hold.
struct CoverageRequirement {
  Index min_per_row = 1;
  Index min_per_col = 1;
};

struct CoverageReport {
  std::vector<Index> deficient_rows;
  std::vector<Index> deficient_cols;
  bool ok() const noexcept { return deficient_rows.empty() && deficient_cols.empty(); }
  std::string describe() const;
};

CoverageReport check_coverage(const ObservationSet& s, const CoverageRequirement& req);
/// Throws ValidationError naming the deficient rows and columns.
void require_coverage(const ObservationSet& s, const CoverageRequirement& req);

/// Reads a `row,col,value` CSV. Grid size is 1 + max index unless `dims` is given.
ObservationSet load_coordinate_csv(const std::filesystem::path& path,
                                   std::optional<std::pair<Index, Index>> dims = std::nullopt);
ObservationSet parse_coordinate_csv(std::string_view text,
                                    std::optional<std::pair<Index, Index>> dims = std::nullopt);
void write_coordinate_csv(const std::filesystem::path& path, const ObservationSet& s);
std::string format_coordinate_csv(const ObservationSet& s);

/// Reads a rectangular numeric CSV without header; cells equal to na_token are left out of S.
ObservationSet load_dense_csv(const std::filesystem::path& path, std::string_view na_token = "NA");
ObservationSet parse_dense_csv(std::string_view text, std::string_view na_token = "NA");

/// Cells of `full` inside `outer` and outside `inner`, on the same grid.
/// An empty result is an error unless allow_empty, in which case nullopt is returned.
std::optional<ObservationSet> window_minus_window(const ObservationSet& full, const Rect& outer,
                                                  const Rect& inner, bool allow_empty = false);

/// Drops each cell independently with probability tau.
ObservationSet apply_missing_mechanism(const ObservationSet& full, double tau, std::uint64_t seed);

/// Assigns each cell to the test part with probability q. Draws are repeated
/// (up to max_draws) until the training part meets `train_req`.
SplitSet random_split(const ObservationSet& s, double q, std::uint64_t seed,
                      const CoverageRequirement& train_req = {}, int max_draws = 100);

/// Set restricted to its non-empty rows and columns. row_map[i] / col_map[j]
/// give the original index of compacted row i / column j.
struct CompactSet {
  ObservationSet set;
  std::vector<Index> row_map;
  std::vector<Index> col_map;
};

CompactSet compact(const ObservationSet& s);

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);
double parse_double(std::string_view text);

}  // namespace fpca
