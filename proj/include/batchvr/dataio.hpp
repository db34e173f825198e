#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace batchvr {

using Index = std::uint32_t;

/// One CSR row: parallel views of column indices and values.
struct RowView {
  std::span<const Index> indices;
  std::span<const double> values;

  std::size_t nnz() const { return indices.size(); }
};

/// Immutable compressed sparse-row feature matrix with one label per row.
///
/// Construction validates the CSR invariants: offsets start at zero, never
/// decrease and end at nnz; column indices are strictly increasing within a
/// row and below n_features.
class SparseDataset {
 public:
  SparseDataset(std::size_t n_features, std::vector<std::size_t> row_offsets,
                std::vector<Index> col_indices, std::vector<double> values,
                std::vector<double> labels);

  std::size_t n_samples() const { return labels_.size(); }
  std::size_t n_features() const { return n_features_; }
  std::size_t nnz() const { return values_.size(); }

  RowView row(std::size_t i) const {
    const std::size_t begin = row_offsets_[i];
    const std::size_t len = row_offsets_[i + 1] - begin;
    return {std::span<const Index>(col_indices_).subspan(begin, len),
            std::span<const double>(values_).subspan(begin, len)};
  }

  double label(std::size_t i) const { return labels_[i]; }

  std::span<const std::size_t> row_offsets() const { return row_offsets_; }
  std::span<const Index> col_indices() const { return col_indices_; }
  std::span<const double> values() const { return values_; }
  std::span<const double> labels() const { return labels_; }

  /// True when every label is exactly -1 or +1.
  bool has_binary_labels() const;

 private:
  std::size_t n_features_;
  std::vector<std::size_t> row_offsets_;
  std::vector<Index> col_indices_;
  std::vector<double> values_;
  std::vector<double> labels_;
};

struct DatasetStats {
  std::size_t n_samples = 0;
  std::size_t n_features = 0;
  std::size_t nnz = 0;
  double nnz_ratio = 0.0;
  double max_row_norm_sq = 0.0;
};

DatasetStats compute_stats(const SparseDataset& ds);

/// Stats for a dataset known only by its counts (e.g. published metadata).
DatasetStats stats_from_counts(std::size_t n_samples, std::size_t n_features,
                               std::size_t nnz, double max_row_norm_sq = 0.0);

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  /// 1-based line number, or 0 for whole-input errors.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct ParseOptions {
  /// Lower bound on n_features; the parsed count is max(index)+1 otherwise.
  std::size_t min_features = 0;
};

/// Parse LIBSVM text (`label idx:val ...`, 1-based strictly increasing
/// indices). Gzip input is detected by its magic bytes and inflated first.
SparseDataset parse_libsvm(std::istream& in, const ParseOptions& opts = {});
SparseDataset parse_libsvm(const std::string& text, const ParseOptions& opts = {});
SparseDataset load_libsvm(const std::filesystem::path& path,
                          const ParseOptions& opts = {});

/// Writes the dataset back in LIBSVM text with shortest round-trip numbers.
void write_libsvm(std::ostream& out, const SparseDataset& ds);

}  // namespace batchvr
