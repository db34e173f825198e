#include "batchvr/dataio.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string_view>

namespace batchvr {

SparseDataset::SparseDataset(std::size_t n_features,
                             std::vector<std::size_t> row_offsets,
                             std::vector<Index> col_indices,
                             std::vector<double> values,
                             std::vector<double> labels)
    : n_features_(n_features),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)),
      labels_(std::move(labels)) {
  if (row_offsets_.size() != labels_.size() + 1)
    throw std::invalid_argument("row_offsets must have n_samples + 1 entries");
  if (row_offsets_.front() != 0)
    throw std::invalid_argument("row_offsets[0] must be 0");
  if (row_offsets_.back() != values_.size() ||
      col_indices_.size() != values_.size())
    throw std::invalid_argument("row_offsets[n] must equal nnz");
  for (std::size_t i = 0; i + 1 < row_offsets_.size(); ++i) {
    const std::size_t begin = row_offsets_[i];
    const std::size_t end = row_offsets_[i + 1];
    if (end < begin) throw std::invalid_argument("row_offsets must not decrease");
    for (std::size_t k = begin; k < end; ++k) {
      if (col_indices_[k] >= n_features_)
        throw std::invalid_argument("column index out of range");
      if (k > begin && col_indices_[k] <= col_indices_[k - 1])
        throw std::invalid_argument("column indices must strictly increase");
    }
  }
}

bool SparseDataset::has_binary_labels() const {
  return std::all_of(labels_.begin(), labels_.end(),
                     [](double y) { return y == 1.0 || y == -1.0; });
}

DatasetStats stats_from_counts(std::size_t n_samples, std::size_t n_features,
                               std::size_t nnz, double max_row_norm_sq) {
  DatasetStats s;
  s.n_samples = n_samples;
  s.n_features = n_features;
  s.nnz = nnz;
  const double cells = static_cast<double>(n_samples) * static_cast<double>(n_features);
  s.nnz_ratio = cells > 0.0 ? static_cast<double>(nnz) / cells : 0.0;
  s.max_row_norm_sq = max_row_norm_sq;
  return s;
}

DatasetStats compute_stats(const SparseDataset& ds) {
  double max_norm = 0.0;
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    double norm = 0.0;
    for (double v : ds.row(i).values) norm += v * v;
    max_norm = std::max(max_norm, norm);
  }
  return stats_from_counts(ds.n_samples(), ds.n_features(), ds.nnz(), max_norm);
}

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
      line_(line) {}

namespace {

bool is_gzip(std::string_view bytes) {
  return bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f &&
         static_cast<unsigned char>(bytes[1]) == 0x8b;
}

std::string gunzip(std::string_view bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
    throw ParseError(0, "cannot initialise gzip decoder");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
  zs.avail_in = static_cast<uInt>(bytes.size());
  std::string out;
  char buf[1 << 16];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw ParseError(0, "corrupt gzip stream");
    }
    out.append(buf, sizeof(buf) - zs.avail_out);
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw ParseError(0, "truncated gzip stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  if (tok.empty()) return false;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size() && std::isfinite(out);
}

bool parse_index(std::string_view tok, std::uint64_t& out) {
  if (tok.empty()) return false;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

SparseDataset parse_text(std::string_view text, const ParseOptions& opts) {
  std::vector<std::size_t> offsets{0};
  std::vector<Index> cols;
  std::vector<double> vals;
  std::vector<double> labels;
  std::uint64_t max_index = 0;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;

    std::vector<std::string_view> tokens;
    std::size_t k = 0;
    while (k < line.size()) {
      while (k < line.size() && is_space(line[k])) ++k;
      const std::size_t start = k;
      while (k < line.size() && !is_space(line[k])) ++k;
      if (k > start) tokens.push_back(line.substr(start, k - start));
    }
    if (tokens.empty()) continue;

    double label = 0.0;
    if (!parse_double(tokens[0], label))
      throw ParseError(line_no, "non-numeric label '" + std::string(tokens[0]) + "'");

    std::uint64_t prev = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const std::string_view tok = tokens[t];
      const std::size_t colon = tok.find(':');
      if (colon == std::string_view::npos)
        throw ParseError(line_no, "expected idx:val, got '" + std::string(tok) + "'");
      std::uint64_t idx = 0;
      double val = 0.0;
      if (!parse_index(tok.substr(0, colon), idx) || idx == 0)
        throw ParseError(line_no, "bad feature index in '" + std::string(tok) + "'");
      if (!parse_double(tok.substr(colon + 1), val))
        throw ParseError(line_no, "non-numeric value in '" + std::string(tok) + "'");
      if (idx <= prev)
        throw ParseError(line_no, "non-increasing index " + std::to_string(idx));
      if (idx > std::numeric_limits<Index>::max())
        throw ParseError(line_no, "feature index too large");
      prev = idx;
      max_index = std::max(max_index, idx);
      cols.push_back(static_cast<Index>(idx - 1));
      vals.push_back(val);
    }
    labels.push_back(label);
    offsets.push_back(vals.size());
  }

  if (labels.empty()) throw ParseError(0, "empty input");
  const std::size_t d = std::max<std::size_t>(max_index, opts.min_features);
  return SparseDataset(d, std::move(offsets), std::move(cols), std::move(vals),
                       std::move(labels));
}

}  // namespace

SparseDataset parse_libsvm(const std::string& text, const ParseOptions& opts) {
  if (is_gzip(text)) return parse_text(gunzip(text), opts);
  return parse_text(text, opts);
}

SparseDataset parse_libsvm(std::istream& in, const ParseOptions& opts) {
  std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_libsvm(bytes, opts);
}

SparseDataset load_libsvm(const std::filesystem::path& path, const ParseOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open " + path.string());
  return parse_libsvm(in, opts);
}

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

void write_libsvm(std::ostream& out, const SparseDataset& ds) {
  std::string line;
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    line.clear();
    append_number(line, ds.label(i));
    const RowView r = ds.row(i);
    for (std::size_t k = 0; k < r.nnz(); ++k) {
      line.push_back(' ');
      line.append(std::to_string(static_cast<std::uint64_t>(r.indices[k]) + 1));
      line.push_back(':');
      append_number(line, r.values[k]);
    }
    line.push_back('\n');
    out << line;
  }
}

}  // namespace batchvr
