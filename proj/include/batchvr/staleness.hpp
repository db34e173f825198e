#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace batchvr {

/// Bounded histogram of memory-cell ages. Ages at or beyond `cap` land in a
/// single overflow bucket; the mean is kept exactly from the raw ages.
///
/// Buckets are spread over a large array, so records are buffered and
/// binned in blocks rather than costing a cache miss each.
class StalenessHistogram {
 public:
  explicit StalenessHistogram(std::size_t cap = 0);

  void record(std::uint64_t age) {
    pending_.push_back(age < cap_ ? static_cast<std::uint32_t>(age) : overflow_);
    ++total_;
    age_sum_ += static_cast<long double>(age);
    if (pending_.size() == kBlock) bin();
  }

  std::size_t cap() const { return cap_; }
  /// cap() + 1 buckets; the last one counts ages >= cap().
  const std::vector<std::uint64_t>& counts() const;
  std::uint64_t total() const { return total_; }
  double mean() const;
  std::vector<double> normalized() const;

 private:
  static constexpr std::size_t kBlock = 4096;
  void bin() const;

  std::size_t cap_;
  std::uint32_t overflow_;
  mutable std::vector<std::uint64_t> counts_;
  mutable std::vector<std::uint32_t> pending_;
  std::uint64_t total_ = 0;
  long double age_sum_ = 0.0L;
};

/// How memory cells are refreshed.
///   Saga: every accessed cell is refreshed.
///   Svrg: all cells are refreshed at the start of each outer loop only.
///   SagaPlusPlus: both.
enum class StalenessRule { Saga, Svrg, SagaPlusPlus };

/// Law of the refresh index tau of a cell read at unit step t, for a loop
/// of T unit steps per outer iteration (ignored by Saga). `k` defaults to
/// floor(t / T). Returns (tau, probability) pairs with increasing tau.
/// Throws std::invalid_argument when k T > t.
std::vector<std::pair<std::uint64_t, double>> staleness_distribution(
    StalenessRule rule, std::uint64_t n, std::uint64_t T, std::uint64_t t,
    std::optional<std::uint64_t> k = std::nullopt);

/// Same law expressed as ages t - tau, bucketed like StalenessHistogram.
std::vector<double> staleness_age_law(StalenessRule rule, std::uint64_t n, std::uint64_t T,
                                      std::uint64_t t, std::size_t cap);

/// Age law averaged over reads at unit steps 0, 1, ..., reads - 1.
std::vector<double> averaged_age_law(StalenessRule rule, std::uint64_t n, std::uint64_t T,
                                     std::uint64_t reads, std::size_t cap);

double total_variation(const std::vector<double>& p, const std::vector<double>& q);

}  // namespace batchvr
