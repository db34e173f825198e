#include "batchvr/staleness.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace batchvr {

StalenessHistogram::StalenessHistogram(std::size_t cap)
    : cap_(cap), overflow_(static_cast<std::uint32_t>(cap)), counts_(cap + 1, 0) {
  if (cap >= std::numeric_limits<std::uint32_t>::max())
    throw std::invalid_argument("staleness cap too large");
  pending_.reserve(kBlock);
}

void StalenessHistogram::bin() const {
  for (std::uint32_t a : pending_) ++counts_[a];
  pending_.clear();
}

const std::vector<std::uint64_t>& StalenessHistogram::counts() const {
  bin();
  return counts_;
}

double StalenessHistogram::mean() const {
  return total_ == 0 ? 0.0 : static_cast<double>(age_sum_ / static_cast<long double>(total_));
}

std::vector<double> StalenessHistogram::normalized() const {
  const std::vector<std::uint64_t>& c = counts();
  std::vector<double> out(c.size(), 0.0);
  if (total_ == 0) return out;
  for (std::size_t a = 0; a < c.size(); ++a)
    out[a] = static_cast<double>(c[a]) / static_cast<double>(total_);
  return out;
}

namespace {

std::uint64_t loop_start(StalenessRule rule, std::uint64_t T, std::uint64_t t,
                         std::optional<std::uint64_t> k) {
  if (rule == StalenessRule::Saga) return 0;
  if (T == 0) throw std::invalid_argument("loop length T must be positive");
  const std::uint64_t kk = k ? *k : t / T;
  if (kk > t / T || kk * T > t) throw std::invalid_argument("staleness law needs k T <= t");
  return kk * T;
}

}  // namespace

std::vector<std::pair<std::uint64_t, double>> staleness_distribution(
    StalenessRule rule, std::uint64_t n, std::uint64_t T, std::uint64_t t,
    std::optional<std::uint64_t> k) {
  if (n == 0) throw std::invalid_argument("n must be positive");
  const std::uint64_t start = loop_start(rule, T, t, k);
  if (rule == StalenessRule::Svrg) return {{start, 1.0}};

  const double keep = 1.0 - 1.0 / static_cast<double>(n);
  const double hit = 1.0 / static_cast<double>(n);
  std::vector<std::pair<std::uint64_t, double>> out;
  out.reserve(t - start + 1);
  out.emplace_back(start, std::pow(keep, static_cast<double>(t - start)));
  for (std::uint64_t j = start + 1; j <= t; ++j)
    out.emplace_back(j, hit * std::pow(keep, static_cast<double>(t - j)));
  return out;
}

std::vector<double> staleness_age_law(StalenessRule rule, std::uint64_t n, std::uint64_t T,
                                      std::uint64_t t, std::size_t cap) {
  std::vector<double> out(cap + 1, 0.0);
  for (const auto& [tau, p] : staleness_distribution(rule, n, T, t)) {
    const std::uint64_t age = t - tau;
    out[age < cap ? static_cast<std::size_t>(age) : cap] += p;
  }
  return out;
}

std::vector<double> averaged_age_law(StalenessRule rule, std::uint64_t n, std::uint64_t T,
                                     std::uint64_t reads, std::size_t cap) {
  std::vector<double> out(cap + 1, 0.0);
  if (reads == 0) return out;
  // The law at step t depends only on t - kT, and for Saga it stops
  // changing inside the bucket range once t reaches the cap.
  std::map<std::uint64_t, std::uint64_t> multiplicity;
  for (std::uint64_t t = 0; t < reads; ++t) {
    std::uint64_t eff = rule == StalenessRule::Saga ? t : t - (t / T) * T;
    if (rule != StalenessRule::Svrg && eff > cap) eff = cap + 1;
    ++multiplicity[eff];
  }
  for (const auto& [eff, count] : multiplicity) {
    std::vector<double> law;
    if (rule == StalenessRule::Saga || rule == StalenessRule::SagaPlusPlus) {
      // Geometric over the eff steps since the last global refresh. Every
      // eff >= cap shares the same bucketed law, overflow mass keep^cap.
      const double keep = 1.0 - 1.0 / static_cast<double>(n);
      law.assign(cap + 1, 0.0);
      for (std::size_t a = 0; a < cap && a <= eff; ++a) {
        const double tail = std::pow(keep, static_cast<double>(a));
        law[a] = a == eff ? tail : tail / static_cast<double>(n);
      }
      if (eff >= cap) law[cap] = std::pow(keep, static_cast<double>(cap));
    } else {
      law = staleness_age_law(rule, n, T, eff, cap);
    }
    const double w = static_cast<double>(count) / static_cast<double>(reads);
    for (std::size_t a = 0; a <= cap; ++a) out[a] += w * law[a];
  }
  return out;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("distributions differ in support size");
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) acc += std::abs(p[k] - q[k]);
  return 0.5 * acc;
}

}  // namespace batchvr
