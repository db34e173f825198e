#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "batchvr/staleness.hpp"

using namespace batchvr;

namespace {

double mass(const std::vector<std::pair<std::uint64_t, double>>& law) {
  double s = 0.0;
  for (const auto& [tau, p] : law) s += p;
  return s;
}

}  // namespace

TEST_CASE("saga law for n = 2, t = 2") {
  const auto law = staleness_distribution(StalenessRule::Saga, 2, 0, 2);
  REQUIRE(law.size() == 3);
  CHECK(law[0].first == 0);
  CHECK(law[0].second == 0.25);
  CHECK(law[1].first == 1);
  CHECK(law[1].second == 0.25);
  CHECK(law[2].first == 2);
  CHECK(law[2].second == 0.5);
}

TEST_CASE("svrg law is a point mass at the loop start") {
  const auto law = staleness_distribution(StalenessRule::Svrg, 10, 4, 9);
  REQUIRE(law.size() == 1);
  CHECK(law[0].first == 8);
  CHECK(law[0].second == 1.0);
  CHECK(staleness_distribution(StalenessRule::Svrg, 10, 4, 9, 1)[0].first == 4);
}

TEST_CASE("saga++ law restarts at the loop start") {
  const auto law = staleness_distribution(StalenessRule::SagaPlusPlus, 4, 5, 7);
  REQUIRE(law.size() == 3);
  CHECK(law[0].first == 5);
  CHECK(law[0].second == doctest::Approx(0.75 * 0.75));
  CHECK(law[1].second == doctest::Approx(0.25 * 0.75));
  CHECK(law[2].second == doctest::Approx(0.25));
}

TEST_CASE("laws sum to one") {
  for (StalenessRule r : {StalenessRule::Saga, StalenessRule::Svrg, StalenessRule::SagaPlusPlus})
    for (std::uint64_t n : {1u, 2u, 7u, 100u})
      for (std::uint64_t t : {0u, 1u, 13u, 400u}) {
        CHECK(mass(staleness_distribution(r, n, 6, t)) == doctest::Approx(1.0).epsilon(1e-12));
        const auto ages = staleness_age_law(r, n, 6, t, 10);
        CHECK(std::accumulate(ages.begin(), ages.end(), 0.0) ==
              doctest::Approx(1.0).epsilon(1e-12));
      }
}

TEST_CASE("invalid loop index") {
  CHECK_THROWS_AS(staleness_distribution(StalenessRule::Svrg, 10, 4, 9, 3), std::invalid_argument);
  CHECK_THROWS_AS(staleness_distribution(StalenessRule::SagaPlusPlus, 10, 0, 9),
                  std::invalid_argument);
  CHECK_THROWS_AS(staleness_distribution(StalenessRule::Saga, 0, 1, 9), std::invalid_argument);
  CHECK_NOTHROW(staleness_distribution(StalenessRule::Saga, 10, 0, 9));
}

TEST_CASE("averaged law against direct averaging") {
  for (StalenessRule r : {StalenessRule::Saga, StalenessRule::Svrg, StalenessRule::SagaPlusPlus}) {
    const std::size_t cap = 12;
    const std::uint64_t reads = 40, n = 5, T = 7;
    std::vector<double> direct(cap + 1, 0.0);
    for (std::uint64_t t = 0; t < reads; ++t) {
      const auto law = staleness_age_law(r, n, T, t, cap);
      for (std::size_t a = 0; a <= cap; ++a) direct[a] += law[a] / static_cast<double>(reads);
    }
    const auto fast = averaged_age_law(r, n, T, reads, cap);
    for (std::size_t a = 0; a <= cap; ++a) CHECK(fast[a] == doctest::Approx(direct[a]).epsilon(1e-12));
  }
}

TEST_CASE("histogram buckets and exact mean") {
  StalenessHistogram h(3);
  for (std::uint64_t a : {0u, 1u, 1u, 2u, 3u, 50u}) h.record(a);
  CHECK(h.total() == 6);
  CHECK(h.counts() == std::vector<std::uint64_t>{1, 2, 1, 2});
  CHECK(h.mean() == doctest::Approx(57.0 / 6.0));
  const auto p = h.normalized();
  CHECK(p[1] == doctest::Approx(1.0 / 3.0));
  CHECK(StalenessHistogram(4).mean() == 0.0);
  CHECK(total_variation({0.5, 0.5}, {1.0, 0.0}) == 0.5);
  CHECK_THROWS(total_variation({1.0}, {0.5, 0.5}));
}

TEST_CASE("saga++ is never staler than saga or svrg in mean") {
  for (std::uint64_t n : {10u, 50u})
    for (std::uint64_t T : {5u, 75u}) {
      const std::size_t cap = 4000;
      auto mean = [&](StalenessRule r) {
        const auto p = averaged_age_law(r, n, T, 3000, cap);
        double m = 0.0;
        for (std::size_t a = 0; a < p.size(); ++a) m += static_cast<double>(a) * p[a];
        return m;
      };
      const double pp = mean(StalenessRule::SagaPlusPlus);
      CHECK(pp <= mean(StalenessRule::Saga) + 1e-12);
      CHECK(pp <= mean(StalenessRule::Svrg) + 1e-12);
    }
}
