#include "batchvr/prox.hpp"

#include <cmath>

namespace batchvr {

std::vector<double> prox_l2(std::span<const double> x, double thr, double lam) {
  std::vector<double> out(x.size());
  const double scale = 1.0 / (1.0 + thr * lam);
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = x[k] * scale;
  return out;
}

namespace {

// Nested prox for drift c >= 0. The map T(u) = prox_l1(u - c, thr) is
//   u - (c + thr)   for u >= c + thr
//   0               for c - thr < u < c + thr
//   u - (c - thr)   for u <= c - thr
double nested_nonnegative_drift(double x, double thr, double c, std::uint64_t steps) {
  const double n = static_cast<double>(steps);
  const double fast = c + thr;
  const double slow = c - thr;

  if (slow <= 0.0) {
    // 0 is a fixed point: x walks towards it and is absorbed on arrival.
    if (x >= 0.0) {
      const double r = std::fma(-n, fast, x);
      return r > 0.0 ? r : 0.0;
    }
    const double r = std::fma(n, -slow, x);
    return r < 0.0 ? r : 0.0;
  }

  // slow > 0: everything eventually falls by `slow` per step.
  if (x <= slow) return std::fma(-n, slow, x);

  // q steps of size `fast` while u >= fast, then one step into the dead
  // zone (value 0) or straight into the slow region.
  const double ratio = x / fast;
  if (ratio >= n) return std::fma(-n, fast, x);
  auto q = static_cast<std::uint64_t>(std::floor(ratio));
  double r = std::fma(-static_cast<double>(q), fast, x);
  if (r >= fast) {
    ++q;
    r = std::fma(-static_cast<double>(q), fast, x);
  } else if (r < 0.0 && q > 0) {
    --q;
    r = std::fma(-static_cast<double>(q), fast, x);
  }
  if (q >= steps) return std::fma(-n, fast, x);

  const double rest = static_cast<double>(steps - q);
  if (r > slow) return -(rest - 1.0) * slow;
  return std::fma(-rest, slow, r);
}

}  // namespace

double lazy_nested_prox(const LazyProxQuery& q) {
  if (q.skipped == 0) return q.x;
  // prox_l1 is odd, so reflecting x and the drift reflects the result.
  if (q.drift < 0.0) return -nested_nonnegative_drift(-q.x, q.thr, -q.drift, q.skipped);
  return nested_nonnegative_drift(q.x, q.thr, q.drift, q.skipped);
}

}  // namespace batchvr
