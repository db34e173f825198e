#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace batchvr {

/// Soft threshold: sign(x) * max(|x| - thr, 0).
inline double prox_l1(double x, double thr) {
  if (x > thr) return x - thr;
  if (x < -thr) return x + thr;
  return 0.0;
}

/// Proximal map of thr * (lam/2) ||.||^2, i.e. x / (1 + thr * lam).
inline double prox_l2(double x, double thr, double lam) { return x / (1.0 + thr * lam); }
std::vector<double> prox_l2(std::span<const double> x, double thr, double lam);

/// A coordinate whose soft-thresholded gradient steps were deferred.
struct LazyProxQuery {
  double x = 0.0;             ///< stale coordinate value
  double thr = 0.0;           ///< soft-threshold level (step * lambda), >= 0
  double drift = 0.0;         ///< constant per-step shift (step * ubar[j])
  std::uint64_t skipped = 0;  ///< number of deferred steps
};

/// Closed form of `skipped` applications of u <- prox_l1(u - drift, thr)
/// starting from u = x. Constant time in `skipped`.
double lazy_nested_prox(const LazyProxQuery& q);

}  // namespace batchvr
