#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "batchvr/glm.hpp"

namespace batchvr {

struct CacheProfile {
  double t_seq_seconds = 0.0;   ///< median sequential full-gradient pass
  double t_rand_seconds = 0.0;  ///< median time of n random component gradients
  double eta = 0.0;             ///< median over reps of t_seq / t_rand
  std::size_t reps = 0;
  double dispersion = 0.0;      ///< max / min of the per-rep ratios
  std::size_t n_samples = 0;
  double random_access_delay_ns = 0.0;
  double sequential_access_delay_ns = 0.0;
  /// Sum of every loss derivative computed, per rep and pass.
  std::vector<double> seq_checksums;
  std::vector<double> rand_checksums;

  bool checksums_consistent() const;
};

struct ProfileOptions {
  std::size_t reps = 5;
  std::uint64_t seed = 0;
  /// Extra busy-wait per random access, to emulate slower memory.
  double random_access_delay_ns = 0.0;
  /// Extra busy-wait per sequential access, for machines whose native
  /// ratio is already below the ratio being emulated.
  double sequential_access_delay_ns = 0.0;
};

/// Times one sequential pass computing f'(w) against n component gradients
/// at indices drawn uniformly with replacement, both at w = 0 and doing
/// identical arithmetic. A warm-up pass is discarded. Only one profile runs
/// at a time in the process. Throws std::invalid_argument for reps < 3 and
/// std::runtime_error when a pass is too short for the clock.
CacheProfile measure_cache_ratio(const CompositeObjective& obj, const ProfileOptions& opts = {});

/// Delay per random access (ns) that brings a measured profile to
/// `target_eta`; zero when the machine is already at or below it.
double calibrate_access_delay(const CacheProfile& profile, double target_eta);

struct AccessDelays {
  double random_ns = 0.0;
  double sequential_ns = 0.0;
};

/// Delays that bring a profile to `target_eta`: a random-access delay when
/// the native ratio is above the target, otherwise a sequential one.
AccessDelays calibrate_access_delays(const CacheProfile& profile, double target_eta);

}  // namespace batchvr
