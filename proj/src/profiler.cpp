#include "batchvr/profiler.hpp"

#include <algorithm>
#include <chrono>
#include <mutex>
#include <stdexcept>

#include "batchvr/random.hpp"
#include "batchvr/spin.hpp"

namespace batchvr {

namespace {

std::mutex& profiling_lock() {
  static std::mutex m;
  return m;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// One gradient component: margin, derivative, scatter into g.
inline double touch(const CompositeObjective& obj, std::size_t i, const std::vector<double>& w,
                    std::vector<double>& g) {
  const RowView r = obj.data().row(i);
  const double s = obj.loss_derivative(i, obj.margin(i, w));
  for (std::size_t k = 0; k < r.nnz(); ++k) g[r.indices[k]] += s * r.values[k];
  return s;
}

}  // namespace

bool CacheProfile::checksums_consistent() const {
  auto same = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  return !seq_checksums.empty() && same(seq_checksums) && same(rand_checksums);
}

CacheProfile measure_cache_ratio(const CompositeObjective& obj, const ProfileOptions& opts) {
  if (opts.reps < 3) throw std::invalid_argument("profiling needs at least 3 reps");
  std::lock_guard<std::mutex> guard(profiling_lock());
  using clock = std::chrono::steady_clock;

  const std::size_t n = obj.n_samples();
  const std::vector<double> w(obj.n_features(), 0.0);
  std::vector<double> g(obj.n_features(), 0.0);
  std::vector<std::size_t> order(n);
  Rng rng(opts.seed);
  for (auto& i : order) i = static_cast<std::size_t>(rng.below(n));

  CacheProfile out;
  out.reps = opts.reps;
  out.n_samples = n;
  out.random_access_delay_ns = opts.random_access_delay_ns;
  out.sequential_access_delay_ns = opts.sequential_access_delay_ns;

  // Warm-up: first-touch faults on the data and the gradient buffer.
  for (std::size_t i = 0; i < n; ++i) touch(obj, i, w, g);

  std::vector<double> seq, rnd, ratio;
  for (std::size_t rep = 0; rep < opts.reps; ++rep) {
    std::fill(g.begin(), g.end(), 0.0);
    double sum = 0.0;
    DelayInjector seq_delay(opts.sequential_access_delay_ns);
    auto t0 = clock::now();
    for (std::size_t i = 0; i < n; ++i) {
      sum += touch(obj, i, w, g);
      seq_delay.charge(1);
    }
    seq_delay.settle();
    const double ts = std::chrono::duration<double>(clock::now() - t0).count();
    out.seq_checksums.push_back(sum);

    std::fill(g.begin(), g.end(), 0.0);
    sum = 0.0;
    DelayInjector delay(opts.random_access_delay_ns);
    t0 = clock::now();
    for (std::size_t i : order) {
      sum += touch(obj, i, w, g);
      delay.charge(1);
    }
    delay.settle();
    const double tr = std::chrono::duration<double>(clock::now() - t0).count();
    out.rand_checksums.push_back(sum);

    if (!(ts > 0.0) || !(tr > 0.0))
      throw std::runtime_error(
          "a profiling pass took no measurable time; use a larger dataset or more reps");
    seq.push_back(ts);
    rnd.push_back(tr);
    ratio.push_back(ts / tr);
  }

  out.t_seq_seconds = median(seq);
  out.t_rand_seconds = median(rnd);
  out.eta = median(ratio);
  const auto [lo, hi] = std::minmax_element(ratio.begin(), ratio.end());
  out.dispersion = *hi / *lo;
  return out;
}

double calibrate_access_delay(const CacheProfile& profile, double target_eta) {
  return calibrate_access_delays(profile, target_eta).random_ns;
}

AccessDelays calibrate_access_delays(const CacheProfile& profile, double target_eta) {
  if (!(target_eta > 0.0 && target_eta <= 1.0))
    throw std::invalid_argument("target eta must lie in (0, 1]");
  if (profile.n_samples == 0) throw std::invalid_argument("empty profile");
  // Native costs without any delay already injected.
  const double n = static_cast<double>(profile.n_samples);
  const double native_rand = profile.t_rand_seconds - profile.random_access_delay_ns * 1e-9 * n;
  const double native_seq = profile.t_seq_seconds - profile.sequential_access_delay_ns * 1e-9 * n;
  AccessDelays d;
  if (native_seq / native_rand >= target_eta)
    d.random_ns = std::max(0.0, (native_seq / target_eta - native_rand) / n * 1e9);
  else
    d.sequential_ns = std::max(0.0, (target_eta * native_rand - native_seq) / n * 1e9);
  return d;
}

}  // namespace batchvr
