#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "batchvr/glm.hpp"
#include "batchvr/random.hpp"
#include "batchvr/staleness.hpp"

namespace batchvr {

/// Law of the batch size |B| drawn at every iteration.
///   Fixed(b): always b.
///   TwoPoint(p): n with probability p, else 1.
///   Snapshot(m): one full pass, then m unit batches, repeated.
class BatchDistribution {
 public:
  enum class Kind { Fixed, TwoPoint, Snapshot };

  static BatchDistribution fixed(std::size_t b);
  static BatchDistribution two_point(double p_full);
  static BatchDistribution snapshot(std::size_t m);

  Kind kind() const { return kind_; }
  std::size_t batch() const { return batch_; }
  double p_full() const { return p_full_; }
  std::size_t inner_m() const { return inner_m_; }

  /// Exact E|B| for a problem with n samples.
  double expected_batch(std::size_t n) const;

  /// Throws std::invalid_argument if the law does not fit n samples.
  void validate(std::size_t n) const;

 private:
  Kind kind_ = Kind::Fixed;
  std::size_t batch_ = 1;
  double p_full_ = 0.0;
  std::size_t inner_m_ = 0;
};

/// SagaStyle refreshes the memory of every sampled index; SvrgStyle only
/// refreshes on full-batch steps.
enum class UpdateRule { SagaStyle, SvrgStyle };

/// Per-sample loss derivatives at the memory points and their mean gradient.
struct GradientMemory {
  std::vector<double> scalars;  ///< loss_i'(x_i^T phi_i)
  std::vector<double> ubar;     ///< (1/n) sum_i scalars[i] x_i
  std::size_t updates_since_rebuild = 0;
};

struct SolverConfig {
  double step = 0.0;
  UpdateRule rule = UpdateRule::SagaStyle;
  BatchDistribution dist = BatchDistribution::fixed(1);
  /// Defer untouched coordinates (l1 or no regulariser only).
  bool lazy = false;
  std::uint64_t seed = 0;
  /// Also measure ubar drift right before full-batch refreshes (one extra pass).
  bool track_drift = false;
};

/// Proximal variance-reduced solver with a random batch size. Memory
/// starts at phi_i = w0; it is filled by the first step (a full pass costs
/// n data accesses unless that step is itself a full batch).
class Solver {
 public:
  Solver(const CompositeObjective& obj, SolverConfig cfg, std::vector<double> w0 = {});

  /// One iteration with a batch drawn from the configured law.
  void step();
  /// One iteration with the given batch (nonempty, distinct, in range).
  void step(std::span<const std::size_t> batch);

  /// Variance-reduced estimate at the current iterate for `batch`.
  std::vector<double> vr_gradient(std::span<const std::size_t> batch);

  /// Applies every deferred proximal step so weights() is the true iterate.
  void flush();

  const std::vector<double>& weights() const { return w_; }
  const GradientMemory& memory() const { return mem_; }
  /// Replaces the memory scalars and rebuilds ubar from them.
  void reset_memory(std::vector<double> scalars);

  const SolverConfig& config() const { return cfg_; }
  const CompositeObjective& objective() const { return *obj_; }
  std::uint64_t iteration() const { return iter_; }
  std::uint64_t data_accesses() const { return accesses_; }
  std::size_t last_batch_size() const { return last_batch_; }
  const StalenessHistogram& staleness() const { return staleness_; }
  /// Largest |ubar - exact|_inf seen at a rebuild.
  double max_rebuild_drift() const { return max_drift_; }
  bool lazy() const { return lazy_; }

 private:
  std::size_t draw_batch_size();
  void ensure_memory();
  void full_step();
  void partial_step(std::span<const std::size_t> batch);
  void catch_up(std::size_t j);
  double prox(double v) const;
  void rebuild_ubar();
  std::vector<double> exact_ubar() const;

  const CompositeObjective* obj_;
  SolverConfig cfg_;
  bool lazy_ = false;
  Rng rng_;
  std::vector<double> w_;
  GradientMemory mem_;
  bool memory_ready_ = false;

  std::uint64_t iter_ = 0;
  std::uint64_t accesses_ = 0;
  std::size_t last_batch_ = 0;
  std::size_t schedule_pos_ = 0;

  std::vector<std::uint64_t> stamps_;      // iteration each coordinate is current at
  std::vector<std::uint64_t> mem_stamps_;  // unit clock of each memory refresh
  std::uint64_t unit_clock_ = 0;
  StalenessHistogram staleness_;
  double max_drift_ = 0.0;

  std::vector<std::size_t> perm_;
  std::vector<double> acc_;
  std::vector<unsigned char> touched_mark_;
  std::vector<Index> touched_;
  std::vector<unsigned char> seen_;
  std::vector<double> new_scalars_;
};

// ---------------------------------------------------------------------------
// Presets and full runs.

enum class Algorithm { GD, SAGA, SVRG, SAGAPlusPlus };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);

/// Solver configuration for a preset. inner_m defaults to 1.5 n; a p_full
/// turns SAGA++ into the two-point law (and is rejected for the others).
SolverConfig preset_config(Algorithm a, std::size_t n, std::optional<std::size_t> inner_m = {},
                           std::optional<double> p_full = {});

struct StepPolicy {
  enum class Kind { Adaptive, Dependent, Explicit };
  Kind kind = Kind::Adaptive;
  double tau = 0.25;
  double gamma = 0.0;

  static StepPolicy adaptive() { return {}; }
  static StepPolicy dependent(double tau) { return {Kind::Dependent, tau, 0.0}; }
  static StepPolicy explicit_step(double gamma) { return {Kind::Explicit, 0.0, gamma}; }
};

/// gamma for a policy; Dependent needs mu and throws MissingStrongConvexity
/// or rates::InfeasibleTau.
double resolve_step(const CompositeObjective& obj, const StepPolicy& policy,
                    double expected_batch);

struct RunConfig {
  Algorithm algorithm = Algorithm::SAGA;
  StepPolicy step = StepPolicy::adaptive();
  double epochs = 10.0;  ///< budget in data accesses / n
  std::uint64_t seed = 0;
  double trace_every = 1.0;  ///< trace cadence in epoch-equivalents
  std::optional<std::size_t> inner_m;
  std::optional<double> p_full;
  std::optional<bool> lazy;  ///< default: on for l1 / no regulariser
  std::optional<double> f_star;
  std::optional<double> stop_below;  ///< stop once objective - f_star <= this
  double random_access_delay_ns = 0.0;  ///< busy-wait per non-full-batch access
  double sequential_access_delay_ns = 0.0;  ///< busy-wait per full-pass access
  double divergence_factor = 1e3;
  std::vector<double> w0;
};

struct TraceRecord {
  double epoch_equiv = 0.0;
  double wall_seconds = 0.0;
  double objective = 0.0;
  std::optional<double> suboptimality;
  std::size_t nnz_w = 0;
};

enum class RunStatus { Converged, EpochsExhausted, Diverged };
std::string to_string(RunStatus s);

struct RunResult {
  std::vector<double> w;
  std::vector<TraceRecord> trace;
  StalenessHistogram staleness;
  RunStatus status = RunStatus::EpochsExhausted;
  std::string diagnostic;
  double gamma = 0.0;
  double expected_batch = 1.0;
  std::uint64_t data_accesses = 0;
  std::uint64_t iterations = 0;
  double max_rebuild_drift = 0.0;
};

RunResult run(const CompositeObjective& obj, const RunConfig& cfg);

}  // namespace batchvr
