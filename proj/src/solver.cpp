#include "batchvr/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "batchvr/prox.hpp"
#include "batchvr/rates.hpp"
#include "batchvr/spin.hpp"

namespace batchvr {

BatchDistribution BatchDistribution::fixed(std::size_t b) {
  if (b == 0) throw std::invalid_argument("batch size must be >= 1");
  BatchDistribution d;
  d.kind_ = Kind::Fixed;
  d.batch_ = b;
  return d;
}

BatchDistribution BatchDistribution::two_point(double p_full) {
  if (!(p_full >= 0.0 && p_full <= 1.0)) throw std::invalid_argument("p_full must lie in [0, 1]");
  BatchDistribution d;
  d.kind_ = Kind::TwoPoint;
  d.p_full_ = p_full;
  return d;
}

BatchDistribution BatchDistribution::snapshot(std::size_t m) {
  if (m == 0) throw std::invalid_argument("inner loop length must be >= 1");
  BatchDistribution d;
  d.kind_ = Kind::Snapshot;
  d.inner_m_ = m;
  return d;
}

double BatchDistribution::expected_batch(std::size_t n) const {
  const double nn = static_cast<double>(n);
  switch (kind_) {
    case Kind::Fixed:
      return static_cast<double>(batch_);
    case Kind::TwoPoint:
      return p_full_ * nn + (1.0 - p_full_);
    case Kind::Snapshot:
      return (nn + static_cast<double>(inner_m_)) / (static_cast<double>(inner_m_) + 1.0);
  }
  return 1.0;
}

void BatchDistribution::validate(std::size_t n) const {
  if (n == 0) throw std::invalid_argument("dataset has no samples");
  if (kind_ == Kind::Fixed && batch_ > n)
    throw std::invalid_argument("fixed batch size exceeds n");
}

Solver::Solver(const CompositeObjective& obj, SolverConfig cfg, std::vector<double> w0)
    : obj_(&obj),
      cfg_(cfg),
      rng_(cfg.seed),
      staleness_(16 * obj.n_samples()) {
  const std::size_t n = obj.n_samples();
  const std::size_t d = obj.n_features();
  cfg_.dist.validate(n);
  if (!(cfg_.step > 0.0) || !std::isfinite(cfg_.step))
    throw std::invalid_argument("step size must be positive and finite");
  if (cfg_.lazy && obj.reg().kind == Regularizer::Kind::L2)
    throw std::invalid_argument("lazy updates need an l1 regulariser or none");
  lazy_ = cfg_.lazy;

  if (w0.empty()) w0.assign(d, 0.0);
  if (w0.size() != d) throw std::invalid_argument("initial point has the wrong dimension");
  w_ = std::move(w0);

  mem_.scalars.assign(n, 0.0);
  mem_.ubar.assign(d, 0.0);
  stamps_.assign(d, 0);
  mem_stamps_.assign(n, 0);
  perm_.resize(n);
  for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
  acc_.assign(d, 0.0);
  touched_mark_.assign(d, 0);
  seen_.assign(n, 0);
}

double Solver::prox(double v) const {
  const Regularizer& reg = obj_->reg();
  switch (reg.kind) {
    case Regularizer::Kind::L1:
      return prox_l1(v, cfg_.step * reg.lambda);
    case Regularizer::Kind::L2:
      return prox_l2(v, cfg_.step, reg.lambda);
    case Regularizer::Kind::None:
      return v;
  }
  return v;
}

void Solver::catch_up(std::size_t j) {
  const std::uint64_t s = stamps_[j];
  if (s >= iter_) return;
  LazyProxQuery q;
  q.x = w_[j];
  q.thr = cfg_.step * obj_->reg().l1_weight();
  q.drift = cfg_.step * mem_.ubar[j];
  q.skipped = iter_ - s;
  w_[j] = lazy_nested_prox(q);
  stamps_[j] = iter_;
}

void Solver::flush() {
  if (!lazy_) return;
  for (std::size_t j = 0; j < w_.size(); ++j) catch_up(j);
}

std::vector<double> Solver::exact_ubar() const {
  std::vector<double> u(obj_->n_features(), 0.0);
  const SparseDataset& data = obj_->data();
  for (std::size_t i = 0; i < data.n_samples(); ++i) {
    const RowView r = data.row(i);
    const double s = mem_.scalars[i];
    for (std::size_t k = 0; k < r.nnz(); ++k) u[r.indices[k]] += s * r.values[k];
  }
  const double inv_n = 1.0 / static_cast<double>(data.n_samples());
  for (double& v : u) v *= inv_n;
  return u;
}

void Solver::rebuild_ubar() {
  // Deferred coordinates were promised the old ubar.
  flush();
  std::vector<double> exact = exact_ubar();
  double drift = 0.0;
  for (std::size_t j = 0; j < exact.size(); ++j)
    drift = std::max(drift, std::abs(exact[j] - mem_.ubar[j]));
  max_drift_ = std::max(max_drift_, drift);
  mem_.ubar = std::move(exact);
  mem_.updates_since_rebuild = 0;
}

void Solver::reset_memory(std::vector<double> scalars) {
  if (scalars.size() != obj_->n_samples())
    throw std::invalid_argument("memory needs one scalar per sample");
  flush();
  mem_.scalars = std::move(scalars);
  mem_.ubar = exact_ubar();
  mem_.updates_since_rebuild = 0;
  std::fill(mem_stamps_.begin(), mem_stamps_.end(), unit_clock_);
  memory_ready_ = true;
}

void Solver::ensure_memory() {
  if (memory_ready_) return;
  const SparseDataset& data = obj_->data();
  for (std::size_t i = 0; i < data.n_samples(); ++i)
    mem_.scalars[i] = obj_->loss_derivative(i, obj_->margin(i, w_));
  mem_.ubar = exact_ubar();
  mem_.updates_since_rebuild = 0;
  std::fill(mem_stamps_.begin(), mem_stamps_.end(), unit_clock_);
  accesses_ += data.n_samples();
  memory_ready_ = true;
}

std::size_t Solver::draw_batch_size() {
  const std::size_t n = obj_->n_samples();
  switch (cfg_.dist.kind()) {
    case BatchDistribution::Kind::Fixed:
      return cfg_.dist.batch();
    case BatchDistribution::Kind::TwoPoint:
      return rng_.uniform() < cfg_.dist.p_full() ? n : 1;
    case BatchDistribution::Kind::Snapshot: {
      const std::size_t b = schedule_pos_ == 0 ? n : 1;
      schedule_pos_ = schedule_pos_ == cfg_.dist.inner_m() ? 0 : schedule_pos_ + 1;
      return b;
    }
  }
  return 1;
}

void Solver::step() {
  const std::size_t n = obj_->n_samples();
  const std::size_t b = draw_batch_size();
  if (b >= n) {
    full_step();
    return;
  }
  // Partial Fisher-Yates over a persistent permutation.
  for (std::size_t k = 0; k < b; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng_.below(n - k));
    std::swap(perm_[k], perm_[j]);
  }
  ensure_memory();
  partial_step(std::span<const std::size_t>(perm_.data(), b));
}

namespace {

void check_batch(std::span<const std::size_t> batch, std::size_t n,
                 std::vector<unsigned char>& seen) {
  if (batch.empty()) throw std::invalid_argument("batch must be nonempty");
  std::size_t bad = 0;
  bool dup = false;
  std::size_t k = 0;
  for (; k < batch.size(); ++k) {
    const std::size_t i = batch[k];
    if (i >= n) {
      bad = i;
      break;
    }
    if (seen[i]) {
      dup = true;
      bad = i;
      break;
    }
    seen[i] = 1;
  }
  for (std::size_t r = 0; r < k; ++r) seen[batch[r]] = 0;
  if (k < batch.size()) {
    std::ostringstream msg;
    msg << "batch index " << bad << (dup ? " repeated" : " out of range");
    if (dup) throw std::invalid_argument(msg.str());
    throw std::out_of_range(msg.str());
  }
}

}  // namespace

void Solver::step(std::span<const std::size_t> batch) {
  const std::size_t n = obj_->n_samples();
  check_batch(batch, n, seen_);
  if (batch.size() == n) {
    full_step();
    return;
  }
  ensure_memory();
  partial_step(batch);
}

void Solver::full_step() {
  const SparseDataset& data = obj_->data();
  const std::size_t n = data.n_samples();
  const std::size_t d = data.n_features();
  flush();
  if (cfg_.track_drift && memory_ready_) {
    const std::vector<double> exact = exact_ubar();
    for (std::size_t j = 0; j < d; ++j)
      max_drift_ = std::max(max_drift_, std::abs(exact[j] - mem_.ubar[j]));
  }

  // Same arithmetic as CompositeObjective::full_gradient.
  std::vector<double>& g = mem_.ubar;
  std::fill(g.begin(), g.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const RowView r = data.row(i);
    const double s = obj_->loss_derivative(i, obj_->margin(i, w_));
    mem_.scalars[i] = s;
    for (std::size_t k = 0; k < r.nnz(); ++k) g[r.indices[k]] += s * r.values[k];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (double& v : g) v *= inv_n;

  for (std::size_t j = 0; j < d; ++j) w_[j] = prox(w_[j] - cfg_.step * g[j]);
  ++iter_;
  std::fill(stamps_.begin(), stamps_.end(), iter_);
  std::fill(mem_stamps_.begin(), mem_stamps_.end(), unit_clock_);
  mem_.updates_since_rebuild = 0;
  memory_ready_ = true;
  accesses_ += n;
  last_batch_ = n;
}

void Solver::partial_step(std::span<const std::size_t> batch) {
  const SparseDataset& data = obj_->data();
  const std::size_t n = data.n_samples();
  const std::size_t b = batch.size();

  touched_.clear();
  for (std::size_t i : batch) {
    for (Index j : data.row(i).indices) {
      if (!touched_mark_[j]) {
        touched_mark_[j] = 1;
        touched_.push_back(j);
      }
    }
  }
  if (lazy_)
    for (Index j : touched_) catch_up(j);

  new_scalars_.resize(b);
  for (std::size_t k = 0; k < b; ++k) {
    const std::size_t i = batch[k];
    const RowView r = data.row(i);
    const double s = obj_->loss_derivative(i, obj_->margin(i, w_));
    new_scalars_[k] = s;
    const double delta = s - mem_.scalars[i];
    for (std::size_t e = 0; e < r.nnz(); ++e) acc_[r.indices[e]] += delta * r.values[e];
  }

  const double inv_b = 1.0 / static_cast<double>(b);
  const double gamma = cfg_.step;
  if (lazy_) {
    for (Index j : touched_) {
      const double g = acc_[j] * inv_b + mem_.ubar[j];
      w_[j] = prox(w_[j] - gamma * g);
      acc_[j] = 0.0;
      touched_mark_[j] = 0;
      stamps_[j] = iter_ + 1;
    }
  } else {
    for (std::size_t j = 0; j < w_.size(); ++j) {
      const double g = acc_[j] * inv_b + mem_.ubar[j];
      w_[j] = prox(w_[j] - gamma * g);
      acc_[j] = 0.0;
    }
    for (Index j : touched_) touched_mark_[j] = 0;
    std::fill(stamps_.begin(), stamps_.end(), iter_ + 1);
  }

  if (b == 1) staleness_.record(unit_clock_ - mem_stamps_[batch[0]]);

  if (cfg_.rule == UpdateRule::SagaStyle) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < b; ++k) {
      const std::size_t i = batch[k];
      const double delta = new_scalars_[k] - mem_.scalars[i];
      if (delta != 0.0) {
        const RowView r = data.row(i);
        const double scale = delta * inv_n;
        for (std::size_t e = 0; e < r.nnz(); ++e) mem_.ubar[r.indices[e]] += scale * r.values[e];
      }
      mem_.scalars[i] = new_scalars_[k];
      mem_stamps_[i] = unit_clock_ + 1;
    }
    mem_.updates_since_rebuild += b;
  }

  ++unit_clock_;
  ++iter_;
  accesses_ += b;
  last_batch_ = b;

  if (mem_.updates_since_rebuild >= n) rebuild_ubar();
}

std::vector<double> Solver::vr_gradient(std::span<const std::size_t> batch) {
  const SparseDataset& data = obj_->data();
  const std::size_t n = data.n_samples();
  check_batch(batch, n, seen_);
  flush();
  if (batch.size() == n) return obj_->full_gradient(w_);
  ensure_memory();
  flush();

  std::vector<double> g = mem_.ubar;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  touched_.clear();
  for (std::size_t i : batch) {
    const RowView r = data.row(i);
    const double delta = obj_->loss_derivative(i, obj_->margin(i, w_)) - mem_.scalars[i];
    for (std::size_t e = 0; e < r.nnz(); ++e) {
      const Index j = r.indices[e];
      if (!touched_mark_[j]) {
        touched_mark_[j] = 1;
        touched_.push_back(j);
      }
      acc_[j] += delta * r.values[e];
    }
  }
  for (Index j : touched_) {
    g[j] = acc_[j] * inv_b + mem_.ubar[j];
    acc_[j] = 0.0;
    touched_mark_[j] = 0;
  }
  return g;
}

// ---------------------------------------------------------------------------

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::GD:
      return "gd";
    case Algorithm::SAGA:
      return "saga";
    case Algorithm::SVRG:
      return "svrg";
    case Algorithm::SAGAPlusPlus:
      return "saga++";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "gd") return Algorithm::GD;
  if (name == "saga") return Algorithm::SAGA;
  if (name == "svrg") return Algorithm::SVRG;
  if (name == "saga++" || name == "sagapp") return Algorithm::SAGAPlusPlus;
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Converged:
      return "converged";
    case RunStatus::EpochsExhausted:
      return "epochs_exhausted";
    case RunStatus::Diverged:
      return "diverged";
  }
  return "?";
}

SolverConfig preset_config(Algorithm a, std::size_t n, std::optional<std::size_t> inner_m,
                           std::optional<double> p_full) {
  if (p_full && a != Algorithm::SAGAPlusPlus)
    throw std::invalid_argument("p_full only applies to saga++");
  if (p_full && inner_m) throw std::invalid_argument("set either inner_m or p_full, not both");
  const std::size_t m = inner_m.value_or(std::max<std::size_t>(1, 3 * n / 2));

  SolverConfig cfg;
  switch (a) {
    case Algorithm::GD:
      cfg.dist = BatchDistribution::fixed(n);
      cfg.rule = UpdateRule::SvrgStyle;
      break;
    case Algorithm::SAGA:
      cfg.dist = BatchDistribution::fixed(1);
      cfg.rule = UpdateRule::SagaStyle;
      break;
    case Algorithm::SVRG:
      cfg.dist = BatchDistribution::snapshot(m);
      cfg.rule = UpdateRule::SvrgStyle;
      break;
    case Algorithm::SAGAPlusPlus:
      cfg.dist = p_full ? BatchDistribution::two_point(*p_full) : BatchDistribution::snapshot(m);
      cfg.rule = UpdateRule::SagaStyle;
      break;
  }
  return cfg;
}

double resolve_step(const CompositeObjective& obj, const StepPolicy& policy,
                    double expected_batch) {
  const double n = static_cast<double>(obj.n_samples());
  switch (policy.kind) {
    case StepPolicy::Kind::Adaptive:
      return rates::gamma_adaptive(n, obj.smoothness(), 0.0, expected_batch).gamma;
    case StepPolicy::Kind::Dependent: {
      const ProblemConstants pc = obj.estimate_constants();
      return rates::gamma_dependent(n, pc.L, pc.mu, policy.tau, expected_batch).check.gamma;
    }
    case StepPolicy::Kind::Explicit:
      if (!(policy.gamma > 0.0) || !std::isfinite(policy.gamma))
        throw std::invalid_argument("explicit step size must be positive");
      return policy.gamma;
  }
  return 0.0;
}

RunResult run(const CompositeObjective& obj, const RunConfig& cfg) {
  if (!(cfg.epochs > 0.0)) throw std::invalid_argument("epochs must be positive");
  if (!(cfg.trace_every > 0.0)) throw std::invalid_argument("trace cadence must be positive");
  const std::size_t n = obj.n_samples();

  SolverConfig sc = preset_config(cfg.algorithm, n, cfg.inner_m, cfg.p_full);
  const double expected = sc.dist.expected_batch(n);
  sc.step = resolve_step(obj, cfg.step, expected);
  sc.seed = cfg.seed;
  sc.lazy = cfg.lazy.value_or(obj.reg().kind != Regularizer::Kind::L2);

  Solver solver(obj, sc, cfg.w0);
  DelayInjector delay(cfg.random_access_delay_ns);
  DelayInjector seq_delay(cfg.sequential_access_delay_ns);

  RunResult out;
  out.gamma = sc.step;
  out.expected_batch = expected;

  using clock = std::chrono::steady_clock;
  double wall = 0.0;
  const double nn = static_cast<double>(n);
  const auto budget = static_cast<std::uint64_t>(std::ceil(cfg.epochs * nn));
  const double cadence = cfg.trace_every * nn;
  double f0 = 0.0;

  auto emit = [&]() {
    solver.flush();
    TraceRecord rec;
    rec.epoch_equiv = static_cast<double>(solver.data_accesses()) / nn;
    rec.wall_seconds = wall;
    rec.objective = obj.objective_value(solver.weights());
    if (cfg.f_star) rec.suboptimality = rec.objective - *cfg.f_star;
    rec.nnz_w = static_cast<std::size_t>(
        std::count_if(solver.weights().begin(), solver.weights().end(),
                      [](double v) { return v != 0.0; }));
    out.trace.push_back(rec);
    return rec;
  };

  f0 = emit().objective;
  double next_trace = cadence;
  while (solver.data_accesses() < budget) {
    const auto t0 = clock::now();
    while (solver.data_accesses() < budget &&
           static_cast<double>(solver.data_accesses()) < next_trace) {
      const std::uint64_t before = solver.data_accesses();
      solver.step();
      // Anything beyond a partial batch is a sequential pass (a full step
      // or the first fill of the memory).
      std::size_t random = solver.last_batch_size() < n ? solver.last_batch_size() : 0;
      delay.charge(random);
      seq_delay.charge(static_cast<std::size_t>(solver.data_accesses() - before) - random);
    }
    delay.settle();
    seq_delay.settle();
    wall += std::chrono::duration<double>(clock::now() - t0).count();
    while (next_trace <= static_cast<double>(solver.data_accesses())) next_trace += cadence;

    const TraceRecord rec = emit();
    if (!std::isfinite(rec.objective) || (f0 > 0.0 && rec.objective > cfg.divergence_factor * f0)) {
      std::ostringstream msg;
      msg << "objective " << rec.objective << " exceeded " << cfg.divergence_factor
          << "x the initial value " << f0 << " at epoch " << rec.epoch_equiv
          << "; reduce the step size";
      out.status = RunStatus::Diverged;
      out.diagnostic = msg.str();
      break;
    }
    if (cfg.stop_below && rec.suboptimality && *rec.suboptimality <= *cfg.stop_below) {
      out.status = RunStatus::Converged;
      break;
    }
  }

  solver.flush();
  out.w = solver.weights();
  out.staleness = solver.staleness();
  out.data_accesses = solver.data_accesses();
  out.iterations = solver.iteration();
  out.max_rebuild_drift = solver.max_rebuild_drift();
  return out;
}

}  // namespace batchvr
