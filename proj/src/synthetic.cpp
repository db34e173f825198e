#include "batchvr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "batchvr/prox.hpp"
#include "batchvr/random.hpp"

namespace batchvr {

namespace {

// Floyd's algorithm: k distinct values from [0, d), sorted.
std::vector<Index> pick_columns(Rng& rng, std::size_t d, std::size_t k) {
  std::vector<Index> out;
  if (k == d) {
    out.resize(d);
    for (std::size_t j = 0; j < d; ++j) out[j] = static_cast<Index>(j);
    return out;
  }
  std::unordered_set<std::size_t> chosen;
  for (std::size_t j = d - k; j < d; ++j) {
    const std::size_t t = static_cast<std::size_t>(rng.below(j + 1));
    chosen.insert(chosen.count(t) ? j : t);
  }
  out.assign(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

SyntheticProblem generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n == 0 || spec.d == 0) throw std::invalid_argument("n and d must be positive");
  if (!(spec.density > 0.0 && spec.density <= 1.0))
    throw std::invalid_argument("density must lie in (0, 1]");
  if (!(spec.column_spread >= 1.0)) throw std::invalid_argument("column_spread must be >= 1");
  if (!spec.l1_lambda && !(spec.target_kappa > 1.0))
    throw std::invalid_argument("target kappa must exceed 1: kappa = L/mu >= 1 + curvature/lambda_2");
  if (spec.l1_lambda && !(*spec.l1_lambda >= 0.0))
    throw std::invalid_argument("l1 lambda must be >= 0");

  Rng rng(spec.seed);
  const std::size_t n = spec.n;
  const std::size_t d = spec.d;
  const std::size_t k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(spec.density * static_cast<double>(d))), 1, d);

  std::vector<double> scale(d, 1.0);
  if (d > 1)
    for (std::size_t j = 0; j < d; ++j)
      scale[j] = std::pow(spec.column_spread, -static_cast<double>(j) / static_cast<double>(d - 1));

  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<Index> cols;
  std::vector<double> vals;
  cols.reserve(n * k);
  vals.reserve(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<Index> c = pick_columns(rng, d, k);
    double norm_sq = 0.0;
    const std::size_t start = vals.size();
    for (Index j : c) {
      double v = rng.normal() * scale[j];
      if (v == 0.0) v = scale[j];
      cols.push_back(j);
      vals.push_back(v);
      norm_sq += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (std::size_t e = start; e < vals.size(); ++e) vals[e] *= inv;
    offsets[i + 1] = vals.size();
  }

  // Sparse planted model, rescaled so margins have standard deviation 2.
  std::vector<double> planted(d, 0.0);
  const std::size_t support = std::max<std::size_t>(1, d / 10);
  for (Index j : pick_columns(rng, d, support)) planted[j] = rng.normal();
  std::vector<double> margins(n, 0.0);
  double m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0.0;
    for (std::size_t e = offsets[i]; e < offsets[i + 1]; ++e) m += vals[e] * planted[cols[e]];
    margins[i] = m;
    m2 += m * m;
  }
  const double rms = std::sqrt(m2 / static_cast<double>(n));
  const double gain = rms > 0.0 ? 2.0 / rms : 1.0;
  for (double& v : planted) v *= gain;

  std::vector<double> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double m = margins[i] * gain;
    if (spec.loss == LossKind::Logistic) {
      // The loss log(1 + exp(y m)) is the likelihood of P(y | x) = sigmoid(-y m).
      labels[i] = rng.uniform() < sigmoid(-m) ? 1.0 : -1.0;
    } else {
      labels[i] = m + 0.1 * rng.normal();
    }
  }

  SyntheticProblem out{SparseDataset(d, std::move(offsets), std::move(cols), std::move(vals),
                                     std::move(labels)),
                       Regularizer::none(), std::nullopt, std::move(planted), std::nullopt,
                       std::nullopt};
  const double curvature = spec.loss == LossKind::Logistic ? 0.25 : 1.0;
  if (spec.l1_lambda) {
    out.reg = Regularizer::l1(*spec.l1_lambda);
  } else {
    const double r2 = compute_stats(out.data).max_row_norm_sq;
    const double lambda = curvature * r2 / (spec.target_kappa - 1.0);
    out.reg = Regularizer::l2(lambda);
    out.mu = lambda;
  }

  if (spec.solve_reference) {
    const CompositeObjective obj(out.data, spec.loss, out.reg);
    ReferenceSolution ref = reference_optimum(obj);
    out.f_star = ref.f;
    out.w_star = std::move(ref.w);
  }
  return out;
}

double data_gram_norm(const SparseDataset& data, std::size_t iters, std::uint64_t seed) {
  const std::size_t n = data.n_samples();
  const std::size_t d = data.n_features();
  Rng rng(seed);
  std::vector<double> v(d), u(d);
  for (double& x : v) x = rng.normal();
  double lambda = 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    double nv = 0.0;
    for (double x : v) nv += x * x;
    nv = std::sqrt(nv);
    if (nv == 0.0) return 0.0;
    for (double& x : v) x /= nv;
    std::fill(u.begin(), u.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const RowView r = data.row(i);
      double m = 0.0;
      for (std::size_t e = 0; e < r.nnz(); ++e) m += r.values[e] * v[r.indices[e]];
      for (std::size_t e = 0; e < r.nnz(); ++e) u[r.indices[e]] += m * r.values[e];
    }
    lambda = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      u[j] /= static_cast<double>(n);
      lambda += u[j] * v[j];
    }
    std::swap(u, v);
  }
  return lambda;
}

ReferenceSolution reference_optimum(const CompositeObjective& obj, const ReferenceOptions& opts) {
  const std::size_t d = obj.n_features();
  // Power iteration approaches the top eigenvalue from below; pad it.
  const double lf = 1.05 * obj.loss_curvature_bound() * data_gram_norm(obj.data()) + 1e-12;
  const double step = 1.0 / lf;
  const Regularizer& reg = obj.reg();
  auto prox = [&](double v) {
    switch (reg.kind) {
      case Regularizer::Kind::L1:
        return prox_l1(v, step * reg.lambda);
      case Regularizer::Kind::L2:
        return prox_l2(v, step, reg.lambda);
      case Regularizer::Kind::None:
        return v;
    }
    return v;
  };

  std::vector<double> x(d, 0.0), y(d, 0.0), next(d, 0.0);
  double t = 1.0;
  ReferenceSolution out;
  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    const std::vector<double> g = obj.full_gradient(y);
    double gm = 0.0;
    double restart = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      next[j] = prox(y[j] - step * g[j]);
      gm = std::max(gm, std::abs(y[j] - next[j]) * lf);
      restart += (y[j] - next[j]) * (next[j] - x[j]);
    }
    out.iterations = it + 1;
    out.gradient_mapping = gm;
    if (gm <= opts.tol) {
      x = next;
      break;
    }
    if (restart > 0.0) t = 1.0;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double mom = (t - 1.0) / t_next;
    for (std::size_t j = 0; j < d; ++j) {
      y[j] = next[j] + mom * (next[j] - x[j]);
      x[j] = next[j];
    }
    t = t_next;
  }
  out.w = std::move(x);
  out.f = obj.objective_value(out.w);
  return out;
}

}  // namespace batchvr
