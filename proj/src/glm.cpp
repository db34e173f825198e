#include "batchvr/glm.hpp"

#include <algorithm>
#include <cmath>

namespace batchvr {

std::string to_string(LossKind kind) {
  return kind == LossKind::Logistic ? "logistic" : "squared";
}

LossKind loss_from_string(const std::string& name) {
  if (name == "logistic") return LossKind::Logistic;
  if (name == "squared" || name == "squared_error") return LossKind::SquaredError;
  throw std::invalid_argument("unknown loss '" + name + "'");
}

Regularizer Regularizer::l1(double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  return {Kind::L1, lambda};
}

Regularizer Regularizer::l2(double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  return {Kind::L2, lambda};
}

double Regularizer::value(std::span<const double> w) const {
  double acc = 0.0;
  switch (kind) {
    case Kind::None:
      return 0.0;
    case Kind::L1:
      for (double v : w) acc += std::abs(v);
      return lambda * acc;
    case Kind::L2:
      for (double v : w) acc += v * v;
      return 0.5 * lambda * acc;
  }
  return 0.0;
}

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// 1 / (1 + exp(-z)) without overflow.
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

CompositeObjective::CompositeObjective(const SparseDataset& data, LossKind loss,
                                       Regularizer reg, std::optional<double> mu_override)
    : data_(&data), loss_(loss), reg_(reg), mu_override_(mu_override) {
  if (loss_ == LossKind::Logistic && !data.has_binary_labels())
    throw std::invalid_argument("logistic loss requires labels in {-1, +1}");
  if (mu_override_ && !(*mu_override_ > 0.0))
    throw std::invalid_argument("mu override must be positive");
  smoothness_ = loss_curvature_bound() * compute_stats(data).max_row_norm_sq + reg_.l2_weight();
}

double CompositeObjective::margin(std::size_t i, std::span<const double> w) const {
  const RowView r = data_->row(i);
  double m = 0.0;
  for (std::size_t k = 0; k < r.nnz(); ++k) m += r.values[k] * w[r.indices[k]];
  return m;
}

double CompositeObjective::loss_value(std::size_t i, double margin) const {
  const double y = data_->label(i);
  if (loss_ == LossKind::Logistic) return softplus(y * margin);
  const double r = margin - y;
  return 0.5 * r * r;
}

double CompositeObjective::loss_derivative(std::size_t i, double margin) const {
  const double y = data_->label(i);
  if (loss_ == LossKind::Logistic) return y * sigmoid(y * margin);
  return margin - y;
}

double CompositeObjective::loss_curvature_bound() const {
  return loss_ == LossKind::Logistic ? 0.25 : 1.0;
}

SparseVector CompositeObjective::component_gradient(std::size_t i,
                                                    std::span<const double> w) const {
  if (i >= n_samples()) throw std::out_of_range("sample index out of range");
  const RowView r = data_->row(i);
  const double s = loss_derivative(i, margin(i, w));
  SparseVector g;
  g.indices.assign(r.indices.begin(), r.indices.end());
  g.values.resize(r.nnz());
  for (std::size_t k = 0; k < r.nnz(); ++k) g.values[k] = s * r.values[k];
  return g;
}

std::vector<double> CompositeObjective::full_gradient(std::span<const double> w) const {
  std::vector<double> g(n_features(), 0.0);
  const std::size_t n = n_samples();
  for (std::size_t i = 0; i < n; ++i) {
    const RowView r = data_->row(i);
    const double s = loss_derivative(i, margin(i, w));
    for (std::size_t k = 0; k < r.nnz(); ++k) g[r.indices[k]] += s * r.values[k];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (double& v : g) v *= inv_n;
  return g;
}

double CompositeObjective::smooth_value(std::span<const double> w) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < n_samples(); ++i) acc += loss_value(i, margin(i, w));
  return acc / static_cast<double>(n_samples());
}

double CompositeObjective::objective_value(std::span<const double> w) const {
  return smooth_value(w) + reg_.value(w);
}

ProblemConstants CompositeObjective::estimate_constants() const {
  double mu = 0.0;
  if (mu_override_) {
    mu = *mu_override_;
  } else if (reg_.l2_weight() > 0.0) {
    mu = reg_.l2_weight();
  } else {
    throw MissingStrongConvexity(
        "strong convexity modulus unknown: supply mu (e.g. --mu) for rate planning");
  }
  return {smoothness_, mu, smoothness_ / mu};
}

}  // namespace batchvr
