#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "batchvr/dataio.hpp"

namespace batchvr {

/// Loss on the margin m = x_i^T w.
///
/// Logistic is log(1 + exp(y m)) with y in {-1, +1}; squared error is
/// (m - y)^2 / 2.
enum class LossKind { Logistic, SquaredError };

std::string to_string(LossKind kind);
LossKind loss_from_string(const std::string& name);

struct Regularizer {
  enum class Kind { None, L1, L2 };

  Kind kind = Kind::None;
  double lambda = 0.0;

  static Regularizer none() { return {}; }
  static Regularizer l1(double lambda);
  static Regularizer l2(double lambda);

  double l1_weight() const { return kind == Kind::L1 ? lambda : 0.0; }
  double l2_weight() const { return kind == Kind::L2 ? lambda : 0.0; }

  /// g(w): lambda * ||w||_1 or lambda/2 * ||w||_2^2.
  double value(std::span<const double> w) const;
};

/// Sparse vector with sorted indices.
struct SparseVector {
  std::vector<Index> indices;
  std::vector<double> values;
};

struct ProblemConstants {
  double L = 0.0;
  double mu = 0.0;
  double kappa = 0.0;
};

/// Thrown when a rate computation needs a strong-convexity modulus that the
/// problem cannot provide (l1-only or unregularised without an override).
class MissingStrongConvexity : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// F(w) = (1/n) sum_i loss_i(x_i^T w) + g(w) over a borrowed dataset.
/// The dataset must outlive the objective.
class CompositeObjective {
 public:
  CompositeObjective(const SparseDataset& data, LossKind loss, Regularizer reg,
                     std::optional<double> mu_override = std::nullopt);

  const SparseDataset& data() const { return *data_; }
  LossKind loss() const { return loss_; }
  const Regularizer& reg() const { return reg_; }
  std::size_t n_samples() const { return data_->n_samples(); }
  std::size_t n_features() const { return data_->n_features(); }

  double margin(std::size_t i, std::span<const double> w) const;
  double loss_value(std::size_t i, double margin) const;
  double loss_derivative(std::size_t i, double margin) const;

  /// f_i'(w) = loss_i'(x_i^T w) x_i, with exactly the support of row i.
  SparseVector component_gradient(std::size_t i, std::span<const double> w) const;

  /// (1/n) sum_i f_i'(w) in one sequential pass over the rows.
  std::vector<double> full_gradient(std::span<const double> w) const;

  /// (1/n) sum_i loss_i(x_i^T w), without the regulariser.
  double smooth_value(std::span<const double> w) const;
  double objective_value(std::span<const double> w) const;

  /// Largest second derivative of the loss over all margins.
  double loss_curvature_bound() const;

  /// L = curvature * max ||x_i||^2 + lambda_2. Always available.
  double smoothness() const { return smoothness_; }

  /// L, mu and kappa = L / mu. mu comes from the override if given, else
  /// from the l2 weight; throws MissingStrongConvexity when neither exists.
  ProblemConstants estimate_constants() const;

 private:
  const SparseDataset* data_;
  LossKind loss_;
  Regularizer reg_;
  std::optional<double> mu_override_;
  double smoothness_ = 0.0;
};

}  // namespace batchvr
