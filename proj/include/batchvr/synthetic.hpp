#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "batchvr/dataio.hpp"
#include "batchvr/glm.hpp"

namespace batchvr {

/// Desk-scale problem with known constants.
///
/// Every row has round(density * d) nonzeros at uniformly chosen columns;
/// column j is scaled by column_spread^(-j/(d-1)) before the row is
/// normalised to unit length. Labels come from a sparse planted model.
/// Without l1_lambda the problem is l2-regularised with
/// lambda_2 = curvature / (target_kappa - 1), so L / mu = target_kappa.
struct SyntheticSpec {
  std::size_t n = 1000;
  std::size_t d = 50;
  double density = 0.1;
  double target_kappa = 100.0;
  LossKind loss = LossKind::Logistic;
  std::uint64_t seed = 0;
  double column_spread = 10.0;
  std::optional<double> l1_lambda;
  /// Solve for w* and F* (accelerated proximal gradient).
  bool solve_reference = true;
};

struct SyntheticProblem {
  SparseDataset data;
  Regularizer reg;
  /// mu of the l2 problem; empty for l1.
  std::optional<double> mu;
  std::vector<double> w_planted;
  std::optional<std::vector<double>> w_star;
  std::optional<double> f_star;
};

/// Throws std::invalid_argument for empty shapes, density outside (0, 1]
/// or an l2 problem with target_kappa <= 1.
SyntheticProblem generate_synthetic(const SyntheticSpec& spec);

struct ReferenceOptions {
  double tol = 1e-12;  ///< sup-norm of the gradient mapping
  std::size_t max_iter = 200000;
};

struct ReferenceSolution {
  std::vector<double> w;
  double f = 0.0;
  double gradient_mapping = 0.0;
  std::size_t iterations = 0;
};

/// Largest eigenvalue of (1/n) X^T X by power iteration.
double data_gram_norm(const SparseDataset& data, std::size_t iters = 200, std::uint64_t seed = 1);

/// Minimiser of the objective by restarted accelerated proximal gradient,
/// stepping with the exact curvature of the loss rather than the per-sample L.
ReferenceSolution reference_optimum(const CompositeObjective& obj, const ReferenceOptions& opts = {});

}  // namespace batchvr
