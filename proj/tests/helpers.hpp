#pragma once

#include <Eigen/Dense>

#include <vector>

#include "batchvr/dataio.hpp"
#include "batchvr/random.hpp"

namespace testutil {

// Random CSR data; each entry present with probability `density`.
inline batchvr::SparseDataset random_dataset(batchvr::Rng& rng, std::size_t n, std::size_t d,
                                             double density, bool binary_labels) {
  std::vector<std::size_t> off{0};
  std::vector<batchvr::Index> cols;
  std::vector<double> vals;
  std::vector<double> labels;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (rng.uniform() < density) {
        cols.push_back(static_cast<batchvr::Index>(j));
        vals.push_back(rng.normal());
      }
    }
    off.push_back(vals.size());
    labels.push_back(binary_labels ? (rng.below(2) ? 1.0 : -1.0) : rng.normal());
  }
  return batchvr::SparseDataset(d, std::move(off), std::move(cols), std::move(vals),
                                std::move(labels));
}

inline Eigen::MatrixXd dense(const batchvr::SparseDataset& ds) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ds.n_samples()),
                                            static_cast<Eigen::Index>(ds.n_features()));
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    const batchvr::RowView r = ds.row(i);
    for (std::size_t k = 0; k < r.nnz(); ++k)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r.indices[k])) = r.values[k];
  }
  return X;
}

// Repeated soft thresholding, the definition the closed form must match.
inline double naive_nested_prox(double x, double thr, double drift, std::uint64_t skipped) {
  long double u = x;
  for (std::uint64_t k = 0; k < skipped; ++k) {
    const long double v = u - static_cast<long double>(drift);
    if (v > thr)
      u = v - thr;
    else if (v < -thr)
      u = v + thr;
    else
      u = 0.0L;
  }
  return static_cast<double>(u);
}

}  // namespace testutil
