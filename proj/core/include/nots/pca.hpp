#pragma once

#include <string>
#include <vector>

#include "nots/array.hpp"

namespace nots {

// Top-2 principal components of row-vector observations.
struct PcaResult {
  std::vector<double> mean;            // (d)
  std::vector<std::vector<double>> components;  // 2 x d, orthonormal
  std::vector<double> eigenvalues;     // descending, all d of them
};

// rows: N x d, N >= 3. Covariance eigen-decomposition via cyclic Jacobi.
PcaResult pca_top2(const Array& rows);

// Project one observation onto the two components.
std::vector<double> pca_project(const PcaResult& pca, const double* row, int d);

// One exported token row.
struct TokenPoint {
  int sample_id = 0;
  int level = 0;
  bool predicted = false;  // false = input token R_k, true = predicted R'_k
  std::vector<double> token;
};

// Fits PCA on all points jointly and writes CSV:
// sample_id,level,source,pc1,pc2 with source in {input, predicted}.
void write_pca_csv(const std::vector<TokenPoint>& points, const std::string& path);

}  // namespace nots
