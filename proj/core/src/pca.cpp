#include "nots/pca.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace nots {

namespace {

// Cyclic Jacobi eigen-decomposition of a symmetric matrix. A is row-major
// d x d and destroyed; V receives the eigenvectors as columns.
void jacobi_eigen(std::vector<double>& A, std::vector<double>& V, int d) {
  V.assign(static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) V[static_cast<std::size_t>(i) * d + i] = 1.0;
  auto a = [&](int i, int j) -> double& { return A[static_cast<std::size_t>(i) * d + j]; };
  auto v = [&](int i, int j) -> double& { return V[static_cast<std::size_t>(i) * d + j]; };

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-24) break;
    for (int p = 0; p < d - 1; ++p)
      for (int q = p + 1; q < d; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < d; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < d; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < d; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
}

}  // namespace

PcaResult pca_top2(const Array& rows) {
  if (rows.rank() != 2) throw ShapeError("pca: expected a 2-d observation matrix");
  const int n = rows.rows(), d = rows.cols();
  if (n < 3) throw std::invalid_argument("pca: need at least 3 tokens, got " +
                                         std::to_string(n));
  PcaResult r;
  r.mean.assign(d, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) r.mean[j] += rows.at(i, j);
  for (double& m : r.mean) m /= n;

  std::vector<double> cov(static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      const double xj = rows.at(i, j) - r.mean[j];
      for (int k = j; k < d; ++k)
        cov[static_cast<std::size_t>(j) * d + k] += xj * (rows.at(i, k) - r.mean[k]);
    }
  for (int j = 0; j < d; ++j)
    for (int k = j; k < d; ++k) {
      cov[static_cast<std::size_t>(j) * d + k] /= (n - 1);
      cov[static_cast<std::size_t>(k) * d + j] = cov[static_cast<std::size_t>(j) * d + k];
    }

  std::vector<double> V;
  jacobi_eigen(cov, V, d);

  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> eig(d);
  for (int j = 0; j < d; ++j) eig[j] = cov[static_cast<std::size_t>(j) * d + j];
  std::sort(order.begin(), order.end(), [&](int a, int b) { return eig[a] > eig[b]; });

  for (int j : order) r.eigenvalues.push_back(eig[j]);
  for (int rank = 0; rank < 2 && rank < d; ++rank) {
    std::vector<double> comp(d);
    for (int k = 0; k < d; ++k) comp[k] = V[static_cast<std::size_t>(k) * d + order[rank]];
    r.components.push_back(std::move(comp));
  }
  // d == 1 degenerate case: pad a zero second component so projections stay 2-d.
  while (r.components.size() < 2) r.components.emplace_back(d, 0.0);
  return r;
}

std::vector<double> pca_project(const PcaResult& pca, const double* row, int d) {
  if (static_cast<int>(pca.mean.size()) != d)
    throw ShapeError("pca_project: dimension mismatch");
  std::vector<double> out(2, 0.0);
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < d; ++k)
      out[c] += pca.components[c][k] * (row[k] - pca.mean[k]);
  return out;
}

void write_pca_csv(const std::vector<TokenPoint>& points, const std::string& path) {
  if (points.size() < 3)
    throw std::invalid_argument("pca export: need at least 3 tokens, got " +
                                std::to_string(points.size()));
  const int d = static_cast<int>(points.front().token.size());
  Array rows({static_cast<int>(points.size()), d});
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (static_cast<int>(points[i].token.size()) != d)
      throw ShapeError("pca export: ragged token dimensions");
    for (int j = 0; j < d; ++j) rows.at(static_cast<int>(i), j) = points[i].token[j];
  }
  PcaResult pca = pca_top2(rows);

  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << "sample_id,level,source,pc1,pc2\n";
  f.precision(17);
  for (const auto& p : points) {
    auto xy = pca_project(pca, p.token.data(), d);
    f << p.sample_id << ',' << p.level << ',' << (p.predicted ? "predicted" : "input")
      << ',' << xy[0] << ',' << xy[1] << '\n';
  }
  if (!f) throw std::runtime_error("pca csv write failed");
}

}  // namespace nots
