// Randomized subspace-iteration eigendecomposition: project B onto the range
// of a few filtered gaussian probes, solve the small projected problem with
// the deflation solver, and map the vectors back. Trades the O(P^3) exact
// decomposition for O(P^2 (k+s)).

#pragma once

#include <cstdint>
#include <stdexcept>

#include "apca/linalg.hpp"
#include "apca/matrix.hpp"
#include "apca/rng.hpp"

namespace apca {

struct ApproxParams {
  std::size_t k;      // components to return
  std::size_t s = 5;  // oversampling columns
  std::size_t t = 5;  // power-iteration rounds
};

// Standard-normal test matrix filled row-major from the seeded stream.
inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols,
                              std::uint64_t seed) {
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("gaussian matrix needs positive dimensions");
  RandomStream rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.next_gaussian();
  return m;
}

// Approximate top-k eigenpairs of a square B:
//   G = B Omega; QR
//   t rounds of (G~ = B^T Q; QR; G = B Q~; QR)
//   B_approx = Q^T B Q, solved by deflation; U = Q V
// Residuals are recomputed against the full B. The projected problem needs
// k + s <= dim(B); callers that know the sample count enforce the tighter
// k + s < min(n, p + q).
inline EigenPairs approx_eig(const Matrix& b, const ApproxParams& params,
                             std::uint64_t seed) {
  const std::size_t dim = b.rows();
  if (b.cols() != dim) throw std::invalid_argument("matrix not square");
  const std::size_t width = params.k + params.s;
  if (params.k < 1) throw std::invalid_argument("component count out of range");
  if (width > dim)
    throw std::invalid_argument("k + s must not exceed the matrix dimension");

  Matrix omega = gaussian_matrix(dim, width, seed);
  Matrix bt = b.transposed();

  auto orth = [](const Matrix& g) { return householder_qr(g).first; };
  Matrix q = orth(matmul(b, omega));
  for (std::size_t i = 0; i < params.t; ++i) {
    Matrix qt = orth(matmul(bt, q));
    q = orth(matmul(b, qt));
  }

  Matrix b_small = matmul(q.transposed(), matmul(b, q));
  const EigenPairs small =
      deflate_dominant(b_small, params.k, seed ^ 0x5DEECE66DULL);

  EigenPairs out;
  out.values = small.values;
  out.vectors = matmul(q, small.vectors);
  const double bnorm = frobenius_norm(b);
  for (std::size_t j = 0; j < params.k; ++j) {
    std::vector<double> u = out.vectors.col(j);
    fix_sign(u);
    out.vectors.set_col(j, u);
    std::vector<double> r = matvec(b, u);
    for (std::size_t i = 0; i < dim; ++i) r[i] -= out.values[j] * u[i];
    out.residuals.push_back(bnorm > 0.0 ? norm2(r) / bnorm : 0.0);
  }
  return out;
}

}  // namespace apca
