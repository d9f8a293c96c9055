// Augmented factor models: decomposition-matrix construction, loading
// extraction by orthogonal deflation, and the closed-form scores, encoder,
// objectives and gradients they solve. Matrices here follow the math
// orientation, features x samples.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "apca/linalg.hpp"
#include "apca/matrix.hpp"

namespace apca {

enum class Flavor { Supervised, Adversarial };

// Local scores need the augmenting data at transform time; encoded scores
// are a linear function of the primary data alone.
enum class Inference { Local, Encoded };

struct Loadings {
  Matrix w;                       // p x k primary loadings
  Matrix d;                       // q x k augmenting loadings
  std::vector<double> eigenvalues;
};

inline double mu_sign(Flavor flavor) {
  return flavor == Flavor::Adversarial ? -1.0 : 1.0;
}

// Subtract each feature's (row's) mean; the means come back for later
// re-application.
inline std::pair<Matrix, std::vector<double>> demean(const Matrix& m) {
  if (m.cols() == 0) throw std::invalid_argument("cannot demean zero samples");
  Matrix centered = m;
  std::vector<double> means(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j);
    means[i] = s / static_cast<double>(m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) centered(i, j) -= means[i];
  }
  return {std::move(centered), std::move(means)};
}

// Orthogonal projector onto the row space of X: P = X^T (X X^T)^+ X.
// The pseudoinverse keeps rank-deficient X (p > n, collinear features) safe.
inline Matrix projection_px(const Matrix& x) {
  Matrix xxt_pinv = pinv_psd(gram(x));
  return matmul(x.transposed(), matmul(xxt_pinv, x));
}

// The (p+q)-square decomposition matrix whose leading eigenvectors hold the
// stacked loadings. X and Y are expected demeaned with matching sample
// counts. Supervised local:
//   [ X X^T    mu X Y^T ]
//   [ Y X^T    mu Y Y^T ]
// Encoded replaces the lower-right block with mu Y P_X Y^T; adversarial
// negates every mu term. The lower-left block never carries mu.
inline Matrix build_decomposition_matrix(const Matrix& x, const Matrix& y,
                                         double mu, Flavor flavor,
                                         Inference inference) {
  if (x.cols() != y.cols())
    throw std::invalid_argument(
        "primary and augmenting data disagree on sample count");
  if (mu < 0.0) throw std::invalid_argument("mu must be nonnegative");

  const std::size_t p = x.rows(), q = y.rows();
  const double smu = mu_sign(flavor) * mu;

  Matrix upper_left = gram(x);
  Matrix upper_right = matmul_bt(x, y);
  Matrix lower_right = inference == Inference::Local
                           ? gram(y)
                           : matmul(y, matmul(projection_px(x), y.transposed()));

  Matrix b(p + q, p + q);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) b(i, j) = upper_left(i, j);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) {
      b(i, p + j) = smu * upper_right(i, j);
      b(p + j, i) = upper_right(i, j);  // Y X^T row block
    }
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < q; ++j) b(p + i, p + j) = smu * lower_right(i, j);
  return b;
}

// Top-k loadings of B by deflated power iteration: component j is the
// dominant eigenpair of B restricted to the orthogonal complement of the
// previous vectors, so the stacked [w; d] columns come out orthonormal.
inline Loadings extract_loadings(const Matrix& b, std::size_t k, std::size_t p,
                                 std::size_t q, std::uint64_t seed) {
  if (b.rows() != p + q || b.cols() != p + q)
    throw std::invalid_argument("decomposition matrix has wrong shape");
  if (k < 1 || k > p + q)
    throw std::invalid_argument("component count out of range");

  const EigenPairs pairs = deflate_dominant(b, k, seed);
  Loadings out;
  out.w = Matrix(p, k);
  out.d = Matrix(q, k);
  out.eigenvalues = pairs.values;
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < p; ++i) out.w(i, j) = pairs.vectors(i, j);
    for (std::size_t i = 0; i < q; ++i) out.d(i, j) = pairs.vectors(p + i, j);
  }
  return out;
}

namespace detail {

// Inverse of a symmetric k x k Gram combination through its eigenvalues.
// Adversarial combinations can be indefinite, so eigenvalues are inverted by
// magnitude; near-zero ones are dropped, which flags the result as singular.
// On PSD input this coincides with pinv_psd.
inline std::pair<Matrix, bool> sym_pinv_indefinite(const Matrix& g,
                                                   double tol_rel = 1e-12) {
  const EigenPairs eig = sym_eig(g);
  double amax = 0.0;
  for (double v : eig.values) amax = std::max(amax, std::abs(v));
  const std::size_t n = g.rows();
  Matrix out(n, n);
  bool singular = false;
  for (std::size_t j = 0; j < n; ++j) {
    if (std::abs(eig.values[j]) <= tol_rel * amax || eig.values[j] == 0.0) {
      singular = true;
      continue;
    }
    const double inv = 1.0 / eig.values[j];
    const std::vector<double> v = eig.vectors.col(j);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) out(r, c) += inv * v[r] * v[c];
  }
  return {std::move(out), singular};
}

inline std::pair<Matrix, bool> gram_combination_pinv(const Matrix& w,
                                                     const Matrix& d,
                                                     double mu, Flavor flavor) {
  Matrix g = matmul(w.transposed(), w) +
             (mu_sign(flavor) * mu) * matmul(d.transposed(), d);
  return sym_pinv_indefinite(g);
}

}  // namespace detail

struct ScoresResult {
  Matrix s;            // k x n
  bool singular_gram;  // Gram combination needed a rank-deficient inverse
};

// Closed-form local scores S = (W^T W +- mu D^T D)^-1 (W^T X +- mu D^T Y),
// the stationary point of the local objective in S.
inline ScoresResult local_scores(const Matrix& w, const Matrix& d,
                                 const Matrix& x, const Matrix& y, double mu,
                                 Flavor flavor) {
  const double smu = mu_sign(flavor) * mu;
  auto [ginv, singular] = detail::gram_combination_pinv(w, d, mu, flavor);
  Matrix rhs = matmul(w.transposed(), x) + smu * matmul(d.transposed(), y);
  return {matmul(ginv, rhs), singular};
}

struct EncoderResult {
  Matrix a;            // k x p
  bool singular_gram;
};

// Closed-form encoder
//   A = (W^T W +- mu D^T D)^-1 (W^T X +- mu D^T Y) X^T (X X^T)^+,
// the stationary point of the encoded objective in A.
inline EncoderResult encoding_matrix(const Matrix& w, const Matrix& d,
                                     const Matrix& x, const Matrix& y,
                                     double mu, Flavor flavor) {
  const ScoresResult scores = local_scores(w, d, x, y, mu, flavor);
  Matrix a = matmul(matmul_bt(scores.s, x), pinv_psd(gram(x)));
  return {std::move(a), scores.singular_gram};
}

// ||X - W S||_F^2 +- mu ||Y - D S||_F^2 with S given directly (local) or
// S = A X (encoded; scores_or_encoder then holds A).
inline double objective(const Matrix& w, const Matrix& d,
                        const Matrix& scores_or_encoder, const Matrix& x,
                        const Matrix& y, double mu, Flavor flavor,
                        Inference inference) {
  const Matrix s = inference == Inference::Local ? scores_or_encoder
                                                 : matmul(scores_or_encoder, x);
  const double rx = frobenius_norm(x - matmul(w, s));
  const double ry = frobenius_norm(y - matmul(d, s));
  return rx * rx + mu_sign(flavor) * mu * ry * ry;
}

struct ObjectiveGrads {
  Matrix w;  // d objective / d W
  Matrix d;  // d objective / d D
  Matrix s_or_a;
};

// Analytic gradients of the objective with respect to each parameter block.
// Local, with sgn = +1 supervised / -1 adversarial:
//   dL/dW = -2 X S^T + 2 W S S^T
//   dL/dD = sgn mu (-2 Y S^T + 2 D S S^T)
//   dL/dS = -2 W^T X + 2 W^T W S + sgn mu (-2 D^T Y + 2 D^T D S)
// Encoded substitutes S = A X and chains through the encoder.
inline ObjectiveGrads objective_grads(const Matrix& w, const Matrix& d,
                                      const Matrix& scores_or_encoder,
                                      const Matrix& x, const Matrix& y,
                                      double mu, Flavor flavor,
                                      Inference inference) {
  const double smu = mu_sign(flavor) * mu;
  const Matrix s = inference == Inference::Local ? scores_or_encoder
                                                 : matmul(scores_or_encoder, x);
  Matrix sst = gram(s);
  ObjectiveGrads g;
  g.w = (-2.0) * matmul_bt(x, s) + 2.0 * matmul(w, sst);
  g.d = smu * ((-2.0) * matmul_bt(y, s) + 2.0 * matmul(d, sst));
  Matrix ds = (-2.0) * matmul(w.transposed(), x) +
              2.0 * matmul(matmul(w.transposed(), w), s) +
              smu * ((-2.0) * matmul(d.transposed(), y) +
                     2.0 * matmul(matmul(d.transposed(), d), s));
  g.s_or_a =
      inference == Inference::Local ? std::move(ds) : matmul_bt(ds, x);
  return g;
}

// Entries of one loading column ranked by magnitude, largest first; exact
// ties keep the lower feature index.
inline std::vector<std::pair<std::size_t, double>> top_loadings(
    const Matrix& w, std::size_t component, std::size_t count) {
  if (component >= w.cols())
    throw std::invalid_argument("component index out of range");
  if (count > w.rows())
    throw std::invalid_argument("requested more entries than features");
  std::vector<std::pair<std::size_t, double>> entries(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) entries[i] = {i, w(i, component)};
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) {
                     return std::abs(a.second) > std::abs(b.second);
                   });
  entries.resize(count);
  return entries;
}

}  // namespace apca
