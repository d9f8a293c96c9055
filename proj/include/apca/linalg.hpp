// Decomposition kernels: Householder QR, cyclic Jacobi for symmetric
// matrices, PSD pseudoinverse, power iteration for the algebraically
// largest eigenpair, and a small QR-iteration eigenvalue oracle used by
// tests. All kernels are pure functions and deterministic for a fixed seed.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "apca/matrix.hpp"
#include "apca/rng.hpp"

namespace apca {

// Eigenvalue estimates in descending order, unit column vectors, and the
// backward error ||Bv - lambda v||_2 / ||B||_F of each pair.
struct EigenPairs {
  std::vector<double> values;
  Matrix vectors;
  std::vector<double> residuals;
};

// Thrown when power iteration hits its budget with a residual that is too
// large to trust; carries the best estimate found so far.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double value,
                   std::vector<double> vector, double residual)
      : std::runtime_error(what),
        value(value),
        vector(std::move(vector)),
        residual(residual) {}

  double value;
  std::vector<double> vector;
  double residual;
};

// Reproducible sign convention: flip v so its largest-magnitude entry is
// positive; ties go to the lowest index.
inline void fix_sign(std::vector<double>& v) {
  std::size_t arg = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > best) {
      best = a;
      arg = i;
    }
  }
  if (v[arg] < 0.0)
    for (double& x : v) x = -x;
}

// Thin Householder QR of an m x n matrix with m >= n: Q is m x n with
// orthonormal columns, R is n x n upper-triangular with nonnegative diagonal.
inline std::pair<Matrix, Matrix> householder_qr(const Matrix& m) {
  const std::size_t rows = m.rows(), cols = m.cols();
  if (rows < cols)
    throw std::invalid_argument("underdetermined QR not supported");

  Matrix r = m;
  std::vector<std::vector<double>> reflectors;
  reflectors.reserve(cols);

  for (std::size_t j = 0; j < cols; ++j) {
    // Reflector annihilating r(j+1.., j); sign chosen against cancellation.
    std::vector<double> v(rows - j);
    double xnorm = 0.0;
    for (std::size_t i = j; i < rows; ++i) {
      v[i - j] = r(i, j);
      xnorm += r(i, j) * r(i, j);
    }
    xnorm = std::sqrt(xnorm);
    if (xnorm > 0.0) {
      const double alpha = v[0] >= 0.0 ? -xnorm : xnorm;
      v[0] -= alpha;
      const double vnorm = norm2(v);
      if (vnorm > 0.0) {
        for (double& x : v) x /= vnorm;
        for (std::size_t c = j; c < cols; ++c) {
          double s = 0.0;
          for (std::size_t i = j; i < rows; ++i) s += v[i - j] * r(i, c);
          s *= 2.0;
          for (std::size_t i = j; i < rows; ++i) r(i, c) -= s * v[i - j];
        }
      } else {
        v.assign(rows - j, 0.0);
      }
    } else {
      v.assign(rows - j, 0.0);
    }
    reflectors.push_back(std::move(v));
  }

  // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of the identity.
  Matrix q(rows, cols);
  for (std::size_t j = 0; j < cols; ++j) q(j, j) = 1.0;
  for (std::size_t j = cols; j-- > 0;) {
    const std::vector<double>& v = reflectors[j];
    for (std::size_t c = 0; c < cols; ++c) {
      double s = 0.0;
      for (std::size_t i = j; i < rows; ++i) s += v[i - j] * q(i, c);
      s *= 2.0;
      for (std::size_t i = j; i < rows; ++i) q(i, c) -= s * v[i - j];
    }
  }

  for (std::size_t i = 0; i < cols; ++i)
    for (std::size_t j = 0; j < i; ++j) r(i, j) = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    if (r(j, j) < 0.0) {
      for (std::size_t c = j; c < cols; ++c) r(j, c) = -r(j, c);
      for (std::size_t i = 0; i < rows; ++i) q(i, j) = -q(i, j);
    }
  }

  Matrix r_sq(cols, cols);
  for (std::size_t i = 0; i < cols; ++i)
    for (std::size_t j = 0; j < cols; ++j) r_sq(i, j) = r(i, j);
  return {std::move(q), std::move(r_sq)};
}

// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Sweeps stop when the off-diagonal Frobenius norm falls below
// 1e-14 * ||M||_F, or after 100 sweeps.
inline EigenPairs sym_eig(const Matrix& m, double sym_tol = 1e-10) {
  const std::size_t n = m.rows();
  if (m.cols() != n) throw std::invalid_argument("matrix not square");
  const double scale = max_abs(m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(m(i, j) - m(j, i)) > sym_tol * std::max(scale, 1e-300))
        throw std::invalid_argument("matrix not symmetric");

  Matrix a = m;
  Matrix v = Matrix::identity(n);
  const double norm = frobenius_norm(m);
  const double off_target = 1e-14 * norm;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
    if (std::sqrt(off) <= off_target) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t =
            (theta >= 0.0 ? 1.0 : -1.0) /
            (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  EigenPairs out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  out.residuals.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    std::vector<double> col = v.col(order[j]);
    const double cn = norm2(col);
    if (cn > 0.0)
      for (double& x : col) x /= cn;
    fix_sign(col);
    out.vectors.set_col(j, col);
    std::vector<double> bv = matvec(m, col);
    for (std::size_t i = 0; i < n; ++i) bv[i] -= out.values[j] * col[i];
    out.residuals[j] = norm > 0.0 ? norm2(bv) / norm : 0.0;
  }
  return out;
}

// Moore-Penrose pseudoinverse of a symmetric PSD matrix: eigenvalues above
// rank_tol_rel * lambda_max are inverted, the rest (including small
// negatives from roundoff) are zeroed.
inline Matrix pinv_psd(const Matrix& m, double rank_tol_rel = 1e-12) {
  const EigenPairs eig = sym_eig(m);
  const std::size_t n = m.rows();
  const double lmax = eig.values.empty() ? 0.0 : std::max(eig.values[0], 0.0);
  Matrix out(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    if (eig.values[j] <= rank_tol_rel * lmax || eig.values[j] <= 0.0) continue;
    const double inv = 1.0 / eig.values[j];
    const std::vector<double> v = eig.vectors.col(j);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) out(r, c) += inv * v[r] * v[c];
  }
  return out;
}

namespace detail {

// One power-iteration run on B + shift*I. Returns true when successive
// iterates agree to tol up to sign.
inline bool power_iterate(const Matrix& b, double shift, double tol,
                          std::size_t max_iter, std::vector<double>& v) {
  const std::size_t n = b.rows();
  for (std::size_t it = 0; it < max_iter; ++it) {
    std::vector<double> w = matvec(b, v);
    if (shift != 0.0)
      for (std::size_t i = 0; i < n; ++i) w[i] += shift * v[i];
    const double wn = norm2(w);
    if (wn < 1e-300) return true;  // B v ~ 0: v already spans a null direction
    for (double& x : w) x /= wn;
    double dplus = 0.0, dminus = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dp = w[i] - v[i];
      const double dm = w[i] + v[i];
      dplus += dp * dp;
      dminus += dm * dm;
    }
    v = std::move(w);
    if (std::sqrt(std::min(dplus, dminus)) <= tol) return true;
  }
  return false;
}

}  // namespace detail

// Algebraically largest eigenpair of a square matrix with a real spectrum.
// Power iteration converges to the eigenvalue of largest magnitude; whenever
// that comes out negative, the converged pair is removed by Wielandt
// deflation (projecting along the matching left eigenvector, which leaves
// the remaining eigenvectors untouched even for nonsymmetric input) and the
// iteration restarts, until the dominant remaining eigenvalue is nonnegative
// or none are left. A +-magnitude tie never converges unshifted, so that
// case falls back to one shifted pass on B + ||B||_F I. Eigenvalue estimates
// are Rayleigh quotients; convergence is measured on the iterate change up
// to sign. Each pass runs at most max_iter iterations.
inline std::tuple<double, std::vector<double>, double> dominant_eigenpair(
    const Matrix& b, double tol = 1e-12, std::size_t max_iter = 10000,
    std::uint64_t seed = 0) {
  const std::size_t n = b.rows();
  if (b.cols() != n) throw std::invalid_argument("matrix not square");
  const double bnorm = frobenius_norm(b);

  RandomStream rng(seed);
  auto fresh_unit = [&] {
    std::vector<double> u(n);
    for (double& x : u) x = rng.next_gaussian();
    const double un = norm2(u);
    for (double& x : u) x /= un;
    return u;
  };

  std::vector<double> v = fresh_unit();
  if (bnorm == 0.0) {
    fix_sign(v);
    return {0.0, v, 0.0};
  }

  // Deflated (right, left/denominator) pairs of negative eigenvalues found
  // along the way. project(u, rights, lefts) subtracts each right vector
  // scaled by the left-vector component, the spectral projector for simple
  // eigenvalues.
  std::vector<std::vector<double>> rights, lefts;
  std::vector<double> denoms;
  auto project = [&](std::vector<double>& u, bool transposed) {
    for (std::size_t i = 0; i < rights.size(); ++i) {
      const auto& dir = transposed ? lefts[i] : rights[i];
      const auto& dual = transposed ? rights[i] : lefts[i];
      const double c = dot(dual, u) / denoms[i];
      for (std::size_t r = 0; r < n; ++r) u[r] -= c * dir[r];
    }
  };

  auto run_power = [&](const Matrix& op, bool transposed,
                       std::vector<double>& vec) {
    for (int attempt = 0;; ++attempt) {
      project(vec, transposed);
      const double vn = norm2(vec);
      if (vn >= 1e-8) {
        for (double& x : vec) x /= vn;
        break;
      }
      if (attempt == 3) return false;  // start vector stuck in deflated span
      vec = fresh_unit();
    }
    for (std::size_t it = 0; it < max_iter; ++it) {
      std::vector<double> w = matvec(op, vec);
      project(w, transposed);
      const double wn = norm2(w);
      if (wn < 1e-300) return true;  // null direction; Rayleigh settles it
      for (double& x : w) x /= wn;
      double dplus = 0.0, dminus = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        dplus += (w[i] - vec[i]) * (w[i] - vec[i]);
        dminus += (w[i] + vec[i]) * (w[i] + vec[i]);
      }
      vec = std::move(w);
      if (std::sqrt(std::min(dplus, dminus)) <= tol) return true;
    }
    return false;
  };

  auto rayleigh = [&](const std::vector<double>& u) {
    return dot(u, matvec(b, u));
  };

  Matrix bt;  // built lazily; only needed when negatives show up
  double value = 0.0;
  bool converged = false;
  for (std::size_t pass = 0; pass < n; ++pass) {
    if (pass > 0) v = fresh_unit();
    converged = run_power(b, false, v);
    value = rayleigh(v);
    if (value >= 0.0 || !converged || pass + 1 == n) break;

    // Left eigenvector of the same eigenvalue from the transposed problem.
    if (bt.rows() == 0) bt = b.transposed();
    std::vector<double> left = fresh_unit();
    const bool left_ok = run_power(bt, true, left);
    const double denom = dot(left, v);
    if (!left_ok || std::abs(denom) < 1e-8) {
      converged = false;  // cannot deflate safely; use the shifted fallback
      break;
    }
    rights.push_back(v);
    lefts.push_back(std::move(left));
    denoms.push_back(denom);
  }

  if (value < 0.0 && !converged) {
    // Possible +-lambda magnitude tie; the shift separates the pair.
    v = fresh_unit();
    converged = detail::power_iterate(b, bnorm, tol, max_iter, v);
    value = rayleigh(v);
  }

  std::vector<double> res = matvec(b, v);
  for (std::size_t i = 0; i < n; ++i) res[i] -= value * v[i];
  const double residual = norm2(res) / bnorm;

  if (!converged && residual > 1e-6)
    throw ConvergenceError("dominant eigenpair did not converge", value, v,
                           residual);
  fix_sign(v);
  return {value, v, residual};
}

// Leading k pairs by repeated dominant-eigenpair extraction, each step
// restricted to the orthogonal complement of the vectors found so far. The
// restriction uses an explicit complement basis updated by Householder
// reflections; this equals projecting with P = I - U U^T but keeps spurious
// null directions out of the iteration. Component j runs with seed ^ j.
// The returned vectors are orthonormal by construction; for nonsymmetric
// input they are Schur-type basis vectors rather than eigenvectors, which is
// what the residuals report.
inline EigenPairs deflate_dominant(const Matrix& b, std::size_t k,
                                   std::uint64_t seed, double tol = 1e-12,
                                   std::size_t max_iter = 10000) {
  const std::size_t n = b.rows();
  if (b.cols() != n) throw std::invalid_argument("matrix not square");
  if (k == 0 || k > n)
    throw std::invalid_argument("component count out of range");

  const double bnorm = frobenius_norm(b);
  EigenPairs out;
  out.vectors = Matrix(n, k);

  Matrix basis = Matrix::identity(n);  // n x r complement basis, shrinks by 1
  Matrix restricted = b;               // basis^T B basis, r x r

  for (std::size_t j = 0; j < k; ++j) {
    auto [value, rv, rres] =
        dominant_eigenpair(restricted, tol, max_iter, seed ^ (j + 1));
    (void)rres;

    std::vector<double> u = matvec(basis, rv);
    const double un = norm2(u);
    for (double& x : u) x /= un;
    fix_sign(u);

    out.values.push_back(value);
    out.vectors.set_col(j, u);
    std::vector<double> bu = matvec(b, u);
    for (std::size_t i = 0; i < n; ++i) bu[i] -= value * u[i];
    out.residuals.push_back(bnorm > 0.0 ? norm2(bu) / bnorm : 0.0);

    if (j + 1 == k) break;

    // Householder reflection taking rv to +-e1; columns 2..r of (basis * H)
    // span the complement of u inside the old complement space.
    const std::size_t r = restricted.rows();
    std::vector<double> h = rv;
    h[0] += (rv[0] >= 0.0 ? 1.0 : -1.0);
    const double hn = norm2(h);
    for (double& x : h) x /= hn;

    auto reflect_cols = [&](Matrix& m) {
      for (std::size_t row = 0; row < m.rows(); ++row) {
        double s = 0.0;
        for (std::size_t c = 0; c < r; ++c) s += m(row, c) * h[c];
        s *= 2.0;
        for (std::size_t c = 0; c < r; ++c) m(row, c) -= s * h[c];
      }
    };
    auto reflect_rows = [&](Matrix& m) {
      for (std::size_t col = 0; col < m.cols(); ++col) {
        double s = 0.0;
        for (std::size_t rr = 0; rr < r; ++rr) s += m(rr, col) * h[rr];
        s *= 2.0;
        for (std::size_t rr = 0; rr < r; ++rr) m(rr, col) -= s * h[rr];
      }
    };

    reflect_cols(basis);
    reflect_cols(restricted);
    reflect_rows(restricted);

    Matrix nb(n, r - 1);
    for (std::size_t row = 0; row < n; ++row)
      for (std::size_t c = 1; c < r; ++c) nb(row, c - 1) = basis(row, c);
    Matrix nr(r - 1, r - 1);
    for (std::size_t row = 1; row < r; ++row)
      for (std::size_t c = 1; c < r; ++c)
        nr(row - 1, c - 1) = restricted(row, c);
    basis = std::move(nb);
    restricted = std::move(nr);
  }
  return out;
}

// Test oracle: eigenvalue real parts of a small square matrix, descending.
// Householder reduction to Hessenberg form followed by unshifted QR sweeps;
// eigenvalues are read off the quasi-triangular result, 2x2 blocks via the
// quadratic formula. When max_imag is given it receives the largest
// imaginary-part magnitude encountered in those blocks.
inline std::vector<double> eig_values_oracle(const Matrix& b,
                                             std::size_t sweeps = 500,
                                             double* max_imag = nullptr) {
  const std::size_t n = b.rows();
  if (b.cols() != n) throw std::invalid_argument("matrix not square");
  if (n > 64)
    throw std::invalid_argument("oracle restricted to small matrices");
  if (max_imag) *max_imag = 0.0;
  if (n == 0) return {};

  Matrix h = b;
  // Hessenberg reduction by Householder similarity transforms.
  for (std::size_t j = 0; j + 2 < n; ++j) {
    std::vector<double> v(n - j - 1);
    double xnorm = 0.0;
    for (std::size_t i = j + 1; i < n; ++i) {
      v[i - j - 1] = h(i, j);
      xnorm += h(i, j) * h(i, j);
    }
    xnorm = std::sqrt(xnorm);
    if (xnorm == 0.0) continue;
    const double alpha = v[0] >= 0.0 ? -xnorm : xnorm;
    v[0] -= alpha;
    const double vn = norm2(v);
    if (vn == 0.0) continue;
    for (double& x : v) x /= vn;
    for (std::size_t c = 0; c < n; ++c) {
      double s = 0.0;
      for (std::size_t i = j + 1; i < n; ++i) s += v[i - j - 1] * h(i, c);
      s *= 2.0;
      for (std::size_t i = j + 1; i < n; ++i) h(i, c) -= s * v[i - j - 1];
    }
    for (std::size_t rw = 0; rw < n; ++rw) {
      double s = 0.0;
      for (std::size_t c = j + 1; c < n; ++c) s += h(rw, c) * v[c - j - 1];
      s *= 2.0;
      for (std::size_t c = j + 1; c < n; ++c) h(rw, c) -= s * v[c - j - 1];
    }
  }

  const double scale = std::max(frobenius_norm(b), 1e-300);
  for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
    // Deflate negligible subdiagonals, then one unshifted QR step H <- RQ.
    bool any = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (std::abs(h(i + 1, i)) <=
          1e-16 * (std::abs(h(i, i)) + std::abs(h(i + 1, i + 1))))
        h(i + 1, i) = 0.0;
      else
        any = true;
    }
    if (!any) break;
    auto [q, r] = householder_qr(h);
    h = matmul(r, q);
  }

  std::vector<double> values;
  double imag_max = 0.0;
  std::size_t i = 0;
  while (i < n) {
    const bool last = (i + 1 == n);
    const double sub = last ? 0.0 : h(i + 1, i);
    if (last || std::abs(sub) <= 1e-9 * scale) {
      values.push_back(h(i, i));
      i += 1;
    } else {
      const double a = h(i, i), bb = h(i, i + 1), c = h(i + 1, i),
                   d = h(i + 1, i + 1);
      const double tr = a + d, det = a * d - bb * c;
      const double disc = tr * tr / 4.0 - det;
      if (disc >= 0.0) {
        const double s = std::sqrt(disc);
        values.push_back(tr / 2.0 + s);
        values.push_back(tr / 2.0 - s);
      } else {
        values.push_back(tr / 2.0);
        values.push_back(tr / 2.0);
        imag_max = std::max(imag_max, std::sqrt(-disc));
      }
      i += 2;
    }
  }
  if (max_imag) *max_imag = imag_max;
  std::sort(values.begin(), values.end(), std::greater<double>());
  return values;
}

// Largest principal angle between the column spans of two matrices with the
// same column count. Computed through the sine, sigma_max((I - Q_b Q_b^T) Q_a),
// which stays accurate for nearly identical subspaces.
inline double subspace_angle(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols() || a.rows() != b.rows())
    throw std::invalid_argument("subspace angle needs equal shapes");
  auto [qa, ra] = householder_qr(a);
  auto [qb, rb] = householder_qr(b);
  Matrix cross = matmul(qb.transposed(), qa);       // k x k
  Matrix proj = matmul(qb, cross);                  // m x k
  Matrix diff = qa - proj;                          // (I - P_b) Q_a
  Matrix g = matmul(diff.transposed(), diff);
  const EigenPairs eig = sym_eig(g);
  const double s2 = eig.values.empty() ? 0.0 : std::max(eig.values[0], 0.0);
  return std::asin(std::min(1.0, std::sqrt(s2)));
}

}  // namespace apca
