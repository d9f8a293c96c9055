// Fit / transform / reconstruct lifecycle and the versioned binary model
// format. User-facing matrices are samples x features; the math orientation
// is internal.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "apca/core.hpp"
#include "apca/linalg.hpp"
#include "apca/matrix.hpp"
#include "apca/randomized.hpp"

namespace apca {

enum class Decomp { Exact, Approx };

struct ApcaConfig {
  Flavor flavor = Flavor::Supervised;
  Inference inference = Inference::Encoded;
  std::size_t k = 2;
  double mu = 1.0;
  Decomp decomp = Decomp::Exact;
  std::size_t oversample = 5;   // approx only
  std::size_t power_iters = 5;  // approx only
  bool center_primary = true;
  bool center_augmenting = true;
  std::uint64_t seed = 0;
};

struct ApcaModel {
  ApcaConfig config;
  Matrix w;  // p x k
  Matrix d;  // q x k
  Matrix a;  // k x p, populated only for encoded inference
  std::vector<double> x_means;
  std::vector<double> y_means;
  std::vector<double> eigenvalues;
  bool singular_gram_warning = false;

  std::size_t p() const { return w.rows(); }
  std::size_t q() const { return d.rows(); }
  std::size_t k() const { return w.cols(); }
};

namespace detail {

inline Matrix center_columns(const Matrix& samples_by_features,
                             const std::vector<double>& means) {
  Matrix out = samples_by_features;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) -= means[j];
  return out;
}

}  // namespace detail

inline ApcaModel fit(const ApcaConfig& config, const Matrix& x,
                     const Matrix& y) {
  if (x.rows() != y.rows())
    throw std::invalid_argument(
        "primary and augmenting data disagree on sample count");
  if (x.rows() == 0) throw std::invalid_argument("fit requires samples");
  if (config.mu < 0.0) throw std::invalid_argument("mu must be nonnegative");
  const std::size_t p = x.cols(), q = y.cols(), n = x.rows();
  if (config.k < 1 || config.k > p + q)
    throw std::invalid_argument("component count out of range");
  if ((config.center_primary || config.center_augmenting) && n < 2)
    throw std::invalid_argument("centering requires at least 2 samples");

  Matrix xt = x.transposed();
  Matrix yt = y.transposed();
  std::vector<double> x_means(p, 0.0), y_means(q, 0.0);
  if (config.center_primary) std::tie(xt, x_means) = demean(xt);
  if (config.center_augmenting) std::tie(yt, y_means) = demean(yt);

  Matrix b = build_decomposition_matrix(xt, yt, config.mu, config.flavor,
                                        config.inference);

  ApcaModel model;
  model.config = config;
  model.x_means = std::move(x_means);
  model.y_means = std::move(y_means);

  if (config.decomp == Decomp::Exact) {
    Loadings l = extract_loadings(b, config.k, p, q, config.seed);
    model.w = std::move(l.w);
    model.d = std::move(l.d);
    model.eigenvalues = std::move(l.eigenvalues);
  } else {
    if (config.k + config.oversample >= std::min(n, p + q))
      throw std::invalid_argument("k + s must be < min(n, p + q)");
    const EigenPairs pairs = approx_eig(
        b, {.k = config.k, .s = config.oversample, .t = config.power_iters},
        config.seed);
    model.w = Matrix(p, config.k);
    model.d = Matrix(q, config.k);
    for (std::size_t j = 0; j < config.k; ++j) {
      for (std::size_t i = 0; i < p; ++i) model.w(i, j) = pairs.vectors(i, j);
      for (std::size_t i = 0; i < q; ++i)
        model.d(i, j) = pairs.vectors(p + i, j);
    }
    model.eigenvalues = pairs.values;
  }

  if (config.inference == Inference::Encoded) {
    EncoderResult enc =
        encoding_matrix(model.w, model.d, xt, yt, config.mu, config.flavor);
    model.a = std::move(enc.a);
    model.singular_gram_warning = enc.singular_gram;
  } else {
    // Local scores are computed at transform time; flag a rank-deficient
    // Gram combination now so it persists with the model.
    model.singular_gram_warning =
        detail::gram_combination_pinv(model.w, model.d, config.mu,
                                      config.flavor)
            .second;
  }
  return model;
}

// Factor scores for new data, samples x k. Encoded models ignore y; local
// models require it.
inline Matrix transform(const ApcaModel& model, const Matrix& x,
                        const Matrix* y = nullptr) {
  if (x.cols() != model.p())
    throw std::invalid_argument("primary data has wrong feature count");
  Matrix xc = detail::center_columns(x, model.x_means).transposed();
  if (model.config.inference == Inference::Encoded)
    return matmul(model.a, xc).transposed();

  if (y == nullptr)
    throw std::runtime_error(
        "local inference requires augmenting data at transform time");
  if (y->cols() != model.q() || y->rows() != x.rows())
    throw std::invalid_argument("augmenting data has wrong shape");
  Matrix yc = detail::center_columns(*y, model.y_means).transposed();
  return local_scores(model.w, model.d, xc, yc, model.config.mu,
                      model.config.flavor)
      .s.transposed();
}

// Rebuild both data blocks from the scores: X^ = W S + means, Y^ = D S + means.
inline std::pair<Matrix, Matrix> reconstruct(const ApcaModel& model,
                                             const Matrix& x,
                                             const Matrix* y = nullptr) {
  Matrix scores = transform(model, x, y).transposed();  // k x n
  Matrix xhat = matmul(model.w, scores).transposed();
  Matrix yhat = matmul(model.d, scores).transposed();
  for (std::size_t i = 0; i < xhat.rows(); ++i)
    for (std::size_t j = 0; j < xhat.cols(); ++j)
      xhat(i, j) += model.x_means[j];
  for (std::size_t i = 0; i < yhat.rows(); ++i)
    for (std::size_t j = 0; j < yhat.cols(); ++j)
      yhat(i, j) += model.y_means[j];
  return {std::move(xhat), std::move(yhat)};
}

// ---- persistence ----------------------------------------------------------

class ModelFormatError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, BadVersion, Truncated, BadChecksum, NonFinite,
                    BadField };

  ModelFormatError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind(kind) {}

  Kind kind;
};

namespace detail {

// CRC-32 (IEEE, reflected, poly 0xEDB88320).
inline std::uint32_t crc32(const std::vector<std::uint8_t>& bytes) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int b = 0; b < 8; ++b)
        c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::uint8_t v : bytes) crc = table[(crc ^ v) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

struct ByteWriter {
  std::vector<std::uint8_t> bytes;

  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back((v >> (8 * i)) & 0xFFu);
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back((v >> (8 * i)) & 0xFFu);
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64s(const std::vector<double>& vs) {
    for (double v : vs) f64(v);
  }
};

struct ByteReader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > bytes.size())
      throw ModelFormatError(ModelFormatError::Kind::Truncated,
                             "truncated model file");
  }
  std::uint8_t u8() {
    need(1);
    return bytes[pos++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<double> f64s(std::size_t n) {
    std::vector<double> vs(n);
    for (double& v : vs) v = f64();
    return vs;
  }
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize(const ApcaModel& model) {
  detail::ByteWriter w;
  w.u8('A');
  w.u8('P');
  w.u8('C');
  w.u8('A');
  w.u32(1);  // version
  w.u8(model.config.flavor == Flavor::Supervised ? 0 : 1);
  w.u8(model.config.inference == Inference::Local ? 0 : 1);
  w.u8(model.config.decomp == Decomp::Exact ? 0 : 1);
  std::uint8_t flags = 0;
  if (model.config.center_primary) flags |= 1u;
  if (model.config.center_augmenting) flags |= 2u;
  if (model.singular_gram_warning) flags |= 4u;
  w.u8(flags);
  w.u32(static_cast<std::uint32_t>(model.k()));
  w.u32(static_cast<std::uint32_t>(model.p()));
  w.u32(static_cast<std::uint32_t>(model.q()));
  w.f64(model.config.mu);
  w.u64(model.config.seed);
  w.f64s(model.x_means);
  w.f64s(model.y_means);
  w.f64s(model.eigenvalues);
  w.f64s(model.w.data());
  w.f64s(model.d.data());
  if (model.config.inference == Inference::Encoded) w.f64s(model.a.data());
  w.u32(detail::crc32(w.bytes));
  return std::move(w.bytes);
}

inline ApcaModel deserialize(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r{bytes};
  if (bytes.size() < 4 || bytes[0] != 'A' || bytes[1] != 'P' ||
      bytes[2] != 'C' || bytes[3] != 'A')
    throw ModelFormatError(ModelFormatError::Kind::BadMagic,
                           "not an APCA model file");
  r.pos = 4;
  const std::uint32_t version = r.u32();
  if (version != 1)
    throw ModelFormatError(ModelFormatError::Kind::BadVersion,
                           "unsupported model version");

  ApcaModel m;
  const std::uint8_t flavor = r.u8(), inference = r.u8(), decomp = r.u8(),
                     flags = r.u8();
  if (flavor > 1 || inference > 1 || decomp > 1)
    throw ModelFormatError(ModelFormatError::Kind::BadField,
                           "invalid enum field in model file");
  m.config.flavor = flavor == 0 ? Flavor::Supervised : Flavor::Adversarial;
  m.config.inference = inference == 0 ? Inference::Local : Inference::Encoded;
  m.config.decomp = decomp == 0 ? Decomp::Exact : Decomp::Approx;
  m.config.center_primary = flags & 1u;
  m.config.center_augmenting = flags & 2u;
  m.singular_gram_warning = flags & 4u;

  const std::size_t k = r.u32(), p = r.u32(), q = r.u32();
  m.config.k = k;
  m.config.mu = r.f64();
  m.config.seed = r.u64();

  // Everything after the header has a fixed size; check it up front so a cut
  // file fails as truncation rather than a checksum surprise.
  const std::size_t payload =
      (p + q + k + p * k + q * k +
       (m.config.inference == Inference::Encoded ? k * p : 0)) * 8;
  if (bytes.size() != r.pos + payload + 4)
    throw ModelFormatError(ModelFormatError::Kind::Truncated,
                           "truncated model file");

  m.x_means = r.f64s(p);
  m.y_means = r.f64s(q);
  m.eigenvalues = r.f64s(k);
  m.w = Matrix(p, k, r.f64s(p * k));
  m.d = Matrix(q, k, r.f64s(q * k));
  if (m.config.inference == Inference::Encoded)
    m.a = Matrix(k, p, r.f64s(k * p));

  const std::uint32_t stored = r.u32();
  std::vector<std::uint8_t> body(bytes.begin(), bytes.end() - 4);
  if (detail::crc32(body) != stored)
    throw ModelFormatError(ModelFormatError::Kind::BadChecksum,
                           "model file checksum mismatch");

  auto finite = [](const std::vector<double>& vs) {
    for (double v : vs)
      if (!std::isfinite(v)) return false;
    return true;
  };
  if (!finite(m.x_means) || !finite(m.y_means) || !finite(m.eigenvalues) ||
      !m.w.all_finite() || !m.d.all_finite() ||
      (m.config.inference == Inference::Encoded && !m.a.all_finite()) ||
      !std::isfinite(m.config.mu))
    throw ModelFormatError(ModelFormatError::Kind::NonFinite,
                           "model file contains non-finite values");
  return m;
}

inline void save(const ApcaModel& model, const std::string& path) {
  const std::vector<std::uint8_t> bytes = serialize(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open model file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing model file: " + path);
}

inline ApcaModel load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace apca
