// CSV ingestion and serialization, feature standardization, one-hot
// encoding, deterministic train/test splits, and the synthetic dataset
// generators used by the evaluation experiments.

#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "apca/matrix.hpp"
#include "apca/rng.hpp"

namespace apca {

struct Dataset {
  Matrix x;  // samples x p
  Matrix y;  // samples x q
  std::vector<std::string> feature_names;
  std::vector<std::string> label_names;
  std::vector<int> labels;  // optional classifier target, one per sample
};

struct CsvTable {
  Matrix values;
  std::vector<std::string> names;  // empty when the file had no header
};

inline CsvTable parse_csv(std::istream& in, bool has_header,
                          const std::string& origin) {
  CsvTable table;
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::string line;
  bool saw_any = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;

    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }

    if (has_header && !saw_any) {
      table.names = cells;
      cols = cells.size();
      saw_any = true;
      continue;
    }
    if (!saw_any) {
      cols = cells.size();
      saw_any = true;
    } else if (cells.size() != cols) {
      throw std::runtime_error(origin + ": ragged row at line " +
                               std::to_string(line_no) + " (expected " +
                               std::to_string(cols) + " columns, got " +
                               std::to_string(cells.size()) + ")");
    }

    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string& cell = cells[c];
      const char* begin = cell.c_str();
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin || *end != '\0' || !std::isfinite(v))
        throw std::runtime_error(origin + ": non-numeric cell at line " +
                                 std::to_string(line_no) + ", column " +
                                 std::to_string(c + 1));
      values.push_back(v);
    }
    ++rows;
  }

  if (rows == 0) throw std::runtime_error(origin + ": empty CSV input");
  table.values = Matrix(rows, cols, std::move(values));
  return table;
}

inline CsvTable read_csv(const std::string& path, bool has_header = false) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path);
  return parse_csv(in, has_header, path);
}

// Shortest round-trip formatting, so read_csv(write_csv(m)) is value-exact.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void write_csv(const Matrix& m, std::ostream& out,
                      const std::vector<std::string>& names = {}) {
  if (!names.empty() && names.size() != m.cols())
    throw std::invalid_argument("header name count does not match columns");
  if (!names.empty()) {
    for (std::size_t j = 0; j < names.size(); ++j)
      out << (j ? "," : "") << names[j];
    out << '\n';
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j)
      out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
}

inline void write_csv(const Matrix& m, const std::string& path,
                      const std::vector<std::string>& names = {}) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open CSV file for writing: " + path);
  write_csv(m, out, names);
  if (!out) throw std::runtime_error("failed writing CSV file: " + path);
}

inline Matrix one_hot(const std::vector<int>& labels, std::size_t num_classes) {
  Matrix m(labels.size(), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
      throw std::invalid_argument("label out of range at sample " +
                                  std::to_string(i));
    m(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return m;
}

// Per-feature centering and scaling fitted on training data: population
// standard deviation, constant columns pass through centered (std kept at 1).
struct Standardizer {
  std::vector<double> means;
  std::vector<double> stds;
};

inline Standardizer standardize_fit(const Matrix& x_train) {
  if (x_train.rows() < 2)
    throw std::invalid_argument("standardization requires at least 2 samples");
  const std::size_t n = x_train.rows(), p = x_train.cols();
  Standardizer s;
  s.means.assign(p, 0.0);
  s.stds.assign(p, 1.0);
  for (std::size_t j = 0; j < p; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x_train(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x_train(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    s.means[j] = mean;
    if (var > 0.0) s.stds[j] = std::sqrt(var);
  }
  return s;
}

inline Matrix standardize_apply(const Standardizer& s, const Matrix& x) {
  if (x.cols() != s.means.size())
    throw std::invalid_argument("standardizer feature count mismatch");
  Matrix out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j)
      out(i, j) = (x(i, j) - s.means[j]) / s.stds[j];
  return out;
}

// Disjoint covering train/test partition: Fisher-Yates shuffle driven by the
// splitmix64 stream, test size = round(n * fraction), both halves sorted.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
train_test_split(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("split requires at least 2 samples");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("test fraction must lie in (0, 1)");
  const std::size_t test_size = static_cast<std::size_t>(
      std::lround(static_cast<double>(n) * test_fraction));
  if (test_size == 0 || test_size == n)
    throw std::invalid_argument("split leaves an empty train or test set");

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  RandomStream rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = std::min(
        i, static_cast<std::size_t>(rng.next_uniform() *
                                    static_cast<double>(i + 1)));
    std::swap(idx[i], idx[j]);
  }
  std::vector<std::size_t> test(idx.begin(), idx.begin() + test_size);
  std::vector<std::size_t> train(idx.begin() + test_size, idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

inline Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(rows[i], j);
  return out;
}

// Two-class dataset where plain PCA is drawn to nuisance structure.
//
// Recipe (all draws from one splitmix64 stream, in sample order):
//   label  y_i ~ Bernoulli(1/2)
//   x_i0   = (y_i ? +0.5 : -0.5) + 0.05 g       class signal, magnitude 1
//   x_ij   = 0.72 ns cos(th_j) f1_i + 0.52 ns sin(th_j) f2_i + 0.3 g
//            for j >= 1, th_j = 2 pi j / (p-1), f1, f2 ~ N(0,1) per sample
// With the default noise_scale ns = 5 every nuisance coordinate carries at
// least 25x the signal coordinate's variance, and the two correlated factors
// dominate the spectrum before and after per-feature standardization. The
// returned Y holds the one-hot labels.
inline Dataset synth_supervised(std::size_t n = 400, std::size_t p = 20,
                                double noise_scale = 5.0,
                                std::uint64_t seed = 0) {
  if (p < 3) throw std::invalid_argument("synth_supervised requires p >= 3");
  if (n < 20) throw std::invalid_argument("synth_supervised requires n >= 20");
  RandomStream rng(seed);
  Dataset ds;
  ds.x = Matrix(n, p);
  ds.labels.resize(n);
  const double two_pi = 2.0 * 3.14159265358979323846;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = rng.next_uniform() < 0.5 ? 0 : 1;
    ds.labels[i] = label;
    ds.x(i, 0) = (label == 1 ? 0.5 : -0.5) + 0.05 * rng.next_gaussian();
    const double f1 = rng.next_gaussian();
    const double f2 = rng.next_gaussian();
    for (std::size_t j = 1; j < p; ++j) {
      const double theta =
          two_pi * static_cast<double>(j) / static_cast<double>(p - 1);
      ds.x(i, j) = 0.72 * noise_scale * std::cos(theta) * f1 +
                   0.52 * noise_scale * std::sin(theta) * f2 +
                   0.3 * rng.next_gaussian();
    }
  }
  ds.y = one_hot(ds.labels, 2);
  ds.label_names = {"class0", "class1"};
  return ds;
}

// Dataset with a scalar concomitant that dominates the primary variance.
//
// Recipe (one stream, in sample order):
//   concomitant c_i ~ N(0,1), identity label z_i ~ Bernoulli(1/2)
//   x_i0 = (z_i ? +0.5 : -0.5) + 0.2 g          identity signal
//   x_i1 = 0.8 g                                 filler direction
//   x_ij = 4 cos(ph_j) c_i + 1.5 sin(ph_j) h_i + 0.3 g   for j >= 2,
//          ph_j = 2 pi j / p, h_i ~ N(0,1) a benign factor
// Y is the concomitant column; the top principal direction correlates with
// it by construction. Labels carry the identity classes.
inline Dataset synth_adversarial(std::size_t n = 400, std::size_t p = 20,
                                 std::uint64_t seed = 0) {
  if (p < 3) throw std::invalid_argument("synth_adversarial requires p >= 3");
  if (n < 20) throw std::invalid_argument("synth_adversarial requires n >= 20");
  RandomStream rng(seed);
  Dataset ds;
  ds.x = Matrix(n, p);
  ds.y = Matrix(n, 1);
  ds.labels.resize(n);
  const double two_pi = 2.0 * 3.14159265358979323846;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = rng.next_gaussian();
    const int z = rng.next_uniform() < 0.5 ? 0 : 1;
    ds.y(i, 0) = c;
    ds.labels[i] = z;
    ds.x(i, 0) = (z == 1 ? 0.5 : -0.5) + 0.2 * rng.next_gaussian();
    ds.x(i, 1) = 0.8 * rng.next_gaussian();
    const double h = rng.next_gaussian();
    for (std::size_t j = 2; j < p; ++j) {
      const double phi =
          two_pi * static_cast<double>(j) / static_cast<double>(p);
      ds.x(i, j) = 4.0 * std::cos(phi) * c + 1.5 * std::sin(phi) * h +
                   0.3 * rng.next_gaussian();
    }
  }
  ds.label_names = {"concomitant"};
  return ds;
}

}  // namespace apca
