#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "apca/data_io.hpp"
#include "apca/linalg.hpp"
#include "apca/matrix.hpp"

using namespace apca;

namespace {

CsvTable parse_string(const std::string& text, bool has_header = false) {
  std::istringstream in(text);
  return parse_csv(in, has_header, "test");
}

double column_corr(const Matrix& a, std::size_t ja, const Matrix& b,
                   std::size_t jb) {
  const std::size_t n = a.rows();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a(i, ja);
    mb += b(i, jb);
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a(i, ja) - ma, db = b(i, jb) - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("parse_csv basic shapes") {
  const CsvTable t1 = parse_string("1.0,2.0\n3.0,4.0\n");
  CHECK(t1.values == Matrix{{1.0, 2.0}, {3.0, 4.0}});
  CHECK(t1.names.empty());

  const CsvTable t2 = parse_string("a,b\n1,2\n", true);
  REQUIRE(t2.names.size() == 2);
  CHECK(t2.names[0] == "a");
  CHECK(t2.names[1] == "b");
  CHECK(t2.values == Matrix{{1.0, 2.0}});

  // CRLF line endings parse the same way.
  const CsvTable t3 = parse_string("1,2\r\n3,4\r\n");
  CHECK(t3.values == Matrix{{1.0, 2.0}, {3.0, 4.0}});
}

TEST_CASE("parse_csv reports malformed input with positions") {
  CHECK_THROWS_WITH(parse_string("1,2\n3\n"),
                    Catch::Matchers::ContainsSubstring("line 2"));
  CHECK_THROWS_WITH(parse_string("1,2\n3,x\n"),
                    Catch::Matchers::ContainsSubstring("column 2"));
  CHECK_THROWS_WITH(parse_string(""),
                    Catch::Matchers::ContainsSubstring("empty"));
}

TEST_CASE("write_csv round trips values exactly") {
  Matrix m(5, 3);
  RandomStream rng(17);
  for (double& v : m.data()) v = rng.next_gaussian() * 1e3;
  m(0, 0) = 0.1;  // not exactly representable; stresses the formatter
  std::ostringstream out;
  write_csv(m, out);
  const CsvTable back = parse_string(out.str());
  CHECK(back.values == m);
}

TEST_CASE("write_csv header handling") {
  Matrix m{{1.0, 2.0}};
  std::ostringstream with_names;
  write_csv(m, with_names, {"u", "v"});
  CHECK(with_names.str() == "u,v\n1,2\n");

  std::ostringstream no_names;
  write_csv(m, no_names);
  CHECK(no_names.str() == "1,2\n");

  CHECK_THROWS(write_csv(m, no_names, {"only_one"}));
}

TEST_CASE("one_hot encodes and validates") {
  CHECK(one_hot({0, 2}, 3) == Matrix{{1.0, 0.0, 0.0}, {0.0, 0.0, 1.0}});
  CHECK(one_hot({0, 0, 0}, 1) == Matrix{{1.0}, {1.0}, {1.0}});
  CHECK_THROWS(one_hot({5}, 3));
}

TEST_CASE("standardizer hand case and constant columns") {
  const Standardizer s = standardize_fit(Matrix{{0.0}, {2.0}});
  CHECK(s.means[0] == 1.0);
  CHECK(s.stds[0] == 1.0);
  const Matrix applied = standardize_apply(s, Matrix{{0.0}, {2.0}});
  CHECK(applied(0, 0) == -1.0);
  CHECK(applied(1, 0) == 1.0);

  const Standardizer c = standardize_fit(Matrix{{7.0}, {7.0}, {7.0}});
  CHECK(c.stds[0] == 1.0);
  const Matrix centered = standardize_apply(c, Matrix{{7.0}, {7.0}});
  CHECK(max_abs(centered) == 0.0);

  CHECK_THROWS(standardize_fit(Matrix{{1.0, 2.0}}));
}

TEST_CASE("standardizer normalizes its own training data") {
  Matrix x(40, 6);
  RandomStream rng(3);
  for (double& v : x.data()) v = 2.0 + 3.0 * rng.next_gaussian();
  const Standardizer s = standardize_fit(x);
  const Matrix z = standardize_apply(s, x);
  for (std::size_t j = 0; j < 6; ++j) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 40; ++i) mean += z(i, j);
    mean /= 40.0;
    for (std::size_t i = 0; i < 40; ++i)
      var += (z(i, j) - mean) * (z(i, j) - mean);
    var /= 40.0;
    CHECK(std::abs(mean) <= 1e-10);
    CHECK(std::sqrt(var) == Catch::Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("train_test_split partitions deterministically") {
  auto [train, test] = train_test_split(4, 0.5, 9);
  CHECK(train.size() == 2);
  CHECK(test.size() == 2);
  std::vector<std::size_t> all;
  all.insert(all.end(), train.begin(), train.end());
  all.insert(all.end(), test.begin(), test.end());
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3});

  auto [train2, test2] = train_test_split(4, 0.5, 9);
  CHECK(train == train2);
  CHECK(test == test2);

  auto [train3, test3] = train_test_split(101, 0.3, 12);
  CHECK(test3.size() == 30);
  CHECK(train3.size() == 71);

  CHECK_THROWS(train_test_split(2, 0.999, 1));
  CHECK_THROWS(train_test_split(10, 0.0, 1));
}

TEST_CASE("synth_supervised is deterministic and shaped correctly") {
  const Dataset a = synth_supervised(60, 8, 5.0, 4);
  const Dataset b = synth_supervised(60, 8, 5.0, 4);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.labels == b.labels);
  CHECK(a.x.rows() == 60);
  CHECK(a.x.cols() == 8);
  CHECK(a.y.cols() == 2);
  for (std::size_t i = 0; i < 60; ++i)
    CHECK(a.y(i, static_cast<std::size_t>(a.labels[i])) == 1.0);
  CHECK_THROWS(synth_supervised(60, 2, 5.0, 4));
  CHECK_THROWS(synth_supervised(10, 8, 5.0, 4));
}

TEST_CASE("synth_supervised nuisance variance dominates the signal axis") {
  const Dataset ds = synth_supervised(400, 20, 5.0, 7);
  std::vector<double> var(20, 0.0), mean(20, 0.0);
  for (std::size_t j = 0; j < 20; ++j) {
    for (std::size_t i = 0; i < 400; ++i) mean[j] += ds.x(i, j);
    mean[j] /= 400.0;
    for (std::size_t i = 0; i < 400; ++i)
      var[j] += (ds.x(i, j) - mean[j]) * (ds.x(i, j) - mean[j]);
    var[j] /= 400.0;
  }
  for (std::size_t j = 1; j < 20; ++j) CHECK(var[j] >= 25.0 * var[0] * 0.8);

  // The top-2 principal directions stay nearly orthogonal to the signal axis.
  Matrix xt = ds.x.transposed();
  std::vector<double> rowmean(20, 0.0);
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t j = 0; j < 400; ++j) rowmean[i] += xt(i, j);
    rowmean[i] /= 400.0;
    for (std::size_t j = 0; j < 400; ++j) xt(i, j) -= rowmean[i];
  }
  const EigenPairs pca = sym_eig(gram(xt));
  const double in_span = std::hypot(pca.vectors(0, 0), pca.vectors(0, 1));
  CHECK(in_span <= 0.05);
}

TEST_CASE("synth_adversarial construction properties") {
  const Dataset a = synth_adversarial(400, 20, 11);
  const Dataset b = synth_adversarial(400, 20, 11);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.y.cols() == 1);

  // Top PCA score correlates strongly with the concomitant by construction.
  Matrix xt = a.x.transposed();
  std::vector<double> rowmean(20, 0.0);
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t j = 0; j < 400; ++j) rowmean[i] += xt(i, j);
    rowmean[i] /= 400.0;
    for (std::size_t j = 0; j < 400; ++j) xt(i, j) -= rowmean[i];
  }
  const EigenPairs pca = sym_eig(gram(xt));
  Matrix top(20, 1);
  for (std::size_t i = 0; i < 20; ++i) top(i, 0) = pca.vectors(i, 0);
  Matrix scores = matmul(xt.transposed(), top);  // n x 1
  CHECK(std::abs(column_corr(scores, 0, a.y, 0)) >= 0.9);

  CHECK_THROWS(synth_adversarial(400, 2, 1));
  CHECK_THROWS(synth_adversarial(5, 20, 1));
}
