// Downstream evaluation: multinomial logistic regression on factor scores,
// accuracy and R-squared metrics, and the mu-sweep protocol (fit on the
// train split, classify scores, report per-component R-squared against each
// augmenting column on the test split).

#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "apca/data_io.hpp"
#include "apca/matrix.hpp"
#include "apca/model.hpp"

namespace apca {

struct LogRegModel {
  Matrix weights;  // classes x (k+1), last column is the bias
  double l2 = 0.0;
  std::size_t iterations_run = 0;
  double final_grad_norm = 0.0;
};

namespace detail {

inline Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double m = p(i, 0);
    for (std::size_t j = 1; j < p.cols(); ++j) m = std::max(m, p(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < p.cols(); ++j) {
      p(i, j) = std::exp(p(i, j) - m);
      sum += p(i, j);
    }
    for (std::size_t j = 0; j < p.cols(); ++j) p(i, j) /= sum;
  }
  return p;
}

inline Matrix with_bias_column(const Matrix& s) {
  Matrix f(s.rows(), s.cols() + 1);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = 0; j < s.cols(); ++j) f(i, j) = s(i, j);
    f(i, s.cols()) = 1.0;
  }
  return f;
}

}  // namespace detail

// Softmax cross-entropy with L2 on the non-bias weights, minimized by
// full-batch gradient descent with Armijo backtracking from zero weights.
inline LogRegModel logreg_fit(const Matrix& scores,
                              const std::vector<int>& labels,
                              std::size_t num_classes, double l2 = 1e-4,
                              std::size_t max_iter = 500, double tol = 1e-8) {
  const std::size_t n = scores.rows(), k = scores.cols();
  if (labels.size() != n)
    throw std::invalid_argument("label count does not match sample count");
  if (num_classes < 2) throw std::invalid_argument("need >= 2 classes");
  bool multiple = false;
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes)
      throw std::invalid_argument("label out of range");
    multiple = multiple || l != labels[0];
  }
  if (!multiple) throw std::invalid_argument("need >= 2 classes");

  const Matrix features = detail::with_bias_column(scores);  // n x (k+1)
  Matrix w(num_classes, k + 1);

  auto loss_of = [&](const Matrix& weights) {
    const Matrix p = detail::softmax_rows(matmul_bt(features, weights));
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      loss -= std::log(std::max(p(i, static_cast<std::size_t>(labels[i])),
                                1e-300));
    loss /= static_cast<double>(n);
    double reg = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c)
      for (std::size_t j = 0; j < k; ++j) reg += weights(c, j) * weights(c, j);
    return loss + 0.5 * l2 * reg;
  };

  auto grad_of = [&](const Matrix& weights) {
    Matrix p = detail::softmax_rows(matmul_bt(features, weights));
    for (std::size_t i = 0; i < n; ++i)
      p(i, static_cast<std::size_t>(labels[i])) -= 1.0;
    Matrix g = matmul(p.transposed(), features);  // classes x (k+1)
    for (double& v : g.data()) v /= static_cast<double>(n);
    for (std::size_t c = 0; c < num_classes; ++c)
      for (std::size_t j = 0; j < k; ++j) g(c, j) += l2 * weights(c, j);
    return g;
  };

  LogRegModel model;
  model.l2 = l2;
  double loss = loss_of(w);
  double grad_norm = 0.0;
  std::size_t it = 0;
  for (; it < max_iter; ++it) {
    const Matrix g = grad_of(w);
    grad_norm = frobenius_norm(g);
    if (grad_norm <= tol) break;
    // Armijo backtracking: halve the step until sufficient decrease.
    double step = 1.0;
    const double slope = grad_norm * grad_norm;
    bool moved = false;
    for (int half = 0; half < 60; ++half) {
      const Matrix candidate = w - step * g;
      const double cand_loss = loss_of(candidate);
      if (cand_loss <= loss - 1e-4 * step * slope) {
        w = candidate;
        loss = cand_loss;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;  // no productive step length at this point
  }
  model.weights = std::move(w);
  model.iterations_run = it;
  model.final_grad_norm = it < max_iter ? grad_norm
                                        : frobenius_norm(grad_of(model.weights));
  return model;
}

// Argmax of the softmax; ties break to the lowest class index.
inline std::vector<int> logreg_predict(const LogRegModel& model,
                                       const Matrix& scores) {
  if (scores.cols() + 1 != model.weights.cols())
    throw std::invalid_argument("score dimension does not match classifier");
  const Matrix logits =
      matmul_bt(detail::with_bias_column(scores), model.weights);
  std::vector<int> out(scores.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c)
      if (logits(i, c) > logits(i, best)) best = c;
    out[i] = static_cast<int>(best);
  }
  return out;
}

inline double accuracy(const std::vector<int>& predicted,
                       const std::vector<int>& truth) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("prediction/label count mismatch");
  if (predicted.empty()) throw std::invalid_argument("empty prediction set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == truth[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

// Squared Pearson correlation; zero variance in either argument returns 0.
inline double r_squared(const std::vector<double>& y_true,
                        const std::vector<double>& y_pred) {
  if (y_true.size() != y_pred.size() || y_true.size() < 2)
    throw std::invalid_argument("r_squared needs >= 2 paired points");
  const double n = static_cast<double>(y_true.size());
  double mt = 0.0, mp = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    mt += y_true[i];
    mp += y_pred[i];
  }
  mt /= n;
  mp /= n;
  double stp = 0.0, stt = 0.0, spp = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double dt = y_true[i] - mt, dp = y_pred[i] - mp;
    stp += dt * dp;
    stt += dt * dt;
    spp += dp * dp;
  }
  if (stt <= 0.0 || spp <= 0.0) return 0.0;
  const double r2 = (stp * stp) / (stt * spp);
  return std::min(1.0, std::max(0.0, r2));
}

struct EvalReport {
  std::vector<double> mu_grid;
  std::vector<double> train_acc;
  std::vector<double> test_acc;
  // r2[g][j][i]: grid point g, component j, augmenting column i (test split).
  std::vector<std::vector<std::vector<double>>> r2;
};

// CSV schema: mu,train_acc,test_acc,r2_c<j>_t<i>... with components and
// targets numbered from 1.
inline void write_report_csv(const EvalReport& report, std::ostream& out) {
  out << "mu,train_acc,test_acc";
  if (!report.r2.empty()) {
    for (std::size_t j = 0; j < report.r2[0].size(); ++j)
      for (std::size_t i = 0; i < report.r2[0][j].size(); ++i)
        out << ",r2_c" << (j + 1) << "_t" << (i + 1);
  }
  out << '\n';
  for (std::size_t g = 0; g < report.mu_grid.size(); ++g) {
    out << format_double(report.mu_grid[g]) << ','
        << format_double(report.train_acc[g]) << ','
        << format_double(report.test_acc[g]);
    for (const auto& comp : report.r2[g])
      for (double v : comp) out << ',' << format_double(v);
    out << '\n';
  }
}

// The sweep protocol. For each mu: standardize primary features on the train
// split (optional), fit on train, transform both splits, fit the classifier
// on train scores, and record accuracies plus per-component R-squared
// against every augmenting column on the test split. Classification labels
// come from dataset.labels, falling back to the argmax of Y rows.
inline EvalReport mu_sweep(const Dataset& dataset,
                           const ApcaConfig& config_template,
                           const std::vector<double>& mu_grid,
                           std::uint64_t split_seed,
                           double test_fraction = 0.5,
                           bool standardize = true) {
  if (mu_grid.empty()) throw std::invalid_argument("mu grid must be nonempty");
  for (std::size_t i = 1; i < mu_grid.size(); ++i)
    if (mu_grid[i] < mu_grid[i - 1])
      throw std::invalid_argument("mu grid must be ascending");

  const std::size_t n = dataset.x.rows();
  std::vector<int> labels = dataset.labels;
  if (labels.empty()) {
    labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < dataset.y.cols(); ++j)
        if (dataset.y(i, j) > dataset.y(i, best)) best = j;
      labels[i] = static_cast<int>(best);
    }
  }
  int num_classes = 0;
  for (int l : labels) num_classes = std::max(num_classes, l + 1);

  auto [train_idx, test_idx] = train_test_split(n, test_fraction, split_seed);
  Matrix x_train = take_rows(dataset.x, train_idx);
  Matrix x_test = take_rows(dataset.x, test_idx);
  const Matrix y_train = take_rows(dataset.y, train_idx);
  const Matrix y_test = take_rows(dataset.y, test_idx);
  if (standardize) {
    const Standardizer s = standardize_fit(x_train);
    x_train = standardize_apply(s, x_train);
    x_test = standardize_apply(s, x_test);
  }
  std::vector<int> labels_train, labels_test;
  for (std::size_t i : train_idx) labels_train.push_back(labels[i]);
  for (std::size_t i : test_idx) labels_test.push_back(labels[i]);

  EvalReport report;
  report.mu_grid = mu_grid;
  for (double mu : mu_grid) {
    ApcaConfig config = config_template;
    config.mu = mu;
    const ApcaModel model = fit(config, x_train, y_train);
    const Matrix s_train = transform(model, x_train, &y_train);
    const Matrix s_test = transform(model, x_test, &y_test);

    const LogRegModel clf = logreg_fit(
        s_train, labels_train, static_cast<std::size_t>(num_classes));
    report.train_acc.push_back(
        accuracy(logreg_predict(clf, s_train), labels_train));
    report.test_acc.push_back(
        accuracy(logreg_predict(clf, s_test), labels_test));

    std::vector<std::vector<double>> r2_grid;
    for (std::size_t j = 0; j < config.k; ++j) {
      std::vector<double> per_target;
      for (std::size_t t = 0; t < dataset.y.cols(); ++t)
        per_target.push_back(r_squared(y_test.col(t), s_test.col(j)));
      r2_grid.push_back(std::move(per_target));
    }
    report.r2.push_back(std::move(r2_grid));
  }
  return report;
}

}  // namespace apca
