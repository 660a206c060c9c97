// SPDX-License-Identifier: Apache-2.0

#include "kbsynth/learn.hpp"

#include <cmath>

#include "kbsynth/error.hpp"

namespace kbsynth {

namespace {

// Kernels parallelize above Eigen; keep its own threading out of the way.
[[maybe_unused]] const bool kEigenSerial = (Eigen::setNbThreads(1), true);

double log1pexp_neg(double m) { return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& w, double lambda) {
  const Eigen::VectorXd m = X * w;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < m.size(); ++i) loss += log1pexp_neg(m[i]);
  return loss / static_cast<double>(X.rows()) + 0.5 * lambda * w.squaredNorm();
}

}  // namespace

DesignMatrix DesignMatrix::rows(const std::vector<std::size_t>& rowIndices) const {
  DesignMatrix out;
  out.features = features;
  out.X.resize(static_cast<Eigen::Index>(rowIndices.size()), X.cols());
  for (std::size_t r = 0; r < rowIndices.size(); ++r) {
    out.pairs.push_back(pairs[rowIndices[r]]);
    out.X.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(rowIndices[r]));
  }
  return out;
}

DesignMatrix build_matrix(const std::vector<int>& featureIds, const FeatureCatalog& catalog,
                          const std::vector<std::size_t>& pairs) {
  DesignMatrix m;
  m.features = featureIds;
  m.pairs = pairs;
  m.X.resize(static_cast<Eigen::Index>(pairs.size()), static_cast<Eigen::Index>(featureIds.size()));
  for (std::size_t j = 0; j < featureIds.size(); ++j) {
    const int id = featureIds[j];
    if (id < 0 || static_cast<std::size_t>(id) >= catalog.size())
      throw Error(ErrorKind::UnknownFeature, "feature id " + std::to_string(id) + " not in catalog");
    const auto& v = catalog[id].vector;
    for (std::size_t r = 0; r < pairs.size(); ++r) {
      if (pairs[r] >= v.pairs()) throw Error(ErrorKind::LengthMismatch, "pair index outside the corpus");
      m.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = v.pos[pairs[r]] - v.neg[pairs[r]];
    }
  }
  return m;
}

LinearModel train(const DesignMatrix& matrix, const TrainOptions& options) {
  const auto& X = matrix.X;
  const Eigen::Index n = X.rows(), k = X.cols();
  LinearModel model;
  model.features = matrix.features;
  model.weights = Eigen::VectorXd::Zero(k);
  if (k == 0 || n == 0) {
    model.meta.converged = true;
    model.meta.loss = n == 0 ? 0.0 : std::log(2.0);
    return model;
  }
  const double lambda = options.lambda < 0 ? 1.0 / static_cast<double>(n) : options.lambda;
  auto& w = model.weights;
  double f = objective(X, w, lambda);
  Eigen::VectorXd g(k), s(n);
  int it = 0;
  for (;; ++it) {
    const Eigen::VectorXd m = X * w;
    for (Eigen::Index i = 0; i < n; ++i) s[i] = sigmoid(-m[i]);
    g = -(X.transpose() * s) / static_cast<double>(n) + lambda * w;
    model.meta.gradNorm = g.norm();
    if (model.meta.gradNorm < options.tolerance) {
      model.meta.converged = true;
      break;
    }
    if (it >= options.maxIterations) break;
    Eigen::VectorXd h(n);
    for (Eigen::Index i = 0; i < n; ++i) h[i] = s[i] * (1.0 - s[i]);
    Eigen::MatrixXd H = X.transpose() * h.asDiagonal() * X / static_cast<double>(n);
    H.diagonal().array() += lambda;
    const Eigen::VectorXd step = H.ldlt().solve(-g);
    const double slope = g.dot(step);
    double t = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      const Eigen::VectorXd trial = w + t * step;
      const double ft = objective(X, trial, lambda);
      if (ft <= f + 1e-4 * t * slope) {
        w = trial;
        f = ft;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  model.meta.iterations = it;
  model.meta.loss = f;
  return model;
}

double LinearModel::decision(const Eigen::Ref<const Eigen::RowVectorXd>& d) const {
  double m = 0.0;
  for (Eigen::Index j = 0; j < d.size(); ++j) m += weights[j] * d[j];
  return m;
}

double accuracy(const LinearModel& model, const DesignMatrix& matrix) {
  if (matrix.X.cols() != model.weights.size())
    throw Error(ErrorKind::LengthMismatch, "model and matrix column counts differ");
  if (matrix.X.rows() == 0) return 0.0;
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < matrix.X.rows(); ++i) correct += model.decision(matrix.X.row(i)) > 0;
  return static_cast<double>(correct) / static_cast<double>(matrix.X.rows());
}

std::vector<int> assign_folds(const std::vector<int>& hints, std::size_t folds) {
  std::vector<int> out(hints.size());
  for (std::size_t i = 0; i < hints.size(); ++i)
    out[i] = hints[i] >= 0 && static_cast<std::size_t>(hints[i]) < folds ? hints[i] : static_cast<int>(i % folds);
  return out;
}

CvReport cross_validate(const std::vector<int>& featureIds, const FeatureCatalog& catalog,
                        const std::vector<std::size_t>& pairs, const std::vector<int>& foldOf,
                        const CvOptions& options) {
  if (options.folds < 2) throw Error(ErrorKind::ConfigError, "cross validation needs at least 2 folds");
  if (foldOf.size() != pairs.size()) throw Error(ErrorKind::LengthMismatch, "fold assignment size differs from pairs");
  std::vector<std::vector<std::size_t>> testRows(options.folds), trainRows(options.folds);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    for (std::size_t f = 0; f < options.folds; ++f)
      (static_cast<std::size_t>(foldOf[i]) == f ? testRows : trainRows)[f].push_back(i);
  for (std::size_t f = 0; f < options.folds; ++f)
    if (testRows[f].empty()) throw Error(ErrorKind::FoldTooSmall, "fold " + std::to_string(f) + " has no pairs");

  const DesignMatrix full = build_matrix(featureIds, catalog, pairs);
  CvReport report;
  report.foldAccuracies.assign(options.folds, 0.0);
  const auto folds = static_cast<std::ptrdiff_t>(options.folds);
#pragma omp parallel for schedule(dynamic) if (options.exec == Exec::Parallel)
  for (std::ptrdiff_t f = 0; f < folds; ++f) {
    const auto fi = static_cast<std::size_t>(f);
    const LinearModel model = train(full.rows(trainRows[fi]), options.train);
    report.foldAccuracies[fi] = accuracy(model, full.rows(testRows[fi]));
  }
  double sum = 0.0;
  for (double a : report.foldAccuracies) sum += a;
  report.mean = sum / static_cast<double>(options.folds);
  double ss = 0.0;
  for (double a : report.foldAccuracies) ss += (a - report.mean) * (a - report.mean);
  report.stdError = std::sqrt(ss / static_cast<double>(options.folds - 1)) / std::sqrt(static_cast<double>(options.folds));
  return report;
}

}  // namespace kbsynth
