// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "kbsynth/candidates.hpp"
#include "kbsynth/parallel.hpp"

namespace kbsynth {

/// Rows are pairs, columns features; entry = pos - neg count.
struct DesignMatrix {
  std::vector<int> features;
  std::vector<std::size_t> pairs;
  Eigen::MatrixXd X;

  DesignMatrix rows(const std::vector<std::size_t>& rowIndices) const;
};

/// Columns follow the given id order.
DesignMatrix build_matrix(const std::vector<int>& featureIds, const FeatureCatalog& catalog,
                          const std::vector<std::size_t>& pairs);

struct TrainOptions {
  double lambda = -1.0;  // < 0 means 1/rows
  double tolerance = 1e-8;
  int maxIterations = 10000;
};

struct TrainingMeta {
  double loss = 0.0;
  double gradNorm = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct LinearModel {
  std::vector<int> features;
  Eigen::VectorXd weights;
  TrainingMeta meta;

  /// w.d summed in column order.
  double decision(const Eigen::Ref<const Eigen::RowVectorXd>& d) const;
};

/// L2 logistic regression on {(d,+1), (-d,-1)} without intercept, by damped Newton.
LinearModel train(const DesignMatrix& matrix, const TrainOptions& options = {});

/// Fraction of rows with w.d > 0; ties count as wrong.
double accuracy(const LinearModel& model, const DesignMatrix& matrix);

struct CvReport {
  std::vector<double> foldAccuracies;
  double mean = 0.0;
  double stdError = 0.0;
};

/// Fold per entry of `pairs`: the hint when it is in [0, folds), else round-robin by position.
std::vector<int> assign_folds(const std::vector<int>& hints, std::size_t folds);

struct CvOptions {
  std::size_t folds = 5;
  TrainOptions train;
  Exec exec = Exec::Parallel;
};

/// `foldOf[i]` is the fold of `pairs[i]`.
CvReport cross_validate(const std::vector<int>& featureIds, const FeatureCatalog& catalog,
                        const std::vector<std::size_t>& pairs, const std::vector<int>& foldOf,
                        const CvOptions& options = {});

}  // namespace kbsynth
