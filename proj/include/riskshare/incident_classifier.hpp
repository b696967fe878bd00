#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <vector>

#include "riskshare/loss_model.hpp"

namespace riskshare {

// Rows of features with class labels in 1..K.
struct LabeledDataset {
  std::vector<std::vector<double>> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t feature_count() const { return features.empty() ? 0 : features.front().size(); }
  int max_label() const;
  void validate(int k) const;
};

// CSV with header f1,...,fF,label.
LabeledDataset read_labeled_csv(std::istream& in);

struct MlrModel {
  std::vector<std::vector<double>> coefficients;  // K rows of F weights
  bool converged = true;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;

  std::size_t classes() const { return coefficients.size(); }
  std::size_t features() const { return coefficients.empty() ? 0 : coefficients.front().size(); }
  void validate() const;
};

// p_k = exp(b_k . x) / sum_j exp(b_j . x), shifted by the largest score.
IncidentMix softmax_probs(const MlrModel& model, const std::vector<double>& x);

// Most probable class (1-based), lowest label on ties.
int predict_label(const MlrModel& model, const std::vector<double>& x);

inline constexpr double kMlrGradientTolerance = 1e-6;

// Minimizes mean cross-entropy + (l2/2)||B||^2 by full-batch gradient descent
// with Armijo backtracking, starting from zero. Sets converged = false when
// max_iter is hit before the gradient norm drops to kMlrGradientTolerance.
// `classes` = 0 takes K from the largest label.
MlrModel train_mlr(const LabeledDataset& data, double l2, std::size_t max_iter,
                   int classes = 0);

struct BalancedAccuracy {
  double score = 0.0;
  std::vector<double> per_class;  // NaN for skipped classes
  std::vector<int> skipped;       // classes whose sensitivity or specificity is undefined
};

// Mean over classes of (sensitivity + specificity) / 2, one-vs-all. Classes
// with an undefined term are skipped and the mean renormalized.
BalancedAccuracy balanced_accuracy(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                                   int k);

}  // namespace riskshare
