#include "riskshare/incident_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "riskshare/errors.hpp"

namespace riskshare {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? std::string() : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& text, std::size_t line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) {
    throw InvalidInput("line " + std::to_string(line_no) + ": not a finite number: '" + text + "'");
  }
  return v;
}

// Scores b_k . x for every class.
std::vector<double> scores(const std::vector<std::vector<double>>& beta, const std::vector<double>& x) {
  std::vector<double> s(beta.size());
  for (std::size_t k = 0; k < beta.size(); ++k) {
    s[k] = std::inner_product(x.begin(), x.end(), beta[k].begin(), 0.0);
  }
  return s;
}

void softmax_in_place(std::vector<double>& s) {
  const double top = *std::max_element(s.begin(), s.end());
  double total = 0.0;
  for (double& v : s) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : s) v /= total;
}

using Matrix = std::vector<std::vector<double>>;

// Penalized mean cross-entropy and, if `grad` is given, its gradient.
double penalized_loss(const LabeledDataset& data, const Matrix& beta, double l2, Matrix* grad) {
  const std::size_t k = beta.size();
  const std::size_t f = beta.front().size();
  const auto n = static_cast<double>(data.size());
  if (grad) *grad = Matrix(k, std::vector<double>(f, 0.0));
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto s = scores(beta, data.features[i]);
    const double top = *std::max_element(s.begin(), s.end());
    double total = 0.0;
    for (double v : s) total += std::exp(v - top);
    const auto y = static_cast<std::size_t>(data.labels[i] - 1);
    loss += top + std::log(total) - s[y];
    if (grad) {
      for (std::size_t c = 0; c < k; ++c) {
        const double resid = std::exp(s[c] - top) / total - (c == y ? 1.0 : 0.0);
        for (std::size_t j = 0; j < f; ++j) (*grad)[c][j] += resid * data.features[i][j];
      }
    }
  }
  loss /= n;
  double sq = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < f; ++j) {
      sq += beta[c][j] * beta[c][j];
      if (grad) (*grad)[c][j] = (*grad)[c][j] / n + l2 * beta[c][j];
    }
  }
  return loss + 0.5 * l2 * sq;
}

double frobenius_sq(const Matrix& m) {
  double s = 0.0;
  for (const auto& row : m)
    for (double v : row) s += v * v;
  return s;
}

}  // namespace

int LabeledDataset::max_label() const {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
}

void LabeledDataset::validate(int k) const {
  if (labels.empty()) throw InvalidInput("dataset is empty");
  if (features.size() != labels.size()) throw DimensionMismatch("feature rows and labels differ in count");
  const std::size_t f = feature_count();
  if (f == 0) throw InvalidInput("dataset has no features");
  for (const auto& row : features) {
    if (row.size() != f) throw DimensionMismatch("rows have different feature counts");
    for (double v : row) {
      if (!std::isfinite(v)) throw InvalidInput("features must be finite");
    }
  }
  for (int y : labels) {
    if (y < 1 || y > k) throw InvalidInput("label " + std::to_string(y) + " outside 1.." + std::to_string(k));
  }
}

LabeledDataset read_labeled_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("CSV is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header.back() != "label") {
    throw InvalidInput("CSV header must be f1,...,fF,label");
  }
  for (std::size_t j = 0; j + 1 < header.size(); ++j) {
    if (header[j] != "f" + std::to_string(j + 1)) {
      throw InvalidInput("CSV header column " + std::to_string(j + 1) + " must be f" + std::to_string(j + 1));
    }
  }
  LabeledDataset data;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw InvalidInput("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                         " columns");
    }
    std::vector<double> row;
    for (std::size_t j = 0; j + 1 < cells.size(); ++j) row.push_back(parse_number(cells[j], line_no));
    const double label = parse_number(cells.back(), line_no);
    if (label != std::floor(label) || label < 1) {
      throw InvalidInput("line " + std::to_string(line_no) + ": label must be a positive integer");
    }
    data.features.push_back(std::move(row));
    data.labels.push_back(static_cast<int>(label));
  }
  data.validate(data.max_label());
  return data;
}

void MlrModel::validate() const {
  if (classes() < 2) throw InvalidInput("model needs at least 2 classes");
  if (features() < 1) throw InvalidInput("model needs at least 1 feature");
  for (const auto& row : coefficients) {
    if (row.size() != features()) throw DimensionMismatch("coefficient rows differ in length");
    for (double v : row) {
      if (!std::isfinite(v)) throw InvalidInput("coefficients must be finite");
    }
  }
}

IncidentMix softmax_probs(const MlrModel& model, const std::vector<double>& x) {
  if (x.size() != model.features()) {
    throw DimensionMismatch("feature vector has " + std::to_string(x.size()) + " entries, model expects " +
                            std::to_string(model.features()));
  }
  auto s = scores(model.coefficients, x);
  softmax_in_place(s);
  // Renormalize once more so the sum is 1 to the last bit IncidentMix checks.
  const double total = std::accumulate(s.begin(), s.end(), 0.0);
  for (double& v : s) v /= total;
  return IncidentMix(std::move(s));
}

int predict_label(const MlrModel& model, const std::vector<double>& x) {
  if (x.size() != model.features()) throw DimensionMismatch("feature vector length mismatch");
  const auto s = scores(model.coefficients, x);
  return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin()) + 1;
}

MlrModel train_mlr(const LabeledDataset& data, double l2, std::size_t max_iter, int classes) {
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw InvalidInput("l2 penalty must be finite and non-negative");
  const int k = classes > 0 ? classes : data.max_label();
  data.validate(k);
  std::vector<int> present = data.labels;
  std::sort(present.begin(), present.end());
  present.erase(std::unique(present.begin(), present.end()), present.end());
  if (present.size() < 2) throw InvalidInput("training data must contain at least 2 classes");
  if (k < 2) throw InvalidInput("model needs at least 2 classes");

  const std::size_t f = data.feature_count();
  Matrix beta(static_cast<std::size_t>(k), std::vector<double>(f, 0.0));
  Matrix grad;
  double loss = penalized_loss(data, beta, l2, &grad);
  double step = 1.0;

  MlrModel model;
  model.converged = false;
  std::size_t it = 0;
  for (; it < max_iter; ++it) {
    const double gsq = frobenius_sq(grad);
    if (std::sqrt(gsq) <= kMlrGradientTolerance) {
      model.converged = true;
      break;
    }
    // Armijo backtracking; the step grows again after each accepted move.
    Matrix trial = beta;
    double trial_loss = 0.0;
    for (int halvings = 0;; ++halvings) {
      for (std::size_t c = 0; c < beta.size(); ++c)
        for (std::size_t j = 0; j < f; ++j) trial[c][j] = beta[c][j] - step * grad[c][j];
      trial_loss = penalized_loss(data, trial, l2, nullptr);
      if (trial_loss <= loss - 1e-4 * step * gsq) break;
      step *= 0.5;
      if (halvings > 60) throw NumericFailure("line search failed to decrease the loss");
    }
    beta = std::move(trial);
    loss = penalized_loss(data, beta, l2, &grad);
    step *= 2.0;
  }
  if (!model.converged && std::sqrt(frobenius_sq(grad)) <= kMlrGradientTolerance) model.converged = true;
  model.coefficients = std::move(beta);
  model.iterations = it;
  model.gradient_norm = std::sqrt(frobenius_sq(grad));
  return model;
}

BalancedAccuracy balanced_accuracy(const std::vector<int>& y_true, const std::vector<int>& y_pred, int k) {
  if (y_true.empty()) throw InvalidInput("balanced accuracy needs at least one prediction");
  if (y_true.size() != y_pred.size()) throw DimensionMismatch("y_true and y_pred differ in length");
  if (k < 1) throw InvalidInput("class count must be positive");
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] < 1 || y_true[i] > k || y_pred[i] < 1 || y_pred[i] > k) {
      throw InvalidInput("labels must lie in 1.." + std::to_string(k));
    }
  }
  BalancedAccuracy out;
  out.per_class.assign(static_cast<std::size_t>(k), std::numeric_limits<double>::quiet_NaN());
  double total = 0.0;
  int used = 0;
  for (int c = 1; c <= k; ++c) {
    double tp = 0, fn = 0, tn = 0, fp = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      const int o = y_true[i], h = y_pred[i];
      if (o == c && h == c) ++tp;
      else if (o == c) ++fn;
      else if (h == c) ++fp;
      else if (o == h) ++tn;  // correct call on another class
    }
    if (tp + fn == 0 || tn + fp == 0) {
      out.skipped.push_back(c);
      continue;
    }
    const double score = 0.5 * (tp / (tp + fn) + tn / (tn + fp));
    out.per_class[static_cast<std::size_t>(c - 1)] = score;
    total += score;
    ++used;
  }
  if (used == 0) throw InvalidInput("balanced accuracy is undefined for every class");
  out.score = total / used;
  return out;
}

}  // namespace riskshare
