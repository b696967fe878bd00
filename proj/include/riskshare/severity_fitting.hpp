#pragma once

#include <istream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace riskshare {

struct LossSample {
  std::vector<double> values;  // positive losses
  std::optional<int> incident_type_id;
  std::string label;
};

// Order doubles as the AIC tie-break: earlier wins.
enum class Family { lognormal, gamma, weibull, exponential };

std::string to_string(Family family);

struct LognormalParams {
  double mu = 0.0;
  double sigma = 1.0;
};
struct ExponentialParams {
  double rate = 1.0;
};
struct GammaParams {
  double shape = 1.0;
  double scale = 1.0;
};
struct WeibullParams {
  double shape = 1.0;
  double scale = 1.0;
};

using FamilyParams = std::variant<LognormalParams, ExponentialParams, GammaParams, WeibullParams>;

struct FittedModel {
  Family family = Family::lognormal;
  FamilyParams params;
  double loglik = 0.0;
  double aic = 0.0;

  int parameter_count() const;
};

// Log-likelihood of a sample under a fitted family/parameter pair.
double log_likelihood(const FamilyParams& params, const std::vector<double>& values);

// Closed form: mu = mean(ln x), sigma = population sd of ln x.
FittedModel fit_lognormal(const LossSample& sample);
// Closed form: rate = 1 / mean.
FittedModel fit_exponential(const LossSample& sample);
// Profile-likelihood shape equation ln k - digamma(k) = ln(mean) - mean(ln x),
// solved by bracketed root finding; scale = mean / k.
FittedModel fit_gamma(const LossSample& sample);
// Shape equation sum x^k ln x / sum x^k - 1/k - mean(ln x) = 0;
// scale = (mean x^k)^(1/k).
FittedModel fit_weibull(const LossSample& sample);

FittedModel fit_family(Family family, const LossSample& sample);

struct FamilyFit {
  Family family;
  std::optional<FittedModel> model;
  std::string error;  // set when the fit failed
};

struct Selection {
  FittedModel best;
  std::vector<FamilyFit> candidates;  // one per family, in tie-break order
};

// Fits every family and keeps the smallest AIC among the fits that succeeded.
Selection select_best(const LossSample& sample);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov test. D is exact; the p-value is asymptotic,
// Q(sqrt(n_a n_b / (n_a + n_b)) D), with the Kolmogorov series cut at 100 terms.
KsResult ks_two_sample(const LossSample& a, const LossSample& b);

// Survival function of the Kolmogorov distribution.
double kolmogorov_survival(double lambda);

// CSV with header incident_type_label,loss_amount. Amounts are divided by
// `currency_unit`; types get ids 1..K in order of first appearance.
std::vector<LossSample> read_loss_csv(std::istream& in, double currency_unit = 1.0);

}  // namespace riskshare
