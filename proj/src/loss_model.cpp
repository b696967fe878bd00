#include "riskshare/loss_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "riskshare/errors.hpp"

namespace riskshare {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// E[min(X, d)] for log-normal X.
double limited_expectation(double d, double mu, double sigma) {
  if (d <= 0.0) return 0.0;
  const double log_d = std::log(d);
  const double mean = std::exp(mu + 0.5 * sigma * sigma);
  return mean * normal_cdf((log_d - mu - sigma * sigma) / sigma) +
         d * normal_cdf((mu - log_d) / sigma);
}

// E[(X - d)+] for log-normal X, evaluated directly to avoid cancellation.
double excess_expectation(double d, double mu, double sigma) {
  const double mean = std::exp(mu + 0.5 * sigma * sigma);
  if (d <= 0.0) return mean;
  const double log_d = std::log(d);
  const double value = mean * normal_cdf((mu + sigma * sigma - log_d) / sigma) -
                       d * normal_cdf((mu - log_d) / sigma);
  return std::max(value, 0.0);
}

}  // namespace

SeverityModel::SeverityModel(std::vector<SeverityEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw InvalidInput("severity model needs at least one incident type");
  std::sort(entries_.begin(), entries_.end(),
            [](const SeverityEntry& a, const SeverityEntry& b) { return a.id < b.id; });
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const auto& e = entries_[k];
    if (e.id != static_cast<int>(k) + 1) {
      throw InvalidInput("incident type ids must be exactly 1..K without duplicates");
    }
    if (!std::isfinite(e.mu)) throw InvalidInput("non-finite mu for type " + std::to_string(e.id));
    if (!std::isfinite(e.sigma) || e.sigma <= 0.0) {
      throw InvalidInput("sigma must be positive for type " + std::to_string(e.id));
    }
  }
}

double SeverityModel::mean(std::size_t type_index) const {
  const auto& e = entries_.at(type_index);
  return std::exp(e.mu + 0.5 * e.sigma * e.sigma);
}

SeverityModel SeverityModel::cyber_reference() {
  return SeverityModel({{1, "PV", -2.5996, 3.2798},
                        {2, "DB", -0.7916, 3.1122},
                        {3, "FE", -3.4100, 2.8577},
                        {4, "ITE", -1.9557, 3.3629}});
}

IncidentMix::IncidentMix(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw InvalidInput("incident mix needs at least one probability");
  double total = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0) throw InvalidInput("incident probabilities must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > kProbabilitySumTolerance) {
    throw InvalidInput("incident probabilities must sum to 1 (got " + std::to_string(total) + ")");
  }
}

ContractDesign::ContractDesign(std::vector<std::uint8_t> theta, std::vector<double> threshold)
    : theta_(std::move(theta)), threshold_(std::move(threshold)) {
  if (theta_.size() != threshold_.size()) {
    throw DimensionMismatch("theta and d must have the same length");
  }
  for (std::size_t k = 0; k < theta_.size(); ++k) {
    if (theta_[k] > 1) throw InvalidInput("theta entries must be 0 or 1");
    if (!std::isfinite(threshold_[k]) || threshold_[k] < 0.0) {
      throw InvalidInput("thresholds must be finite and non-negative");
    }
  }
}

std::uint64_t ContractDesign::theta_code() const {
  std::uint64_t code = 0;
  for (auto t : theta_) code = (code << 1U) | t;
  return code;
}

ContractDesign ContractDesign::zero_cession(std::size_t k) {
  return {std::vector<std::uint8_t>(k, 0), std::vector<double>(k, 0.0)};
}

ContractDesign ContractDesign::full_cession(std::size_t k) {
  return {std::vector<std::uint8_t>(k, 1), std::vector<double>(k, 0.0)};
}

double lognormal_cdf(double x, double mu, double sigma) {
  if (std::isnan(x) || !std::isfinite(mu) || !std::isfinite(sigma)) {
    throw InvalidInput("lognormal_cdf: non-finite input");
  }
  if (sigma <= 0.0) throw InvalidInput("lognormal_cdf: sigma must be positive");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return normal_cdf((std::log(x) - mu) / sigma);
}

void check_dimensions(const IncidentMix& mix, const SeverityModel& sev, const ContractDesign* c) {
  if (mix.size() != sev.size()) {
    throw DimensionMismatch("incident mix has " + std::to_string(mix.size()) +
                            " types, severity model has " + std::to_string(sev.size()));
  }
  if (c != nullptr && c->size() != sev.size()) {
    throw DimensionMismatch("contract has " + std::to_string(c->size()) +
                            " types, severity model has " + std::to_string(sev.size()));
  }
}

double ground_up_cdf(const IncidentMix& mix, const SeverityModel& sev, double y) {
  check_dimensions(mix, sev);
  double total = 0.0;
  for (std::size_t k = 0; k < sev.size(); ++k) {
    total += mix[k] * lognormal_cdf(y, sev[k].mu, sev[k].sigma);
  }
  return std::min(total, 1.0);
}

MoneySplit apply_contract(double x, std::size_t type_index, const ContractDesign& c) {
  if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidInput("ground-up loss must be finite and >= 0");
  if (type_index >= c.size()) throw InvalidInput("incident type index out of range");
  const double d = c.threshold(type_index);
  const bool deductible = c.is_deductible(type_index);
  if (x <= d) return deductible ? MoneySplit{x, 0.0} : MoneySplit{0.0, x};
  // The capped leg is d rounded up to the spacing of doubles just below x, so
  // x - leg is exact and both legs stay monotone in x (differs from d by < 1 ulp of x).
  const double grid = x - std::nextafter(x, 0.0);
  const double leg = std::min(x, std::ceil(d / grid) * grid);
  return deductible ? MoneySplit{leg, x - leg} : MoneySplit{x - leg, leg};
}

double party_loss_cdf(Party party, const ContractDesign& c, const IncidentMix& mix,
                      const SeverityModel& sev, double y) {
  check_dimensions(mix, sev, &c);
  if (std::isnan(y)) throw InvalidInput("party_loss_cdf: NaN level");
  if (y < 0.0) return 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < sev.size(); ++k) {
    if (mix[k] == 0.0) continue;
    const double d = c.threshold(k);
    // The seller holds the excess layer under a deductible; the buyer holds it
    // under a limit.
    const bool holds_excess = (party == Party::seller) == c.is_deductible(k);
    double component;
    if (holds_excess) {
      component = lognormal_cdf(y + d, sev[k].mu, sev[k].sigma);
    } else {
      component = y >= d ? 1.0 : lognormal_cdf(y, sev[k].mu, sev[k].sigma);
    }
    total += mix[k] * component;
  }
  return std::min(total, 1.0);
}

double expected_seller_loss(const ContractDesign& c, const IncidentMix& mix,
                            const SeverityModel& sev) {
  check_dimensions(mix, sev, &c);
  double total = 0.0;
  for (std::size_t k = 0; k < sev.size(); ++k) {
    const double d = c.threshold(k);
    const double layer = c.is_deductible(k) ? excess_expectation(d, sev[k].mu, sev[k].sigma)
                                            : limited_expectation(d, sev[k].mu, sev[k].sigma);
    total += mix[k] * layer;
  }
  return total;
}

}  // namespace riskshare
