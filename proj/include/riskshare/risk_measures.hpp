#pragma once

#include <cmath>
#include <string>

#include "riskshare/errors.hpp"
#include "riskshare/loss_model.hpp"

namespace riskshare {

// Absolute resolution of every VaR computed by the engine: 1e-6 million.
inline constexpr double kVarTolerance = 1e-6;

// Largest magnitude explored while bracketing a quantile.
inline constexpr double kVarSearchLimit = 1e15;

struct RiskPreferences {
  double alpha = 0.95;  // seller's VaR level
  double beta = 0.90;   // buyer's VaR level

  void validate() const;
};

// Generalized inverse inf{y : F(y) >= gamma} of a non-decreasing,
// right-continuous CDF, by bracket doubling from 1.0 followed by bisection to
// `tol`. The returned y satisfies F(y) >= gamma and F(y - tol) < gamma, which
// keeps atoms (the result sits at the jump) and flat stretches (the result is
// the left end) exact up to `tol`.
template <class Cdf>
double value_at_risk(Cdf&& cdf, double gamma, double tol = kVarTolerance) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw InvalidInput("VaR level must lie in (0, 1)");
  }
  if (!(tol > 0.0)) throw InvalidInput("VaR tolerance must be positive");

  double hi = 1.0;
  while (cdf(hi) < gamma) {
    hi *= 2.0;
    if (hi > kVarSearchLimit) {
      throw UnreachableLevel("CDF stays below level " + std::to_string(gamma) +
                             " on the search range");
    }
  }
  double lo = 0.0;
  if (cdf(lo) >= gamma) {
    lo = -1.0;
    while (cdf(lo) >= gamma) {
      hi = lo;
      lo *= 2.0;
      if (lo < -kVarSearchLimit) {
        throw UnreachableLevel("CDF exceeds level " + std::to_string(gamma) +
                               " on the whole search range");
      }
    }
  }
  // Invariant: cdf(lo) < gamma <= cdf(hi).
  while (hi - lo > tol) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (cdf(mid) >= gamma) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

// VaR of one party's post-transfer loss.
double party_var(Party party, const ContractDesign& c, const IncidentMix& mix,
                 const SeverityModel& sev, double level);

// VaR of the ground-up loss, i.e. the buyer's risk without insurance.
double ground_up_var(const IncidentMix& mix, const SeverityModel& sev, double level);

// VaR_alpha(L_S) + VaR_beta(L_B): the aggregate risk the contract leaves.
double objective(const ContractDesign& c, const IncidentMix& mix, const SeverityModel& sev,
                 const RiskPreferences& prefs);

struct PremiumRange {
  double lo = 0.0;  // seller's participation floor, VaR_alpha(L_S)
  double hi = 0.0;  // buyer's participation ceiling, VaR_beta(X) - VaR_beta(L_B)

  bool empty() const { return lo > hi; }
};

PremiumRange premium_range(const ContractDesign& c, const IncidentMix& mix,
                           const SeverityModel& sev, const RiskPreferences& prefs);

struct QuoteResult {
  ContractDesign contract;
  double buyer_var_no_ins = 0.0;
  double buyer_var_with_ins = 0.0;
  double seller_var_with_ins = 0.0;
  double objective = 0.0;
  PremiumRange premium;

  double buyer_risk_reduction() const { return buyer_var_no_ins - buyer_var_with_ins; }
  double seller_risk_increase() const { return seller_var_with_ins; }
  double aggregate_risk_reduction() const { return buyer_var_no_ins - objective; }
};

QuoteResult quote_report(const ContractDesign& c, const IncidentMix& mix, const SeverityModel& sev,
                         const RiskPreferences& prefs);

}  // namespace riskshare
