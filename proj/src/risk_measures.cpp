#include "riskshare/risk_measures.hpp"

namespace riskshare {

void RiskPreferences::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("alpha must lie in (0, 1)");
  if (!(beta > 0.0 && beta < 1.0)) throw InvalidInput("beta must lie in (0, 1)");
}

double party_var(Party party, const ContractDesign& c, const IncidentMix& mix,
                 const SeverityModel& sev, double level) {
  check_dimensions(mix, sev, &c);
  return value_at_risk([&](double y) { return party_loss_cdf(party, c, mix, sev, y); }, level);
}

double ground_up_var(const IncidentMix& mix, const SeverityModel& sev, double level) {
  check_dimensions(mix, sev);
  return value_at_risk([&](double y) { return ground_up_cdf(mix, sev, y); }, level);
}

double objective(const ContractDesign& c, const IncidentMix& mix, const SeverityModel& sev,
                 const RiskPreferences& prefs) {
  prefs.validate();
  return party_var(Party::seller, c, mix, sev, prefs.alpha) +
         party_var(Party::buyer, c, mix, sev, prefs.beta);
}

PremiumRange premium_range(const ContractDesign& c, const IncidentMix& mix,
                           const SeverityModel& sev, const RiskPreferences& prefs) {
  prefs.validate();
  const double seller = party_var(Party::seller, c, mix, sev, prefs.alpha);
  const double buyer_without = ground_up_var(mix, sev, prefs.beta);
  const double buyer_with = party_var(Party::buyer, c, mix, sev, prefs.beta);
  return {seller, buyer_without - buyer_with};
}

QuoteResult quote_report(const ContractDesign& c, const IncidentMix& mix, const SeverityModel& sev,
                         const RiskPreferences& prefs) {
  prefs.validate();
  QuoteResult q;
  q.contract = c;
  q.buyer_var_no_ins = ground_up_var(mix, sev, prefs.beta);
  q.buyer_var_with_ins = party_var(Party::buyer, c, mix, sev, prefs.beta);
  q.seller_var_with_ins = party_var(Party::seller, c, mix, sev, prefs.alpha);
  q.objective = q.seller_var_with_ins + q.buyer_var_with_ins;
  q.premium = {q.seller_var_with_ins, q.buyer_var_no_ins - q.buyer_var_with_ins};
  return q;
}

}  // namespace riskshare
