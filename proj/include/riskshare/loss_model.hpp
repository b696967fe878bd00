#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace riskshare {

// Money is expressed in millions of currency throughout the engine.

inline constexpr double kProbabilitySumTolerance = 1e-9;

struct SeverityEntry {
  int id = 0;          // incident type id, 1..K
  std::string label;   // short display name, e.g. "PV"
  double mu = 0.0;     // log-mean of the loss in ln(millions)
  double sigma = 1.0;  // log-standard-deviation
};

// Conditional law of the ground-up loss given the incident type: one
// log-normal per type. Entries are kept sorted by id and ids are exactly 1..K.
class SeverityModel {
 public:
  explicit SeverityModel(std::vector<SeverityEntry> entries);

  std::size_t size() const { return entries_.size(); }
  const SeverityEntry& operator[](std::size_t type_index) const {
    return entries_[type_index];
  }
  std::span<const SeverityEntry> entries() const { return entries_; }

  // Mean of the type's log-normal, exp(mu + sigma^2 / 2).
  double mean(std::size_t type_index) const;

  // The four cyber incident types (PV, DB, FE, ITE) fitted on historical
  // incident losses, in millions.
  static SeverityModel cyber_reference();

 private:
  std::vector<SeverityEntry> entries_;
};

// Law of the incident type: p_k = P(O = k). Types are mutually exclusive so
// the probabilities sum to one.
class IncidentMix {
 public:
  explicit IncidentMix(std::vector<double> probs);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t type_index) const { return probs_[type_index]; }
  std::span<const double> probs() const { return probs_; }

 private:
  std::vector<double> probs_;
};

// theta_k = 1 places a deductible d_k on type k (seller pays the excess),
// theta_k = 0 places a limit d_k (seller pays up to d_k).
class ContractDesign {
 public:
  ContractDesign() = default;
  ContractDesign(std::vector<std::uint8_t> theta, std::vector<double> threshold);

  std::size_t size() const { return theta_.size(); }
  bool is_deductible(std::size_t type_index) const { return theta_[type_index] != 0; }
  double threshold(std::size_t type_index) const { return threshold_[type_index]; }
  std::span<const std::uint8_t> theta() const { return theta_; }
  std::span<const double> thresholds() const { return threshold_; }

  // theta read as a binary number with theta_1 as the most significant bit.
  std::uint64_t theta_code() const;

  // Limit of zero on every type: the seller takes nothing.
  static ContractDesign zero_cession(std::size_t k);
  // Deductible of zero on every type: the seller takes everything.
  static ContractDesign full_cession(std::size_t k);

  friend bool operator==(const ContractDesign&, const ContractDesign&) = default;

 private:
  std::vector<std::uint8_t> theta_;
  std::vector<double> threshold_;
};

struct MoneySplit {
  double retained = 0.0;  // buyer's share R_k(x)
  double ceded = 0.0;     // seller's share I_k(x)
};

enum class Party { buyer, seller };

// P(X <= x) for X log-normal(mu, sigma); zero on (-inf, 0].
double lognormal_cdf(double x, double mu, double sigma);

// Mixture CDF of the ground-up loss, sum_k p_k F_k(y).
double ground_up_cdf(const IncidentMix& mix, const SeverityModel& sev, double y);

// Splits a ground-up loss x of incident type `type_index` (0-based) between
// buyer and seller.
MoneySplit apply_contract(double x, std::size_t type_index, const ContractDesign& c);

// CDF of the buyer's or the seller's post-transfer loss. Includes the atoms at
// 0 (excess layers) and at d_k (capped layers) exactly.
double party_loss_cdf(Party party, const ContractDesign& c, const IncidentMix& mix,
                      const SeverityModel& sev, double y);

// E[L_S] from the closed-form limited expected value of the log-normal.
double expected_seller_loss(const ContractDesign& c, const IncidentMix& mix,
                            const SeverityModel& sev);

// Throws DimensionMismatch unless all non-null inputs share the same K.
void check_dimensions(const IncidentMix& mix, const SeverityModel& sev,
                      const ContractDesign* c = nullptr);

}  // namespace riskshare
