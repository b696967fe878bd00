#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "riskshare/loss_model.hpp"
#include "riskshare/risk_measures.hpp"

namespace riskshare {

// Relative tolerance under which two successive elite thresholds count as equal.
inline constexpr double kThresholdStallTolerance = 1e-6;

// Cross-entropy search settings. Monetary fields are in raw currency units
// (`currency_unit` per million); the solver converts them to millions.
struct CemConfig {
  double elite_proportion = 0.2;
  std::size_t sample_size = 10;
  double var_threshold_d = 0.1;         // (raw currency)^2
  double var_threshold_theta = 0.01;
  std::size_t lag = 10;
  std::size_t max_iterations = 401;
  std::vector<double> init_d_mean;      // raw currency, one per type
  std::vector<double> init_d_sd;        // raw currency, one per type
  std::vector<double> init_theta_prob;  // one per type
  double sd_floor = 1e-3;               // raw currency
  double currency_unit = 1e6;           // raw units per million
  std::uint64_t seed = 0;

  // Default search settings for the cyber model: truncated normal
  // d ~ N(0, 100000) per type, Bernoulli(0.5) theta, N = 10, 20% elite,
  // lag 10, at most 401 iterations.
  static CemConfig reference(std::size_t k);

  std::size_t elite_size() const;
  void validate(std::size_t k) const;
};

// Parameters of the sampling density, in millions.
struct CemParams {
  std::vector<double> d_mean;
  std::vector<double> d_sd;
  std::vector<double> theta_prob;

  std::size_t size() const { return d_mean.size(); }
};

enum class TrialStatus { variance_converged, max_iterations_reached, budget_exhausted };

std::string to_string(TrialStatus status);

struct TrialResult {
  ContractDesign best_z;
  double best_objective = 0.0;
  std::size_t iterations = 0;
  TrialStatus status = TrialStatus::max_iterations_reached;
  std::vector<double> tau_history;   // elite threshold per iteration
  std::vector<double> best_history;  // best objective seen up to each iteration
  std::uint64_t seed = 0;
};

using Deadline = std::optional<std::chrono::steady_clock::time_point>;

// Draws n candidates: d_k from N(d_mean_k, d_sd_k) truncated to [0, inf) by
// rejection, theta_k from Bernoulli(theta_prob_k).
std::vector<ContractDesign> sample_population(const CemParams& params, std::size_t n,
                                              std::mt19937_64& rng);

// Maximum-likelihood refit on the elite: per-coordinate mean and population
// standard deviation of d (floored at sd_floor, in millions) and the fraction
// of deductibles for theta.
CemParams update_params(std::span<const ContractDesign> elite, double sd_floor);

// Starting density in millions derived from a configuration.
CemParams initial_params(const CemConfig& config, std::size_t k);

// One cross-entropy run. Returns the best candidate observed over the whole run.
TrialResult run_trial(const IncidentMix& mix, const SeverityModel& sev,
                      const RiskPreferences& prefs, const CemConfig& config,
                      Deadline deadline = std::nullopt);

struct TrialFailure {
  std::uint64_t seed = 0;
  std::string message;
};

struct MultiTrialResult {
  std::optional<TrialResult> best;
  std::vector<TrialResult> trials;  // ordered by seed
  std::vector<TrialFailure> failures;
};

struct MultiTrialOptions {
  std::size_t threads = 1;
  Deadline deadline;
};

// Runs n_trials independent trials with seeds config.seed + i. The best trial
// is the one with the smallest objective, ties going to the smaller seed.
MultiTrialResult run_multi_trial(const IncidentMix& mix, const SeverityModel& sev,
                                 const RiskPreferences& prefs, const CemConfig& config,
                                 std::size_t n_trials, const MultiTrialOptions& options = {});

// Among candidates whose objective is within `rel_tol` of the best, picks the
// one with the least expected seller loss; remaining ties go to the smaller
// theta code, then to the componentwise-smaller d.
ContractDesign select_solution(std::span<const ContractDesign> candidates, const IncidentMix& mix,
                               const SeverityModel& sev, const RiskPreferences& prefs,
                               double rel_tol = 1e-4);

// Same rule on precomputed objectives and expected seller losses; returns the
// winning index.
std::size_t select_solution_index(std::span<const ContractDesign> candidates,
                                  std::span<const double> objectives,
                                  std::span<const double> expected_losses, double rel_tol);

}  // namespace riskshare
