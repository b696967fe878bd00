#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "riskshare/cem_solver.hpp"
#include "riskshare/loss_model.hpp"
#include "riskshare/risk_measures.hpp"

namespace riskshare {

// One solved instance: incident mix and its selected optimal contract.
struct SurrogateSample {
  IncidentMix p;
  ContractDesign contract;  // (theta*, d*)
  double objective_star = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BuildFailure {
  std::size_t index = 0;
  std::string message;
};

struct TrainingSetBuild {
  std::vector<SurrogateSample> samples;  // in input order, failed instances left out
  std::vector<BuildFailure> failures;
};

struct BuildOptions {
  std::size_t threads = 1;
  Deadline deadline;
};

// Solves every mix with run_multi_trial (base seed config.seed for each) and
// keeps the select_solution winner among the trials' best contracts.
TrainingSetBuild build_training_set(const std::vector<IncidentMix>& p_list, const SeverityModel& sev,
                                    const RiskPreferences& prefs, const CemConfig& config,
                                    std::size_t trials_per_instance, const BuildOptions& options = {});

// n points spread over the K-simplex: a regular grid fine enough to hold n
// points, each pulled 10% toward a Dirichlet(1) draw, n of them picked by a
// seeded shuffle.
std::vector<IncidentMix> simplex_sweep(std::size_t k, std::size_t n, std::uint64_t seed);

struct SurrogatePrediction {
  ContractDesign contract;
  bool exact_match = false;     // p coincides with a training point
  bool extrapolated = false;    // p lies outside the training bounding box
  bool unseen_pattern = false;  // voted theta never occurs in training
  bool mixed_neighbours = false;  // no neighbour shares the voted theta
  std::vector<std::size_t> neighbours;

  bool flagged() const { return extrapolated || unseen_pattern || mixed_neighbours; }
};

// Anything mapping p to a contract can be scored by evaluate().
class ContractPredictor {
 public:
  virtual ~ContractPredictor() = default;
  virtual SurrogatePrediction predict(const IncidentMix& p) const = 0;
};

inline constexpr std::size_t kDefaultNeighbours = 5;

// k-nearest-neighbour surrogate on the probability simplex (Euclidean).
// theta is a per-coordinate majority vote over the neighbours (ties go to the
// nearest neighbour's value); d is the mean d* over the neighbours whose
// theta* equals the vote.
class SurrogateModel : public ContractPredictor {
 public:
  SurrogateModel(std::vector<SurrogateSample> train, std::size_t neighbours = kDefaultNeighbours,
                 std::uint64_t seed = 0);

  SurrogatePrediction predict(const IncidentMix& p) const override;

  const std::vector<SurrogateSample>& samples() const { return train_; }
  std::size_t neighbours() const { return k_; }
  std::size_t types() const { return train_.front().p.size(); }
  std::uint64_t seed() const { return seed_; }

 private:
  std::vector<SurrogateSample> train_;
  std::size_t k_;
  std::uint64_t seed_;
  std::vector<double> box_lo_, box_hi_;
  std::vector<std::uint64_t> patterns_;  // sorted theta codes seen in training
};

SurrogateModel train_surrogate(std::vector<SurrogateSample> train, std::size_t neighbours = kDefaultNeighbours,
                               std::uint64_t seed = 0);

inline constexpr double kDefaultErrorTolerance = 1e-4;
// Relative slack beyond which a positive gap means the stored solution was not optimal.
inline constexpr double kGapViolationTolerance = 5e-3;

struct SampleEvaluation {
  double objective_true = 0.0;
  double objective_pred = 0.0;
  double gap = 0.0;  // objective_true - objective_pred; negative when the prediction is worse
  bool error = false;
  bool violation = false;  // gap > kGapViolationTolerance * |objective_true|
  SurrogatePrediction prediction;
};

struct Evaluation {
  double error_rate = 0.0;
  std::size_t errors = 0;
  std::size_t violations = 0;
  std::vector<SampleEvaluation> samples;
};

// A sample is an error when |gap| > tol * |objective_true|.
Evaluation evaluate(const ContractPredictor& model, const std::vector<SurrogateSample>& test,
                    const SeverityModel& sev, const RiskPreferences& prefs,
                    double tol = kDefaultErrorTolerance);

}  // namespace riskshare
