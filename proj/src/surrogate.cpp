#include "riskshare/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "riskshare/errors.hpp"

namespace riskshare {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

double binomial(std::size_t n, std::size_t r) {
  double v = 1.0;
  for (std::size_t i = 1; i <= r; ++i) v = v * static_cast<double>(n - r + i) / static_cast<double>(i);
  return v;
}

void compositions(std::size_t total, std::size_t parts, std::vector<std::size_t>& prefix,
                  std::vector<std::vector<std::size_t>>& out) {
  if (parts == 1) {
    prefix.push_back(total);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (std::size_t first = 0; first <= total; ++first) {
    prefix.push_back(first);
    compositions(total - first, parts - 1, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

void SurrogateSample::validate() const {
  if (p.size() != contract.size()) throw DimensionMismatch("sample mix and contract differ in K");
  if (!std::isfinite(objective_star)) throw InvalidInput("objective_star must be finite");
}

TrainingSetBuild build_training_set(const std::vector<IncidentMix>& p_list, const SeverityModel& sev,
                                    const RiskPreferences& prefs, const CemConfig& config,
                                    std::size_t trials_per_instance, const BuildOptions& options) {
  if (p_list.empty()) throw InvalidInput("training set needs at least one mix");
  if (trials_per_instance < 1) throw InvalidInput("trials per instance must be at least 1");
  prefs.validate();
  config.validate(sev.size());

  const std::size_t n = p_list.size();
  std::vector<std::optional<SurrogateSample>> slots(n);
  std::vector<std::string> errors(n);
  std::size_t next = 0;
  std::mutex mutex;

  auto worker = [&]() {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mutex);
        if (next >= n) return;
        i = next++;
      }
      try {
        const auto& mix = p_list[i];
        const auto run = run_multi_trial(mix, sev, prefs, config, trials_per_instance,
                                         MultiTrialOptions{1, options.deadline});
        if (!run.best) {
          throw NumericFailure("every trial failed: " + run.failures.front().message);
        }
        std::vector<ContractDesign> candidates;
        for (const auto& t : run.trials) candidates.push_back(t.best_z);
        auto chosen = select_solution(candidates, mix, sev, prefs);
        const double obj = objective(chosen, mix, sev, prefs);
        slots[i] = SurrogateSample{mix, std::move(chosen), obj, config.seed};
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, n);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  TrainingSetBuild out;
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) {
      out.samples.push_back(std::move(*slots[i]));
    } else {
      out.failures.push_back({i, errors[i]});
    }
  }
  return out;
}

std::vector<IncidentMix> simplex_sweep(std::size_t k, std::size_t n, std::uint64_t seed) {
  if (k < 1) throw InvalidInput("simplex needs at least one coordinate");
  if (n < 1) throw InvalidInput("sweep needs at least one point");
  if (k == 1) {
    if (n > 1) throw InvalidInput("a one-type simplex holds a single point");
    return {IncidentMix({1.0})};
  }
  std::size_t m = 1;
  while (binomial(m + k - 1, k - 1) < static_cast<double>(n)) ++m;
  std::vector<std::vector<std::size_t>> grid;
  std::vector<std::size_t> prefix;
  compositions(m, k, prefix, grid);

  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::vector<std::vector<double>> points;
  for (const auto& g : grid) {
    std::vector<double> dir(k);
    double dsum = 0.0;
    for (double& v : dir) {
      v = expo(rng);
      dsum += v;
    }
    std::vector<double> pt(k);
    for (std::size_t j = 0; j < k; ++j) {
      pt[j] = 0.9 * static_cast<double>(g[j]) / static_cast<double>(m) + 0.1 * dir[j] / dsum;
    }
    const double total = std::accumulate(pt.begin(), pt.end(), 0.0);
    for (double& v : pt) v /= total;
    points.push_back(std::move(pt));
  }
  // Fisher-Yates with our own index draw keeps the order stable across libraries.
  for (std::size_t i = points.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(points[i], points[j]);
  }
  points.resize(n);
  std::vector<IncidentMix> out;
  out.reserve(n);
  for (auto& pt : points) out.emplace_back(std::move(pt));
  return out;
}

SurrogateModel::SurrogateModel(std::vector<SurrogateSample> train, std::size_t neighbours,
                               std::uint64_t seed)
    : train_(std::move(train)), k_(0), seed_(seed) {
  if (train_.empty()) throw InvalidInput("surrogate needs at least one training sample");
  if (neighbours < 1) throw InvalidInput("neighbour count must be at least 1");
  const std::size_t dims = train_.front().p.size();
  box_lo_.assign(dims, 1.0);
  box_hi_.assign(dims, 0.0);
  for (const auto& s : train_) {
    s.validate();
    if (s.p.size() != dims) throw DimensionMismatch("training samples differ in K");
    for (std::size_t j = 0; j < dims; ++j) {
      box_lo_[j] = std::min(box_lo_[j], s.p[j]);
      box_hi_[j] = std::max(box_hi_[j], s.p[j]);
    }
    patterns_.push_back(s.contract.theta_code());
  }
  std::sort(patterns_.begin(), patterns_.end());
  patterns_.erase(std::unique(patterns_.begin(), patterns_.end()), patterns_.end());
  k_ = std::min(neighbours, train_.size());
}

SurrogatePrediction SurrogateModel::predict(const IncidentMix& p) const {
  const std::size_t dims = types();
  if (p.size() != dims) {
    throw DimensionMismatch("mix has " + std::to_string(p.size()) + " types, surrogate expects " +
                            std::to_string(dims));
  }
  std::vector<std::pair<double, std::size_t>> dist(train_.size());
  for (std::size_t i = 0; i < train_.size(); ++i) {
    dist[i] = {squared_distance(p.probs(), train_[i].p.probs()), i};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());

  SurrogatePrediction out;
  for (std::size_t i = 0; i < k_; ++i) out.neighbours.push_back(dist[i].second);
  const auto& nearest = train_[dist.front().second];

  if (dist.front().first == 0.0) {
    out.exact_match = true;
    out.contract = nearest.contract;
    return out;
  }
  constexpr double box_slack = 1e-12;
  for (std::size_t j = 0; j < dims; ++j) {
    if (p[j] < box_lo_[j] - box_slack || p[j] > box_hi_[j] + box_slack) out.extrapolated = true;
  }
  if (out.extrapolated) {
    out.contract = nearest.contract;
    return out;
  }

  std::vector<std::uint8_t> theta(dims);
  for (std::size_t j = 0; j < dims; ++j) {
    std::size_t ones = 0;
    for (std::size_t idx : out.neighbours) ones += train_[idx].contract.is_deductible(j) ? 1 : 0;
    if (2 * ones == k_) {
      theta[j] = nearest.contract.theta()[j];
    } else {
      theta[j] = 2 * ones > k_ ? 1 : 0;
    }
  }
  const ContractDesign voted(theta, std::vector<double>(dims, 0.0));
  if (!std::binary_search(patterns_.begin(), patterns_.end(), voted.theta_code())) {
    out.unseen_pattern = true;
    out.contract = nearest.contract;
    return out;
  }

  std::vector<std::size_t> sharing;
  for (std::size_t idx : out.neighbours) {
    const auto t = train_[idx].contract.theta();
    if (std::equal(t.begin(), t.end(), theta.begin())) sharing.push_back(idx);
  }
  if (sharing.empty()) {
    out.mixed_neighbours = true;
    sharing = out.neighbours;
  }
  std::vector<double> d(dims, 0.0);
  for (std::size_t idx : sharing) {
    for (std::size_t j = 0; j < dims; ++j) d[j] += train_[idx].contract.threshold(j);
  }
  for (double& v : d) v /= static_cast<double>(sharing.size());
  out.contract = ContractDesign(std::move(theta), std::move(d));
  return out;
}

SurrogateModel train_surrogate(std::vector<SurrogateSample> train, std::size_t neighbours,
                               std::uint64_t seed) {
  return SurrogateModel(std::move(train), neighbours, seed);
}

Evaluation evaluate(const ContractPredictor& model, const std::vector<SurrogateSample>& test,
                    const SeverityModel& sev, const RiskPreferences& prefs, double tol) {
  if (test.empty()) throw InvalidInput("evaluation needs at least one test sample");
  if (!(tol >= 0.0)) throw InvalidInput("error tolerance must be non-negative");
  Evaluation out;
  for (const auto& s : test) {
    SampleEvaluation e;
    e.prediction = model.predict(s.p);
    e.objective_true = objective(s.contract, s.p, sev, prefs);
    e.objective_pred = objective(e.prediction.contract, s.p, sev, prefs);
    e.gap = e.objective_true - e.objective_pred;
    const double scale = std::abs(e.objective_true);
    e.error = std::abs(e.gap) > tol * scale;
    e.violation = e.gap > kGapViolationTolerance * scale;
    out.errors += e.error ? 1 : 0;
    out.violations += e.violation ? 1 : 0;
    out.samples.push_back(std::move(e));
  }
  out.error_rate = static_cast<double>(out.errors) / static_cast<double>(test.size());
  return out;
}

}  // namespace riskshare
