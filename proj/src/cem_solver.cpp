#include "riskshare/cem_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "riskshare/errors.hpp"

namespace riskshare {

namespace {

// Rejection draws before switching to inverse-CDF sampling of the truncated normal.
constexpr int kMaxRejections = 1000;

double draw_truncated_normal(double mean, double sd, std::mt19937_64& rng,
                             std::normal_distribution<double>& normal,
                             std::uniform_real_distribution<double>& unif) {
  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    const double value = mean + sd * normal(rng);
    if (value >= 0.0) return value;
  }
  // Mass above zero is tiny: invert the tail CDF instead.
  const double z0 = -mean / sd;
  const double tail0 = 0.5 * std::erfc(z0 / std::sqrt(2.0));
  const double u = unif(rng) * tail0;
  // Bisection on the standard-normal survival function.
  double lo = z0, hi = z0 + 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(mid / std::sqrt(2.0)) > u) lo = mid; else hi = mid;
  }
  return std::max(0.0, mean + sd * lo);
}

struct CoordinateSpread {
  double max_d = 0.0;
  double max_theta = 0.0;
};

// Unbiased per-coordinate sample variances of a population.
CoordinateSpread sample_variances(std::span<const ContractDesign> pop) {
  CoordinateSpread spread;
  const std::size_t n = pop.size();
  if (n < 2) return spread;
  const std::size_t k = pop.front().size();
  for (std::size_t j = 0; j < k; ++j) {
    double mean_d = 0.0, mean_t = 0.0;
    for (const auto& z : pop) {
      mean_d += z.threshold(j);
      mean_t += z.theta()[j];
    }
    mean_d /= static_cast<double>(n);
    mean_t /= static_cast<double>(n);
    double ss_d = 0.0, ss_t = 0.0;
    for (const auto& z : pop) {
      ss_d += (z.threshold(j) - mean_d) * (z.threshold(j) - mean_d);
      ss_t += (z.theta()[j] - mean_t) * (z.theta()[j] - mean_t);
    }
    spread.max_d = std::max(spread.max_d, ss_d / static_cast<double>(n - 1));
    spread.max_theta = std::max(spread.max_theta, ss_t / static_cast<double>(n - 1));
  }
  return spread;
}

std::vector<double> broadcast(const std::vector<double>& v, std::size_t k, double fallback,
                              const char* name) {
  if (v.empty()) return std::vector<double>(k, fallback);
  if (v.size() == 1) return std::vector<double>(k, v.front());
  if (v.size() != k) {
    throw DimensionMismatch(std::string("CEM config field ") + name + " has wrong length");
  }
  return v;
}

bool lexicographically_smaller(const ContractDesign& a, const ContractDesign& b) {
  if (a.theta_code() != b.theta_code()) return a.theta_code() < b.theta_code();
  const auto da = a.thresholds();
  const auto db = b.thresholds();
  return std::lexicographical_compare(da.begin(), da.end(), db.begin(), db.end());
}

}  // namespace

std::string to_string(TrialStatus status) {
  switch (status) {
    case TrialStatus::variance_converged: return "variance_converged";
    case TrialStatus::max_iterations_reached: return "max_iterations_reached";
    case TrialStatus::budget_exhausted: return "budget_exhausted";
  }
  return "unknown";
}

CemConfig CemConfig::reference(std::size_t k) {
  CemConfig c;
  c.init_d_mean.assign(k, 0.0);
  c.init_d_sd.assign(k, 100000.0);
  c.init_theta_prob.assign(k, 0.5);
  return c;
}

std::size_t CemConfig::elite_size() const {
  return static_cast<std::size_t>(
      std::ceil(elite_proportion * static_cast<double>(sample_size) - 1e-12));
}

void CemConfig::validate(std::size_t k) const {
  if (!(elite_proportion > 0.0 && elite_proportion < 1.0)) {
    throw InvalidInput("elite_proportion must lie in (0, 1)");
  }
  if (sample_size < 2) throw InvalidInput("sample_size must be at least 2");
  if (elite_size() < 1) throw InvalidInput("elite sample would be empty");
  if (lag < 1) throw InvalidInput("lag must be at least 1");
  if (max_iterations < 1) throw InvalidInput("max_iterations must be at least 1");
  if (!(var_threshold_d >= 0.0) || !(var_threshold_theta >= 0.0)) {
    throw InvalidInput("variance thresholds must be non-negative");
  }
  if (!(sd_floor > 0.0)) throw InvalidInput("sd_floor must be positive");
  if (!(currency_unit > 0.0)) throw InvalidInput("currency_unit must be positive");
  for (double m : broadcast(init_d_mean, k, 0.0, "init_d_mean")) {
    if (!std::isfinite(m)) throw InvalidInput("init_d_mean must be finite");
  }
  for (double s : broadcast(init_d_sd, k, 100000.0, "init_d_sd")) {
    if (!(s > 0.0) || !std::isfinite(s)) throw InvalidInput("init_d_sd must be positive");
  }
  for (double p : broadcast(init_theta_prob, k, 0.5, "init_theta_prob")) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("init_theta_prob must lie in [0, 1]");
  }
}

CemParams initial_params(const CemConfig& config, std::size_t k) {
  config.validate(k);
  CemParams params;
  params.d_mean = broadcast(config.init_d_mean, k, 0.0, "init_d_mean");
  params.d_sd = broadcast(config.init_d_sd, k, 100000.0, "init_d_sd");
  params.theta_prob = broadcast(config.init_theta_prob, k, 0.5, "init_theta_prob");
  for (std::size_t j = 0; j < k; ++j) {
    params.d_mean[j] /= config.currency_unit;
    params.d_sd[j] /= config.currency_unit;
  }
  return params;
}

std::vector<ContractDesign> sample_population(const CemParams& params, std::size_t n,
                                              std::mt19937_64& rng) {
  const std::size_t k = params.size();
  if (params.d_sd.size() != k || params.theta_prob.size() != k) {
    throw DimensionMismatch("CEM parameter vectors differ in length");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<ContractDesign> pop;
  pop.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> d(k);
    std::vector<std::uint8_t> theta(k);
    for (std::size_t j = 0; j < k; ++j) {
      d[j] = draw_truncated_normal(params.d_mean[j], params.d_sd[j], rng, normal, unif);
    }
    for (std::size_t j = 0; j < k; ++j) {
      theta[j] = unif(rng) < params.theta_prob[j] ? 1 : 0;
    }
    pop.emplace_back(std::move(theta), std::move(d));
  }
  return pop;
}

CemParams update_params(std::span<const ContractDesign> elite, double sd_floor) {
  if (elite.empty()) throw InvalidInput("elite sample is empty");
  const std::size_t k = elite.front().size();
  const auto n = static_cast<double>(elite.size());
  CemParams params;
  params.d_mean.assign(k, 0.0);
  params.d_sd.assign(k, 0.0);
  params.theta_prob.assign(k, 0.0);
  for (const auto& z : elite) {
    if (z.size() != k) throw DimensionMismatch("elite candidates differ in length");
    for (std::size_t j = 0; j < k; ++j) {
      params.d_mean[j] += z.threshold(j);
      params.theta_prob[j] += z.theta()[j];
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    params.d_mean[j] /= n;
    params.theta_prob[j] /= n;
  }
  for (const auto& z : elite) {
    for (std::size_t j = 0; j < k; ++j) {
      const double dev = z.threshold(j) - params.d_mean[j];
      params.d_sd[j] += dev * dev;
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    params.d_sd[j] = std::max(std::sqrt(params.d_sd[j] / n), sd_floor);
  }
  return params;
}

TrialResult run_trial(const IncidentMix& mix, const SeverityModel& sev,
                      const RiskPreferences& prefs, const CemConfig& config, Deadline deadline) {
  check_dimensions(mix, sev);
  prefs.validate();
  const std::size_t k = sev.size();
  CemParams params = initial_params(config, k);
  const double unit = config.currency_unit;
  const double sd_floor = config.sd_floor / unit;
  const double var_threshold_d = config.var_threshold_d / (unit * unit);
  const std::size_t n = config.sample_size;
  const std::size_t n_elite = config.elite_size();

  std::mt19937_64 rng(config.seed);
  TrialResult result;
  result.seed = config.seed;
  result.best_objective = std::numeric_limits<double>::infinity();

  auto pop = sample_population(params, n, rng);
  auto spread = sample_variances(pop);
  double delta = std::numeric_limits<double>::infinity();
  bool stalled = false;
  std::vector<double> y(n);
  std::vector<std::size_t> order(n);
  std::vector<ContractDesign> elite;
  elite.reserve(n_elite);

  std::size_t t = 0;
  result.status = TrialStatus::variance_converged;
  while (spread.max_d > var_threshold_d || spread.max_theta > config.var_threshold_theta ||
         !stalled) {
    if (t >= config.max_iterations) {
      result.status = TrialStatus::max_iterations_reached;
      break;
    }
    // One full iteration always runs so a best-so-far exists.
    if (t > 0 && deadline && std::chrono::steady_clock::now() >= *deadline) {
      result.status = TrialStatus::budget_exhausted;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      try {
        y[i] = objective(pop[i], mix, sev, prefs);
      } catch (const std::exception& e) {
        throw NumericFailure("objective evaluation failed at iteration " + std::to_string(t) +
                             ": " + e.what());
      }
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
    elite.clear();
    for (std::size_t i = 0; i < n_elite; ++i) elite.push_back(pop[order[i]]);
    const double tau = y[order[n_elite - 1]];
    result.tau_history.push_back(tau);
    if (y[order[0]] < result.best_objective) {
      result.best_objective = y[order[0]];
      result.best_z = pop[order[0]];
    }
    result.best_history.push_back(result.best_objective);

    if (t >= config.lag) {
      delta = 0.0;
      for (std::size_t j = 1; j <= config.lag; ++j) {
        delta = std::max(delta, std::abs(tau - result.tau_history[t - j]));
      }
      stalled = delta <= kThresholdStallTolerance * std::abs(tau);
    }

    params = update_params(elite, sd_floor);
    ++t;
    pop = sample_population(params, n, rng);
    spread = sample_variances(pop);
  }
  result.iterations = t;
  return result;
}

MultiTrialResult run_multi_trial(const IncidentMix& mix, const SeverityModel& sev,
                                 const RiskPreferences& prefs, const CemConfig& config,
                                 std::size_t n_trials, const MultiTrialOptions& options) {
  if (n_trials < 1) throw InvalidInput("n_trials must be at least 1");
  check_dimensions(mix, sev);
  config.validate(sev.size());

  std::vector<std::optional<TrialResult>> slots(n_trials);
  std::vector<std::optional<std::string>> errors(n_trials);
  std::size_t next = 0;
  std::mutex mutex;

  auto worker = [&]() {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mutex);
        if (next >= n_trials) return;
        i = next++;
      }
      CemConfig trial_config = config;
      trial_config.seed = config.seed + i;
      try {
        slots[i] = run_trial(mix, sev, prefs, trial_config, options.deadline);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, n_trials);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }

  MultiTrialResult out;
  for (std::size_t i = 0; i < n_trials; ++i) {
    if (slots[i]) {
      out.trials.push_back(std::move(*slots[i]));
    } else {
      out.failures.push_back({config.seed + i, errors[i].value_or("unknown failure")});
    }
  }
  for (const auto& trial : out.trials) {
    if (!out.best || trial.best_objective < out.best->best_objective ||
        (trial.best_objective == out.best->best_objective && trial.seed < out.best->seed)) {
      out.best = trial;
    }
  }
  return out;
}

std::size_t select_solution_index(std::span<const ContractDesign> candidates,
                                  std::span<const double> objectives,
                                  std::span<const double> expected_losses, double rel_tol) {
  if (candidates.empty()) throw InvalidInput("select_solution needs at least one candidate");
  if (objectives.size() != candidates.size() || expected_losses.size() != candidates.size()) {
    throw DimensionMismatch("select_solution inputs differ in length");
  }
  if (!(rel_tol >= 0.0)) throw InvalidInput("tolerance must be non-negative");
  const double best = *std::min_element(objectives.begin(), objectives.end());
  const double cutoff = best + rel_tol * std::abs(best);
  std::optional<std::size_t> winner;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (objectives[i] > cutoff) continue;
    if (!winner) {
      winner = i;
      continue;
    }
    const double a = expected_losses[i];
    const double b = expected_losses[*winner];
    if (a < b || (a == b && lexicographically_smaller(candidates[i], candidates[*winner]))) {
      winner = i;
    }
  }
  return *winner;
}

ContractDesign select_solution(std::span<const ContractDesign> candidates, const IncidentMix& mix,
                               const SeverityModel& sev, const RiskPreferences& prefs,
                               double rel_tol) {
  if (candidates.empty()) throw InvalidInput("select_solution needs at least one candidate");
  std::vector<double> objectives;
  std::vector<double> losses;
  objectives.reserve(candidates.size());
  losses.reserve(candidates.size());
  for (const auto& c : candidates) {
    objectives.push_back(objective(c, mix, sev, prefs));
    losses.push_back(expected_seller_loss(c, mix, sev));
  }
  return candidates[select_solution_index(candidates, objectives, losses, rel_tol)];
}

}  // namespace riskshare
