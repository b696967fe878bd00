#include "riskshare/severity_fitting.hpp"

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "riskshare/errors.hpp"

namespace riskshare {

namespace {

constexpr double kDegenerateLogSd = 1e-10;
constexpr std::uintmax_t kMaxRootIterations = 200;

// Sorted copy of the sample after validation; fitting on sorted data makes the
// result independent of the input order.
std::vector<double> prepared(const LossSample& sample) {
  if (sample.values.size() < 2) throw InvalidInput("fitting needs at least 2 observations");
  for (double v : sample.values) {
    if (!std::isfinite(v) || v <= 0.0) throw InvalidInput("losses must be finite and positive");
  }
  std::vector<double> x = sample.values;
  std::sort(x.begin(), x.end());
  return x;
}

struct LogMoments {
  double mean_log = 0.0;
  double sd_log = 0.0;
  double mean = 0.0;
};

LogMoments log_moments(const std::vector<double>& x) {
  const auto n = static_cast<double>(x.size());
  LogMoments m;
  for (double v : x) {
    m.mean_log += std::log(v);
    m.mean += v;
  }
  m.mean_log /= n;
  m.mean /= n;
  double ss = 0.0;
  for (double v : x) {
    const double dev = std::log(v) - m.mean_log;
    ss += dev * dev;
  }
  m.sd_log = std::sqrt(ss / n);
  return m;
}

void require_spread(const LogMoments& m, const char* family) {
  if (m.sd_log <= kDegenerateLogSd * std::max(1.0, std::abs(m.mean_log))) {
    throw NumericFailure(std::string(family) + " fit is degenerate: sample has no spread");
  }
}

FittedModel finish(Family family, FamilyParams params, const std::vector<double>& x) {
  FittedModel m{family, params, 0.0, 0.0};
  m.loglik = log_likelihood(params, x);
  if (!std::isfinite(m.loglik)) throw NumericFailure(to_string(family) + " log-likelihood is not finite");
  m.aic = 2.0 * m.parameter_count() - 2.0 * m.loglik;
  return m;
}

// Root of a monotone function on (0, inf) by geometric bracketing around a
// starting guess, then TOMS 748.
template <class F>
double solve_shape(F f, double guess, const char* family) {
  double lo = guess, hi = guess;
  double flo = f(lo), fhi = flo;
  int expansions = 0;
  while ((flo > 0.0) == (fhi > 0.0) && flo != 0.0) {
    if (++expansions > 200) {
      throw NumericFailure(std::string(family) + " shape equation could not be bracketed");
    }
    lo /= 2.0;
    hi *= 2.0;
    flo = f(lo);
    fhi = f(hi);
  }
  if (flo == 0.0) return lo;
  std::uintmax_t iterations = kMaxRootIterations;
  const auto [a, b] = boost::math::tools::toms748_solve(
      f, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(50), iterations);
  if (iterations >= kMaxRootIterations) {
    throw NumericFailure(std::string(family) + " shape equation did not converge");
  }
  return 0.5 * (a + b);
}

}  // namespace

std::string to_string(Family family) {
  switch (family) {
    case Family::lognormal: return "lognormal";
    case Family::gamma: return "gamma";
    case Family::weibull: return "weibull";
    case Family::exponential: return "exponential";
  }
  return "unknown";
}

int FittedModel::parameter_count() const { return family == Family::exponential ? 1 : 2; }

double log_likelihood(const FamilyParams& params, const std::vector<double>& values) {
  const auto n = static_cast<double>(values.size());
  double sum_log = 0.0;
  for (double v : values) sum_log += std::log(v);
  return std::visit(
      [&](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LognormalParams>) {
          double ss = 0.0;
          for (double v : values) {
            const double z = (std::log(v) - p.mu) / p.sigma;
            ss += z * z;
          }
          return -sum_log - n * std::log(p.sigma) - 0.5 * n * std::log(2.0 * std::numbers::pi) -
                 0.5 * ss;
        } else if constexpr (std::is_same_v<T, ExponentialParams>) {
          const double total = std::accumulate(values.begin(), values.end(), 0.0);
          return n * std::log(p.rate) - p.rate * total;
        } else if constexpr (std::is_same_v<T, GammaParams>) {
          const double total = std::accumulate(values.begin(), values.end(), 0.0);
          return (p.shape - 1.0) * sum_log - total / p.scale - n * p.shape * std::log(p.scale) -
                 n * std::lgamma(p.shape);
        } else {
          double power_sum = 0.0;
          for (double v : values) power_sum += std::pow(v / p.scale, p.shape);
          return n * std::log(p.shape) - n * p.shape * std::log(p.scale) +
                 (p.shape - 1.0) * sum_log - power_sum;
        }
      },
      params);
}

FittedModel fit_lognormal(const LossSample& sample) {
  const auto x = prepared(sample);
  const auto m = log_moments(x);
  require_spread(m, "lognormal");
  return finish(Family::lognormal, LognormalParams{m.mean_log, m.sd_log}, x);
}

FittedModel fit_exponential(const LossSample& sample) {
  const auto x = prepared(sample);
  const auto m = log_moments(x);
  return finish(Family::exponential, ExponentialParams{1.0 / m.mean}, x);
}

FittedModel fit_gamma(const LossSample& sample) {
  const auto x = prepared(sample);
  const auto m = log_moments(x);
  require_spread(m, "gamma");
  const double s = std::log(m.mean) - m.mean_log;
  if (!(s > 0.0)) throw NumericFailure("gamma fit is degenerate: sample has no spread");
  auto equation = [s](double k) { return std::log(k) - boost::math::digamma(k) - s; };
  // Minka's closed-form starting point.
  const double guess = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
  const double shape = solve_shape(equation, guess, "gamma");
  return finish(Family::gamma, GammaParams{shape, m.mean / shape}, x);
}

FittedModel fit_weibull(const LossSample& sample) {
  const auto x = prepared(sample);
  const auto m = log_moments(x);
  require_spread(m, "weibull");
  std::vector<double> logs(x.size());
  std::transform(x.begin(), x.end(), logs.begin(), [](double v) { return std::log(v); });
  const double log_max = *std::max_element(logs.begin(), logs.end());
  // Weights x^k / max(x)^k keep the power sums finite for any shape.
  auto equation = [&](double k) {
    double w_sum = 0.0, wl_sum = 0.0;
    for (double l : logs) {
      const double w = std::exp(k * (l - log_max));
      w_sum += w;
      wl_sum += w * l;
    }
    return wl_sum / w_sum - 1.0 / k - m.mean_log;
  };
  const double guess = 1.2 / m.sd_log;
  const double shape = solve_shape(equation, guess, "weibull");
  double w_sum = 0.0;
  for (double l : logs) w_sum += std::exp(shape * (l - log_max));
  const double scale =
      std::exp(log_max + std::log(w_sum / static_cast<double>(x.size())) / shape);
  return finish(Family::weibull, WeibullParams{shape, scale}, x);
}

FittedModel fit_family(Family family, const LossSample& sample) {
  switch (family) {
    case Family::lognormal: return fit_lognormal(sample);
    case Family::gamma: return fit_gamma(sample);
    case Family::weibull: return fit_weibull(sample);
    case Family::exponential: return fit_exponential(sample);
  }
  throw InvalidInput("unknown family");
}

Selection select_best(const LossSample& sample) {
  prepared(sample);
  Selection selection;
  std::optional<FittedModel> best;
  for (Family family : {Family::lognormal, Family::gamma, Family::weibull, Family::exponential}) {
    FamilyFit fit{family, std::nullopt, {}};
    try {
      fit.model = fit_family(family, sample);
      if (!best || fit.model->aic < best->aic) best = fit.model;
    } catch (const std::exception& e) {
      fit.error = e.what();
    }
    selection.candidates.push_back(std::move(fit));
  }
  if (!best) throw NumericFailure("no severity family could be fitted");
  selection.best = *best;
  return selection;
}

double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 0.3) {
    // The alternating series converges slowly near zero; use the Jacobi form
    // of the CDF instead.
    double cdf = 0.0;
    const double pi2 = std::numbers::pi * std::numbers::pi;
    for (int j = 1; j <= 100; ++j) {
      const double odd = 2.0 * j - 1.0;
      cdf += std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double total = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    total += (j % 2 == 1) ? term : -term;
  }
  return std::clamp(2.0 * total, 0.0, 1.0);
}

KsResult ks_two_sample(const LossSample& a, const LossSample& b) {
  if (a.values.empty() || b.values.empty()) throw InvalidInput("KS test needs non-empty samples");
  std::vector<double> xa = a.values;
  std::vector<double> xb = b.values;
  std::sort(xa.begin(), xa.end());
  std::sort(xb.begin(), xb.end());
  const auto na = static_cast<double>(xa.size());
  const auto nb = static_cast<double>(xb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < xa.size() && j < xb.size()) {
    const double x = std::min(xa[i], xb[j]);
    while (i < xa.size() && xa[i] == x) ++i;
    while (j < xb.size() && xb[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double effective = na * nb / (na + nb);
  return {d, kolmogorov_survival(std::sqrt(effective) * d)};
}

std::vector<LossSample> read_loss_csv(std::istream& in, double currency_unit) {
  if (!(currency_unit > 0.0) || !std::isfinite(currency_unit)) throw InvalidInput("currency unit must be positive");
  auto trim = [](const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\"");
    const auto b = s.find_last_not_of(" \t\r\"");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("loss CSV is empty");
  const auto comma = line.find(',');
  if (comma == std::string::npos || trim(line.substr(0, comma)) != "incident_type_label" ||
      trim(line.substr(comma + 1)) != "loss_amount") {
    throw InvalidInput("loss CSV header must be incident_type_label,loss_amount");
  }
  std::vector<LossSample> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto at = line.find(',');
    if (at == std::string::npos || line.find(',', at + 1) != std::string::npos) {
      throw InvalidInput("line " + std::to_string(line_no) + ": expected 2 columns");
    }
    const std::string label = trim(line.substr(0, at));
    const std::string amount = trim(line.substr(at + 1));
    if (label.empty()) throw InvalidInput("line " + std::to_string(line_no) + ": empty incident type");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(amount, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != amount.size() || !std::isfinite(v)) {
      throw InvalidInput("line " + std::to_string(line_no) + ": loss is not a number: '" + amount + "'");
    }
    if (v <= 0.0) throw InvalidInput("line " + std::to_string(line_no) + ": loss must be positive");
    auto it = std::find_if(out.begin(), out.end(), [&](const LossSample& s) { return s.label == label; });
    if (it == out.end()) {
      out.push_back(LossSample{{}, static_cast<int>(out.size()) + 1, label});
      it = out.end() - 1;
    }
    it->values.push_back(v / currency_unit);
  }
  if (out.empty()) throw InvalidInput("loss CSV has no rows");
  return out;
}

}  // namespace riskshare
