#include "riskshare/json_io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "riskshare/errors.hpp"

namespace riskshare {

namespace {

const Json& field(const Json& j, const std::string& key) {
  if (!j.is_object()) throw InvalidInput("expected a JSON object while reading '" + key + "'");
  auto it = j.find(key);
  if (it == j.end()) throw InvalidInput("missing field '" + key + "'");
  return *it;
}

double number(const Json& j, const std::string& what) {
  if (!j.is_number()) throw InvalidInput("'" + what + "' must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw InvalidInput("'" + what + "' must be finite");
  return v;
}

std::uint64_t unsigned_integer(const Json& j, const std::string& what) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (v >= 0 && v == std::floor(v) && v < 1.8e19) return static_cast<std::uint64_t>(v);
  }
  throw InvalidInput("'" + what + "' must be a non-negative integer");
}

std::vector<double> numbers(const Json& j, const std::string& what) {
  if (!j.is_array()) throw InvalidInput("'" + what + "' must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(number(v, what));
  return out;
}

// Scalar or array.
std::vector<double> broadcastable(const Json& j, const std::string& what) {
  if (j.is_number()) return {number(j, what)};
  return numbers(j, what);
}

std::vector<std::uint8_t> flags(const Json& j, const std::string& what) {
  if (!j.is_array()) throw InvalidInput("'" + what + "' must be an array of 0/1");
  std::vector<std::uint8_t> out;
  for (const auto& v : j) {
    if (v.is_boolean()) {
      out.push_back(v.get<bool>() ? 1 : 0);
      continue;
    }
    const double x = number(v, what);
    if (x != 0.0 && x != 1.0) throw InvalidInput("'" + what + "' entries must be 0 or 1");
    out.push_back(static_cast<std::uint8_t>(x));
  }
  return out;
}

Json json_vector(std::span<const double> v) { return Json(std::vector<double>(v.begin(), v.end())); }

Json theta_json(std::span<const std::uint8_t> t) {
  Json a = Json::array();
  for (auto v : t) a.push_back(static_cast<int>(v));
  return a;
}

}  // namespace

Json severity_to_json(const SeverityModel& sev) {
  Json types = Json::array();
  for (const auto& e : sev.entries()) {
    types.push_back({{"id", e.id}, {"label", e.label}, {"mu", e.mu}, {"sigma", e.sigma}});
  }
  return Json{{"types", types}};
}

SeverityModel severity_from_json(const Json& j) {
  const auto& types = field(j, "types");
  if (!types.is_array() || types.empty()) throw InvalidInput("'types' must be a non-empty array");
  std::vector<SeverityEntry> entries;
  for (const auto& t : types) {
    SeverityEntry e;
    const double id = number(field(t, "id"), "id");
    if (id != std::floor(id)) throw InvalidInput("'id' must be an integer");
    e.id = static_cast<int>(id);
    if (t.contains("label")) {
      if (!t["label"].is_string()) throw InvalidInput("'label' must be a string");
      e.label = t["label"].get<std::string>();
    }
    e.mu = number(field(t, "mu"), "mu");
    e.sigma = number(field(t, "sigma"), "sigma");
    entries.push_back(std::move(e));
  }
  return SeverityModel(std::move(entries));
}

Json mix_to_json(const IncidentMix& mix) { return Json{{"probs", json_vector(mix.probs())}}; }

IncidentMix mix_from_json(const Json& j) {
  if (j.is_array()) return IncidentMix(numbers(j, "probs"));
  return IncidentMix(numbers(field(j, "probs"), "probs"));
}

Json model_document(const SeverityModel& sev, const IncidentMix& mix) {
  Json doc = severity_to_json(sev);
  doc["probs"] = json_vector(mix.probs());
  return doc;
}

Json contract_to_json(const ContractDesign& c) {
  return Json{{"theta", theta_json(c.theta())}, {"d", json_vector(c.thresholds())}};
}

ContractDesign contract_from_json(const Json& j) {
  return ContractDesign(flags(field(j, "theta"), "theta"), numbers(field(j, "d"), "d"));
}

Json preferences_to_json(const RiskPreferences& prefs) {
  return Json{{"alpha", prefs.alpha}, {"beta", prefs.beta}};
}

RiskPreferences preferences_from_json(const Json& j, RiskPreferences base) {
  if (j.contains("alpha")) base.alpha = number(j["alpha"], "alpha");
  if (j.contains("beta")) base.beta = number(j["beta"], "beta");
  base.validate();
  return base;
}

Json quote_to_json(const QuoteResult& q) {
  Json j;
  j["buyer_risk_without_insurance"] = q.buyer_var_no_ins;
  j["buyer_risk_with_insurance"] = q.buyer_var_with_ins;
  j["seller_risk_with_insurance"] = q.seller_var_with_ins;
  j["aggregate_risk_with_insurance"] = q.objective;
  j["buyer_risk_reduction"] = q.buyer_risk_reduction();
  j["seller_risk_increase"] = q.seller_risk_increase();
  j["aggregate_risk_reduction"] = q.aggregate_risk_reduction();
  j["premium_lo"] = q.premium.lo;
  j["premium_hi"] = q.premium.hi;
  j["premium_empty"] = q.premium.empty();
  j["optimum"] = q.objective;
  j["contract"] = contract_to_json(q.contract);
  return j;
}

Json cem_config_to_json(const CemConfig& c) {
  Json j;
  j["elite_proportion"] = c.elite_proportion;
  j["sample_size"] = c.sample_size;
  j["var_threshold_d"] = c.var_threshold_d;
  j["var_threshold_theta"] = c.var_threshold_theta;
  j["lag"] = c.lag;
  j["max_iterations"] = c.max_iterations;
  j["init_d_mean"] = c.init_d_mean;
  j["init_d_sd"] = c.init_d_sd;
  j["init_theta_prob"] = c.init_theta_prob;
  j["sd_floor"] = c.sd_floor;
  j["currency_unit"] = c.currency_unit;
  j["seed"] = c.seed;
  return j;
}

CemConfig cem_config_from_json(const Json& j, CemConfig base) {
  if (!j.is_object()) throw InvalidInput("CEM configuration must be a JSON object");
  static const std::set<std::string> known = {
      "elite_proportion", "sample_size", "var_threshold_d", "var_threshold_theta",
      "lag",              "max_iterations", "init_d_mean", "init_d_sd",
      "init_theta_prob",  "sd_floor",    "currency_unit", "seed"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw InvalidInput("unknown CEM configuration key '" + key + "'");
  }
  if (j.contains("elite_proportion")) base.elite_proportion = number(j["elite_proportion"], "elite_proportion");
  if (j.contains("sample_size")) base.sample_size = unsigned_integer(j["sample_size"], "sample_size");
  if (j.contains("var_threshold_d")) base.var_threshold_d = number(j["var_threshold_d"], "var_threshold_d");
  if (j.contains("var_threshold_theta"))
    base.var_threshold_theta = number(j["var_threshold_theta"], "var_threshold_theta");
  if (j.contains("lag")) base.lag = unsigned_integer(j["lag"], "lag");
  if (j.contains("max_iterations")) base.max_iterations = unsigned_integer(j["max_iterations"], "max_iterations");
  if (j.contains("init_d_mean")) base.init_d_mean = broadcastable(j["init_d_mean"], "init_d_mean");
  if (j.contains("init_d_sd")) base.init_d_sd = broadcastable(j["init_d_sd"], "init_d_sd");
  if (j.contains("init_theta_prob")) base.init_theta_prob = broadcastable(j["init_theta_prob"], "init_theta_prob");
  if (j.contains("sd_floor")) base.sd_floor = number(j["sd_floor"], "sd_floor");
  if (j.contains("currency_unit")) base.currency_unit = number(j["currency_unit"], "currency_unit");
  if (j.contains("seed")) base.seed = unsigned_integer(j["seed"], "seed");
  return base;
}

Json trial_to_json(const TrialResult& t) {
  Json j;
  j["seed"] = t.seed;
  j["status"] = to_string(t.status);
  j["iterations"] = t.iterations;
  j["best_objective"] = t.best_objective;
  j["best_z"] = contract_to_json(t.best_z);
  j["tau_history"] = t.tau_history;
  return j;
}

Json fitted_to_json(const FittedModel& m) {
  Json params = std::visit(
      [](const auto& p) -> Json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LognormalParams>) return {{"mu", p.mu}, {"sigma", p.sigma}};
        else if constexpr (std::is_same_v<T, ExponentialParams>) return {{"rate", p.rate}};
        else return {{"shape", p.shape}, {"scale", p.scale}};
      },
      m.params);
  return Json{{"family", to_string(m.family)}, {"params", params}, {"loglik", m.loglik}, {"aic", m.aic}};
}

Json mlr_to_json(const MlrModel& m) {
  return Json{{"coefficients", m.coefficients},
              {"converged", m.converged},
              {"iterations", m.iterations},
              {"gradient_norm", m.gradient_norm}};
}

MlrModel mlr_from_json(const Json& j) {
  const auto& rows = field(j, "coefficients");
  if (!rows.is_array()) throw InvalidInput("'coefficients' must be a matrix");
  MlrModel m;
  for (const auto& r : rows) m.coefficients.push_back(numbers(r, "coefficients"));
  if (j.contains("converged") && j["converged"].is_boolean()) m.converged = j["converged"].get<bool>();
  m.validate();
  return m;
}

Json sample_to_json(const SurrogateSample& s) {
  Json j;
  j["p"] = json_vector(s.p.probs());
  j["theta_star"] = theta_json(s.contract.theta());
  j["d_star"] = json_vector(s.contract.thresholds());
  j["objective_star"] = s.objective_star;
  j["seed"] = s.seed;
  return j;
}

SurrogateSample sample_from_json(const Json& j) {
  SurrogateSample s{IncidentMix(numbers(field(j, "p"), "p")),
                    ContractDesign(flags(field(j, "theta_star"), "theta_star"),
                                   numbers(field(j, "d_star"), "d_star")),
                    number(field(j, "objective_star"), "objective_star"),
                    j.contains("seed") ? unsigned_integer(j["seed"], "seed") : 0};
  s.validate();
  return s;
}

void write_samples_jsonl(std::ostream& out, const std::vector<SurrogateSample>& samples) {
  for (const auto& s : samples) out << sample_to_json(s).dump() << '\n';
}

std::vector<SurrogateSample> read_samples_jsonl(std::istream& in) {
  std::vector<SurrogateSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(sample_from_json(parse_json(line)));
    } catch (const InvalidInput& e) {
      throw InvalidInput("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

Json surrogate_to_json(const SurrogateModel& m) {
  Json samples = Json::array();
  for (const auto& s : m.samples()) samples.push_back(sample_to_json(s));
  return Json{{"learner", "knn"},
              {"neighbours", m.neighbours()},
              {"types", m.types()},
              {"seed", m.seed()},
              {"training_size", m.samples().size()},
              {"samples", samples}};
}

SurrogateModel surrogate_from_json(const Json& j) {
  const auto& learner = field(j, "learner");
  if (!learner.is_string() || learner.get<std::string>() != "knn") {
    throw InvalidInput("unsupported surrogate learner");
  }
  const auto& samples = field(j, "samples");
  if (!samples.is_array()) throw InvalidInput("'samples' must be an array");
  std::vector<SurrogateSample> train;
  for (const auto& s : samples) train.push_back(sample_from_json(s));
  const std::size_t k = j.contains("neighbours") ? unsigned_integer(j["neighbours"], "neighbours")
                                                 : kDefaultNeighbours;
  const std::uint64_t seed = j.contains("seed") ? unsigned_integer(j["seed"], "seed") : 0;
  return SurrogateModel(std::move(train), k, seed);
}

Json prediction_to_json(const SurrogatePrediction& p) {
  Json j = contract_to_json(p.contract);
  j["exact_match"] = p.exact_match;
  j["extrapolated"] = p.extrapolated;
  j["unseen_pattern"] = p.unseen_pattern;
  j["mixed_neighbours"] = p.mixed_neighbours;
  return j;
}

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InvalidInput(std::string("malformed JSON: ") + e.what());
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_json(buf.str());
  } catch (const InvalidInput& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

}  // namespace riskshare
