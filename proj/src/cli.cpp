#include "riskshare/cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "riskshare/cem_solver.hpp"
#include "riskshare/errors.hpp"
#include "riskshare/incident_classifier.hpp"
#include "riskshare/json_io.hpp"
#include "riskshare/quote_service.hpp"
#include "riskshare/severity_fitting.hpp"
#include "riskshare/surrogate.hpp"

namespace riskshare::cli {

namespace fs = std::filesystem;

namespace {

struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string pretty(const Json& j) { return j.dump(2) + "\n"; }

// One manifest per run, written next to the primary output.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& args)
      : command_(std::move(command)), args_(args), start_(std::chrono::steady_clock::now()) {}

  void input(const std::string& path) { inputs_.push_back(path); }
  void output(const std::string& path) { outputs_.push_back(path); }
  void config(Json j) { config_ = std::move(j); }
  void seed(std::uint64_t s) { seed_ = s; }

  void write(const std::string& path) const { write_atomic(path, pretty(json())); }

  Json json() const {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    Json j;
    j["command"] = command_;
    j["args"] = args_;
    j["config"] = config_;
    j["seed"] = seed_;
    j["inputs"] = files(inputs_);
    j["outputs"] = files(outputs_);
    j["wall_time_seconds"] = wall;
    return j;
  }

 private:
  static Json files(const std::vector<std::string>& paths) {
    Json a = Json::array();
    for (const auto& p : paths) a.push_back({{"path", p}, {"sha256", sha256_file(p)}});
    return a;
  }

  std::string command_;
  std::vector<std::string> args_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> inputs_, outputs_;
  Json config_ = Json::object();
  std::uint64_t seed_ = 0;
};

struct Common {
  std::string severity;
  std::string probs;
  double alpha = 0.95;
  double beta = 0.90;
  std::uint64_t seed = 0;
  std::string cem_config;
  std::string out;
  std::string manifest;
  std::optional<std::size_t> threads;
  std::ostream* diag = nullptr;  // gets the manifest when there is no file to put it in
};

SeverityModel load_severity(const std::string& path, Manifest& m) {
  if (path.empty() || path == "builtin") return SeverityModel::cyber_reference();
  m.input(path);
  return severity_from_json(read_json_file(path));
}

// Comma-separated numbers or a JSON file (array or {"probs": [...]}).
IncidentMix load_mix(const std::string& spec, Manifest& m) {
  if (spec.empty()) throw UsageError("--probs is required");
  if (fs::is_regular_file(spec)) {
    m.input(spec);
    return mix_from_json(read_json_file(spec));
  }
  std::vector<double> p;
  std::stringstream ss(spec);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != cell.size()) throw InvalidInput("--probs: not a number or file: '" + cell + "'");
    p.push_back(v);
  }
  return IncidentMix(std::move(p));
}

RiskPreferences prefs_of(const Common& c) {
  RiskPreferences p{c.alpha, c.beta};
  p.validate();
  return p;
}

CemConfig load_cem(const Common& c, std::size_t k, Manifest& m) {
  CemConfig cfg = CemConfig::reference(k);
  if (!c.cem_config.empty()) {
    m.input(c.cem_config);
    cfg = cem_config_from_json(read_json_file(c.cem_config), cfg);
  }
  cfg.seed = c.seed;
  cfg.validate(k);
  return cfg;
}

void emit(const std::string& path, const std::string& content, std::ostream& out, Manifest& m) {
  if (path.empty()) {
    out << content;
    return;
  }
  write_atomic(path, content);
  m.output(path);
}

void finish_manifest(const Common& c, const Manifest& m) {
  std::string path = c.manifest;
  if (path.empty() && !c.out.empty()) path = c.out + ".manifest.json";
  if (!path.empty()) {
    m.write(path);
  } else if (c.diag) {
    *c.diag << "manifest: " << m.json().dump() << "\n";
  }
}

void add_common(CLI::App* app, Common& c, bool model_inputs) {
  if (model_inputs) {
    app->add_option("--severity", c.severity, "SeverityModel JSON (default: built-in cyber model)");
    app->add_option("--probs", c.probs, "incident probabilities: p1,p2,... or a JSON file");
    app->add_option("--alpha", c.alpha, "seller VaR level")->capture_default_str();
    app->add_option("--beta", c.beta, "buyer VaR level")->capture_default_str();
  }
  app->add_option("--seed", c.seed, "base random seed")->capture_default_str();
  app->add_option("--out", c.out, "output path (default: standard output)");
  app->add_option("--manifest", c.manifest, "run manifest path (default: <out>.manifest.json)");
}

std::vector<IncidentMix> load_mix_list(const std::string& path, Manifest& m) {
  m.input(path);
  const std::string text = read_file(path);
  std::vector<IncidentMix> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    const Json j = parse_json(text);
    if (j.is_array() && !j.empty() && j.front().is_array()) {
      for (const auto& row : j) out.push_back(mix_from_json(row));
      return out;
    }
  }
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(mix_from_json(parse_json(line)));
  }
  if (out.empty()) throw InvalidInput(path + " holds no mixes");
  return out;
}

int cmd_fit(const std::string& input, double unit, const Common& c, const std::vector<std::string>& args,
            std::ostream& out, std::ostream& err) {
  Manifest m("fit", args);
  m.input(input);
  std::ifstream in(input);
  if (!in) throw InvalidInput("cannot open " + input);
  const auto samples = read_loss_csv(in, unit);

  Json types = Json::array();
  std::vector<SeverityEntry> entries;
  for (const auto& s : samples) {
    const auto selection = select_best(s);
    const auto& lognormal = selection.candidates.front();
    if (!lognormal.model) {
      throw NumericFailure("type " + s.label + ": log-normal fit failed: " + lognormal.error);
    }
    const auto params = std::get<LognormalParams>(lognormal.model->params);
    Json candidates = Json::array();
    for (const auto& cand : selection.candidates) {
      if (cand.model) {
        candidates.push_back(fitted_to_json(*cand.model));
      } else {
        candidates.push_back({{"family", to_string(cand.family)}, {"error", cand.error}});
      }
    }
    types.push_back({{"id", *s.incident_type_id},
                     {"label", s.label},
                     {"mu", params.mu},
                     {"sigma", params.sigma},
                     {"count", s.values.size()},
                     {"family", to_string(selection.best.family)},
                     {"best", fitted_to_json(selection.best)},
                     {"candidates", candidates}});
    entries.push_back({*s.incident_type_id, s.label, params.mu, params.sigma});
    if (selection.best.family != Family::lognormal) {
      err << "note: type " << s.label << " is best fitted by " << to_string(selection.best.family)
          << "; the loss model uses its log-normal fit\n";
    }
  }
  const SeverityModel validated(entries);  // ids and sigmas
  (void)validated;

  Json ks = Json::array();
  for (std::size_t a = 0; a < samples.size(); ++a) {
    for (std::size_t b = a + 1; b < samples.size(); ++b) {
      const auto r = ks_two_sample(samples[a], samples[b]);
      ks.push_back({{"a", samples[a].label}, {"b", samples[b].label}, {"statistic", r.statistic},
                    {"p_value", r.p_value}});
    }
  }
  Json doc{{"types", types}, {"currency_unit", unit}, {"ks", ks}};
  m.config({{"currency_unit", unit}});
  emit(c.out, pretty(doc), out, m);
  finish_manifest(c, m);
  return kOk;
}

int cmd_solve(const Common& c, std::size_t trials, bool table, const std::vector<std::string>& args,
              std::ostream& out, std::ostream& err) {
  Manifest m("solve", args);
  const auto sev = load_severity(c.severity, m);
  const auto mix = load_mix(c.probs, m);
  check_dimensions(mix, sev);
  const auto prefs = prefs_of(c);
  const auto cfg = load_cem(c, sev.size(), m);
  const std::size_t threads = worker_threads(c.threads);

  const auto run = run_multi_trial(mix, sev, prefs, cfg, trials, MultiTrialOptions{threads, std::nullopt});
  for (const auto& f : run.failures) err << "trial seed " << f.seed << " failed: " << f.message << "\n";
  if (!run.best) throw SolverFailure("every CEM trial failed");

  std::vector<ContractDesign> candidates;
  for (const auto& t : run.trials) candidates.push_back(t.best_z);
  const auto chosen = select_solution(candidates, mix, sev, prefs);
  const auto q = quote_report(chosen, mix, sev, prefs);

  Json config{{"probs", Json(std::vector<double>(mix.probs().begin(), mix.probs().end()))},
              {"preferences", preferences_to_json(prefs)},
              {"trials", trials},
              {"cem", cem_config_to_json(cfg)}};
  Json trial_docs = Json::array();
  for (const auto& t : run.trials) trial_docs.push_back(trial_to_json(t));
  Json failures = Json::array();
  for (const auto& f : run.failures) failures.push_back({{"seed", f.seed}, {"error", f.message}});
  Json doc{{"quote", quote_to_json(q)},
           {"best_trial_seed", run.best->seed},
           {"config", config},
           {"trials", trial_docs},
           {"failures", failures}};
  m.config(config);
  m.seed(c.seed);
  emit(c.out, pretty(doc), out, m);
  if (table) (c.out.empty() ? err : out) << render_table(q, sev);
  finish_manifest(c, m);
  return kOk;
}

int cmd_evaluate(const Common& c, const std::string& contract_spec, bool table,
                 const std::vector<std::string>& args, std::ostream& out) {
  Manifest m("evaluate", args);
  const auto sev = load_severity(c.severity, m);
  const auto mix = load_mix(c.probs, m);
  check_dimensions(mix, sev);
  const auto prefs = prefs_of(c);
  Json cj;
  if (fs::is_regular_file(contract_spec)) {
    m.input(contract_spec);
    cj = read_json_file(contract_spec);
  } else {
    cj = parse_json(contract_spec);
  }
  const auto contract = contract_from_json(cj);
  check_dimensions(mix, sev, &contract);
  const auto q = quote_report(contract, mix, sev, prefs);
  m.config({{"preferences", preferences_to_json(prefs)}, {"contract", contract_to_json(contract)}});
  emit(c.out, pretty(quote_to_json(q)), out, m);
  if (table) out << render_table(q, sev);
  finish_manifest(c, m);
  return kOk;
}

int cmd_surrogate_build(const Common& c, const std::string& list, std::size_t sweep, std::size_t trials,
                        const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Manifest m("surrogate build", args);
  const auto sev = load_severity(c.severity, m);
  const auto prefs = prefs_of(c);
  const auto cfg = load_cem(c, sev.size(), m);
  std::vector<IncidentMix> mixes;
  if (!list.empty() && sweep > 0) throw UsageError("use either --probs-list or --sweep");
  if (!list.empty()) {
    mixes = load_mix_list(list, m);
  } else if (sweep > 0) {
    mixes = simplex_sweep(sev.size(), sweep, c.seed);
  } else {
    throw UsageError("surrogate build needs --probs-list or --sweep");
  }
  for (const auto& mix : mixes) check_dimensions(mix, sev);
  const auto built = build_training_set(mixes, sev, prefs, cfg, trials,
                                        BuildOptions{worker_threads(c.threads), std::nullopt});
  for (const auto& f : built.failures) err << "instance " << f.index << " failed: " << f.message << "\n";
  if (built.samples.empty()) throw SolverFailure("every instance failed");
  std::ostringstream body;
  write_samples_jsonl(body, built.samples);
  m.config({{"preferences", preferences_to_json(prefs)},
            {"trials_per_instance", trials},
            {"sweep", sweep},
            {"cem", cem_config_to_json(cfg)}});
  m.seed(c.seed);
  emit(c.out, body.str(), out, m);
  finish_manifest(c, m);
  return kOk;
}

std::vector<SurrogateSample> load_samples(const std::string& path, Manifest& m) {
  m.input(path);
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  auto samples = read_samples_jsonl(in);
  if (samples.empty()) throw InvalidInput(path + " holds no samples");
  return samples;
}

int cmd_surrogate_train(const Common& c, const std::string& samples_path, std::size_t neighbours,
                        const std::vector<std::string>& args, std::ostream& out) {
  Manifest m("surrogate train", args);
  auto model = train_surrogate(load_samples(samples_path, m), neighbours, c.seed);
  m.config({{"neighbours", neighbours}});
  m.seed(c.seed);
  emit(c.out, pretty(surrogate_to_json(model)), out, m);
  finish_manifest(c, m);
  return kOk;
}

int cmd_surrogate_eval(const Common& c, const std::string& model_path, const std::string& samples_path,
                       double tol, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Manifest m("surrogate eval", args);
  const auto sev = load_severity(c.severity, m);
  const auto prefs = prefs_of(c);
  m.input(model_path);
  const auto model = surrogate_from_json(read_json_file(model_path));
  const auto test = load_samples(samples_path, m);
  const auto ev = evaluate(model, test, sev, prefs, tol);
  Json rows = Json::array();
  for (const auto& s : ev.samples) {
    rows.push_back({{"objective_true", s.objective_true},
                    {"objective_pred", s.objective_pred},
                    {"gap", s.gap},
                    {"error", s.error},
                    {"violation", s.violation},
                    {"prediction", prediction_to_json(s.prediction)}});
  }
  Json doc{{"error_rate", ev.error_rate},
           {"errors", ev.errors},
           {"violations", ev.violations},
           {"test_size", test.size()},
           {"tolerance", tol},
           {"samples", rows}};
  if (ev.violations > 0) {
    err << ev.violations << " sample(s) beat the stored solution by more than "
        << kGapViolationTolerance * 100 << "%: the stored CEM solution was not optimal\n";
  }
  m.config({{"preferences", preferences_to_json(prefs)}, {"tolerance", tol}});
  emit(c.out, pretty(doc), out, m);
  finish_manifest(c, m);
  return kOk;
}

int cmd_surrogate_predict(const Common& c, const std::string& model_path, const std::vector<std::string>& args,
                          std::ostream& out) {
  Manifest m("surrogate predict", args);
  m.input(model_path);
  const auto model = surrogate_from_json(read_json_file(model_path));
  const auto mix = load_mix(c.probs, m);
  const auto prediction = model.predict(mix);
  emit(c.out, pretty(prediction_to_json(prediction)), out, m);
  finish_manifest(c, m);
  return kOk;
}

std::vector<double> parse_features(const std::string& spec) {
  std::vector<double> v;
  std::stringstream ss(spec);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != cell.size()) throw InvalidInput("--features: not a number: '" + cell + "'");
    v.push_back(x);
  }
  return v;
}

LabeledDataset load_dataset(const std::string& path, Manifest& m) {
  m.input(path);
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  return read_labeled_csv(in);
}

std::pair<std::string, int> split_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw UsageError("--bind must be host:port");
  const std::string host = bind.substr(0, colon);
  const std::string port_text = bind.substr(colon + 1);
  std::size_t used = 0;
  int port = -1;
  try {
    port = std::stoi(port_text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != port_text.size() || port < 0 || port > 65535) {
    throw UsageError("--bind port must be 0..65535");
  }
  return {host.empty() ? std::string("127.0.0.1") : host, port};
}

}  // namespace

std::size_t worker_threads(std::optional<std::size_t> requested) {
  std::size_t n = requested.value_or(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* cap = std::getenv("QUOTE_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(cap, &end, 10);
    if (end != cap && *end == '\0' && v > 0) n = std::min<std::size_t>(n, v);
  }
  return std::max<std::size_t>(n, 1);
}

void write_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << content;
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string sha256_file(const std::string& path) {
  const std::string data = read_file(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed for " + path);
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

std::string render_table(const QuoteResult& q, const SeverityModel& sev) {
  std::ostringstream t;
  t << std::fixed << std::setprecision(4);
  auto row = [&](const std::string& label, const std::string& value) {
    t << std::left << std::setw(44) << label << value << "\n";
  };
  auto money = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << v;
    return s.str();
  };
  for (std::size_t k = 0; k < q.contract.size(); ++k) {
    const std::string name = sev[k].label.empty() ? std::to_string(sev[k].id) : sev[k].label;
    row("theta*_" + std::to_string(k + 1) + " (" + name + ")",
        std::to_string(int(q.contract.theta()[k])) + (q.contract.is_deductible(k) ? "  deductible" : "  limit"));
  }
  for (std::size_t k = 0; k < q.contract.size(); ++k) {
    const std::string name = sev[k].label.empty() ? std::to_string(sev[k].id) : sev[k].label;
    row("d*_" + std::to_string(k + 1) + " (millions, " + name + ")", money(q.contract.threshold(k)));
  }
  row("Buyer's risk without insurance (millions)", money(q.buyer_var_no_ins));
  row("Buyer's risk with insurance (millions)", money(q.buyer_var_with_ins));
  row("Buyer's risk reduction (millions)", money(q.buyer_risk_reduction()));
  row("Seller's risk without insurance (millions)", money(0.0));
  row("Seller's risk with insurance (millions)", money(q.seller_var_with_ins));
  row("Seller's risk increase (millions)", money(q.seller_risk_increase()));
  row("Aggregate risk without insurance (millions)", money(q.buyer_var_no_ins));
  row("Aggregate risk with insurance (millions)", money(q.objective));
  row("Aggregate risk reduction (millions)", money(q.aggregate_risk_reduction()));
  row("Premium range (millions)", "[" + money(q.premium.lo) + ", " + money(q.premium.hi) + "]" +
                                      (q.premium.empty() ? "  EMPTY" : ""));
  return t.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Incident-specific insurance contract design"};
  app.require_subcommand(1);
  Common c;
  c.diag = &err;

  std::string input;
  double currency_unit = 1e6;
  auto* fit = app.add_subcommand("fit", "fit severity models to a loss CSV");
  fit->add_option("--input", input, "CSV with incident_type_label,loss_amount")->required();
  fit->add_option("--currency-unit", currency_unit, "raw units per million")->capture_default_str()
      ->check(CLI::PositiveNumber);
  add_common(fit, c, false);

  std::size_t trials = 10;
  bool table = false;
  auto* solve = app.add_subcommand("solve", "solve for the optimal contract with the CEM");
  add_common(solve, c, true);
  solve->add_option("--trials", trials, "number of CEM trials")->capture_default_str()->check(CLI::PositiveNumber);
  solve->add_option("--cem-config", c.cem_config, "CEM configuration JSON");
  solve->add_option("--threads", c.threads, "worker threads (capped by QUOTE_THREADS)");
  solve->add_flag("--table", table, "also print a human-readable table");

  std::string contract_spec;
  auto* eval = app.add_subcommand("evaluate", "risk decomposition of a given contract");
  add_common(eval, c, true);
  eval->add_option("--contract", contract_spec, "contract JSON or file")->required();
  eval->add_flag("--table", table, "also print a human-readable table");

  auto* sur = app.add_subcommand("surrogate", "surrogate model pipeline");
  sur->require_subcommand(1);
  std::string list, samples_path, model_path;
  std::size_t sweep = 0, neighbours = kDefaultNeighbours;
  double tol = kDefaultErrorTolerance;
  auto* build = sur->add_subcommand("build", "solve many mixes into a training set");
  add_common(build, c, true);
  build->add_option("--probs-list", list, "mixes, JSON lines or a JSON array of arrays");
  build->add_option("--sweep", sweep, "number of simplex points to generate instead");
  build->add_option("--trials", trials, "CEM trials per instance")->capture_default_str()->check(CLI::PositiveNumber);
  build->add_option("--cem-config", c.cem_config, "CEM configuration JSON");
  build->add_option("--threads", c.threads, "worker threads (capped by QUOTE_THREADS)");
  auto* train = sur->add_subcommand("train", "fit the k-NN surrogate");
  add_common(train, c, false);
  train->add_option("--samples", samples_path, "training samples (JSON lines)")->required();
  train->add_option("--neighbours", neighbours, "k")->capture_default_str()->check(CLI::PositiveNumber);
  auto* sev_eval = sur->add_subcommand("eval", "error rate of a surrogate on solved samples");
  add_common(sev_eval, c, true);
  sev_eval->add_option("--model", model_path, "surrogate JSON")->required();
  sev_eval->add_option("--samples", samples_path, "test samples (JSON lines)")->required();
  sev_eval->add_option("--tol", tol, "relative error tolerance")->capture_default_str();
  auto* predict = sur->add_subcommand("predict", "predict a contract for one mix");
  add_common(predict, c, true);
  predict->add_option("--model", model_path, "surrogate JSON")->required();

  auto* cls = app.add_subcommand("classify", "multinomial logistic baseline for incident types");
  cls->require_subcommand(1);
  std::string data_path, features;
  double l2 = 0.01;
  std::size_t max_iter = 5000;
  auto* ctrain = cls->add_subcommand("train", "train on a labeled CSV");
  add_common(ctrain, c, false);
  ctrain->add_option("--data", data_path, "CSV with f1..fF,label")->required();
  ctrain->add_option("--l2", l2, "L2 penalty")->capture_default_str();
  ctrain->add_option("--max-iter", max_iter, "iteration cap")->capture_default_str();
  auto* cpredict = cls->add_subcommand("predict", "incident probabilities for one feature vector");
  add_common(cpredict, c, false);
  cpredict->add_option("--model", model_path, "MLR JSON")->required();
  cpredict->add_option("--features", features, "x1,x2,...")->required();
  auto* cscore = cls->add_subcommand("score", "balanced accuracy on a labeled CSV");
  add_common(cscore, c, false);
  cscore->add_option("--model", model_path, "MLR JSON")->required();
  cscore->add_option("--data", data_path, "CSV with f1..fF,label")->required();

  std::string bind = "127.0.0.1:8080";
  std::string surrogate_path;
  long budget_ms = 120000;
  auto* srv = app.add_subcommand("serve", "run the HTTP quote service");
  srv->add_option("--severity", c.severity, "SeverityModel JSON (default: built-in cyber model)");
  srv->add_option("--surrogate", surrogate_path, "surrogate JSON for mode=surrogate");
  srv->add_option("--cem-config", c.cem_config, "CEM configuration JSON");
  srv->add_option("--bind", bind, "host:port")->capture_default_str();
  srv->add_option("--trials", trials, "default trials for exact quotes")->capture_default_str()
      ->check(CLI::PositiveNumber);
  srv->add_option("--budget-ms", budget_ms, "exact-mode wall-time budget")->capture_default_str()
      ->check(CLI::PositiveNumber);
  srv->add_option("--threads", c.threads, "worker threads (capped by QUOTE_THREADS)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    const CLI::App* active = &app;
    for (auto* sub : app.get_subcommands()) active = sub;
    err << active->help();
    return kUsage;
  }

  try {
    if (fit->parsed()) return cmd_fit(input, currency_unit, c, args, out, err);
    if (solve->parsed()) return cmd_solve(c, trials, table, args, out, err);
    if (eval->parsed()) return cmd_evaluate(c, contract_spec, table, args, out);
    if (build->parsed()) return cmd_surrogate_build(c, list, sweep, trials, args, out, err);
    if (train->parsed()) return cmd_surrogate_train(c, samples_path, neighbours, args, out);
    if (sev_eval->parsed()) return cmd_surrogate_eval(c, model_path, samples_path, tol, args, out, err);
    if (predict->parsed()) return cmd_surrogate_predict(c, model_path, args, out);
    if (ctrain->parsed()) {
      Manifest m("classify train", args);
      const auto data = load_dataset(data_path, m);
      const auto model = train_mlr(data, l2, max_iter);
      if (!model.converged) err << "warning: gradient norm " << model.gradient_norm << " after " << max_iter << " iterations\n";
      m.config({{"l2", l2}, {"max_iter", max_iter}});
      emit(c.out, pretty(mlr_to_json(model)), out, m);
      finish_manifest(c, m);
      return kOk;
    }
    if (cpredict->parsed()) {
      Manifest m("classify predict", args);
      m.input(model_path);
      const auto model = mlr_from_json(read_json_file(model_path));
      emit(c.out, pretty(mix_to_json(softmax_probs(model, parse_features(features)))), out, m);
      finish_manifest(c, m);
      return kOk;
    }
    if (cscore->parsed()) {
      Manifest m("classify score", args);
      m.input(model_path);
      const auto model = mlr_from_json(read_json_file(model_path));
      const auto data = load_dataset(data_path, m);
      std::vector<int> pred;
      for (const auto& row : data.features) pred.push_back(predict_label(model, row));
      const auto ba = balanced_accuracy(data.labels, pred, static_cast<int>(model.classes()));
      Json per = Json::array();
      for (double v : ba.per_class) per.push_back(std::isnan(v) ? Json(nullptr) : Json(v));
      emit(c.out, pretty(Json{{"balanced_accuracy", ba.score}, {"per_class", per}, {"skipped", ba.skipped}}),
           out, m);
      finish_manifest(c, m);
      return kOk;
    }
    if (srv->parsed()) {
      Manifest m("serve", args);
      auto sev = load_severity(c.severity, m);
      std::optional<SurrogateModel> surrogate;
      if (!surrogate_path.empty()) surrogate = surrogate_from_json(read_json_file(surrogate_path));
      const auto cfg = load_cem(c, sev.size(), m);
      const auto [host, port] = split_bind(bind);
      ServiceConfig sc;
      sc.default_trials = trials;
      sc.exact_budget = std::chrono::milliseconds(budget_ms);
      sc.solver_threads = worker_threads(c.threads);
      sc.http_threads = std::max<std::size_t>(2, sc.solver_threads);
      QuoteService service(std::move(sev), std::move(surrogate), cfg, sc);
      err << "listening on " << host << ":" << port << "\n";
      serve(service, host, port);
      return kOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const SolverFailure& e) {
    err << "solver failure: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const InvalidInput& e) {
    err << "input error: " << e.what() << "\n";
    return kInputFormat;
  } catch (const NumericFailure& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumericFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kNumericFailure;
  }
  return kUsage;
}

}  // namespace riskshare::cli
