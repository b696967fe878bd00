#include "riskshare/quote_service.hpp"

#include <httplib.h>

#include <chrono>
#include <set>

#include "riskshare/errors.hpp"
#include "riskshare/json_io.hpp"

namespace riskshare {

namespace {

using Clock = std::chrono::steady_clock;

// Levels outside (0,1) are a well-formed request the engine cannot honour.
struct InfeasibleLevels : InvalidInput {
  using InvalidInput::InvalidInput;
};

HttpReply json_reply(int status, const Json& body) {
  return HttpReply{status, body.dump(), {}};
}

HttpReply error_reply(int status, const std::string& message) {
  return json_reply(status, Json{{"error", message}, {"status", status}});
}

Json request_object(const std::string& body) {
  Json j = parse_json(body);
  if (!j.is_object()) throw InvalidInput("request body must be a JSON object");
  return j;
}

void reject_unknown(const Json& j, const std::set<std::string>& known) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw InvalidInput("unknown request field '" + key + "'");
  }
}

RiskPreferences request_levels(const Json& j) {
  RiskPreferences prefs;
  for (const char* key : {"alpha", "beta"}) {
    if (!j.contains(key)) continue;
    if (!j[key].is_number()) throw InvalidInput(std::string("'") + key + "' must be a number");
    const double v = j[key].get<double>();
    if (!(v > 0.0 && v < 1.0)) throw InfeasibleLevels(std::string(key) + " must lie in (0, 1)");
    (std::string(key) == "alpha" ? prefs.alpha : prefs.beta) = v;
  }
  return prefs;
}

IncidentMix request_mix(const Json& j, const SeverityModel& sev) {
  if (!j.contains("probs")) throw InvalidInput("missing field 'probs'");
  IncidentMix mix = mix_from_json(j["probs"]);
  if (mix.size() != sev.size()) {
    throw InvalidInput("probs has " + std::to_string(mix.size()) + " entries, model has " +
                       std::to_string(sev.size()) + " incident types");
  }
  return mix;
}

template <class F>
HttpReply guarded(F&& body) {
  const auto start = Clock::now();
  HttpReply reply;
  try {
    reply = body();
  } catch (const InfeasibleLevels& e) {
    reply = error_reply(422, e.what());
  } catch (const UnreachableLevel& e) {
    reply = error_reply(422, e.what());
  } catch (const InvalidInput& e) {
    reply = error_reply(400, e.what());
  } catch (const std::exception& e) {
    reply = error_reply(500, e.what());
  }
  const auto elapsed = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  reply.headers["X-Quote-Elapsed-Ms"] = std::to_string(elapsed);
  return reply;
}

}  // namespace

QuoteService::QuoteService(SeverityModel sev, std::optional<SurrogateModel> surrogate,
                           CemConfig base_config, ServiceConfig config)
    : sev_(std::move(sev)),
      surrogate_(std::move(surrogate)),
      base_config_(std::move(base_config)),
      config_(config) {
  if (surrogate_ && surrogate_->types() != sev_.size()) {
    throw DimensionMismatch("surrogate and severity model differ in incident types");
  }
  base_config_.validate(sev_.size());
}

HttpReply QuoteService::quote(const std::string& body) const {
  return guarded([&]() -> HttpReply {
    const Json req = request_object(body);
    reject_unknown(req, {"probs", "alpha", "beta", "mode", "trials", "seed", "cem", "budget_ms"});
    std::string mode = "exact";
    if (req.contains("mode")) {
      if (!req["mode"].is_string()) throw InvalidInput("'mode' must be a string");
      mode = req["mode"].get<std::string>();
      if (mode != "exact" && mode != "surrogate") throw InvalidInput("mode must be 'exact' or 'surrogate'");
    }
    const IncidentMix mix = request_mix(req, sev_);
    const RiskPreferences prefs = request_levels(req);

    if (mode == "surrogate") {
      if (!surrogate_) return error_reply(409, "no surrogate model is loaded");
      const auto prediction = surrogate_->predict(mix);
      Json out = quote_to_json(quote_report(prediction.contract, mix, sev_, prefs));
      out["mode"] = mode;
      out["seed"] = surrogate_->seed();
      out["prediction"] = prediction_to_json(prediction);
      return json_reply(200, out);
    }

    CemConfig cfg = base_config_;
    if (req.contains("cem")) cfg = cem_config_from_json(req["cem"], cfg);
    if (req.contains("seed")) {
      const auto& s = req["seed"];
      if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<std::int64_t>() < 0)) {
        throw InvalidInput("'seed' must be a non-negative integer");
      }
      cfg.seed = s.get<std::uint64_t>();
    }
    cfg.validate(sev_.size());
    std::size_t trials = config_.default_trials;
    if (req.contains("trials")) {
      const auto& t = req["trials"];
      if (!t.is_number_integer() || t.get<std::int64_t>() < 1) throw InvalidInput("'trials' must be an integer >= 1");
      trials = t.get<std::size_t>();
    }
    auto budget = config_.exact_budget;
    if (req.contains("budget_ms")) {
      const auto& b = req["budget_ms"];
      if (!b.is_number_integer() || b.get<std::int64_t>() < 1) throw InvalidInput("'budget_ms' must be a positive integer");
      budget = std::min(budget, std::chrono::milliseconds(b.get<std::int64_t>()));
    }

    const auto run = run_multi_trial(mix, sev_, prefs, cfg, trials,
                                     MultiTrialOptions{config_.solver_threads, Clock::now() + budget});
    if (!run.best) throw NumericFailure("every CEM trial failed: " + run.failures.front().message);
    std::vector<ContractDesign> candidates;
    bool exhausted = false;
    for (const auto& t : run.trials) {
      candidates.push_back(t.best_z);
      exhausted = exhausted || t.status == TrialStatus::budget_exhausted;
    }
    const auto chosen = select_solution(candidates, mix, sev_, prefs);
    Json out = quote_to_json(quote_report(chosen, mix, sev_, prefs));
    out["mode"] = mode;
    out["seed"] = cfg.seed;
    out["trials"] = trials;
    out["failed_trials"] = run.failures.size();
    out["budget_ms"] = budget.count();
    out["budget_exhausted"] = exhausted;
    return json_reply(200, out);
  });
}

HttpReply QuoteService::evaluate(const std::string& body) const {
  return guarded([&]() -> HttpReply {
    const Json req = request_object(body);
    reject_unknown(req, {"probs", "alpha", "beta", "contract"});
    const IncidentMix mix = request_mix(req, sev_);
    const RiskPreferences prefs = request_levels(req);
    if (!req.contains("contract")) throw InvalidInput("missing field 'contract'");
    const ContractDesign contract = contract_from_json(req["contract"]);
    if (contract.size() != sev_.size()) throw InvalidInput("contract length does not match the model");
    Json out = quote_to_json(quote_report(contract, mix, sev_, prefs));
    out["mode"] = "evaluate";
    return json_reply(200, out);
  });
}

HttpReply QuoteService::health() const {
  return json_reply(200, Json{{"status", "ok"},
                              {"types", sev_.size()},
                              {"surrogate_loaded", surrogate_.has_value()}});
}

HttpReply QuoteService::model() const { return json_reply(200, severity_to_json(sev_)); }

void QuoteService::mount(httplib::Server& server) const {
  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    for (const auto& [k, v] : reply.headers) res.set_header(k, v);
    res.set_content(reply.body, "application/json");
  };
  server.Post("/v1/quote", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, quote(req.body));
  });
  server.Post("/v1/evaluate", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, evaluate(req.body));
  });
  server.Get("/v1/health", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, health());
  });
  server.Get("/v1/model", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, model());
  });
}

void serve(const QuoteService& service, const std::string& host, int port) {
  httplib::Server server;
  const std::size_t threads = std::max<std::size_t>(1, service.config().http_threads);
  server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  service.mount(server);
  if (!server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace riskshare
