#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <optional>
#include <string>

#include "riskshare/cem_solver.hpp"
#include "riskshare/loss_model.hpp"
#include "riskshare/surrogate.hpp"

namespace httplib {
class Server;
}

namespace riskshare {

struct ServiceConfig {
  std::size_t default_trials = 10;
  std::chrono::milliseconds exact_budget{120000};
  std::size_t solver_threads = 1;  // trials run concurrently inside one exact solve
  std::size_t http_threads = 4;
};

struct HttpReply {
  int status = 200;
  std::string body;  // JSON
  std::map<std::string, std::string> headers;
};

// Request handlers over immutable models. Each handler takes the raw request
// body and never touches the network, so it can be driven directly in tests.
class QuoteService {
 public:
  QuoteService(SeverityModel sev, std::optional<SurrogateModel> surrogate, CemConfig base_config,
               ServiceConfig config = {});

  // POST /v1/quote
  //   {"probs":[..], "alpha":.., "beta":.., "mode":"exact"|"surrogate",
  //    "trials":n, "seed":s, "cem":{..}, "budget_ms":ms}
  HttpReply quote(const std::string& body) const;
  // POST /v1/evaluate
  //   {"probs":[..], "alpha":.., "beta":.., "contract":{"theta":[..],"d":[..]}}
  HttpReply evaluate(const std::string& body) const;
  // GET /v1/health
  HttpReply health() const;
  // GET /v1/model
  HttpReply model() const;

  // Registers the four routes.
  void mount(httplib::Server& server) const;

  const ServiceConfig& config() const { return config_; }

 private:
  SeverityModel sev_;
  std::optional<SurrogateModel> surrogate_;
  CemConfig base_config_;
  ServiceConfig config_;
};

// Blocks serving on host:port until the server is stopped.
void serve(const QuoteService& service, const std::string& host, int port);

}  // namespace riskshare
