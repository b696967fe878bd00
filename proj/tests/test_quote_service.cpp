#include <gtest/gtest.h>

#include <httplib.h>

#include <chrono>
#include <thread>

#include "fixtures.hpp"
#include "riskshare/json_io.hpp"
#include "riskshare/quote_service.hpp"

using namespace riskshare;

namespace {

const SeverityModel& sev() {
  static const SeverityModel s = SeverityModel::cyber_reference();
  return s;
}

const std::vector<SurrogateSample>& training() {
  static const auto samples =
      build_training_set(simplex_sweep(4, 8, 1), sev(), {}, fixtures::coarse_config(), 2).samples;
  return samples;
}

QuoteService service(bool with_surrogate) {
  std::optional<SurrogateModel> m;
  if (with_surrogate) m.emplace(training());
  return QuoteService(sev(), std::move(m), fixtures::coarse_config());
}

Json body_of(const HttpReply& r) { return parse_json(r.body); }

const char* kOrg1 = "[0.3383,0.5717,0.07,0.02]";

}  // namespace

TEST(QuoteService, HealthAndModel) {
  const auto s = service(false);
  const auto h = body_of(s.health());
  EXPECT_EQ(h.at("status"), "ok");
  EXPECT_EQ(h.at("types"), 4);
  EXPECT_EQ(h.at("surrogate_loaded"), false);
  EXPECT_EQ(body_of(s.model()), severity_to_json(sev()));
}

TEST(QuoteService, BadBodiesAre400) {
  const auto s = service(true);
  for (const std::string body :
       {"not json", "[1,2]", R"({"probs":[0.5,0.6,0,0]})", R"({"probs":[0.5,0.5]})", R"({"alpha":0.9})",
        R"({"probs":[0.25,0.25,0.25,0.25],"mode":"fast"})", R"({"probs":[0.25,0.25,0.25,0.25],"trials":0})",
        R"({"probs":[0.25,0.25,0.25,0.25],"seed":-3})", R"({"probs":[0.25,0.25,0.25,0.25],"colour":1})",
        R"({"probs":[0.25,0.25,0.25,0.25],"cem":{"sample_size":1}})"}) {
    const auto r = s.quote(body);
    EXPECT_EQ(r.status, 400) << body << " -> " << r.body;
    EXPECT_TRUE(body_of(r).contains("error"));
  }
}

TEST(QuoteService, InfeasibleLevelsAre422) {
  const auto s = service(true);
  EXPECT_EQ(s.quote(R"({"probs":[0.25,0.25,0.25,0.25],"alpha":1.0})").status, 422);
  EXPECT_EQ(s.quote(R"({"probs":[0.25,0.25,0.25,0.25],"beta":0})").status, 422);
  EXPECT_EQ(s.evaluate(R"({"probs":[0.25,0.25,0.25,0.25],"alpha":-1,"contract":{"theta":[0,0,0,0],"d":[0,0,0,0]}})")
                .status,
            422);
}

TEST(QuoteService, SurrogateWithoutModelIs409) {
  EXPECT_EQ(service(false).quote(std::string(R"({"mode":"surrogate","probs":)") + kOrg1 + "}").status, 409);
}

TEST(QuoteService, SurrogateQuote) {
  const auto s = service(true);
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = s.quote(std::string(R"({"mode":"surrogate","probs":)") + kOrg1 + "}");
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  ASSERT_EQ(r.status, 200) << r.body;
  EXPECT_LE(ms, 50.0);
  EXPECT_TRUE(r.headers.count("X-Quote-Elapsed-Ms"));
  const auto j = body_of(r);
  EXPECT_EQ(j.at("mode"), "surrogate");
  EXPECT_TRUE(j.contains("prediction"));
  const auto c = contract_from_json(j.at("contract"));
  EXPECT_NEAR(j.at("optimum").get<double>(), objective(c, fixtures::org(1), sev(), {}), 1e-12);

  // A training mix comes back with its stored solution.
  const auto& first = training().front();
  const auto r2 = s.quote(R"({"mode":"surrogate","probs":)" + mix_to_json(first.p).dump() + "}");
  EXPECT_EQ(contract_from_json(body_of(r2).at("contract")), first.contract);
  EXPECT_EQ(body_of(r2).at("prediction").at("exact_match"), true);
}

TEST(QuoteService, ExactModeByteIdentical) {
  const auto s = service(false);
  const std::string req = std::string(R"({"mode":"exact","trials":10,"seed":5,"probs":)") + kOrg1 + "}";
  const auto a = s.quote(req), b = s.quote(req);
  ASSERT_EQ(a.status, 200) << a.body;
  EXPECT_EQ(a.body, b.body);
  const auto j = body_of(a);
  EXPECT_EQ(j.at("trials"), 10);
  EXPECT_EQ(j.at("seed"), 5);
  EXPECT_EQ(j.at("budget_exhausted"), false);
  EXPECT_EQ(j.at("failed_trials"), 0);
  EXPECT_FALSE(j.at("premium_empty").get<bool>());
}

TEST(QuoteService, ExactModeBudgetReturnsBestSoFar) {
  const auto s = service(false);
  const auto r = s.quote(std::string(R"({"trials":3,"budget_ms":1,"cem":{"var_threshold_d":0,"max_iterations":100000},"probs":)") +
                         kOrg1 + "}");
  ASSERT_EQ(r.status, 200) << r.body;
  const auto j = body_of(r);
  EXPECT_EQ(j.at("budget_exhausted"), true);
  EXPECT_EQ(j.at("budget_ms"), 1);
  EXPECT_TRUE(std::isfinite(j.at("optimum").get<double>()));
}

TEST(QuoteService, EvaluateReportedContract) {
  const auto s = service(false);
  const auto r = s.evaluate(std::string(R"({"probs":)") + kOrg1 + R"(,"contract":)" +
                            contract_to_json(fixtures::reported_contract()).dump() + "}");
  ASSERT_EQ(r.status, 200) << r.body;
  const auto j = body_of(r);
  EXPECT_EQ(j.at("mode"), "evaluate");
  const auto q = quote_report(fixtures::reported_contract(), fixtures::org(1), sev(), {});
  EXPECT_EQ(j.at("premium_lo").get<double>(), q.premium.lo);
  EXPECT_EQ(j.at("premium_hi").get<double>(), q.premium.hi);
  EXPECT_EQ(j.at("premium_empty").get<bool>(), q.premium.empty());
}

TEST(QuoteService, EvaluateZeroLimit) {
  const auto r = service(false).evaluate(std::string(R"({"probs":)") + kOrg1 +
                                         R"(,"contract":{"theta":[0,0,0,0],"d":[0,0,0,0]}})");
  ASSERT_EQ(r.status, 200);
  const auto j = body_of(r);
  EXPECT_NEAR(j.at("buyer_risk_reduction").get<double>(), 0.0, kVarTolerance);
  EXPECT_NEAR(j.at("aggregate_risk_reduction").get<double>(), 0.0, kVarTolerance);
  EXPECT_NEAR(j.at("premium_lo").get<double>(), 0.0, kVarTolerance);
  EXPECT_NEAR(j.at("premium_hi").get<double>(), 0.0, kVarTolerance);
}

TEST(QuoteService, EvaluateBadContractIs400) {
  const auto s = service(false);
  EXPECT_EQ(s.evaluate(std::string(R"({"probs":)") + kOrg1 + R"(,"contract":{"theta":[0,0,0,0],"d":[0,-1,0,0]}})").status,
            400);
  EXPECT_EQ(s.evaluate(std::string(R"({"probs":)") + kOrg1 + R"(,"contract":{"theta":[0,0],"d":[0,0]}})").status, 400);
  EXPECT_EQ(s.evaluate(std::string(R"({"probs":)") + kOrg1 + "}").status, 400);
}

TEST(QuoteService, LiveServer) {
  const auto s = service(true);
  httplib::Server server;
  s.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto h = client.Get("/v1/health");
  ASSERT_TRUE(h);
  EXPECT_EQ(h->status, 200);
  EXPECT_EQ(parse_json(h->body).at("surrogate_loaded"), true);

  auto q = client.Post("/v1/quote", std::string(R"({"mode":"surrogate","probs":)") + kOrg1 + "}", "application/json");
  ASSERT_TRUE(q);
  EXPECT_EQ(q->status, 200);
  EXPECT_TRUE(q->has_header("X-Quote-Elapsed-Ms"));

  auto bad = client.Post("/v1/evaluate", "{", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);

  auto m = client.Get("/v1/model");
  ASSERT_TRUE(m);
  EXPECT_EQ(parse_json(m->body), severity_to_json(sev()));

  server.stop();
  worker.join();
}
