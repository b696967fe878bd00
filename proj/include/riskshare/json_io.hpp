#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskshare/cem_solver.hpp"
#include "riskshare/incident_classifier.hpp"
#include "riskshare/loss_model.hpp"
#include "riskshare/risk_measures.hpp"
#include "riskshare/severity_fitting.hpp"
#include "riskshare/surrogate.hpp"

namespace riskshare {

using Json = nlohmann::ordered_json;

// All readers throw InvalidInput on missing keys, wrong types or values that
// break a type invariant.

// {"types":[{"id":1,"label":"PV","mu":..,"sigma":..},...]}
Json severity_to_json(const SeverityModel& sev);
SeverityModel severity_from_json(const Json& j);

// A bare array or {"probs":[...]}.
Json mix_to_json(const IncidentMix& mix);
IncidentMix mix_from_json(const Json& j);

// Severity model and mix in one document.
Json model_document(const SeverityModel& sev, const IncidentMix& mix);

Json contract_to_json(const ContractDesign& c);
ContractDesign contract_from_json(const Json& j);

Json preferences_to_json(const RiskPreferences& prefs);
// Missing levels keep their defaults.
RiskPreferences preferences_from_json(const Json& j, RiskPreferences base = {});

Json quote_to_json(const QuoteResult& q);

// Unknown keys are rejected; each vector field takes a scalar (broadcast) or
// an array. Fields absent from `j` keep the values of `base`.
Json cem_config_to_json(const CemConfig& c);
CemConfig cem_config_from_json(const Json& j, CemConfig base);

Json trial_to_json(const TrialResult& t);

Json fitted_to_json(const FittedModel& m);

Json mlr_to_json(const MlrModel& m);
MlrModel mlr_from_json(const Json& j);

Json sample_to_json(const SurrogateSample& s);
SurrogateSample sample_from_json(const Json& j);
void write_samples_jsonl(std::ostream& out, const std::vector<SurrogateSample>& samples);
std::vector<SurrogateSample> read_samples_jsonl(std::istream& in);

// Instance-based, so the document embeds the whole training set.
Json surrogate_to_json(const SurrogateModel& m);
SurrogateModel surrogate_from_json(const Json& j);

Json prediction_to_json(const SurrogatePrediction& p);

// Parses text, turning syntax errors into InvalidInput.
Json parse_json(const std::string& text);
Json read_json_file(const std::string& path);

}  // namespace riskshare
