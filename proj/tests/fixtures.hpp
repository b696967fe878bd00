#pragma once

#include <vector>

#include "riskshare/cem_solver.hpp"
#include "riskshare/loss_model.hpp"

namespace fixtures {

inline const std::vector<std::vector<double>>& organisations() {
  static const std::vector<std::vector<double>> p = {
      {0.3383, 0.5717, 0.0700, 0.0200},
      {0.4401, 0.3340, 0.1764, 0.0495},
      {0.4700, 0.3400, 0.1600, 0.0300},
      {0.4340, 0.4360, 0.0600, 0.0700},
      {0.2300, 0.4800, 0.1900, 0.1000},
  };
  return p;
}

inline riskshare::IncidentMix org(int i) { return riskshare::IncidentMix(organisations().at(i - 1)); }

// Contract reported for the first organisation's first trial.
inline riskshare::ContractDesign reported_contract() {
  return riskshare::ContractDesign({0, 1, 1, 1}, {0.0531, 0.1011, 0.1167, 0.1151});
}

// Cheap CEM settings for building many training instances.
inline riskshare::CemConfig coarse_config() {
  auto c = riskshare::CemConfig::reference(4);
  c.sample_size = 100;
  c.elite_proportion = 0.05;
  c.init_d_mean.assign(4, 2e6);
  c.init_d_sd.assign(4, 5e6);
  return c;
}

}  // namespace fixtures
