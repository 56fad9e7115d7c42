#pragma once

#include <memory>

#include "confound_ui/simulation.hpp"

namespace fixtures {

using namespace confound_ui;

// One simulated sample with its fitted models.
inline std::shared_ptr<const Analysis> simulated(sim::Design d, sim::Overlap o, Index n,
                                                 double rho, std::uint64_t seed) {
  sim::SimulatedData s = sim::generate({d, o, n, rho, rho}, RngSeed{seed, 0});
  FittedModels m = fit_models(s.data);
  return std::make_shared<const Analysis>(Analysis{std::move(s.data), std::move(m)});
}

inline EffectEstimate effect(const std::shared_ptr<const Analysis>& a, Estimand e, Estimator k) {
  return estimate_effect(a, e, k);
}

}  // namespace fixtures
