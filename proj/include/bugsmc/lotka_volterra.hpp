#pragma once

#include <array>

#include "bugsmc/registry.hpp"
#include "bugsmc/rng.hpp"

namespace bugsmc {

/// Gillespie simulation of the Lotka-Volterra reactions over an interval dt.
/// Hazards: prey birth c1*x1, predation c2*x1*x2, predator death c3*x2.
/// Returns the state before the first event past dt.
std::array<double, 2> gillespie_lv(std::array<double, 2> x, double c1, double c2, double c3,
                                   double dt, Rng& rng);

/// Adds `LV(x, c1, c2, c3, dt)` as a density-free sampler with 2-element output.
void register_lotka_volterra(Registry& registry);

}  // namespace bugsmc
