#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bugsmc/data_table.hpp"
#include "bugsmc/registry.hpp"
#include "bugsmc/rng.hpp"

namespace bugsmc {

/// Switching stochastic volatility model with known parameters.
extern const char* const kVolatilityModel;
/// The same model with priors on its parameters.
extern const char* const kVolatilityParamModel;
/// Lotka-Volterra kinetics observed through noisy prey counts (needs LV).
extern const char* const kKineticModel;

/// Linear Gaussian state space model: x[t] = phi x[t-1] + N(0,1), y[t] = x[t] + N(0,1).
extern const char* const kLgssmModel;
/// Two-state hidden Markov chain with three-symbol categorical emissions.
extern const char* const kHmmModel;
/// theta ~ N(0, 100) and n unit-variance observations of it.
extern const char* const kNormalMeanModel;
/// x ~ N(0,1), y ~ N(x,1): the marginal of y is N(0,2).
extern const char* const kNormalPairModel;

/// A model, its data (with forward-sampled observations) and the true values
/// of the hidden quantities that generated them.
struct Bundle {
  std::string name;
  std::string model;
  DataTable data;
  DataTable truth;
  std::vector<std::string> monitors;
  std::vector<std::string> params;  // PMMH parameters, when meaningful
  std::string notes;
};

Bundle build_volatility_bundle(std::size_t t_max = 100, std::uint64_t seed = kDefaultSeed);
Bundle build_volatility_param_bundle(std::size_t t_max = 100, std::uint64_t seed = kDefaultSeed);
Bundle build_kinetic_bundle(std::size_t t_max = 40, std::uint64_t seed = kDefaultSeed);
Bundle build_lgssm_bundle(std::size_t t_max = 20, std::uint64_t seed = kDefaultSeed);
Bundle build_hmm_bundle(std::size_t t_max = 15, std::uint64_t seed = kDefaultSeed);
Bundle build_normal_mean_bundle(std::size_t n = 20, std::uint64_t seed = kDefaultSeed);
/// y = 0 observed.
Bundle build_normal_pair_bundle();

/// Every bundle above at its default size.
std::vector<Bundle> all_bundles(std::uint64_t seed = kDefaultSeed);

/// Built-ins plus LV.
Registry bundle_registry();

/// Writes <dir>/<name>.bug, <name>.json and <name>.truth.json.
void write_bundle(const Bundle& bundle, const std::string& dir);

}  // namespace bugsmc
