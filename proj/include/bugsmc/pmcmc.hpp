#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "bugsmc/ast.hpp"
#include "bugsmc/data_table.hpp"
#include "bugsmc/graph.hpp"
#include "bugsmc/ordering.hpp"
#include "bugsmc/registry.hpp"
#include "bugsmc/smc.hpp"

namespace bugsmc {

/// Retained draws of scalar quantities, one row per retained iteration.
struct Trace {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;

  std::size_t size() const { return rows.size(); }
  /// Column for one label.
  std::vector<double> column(const std::string& label) const;
};

// ---- particle independent Metropolis-Hastings ------------------------------

struct PimhState {
  std::vector<std::string> monitors;
  std::vector<std::string> labels;  // monitored scalar elements
  std::vector<double> sample;       // current X(k), aligned with labels
  double log_marg_like = -std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  std::size_t accepted = 0;
  std::size_t degenerate = 0;  // proposals whose SMC run had zero weight
  SmcOptions smc;              // resampling settings; particles given per call
  Arrangement arrangement;
  Rng rng;
};

/// Throws ConfigError for an empty or unknown monitor list.
PimhState pimh_init(const Graph& graph, const std::vector<std::string>& monitors,
                    std::uint64_t seed = kDefaultSeed, const SmcOptions& smc = {});
void pimh_update(const Graph& graph, PimhState& state, std::size_t n_iter, std::size_t particles);

struct PimhSamples {
  Trace samples;
  std::vector<double> log_marg_like;
  double acceptance_rate = 0.0;
};

PimhSamples pimh_samples(const Graph& graph, PimhState& state, std::size_t n_iter,
                         std::size_t particles, std::size_t thin = 1);

// ---- particle marginal Metropolis-Hastings ----------------------------------

enum class Transform { Identity, Log, LogUpper, Logit };

struct ParamComponent {
  std::string label;
  NodeId node = kNoNode;
  Transform transform = Transform::Identity;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  double value = 0.0;
  double scale = 0.1;  // random-walk sd in transformed space, before the global factor
};

/// Maps a value in (lower, upper) to the real line and back.
double to_unconstrained(const ParamComponent& p, double x);
double from_unconstrained(const ParamComponent& p, double u);
/// log |d to_unconstrained / dx|.
double log_jacobian(const ParamComponent& p, double x);

struct PmmhState {
  std::vector<ParamComponent> params;
  std::vector<std::string> latent_names;
  std::vector<std::string> latent_labels;
  std::vector<double> latent;  // current X(k)
  double log_marg_like = -std::numeric_limits<double>::infinity();
  double log_prior = 0.0;
  bool initialized = false;  // log_marg_like computed at the current θ
  double log_lambda = 0.0;   // global proposal scale factor
  std::size_t adapt_iterations = 0;
  std::vector<double> adapt_mean, adapt_m2;  // running moments of transformed θ
  std::size_t iterations = 0, accepted = 0;
  std::size_t phase_iterations = 0, phase_accepted = 0;  // since the last update/samples call
  std::size_t degenerate = 0;
  double last_log_q_forward = 0.0;   // log q(u* | u)
  double last_log_q_backward = 0.0;  // log q(u | u*)
  SmcOptions smc;
  Arrangement arrangement;
  Rng rng;

  double acceptance_rate() const {
    return phase_iterations ? static_cast<double>(phase_accepted) / phase_iterations : 0.0;
  }
};

/// `inits` maps labels to starting values; missing ones are drawn from the prior.
PmmhState pmmh_init(const Graph& graph, const std::vector<std::string>& param_names,
                    const std::map<std::string, double>& inits,
                    const std::vector<std::string>& latent_names,
                    std::uint64_t seed = kDefaultSeed, const SmcOptions& smc = {});

/// Adaptive PMMH transitions; samples are not retained.
void pmmh_update(const Graph& graph, PmmhState& state, std::size_t n_iter, std::size_t particles);

struct PmmhSamples {
  Trace params;
  Trace latent;
  std::vector<double> log_marg_like;
  std::vector<double> log_marg_like_pen;  // log Z + log p(θ)
  double acceptance_rate = 0.0;
};

/// Non-adaptive PMMH transitions, keeping every thin-th state.
PmmhSamples pmmh_samples(const Graph& graph, PmmhState& state, std::size_t n_iter,
                         std::size_t particles, std::size_t thin = 1);

/// log p(θ) for the state's parameters at the given values.
double pmmh_log_prior(const Graph& graph, const std::vector<ParamComponent>& params,
                      const std::vector<double>& values);

// ---- sensitivity analysis --------------------------------------------------

using GridPoint = std::map<std::string, double>;

/// Cartesian product; the first axis varies slowest.
std::vector<GridPoint> make_grid(const std::vector<std::pair<std::string, std::vector<double>>>& axes);

struct SensitivityResult {
  std::vector<std::string> names;
  std::vector<GridPoint> points;
  std::vector<double> log_marg_like;
  std::vector<bool> failed;
  std::size_t argmax = 0;
};

/// One SMC run per grid point, point k seeded with options.seed + k. Names may
/// be data entries (overwritten, then recompiled) or stochastic nodes (held fixed).
SensitivityResult smc_sensitivity(const ModelAST& ast, const DataTable& data,
                                  const Registry& registry, const std::vector<GridPoint>& grid,
                                  const SmcOptions& options);

// ---- serialization ---------------------------------------------------------

std::string to_csv(const Trace& trace, const std::vector<std::pair<std::string, std::vector<double>>>& extra = {});
std::string to_json(const PimhSamples& s);
std::string to_json(const PmmhSamples& s);
std::string to_csv(const SensitivityResult& r);
std::string to_json(const SensitivityResult& r);

}  // namespace bugsmc
