#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bugsmc/graph.hpp"
#include "bugsmc/ordering.hpp"
#include "bugsmc/rng.hpp"

namespace bugsmc {

enum class ResamplingKind { Multinomial, Residual, Stratified, Systematic };

std::string_view to_string(ResamplingKind kind);
/// Throws ConfigError on unknown names.
ResamplingKind parse_resampling(std::string_view name);

/// Ancestor indices (0-based) drawn according to normalized weights W.
std::vector<std::size_t> resample(std::span<const double> weights, ResamplingKind kind, Rng& rng);

/// 1 / sum W^2.
double ess(std::span<const double> weights);

/// Ancestor records, 0-based steps: ancestors[s][i] is the index at step s - 1
/// of the parent of particle i at step s. ancestors[0] is the identity.
struct Genealogy {
  std::vector<std::vector<std::size_t>> ancestors;

  std::size_t steps() const { return ancestors.size(); }
  /// k-th generation ancestor of particle i at step n (both 1-based steps, 0-based i).
  std::size_t anc(std::size_t i, std::size_t n, std::size_t k) const;
};

/// Smoothing effective sample size SESS(n, t), 1 <= t <= n.
double sess(const Genealogy& genealogy, std::span<const double> final_weights, std::size_t n,
            std::size_t t);
/// SESS(n, t) for t = 1..n with n = genealogy.steps(), in one backward pass.
std::vector<double> sess_all(const Genealogy& genealogy, std::span<const double> final_weights);

struct SmcOptions {
  std::size_t particles = 1000;
  ResamplingKind resampling = ResamplingKind::Systematic;
  double threshold = 0.5;  // resample when ESS < threshold * N; >= 1 resamples every step
  std::uint64_t seed = kDefaultSeed;
  /// 0: one sequential RNG stream (the reference mode). k >= 1: k worker
  /// threads with per-particle streams derived from (seed, step, particle).
  std::size_t threads = 0;
};

/// Samples of one monitored scalar element.
struct ElementSamples {
  std::string label;
  std::string variable;       // monitor name it belongs to
  std::size_t step = 1;       // step at which the filtering cloud was captured
  bool discrete = false;
  std::vector<double> filtering;         // weights: SmcOutput::weights[step - 1]
  std::vector<double> smoothing;         // weights: SmcOutput::final_weights()
};

struct SmcOutput {
  std::vector<std::string> monitors;
  std::vector<ElementSamples> elements;
  std::vector<std::vector<double>> weights;  // normalized W_t after weighting, t = 1..n
  std::vector<double> ess;                   // per step, before any resampling
  std::vector<bool> resampled;               // resampled after step t
  std::vector<double> sess;                  // SESS(n, t), t = 1..n
  Genealogy genealogy;
  double log_marg_like = 0.0;
  SmcOptions options;
  std::string proposal = "prior";

  std::size_t steps() const { return weights.size(); }
  const std::vector<double>& final_weights() const { return weights.back(); }
  std::vector<const ElementSamples*> variable(const std::string& name) const;
  const ElementSamples& element(const std::string& label) const;
};

/// Sequential Monte Carlo with prior proposals over an arrangement. `fixed`
/// supplies the value of every node marked fixed in the arrangement.
SmcOutput run_smc(const Graph& graph, const Arrangement& arrangement,
                  const std::vector<std::string>& monitors, const SmcOptions& options,
                  const std::map<NodeId, std::vector<double>>& fixed = {});

struct DiagnosisReport {
  double min_sess = 0.0;
  std::size_t argmin_step = 1;
  double threshold = 30.0;
  bool pass = false;
  std::string text;
};

DiagnosisReport diagnose(const SmcOutput& output, double min_sess = 30.0);

/// sum_i W_i h(v_i).
double posterior_expectation(std::span<const double> values, std::span<const double> weights,
                             const std::function<double(double)>& h = {});

std::string to_json(const SmcOutput& output);

}  // namespace bugsmc
