#include "bugsmc/pmcmc.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bugsmc/compiler.hpp"

namespace bugsmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTargetAcceptance = 0.234;
constexpr std::size_t kEmpiricalScaleAfter = 100;  // adaptation iterations before using sample sd

std::size_t select_particle(const std::vector<double>& w, Rng& rng) {
  const double u = uniform01(rng);
  double cum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    cum += w[i];
    if (u < cum) return i;
  }
  for (std::size_t i = w.size(); i-- > 0;)
    if (w[i] > 0) return i;
  return 0;
}

std::vector<double> path_of(const SmcOutput& out, std::size_t l) {
  std::vector<double> v;
  v.reserve(out.elements.size());
  for (const auto& e : out.elements) v.push_back(e.smoothing[l]);
  return v;
}

std::vector<std::string> labels_of(const Graph& graph, const std::vector<std::string>& names) {
  std::vector<std::string> labels;
  for (const auto& n : names)
    for (const auto& e : graph.resolve(n)) labels.push_back(e.label);
  return labels;
}

struct SmcResult {
  double log_z = kNegInf;
  std::vector<double> sample;
  bool degenerate = false;
};

SmcResult run_once(const Graph& graph, const Arrangement& arr, const std::vector<std::string>& monitors,
                   SmcOptions opts, std::size_t particles, Rng& chain,
                   const std::map<NodeId, std::vector<double>>& fixed, std::size_t iteration) {
  opts.particles = particles;
  opts.seed = chain();
  SmcResult r;
  try {
    const SmcOutput out = run_smc(graph, arr, monitors, opts, fixed);
    r.log_z = out.log_marg_like;
    r.sample = path_of(out, select_particle(out.final_weights(), chain));
  } catch (const DegenerateWeights&) {
    r.degenerate = true;  // an estimate of zero: the proposal is rejected
  } catch (const InferenceError& e) {
    throw InferenceError("iteration " + std::to_string(iteration) + ": " + e.what());
  }
  return r;
}

double normal_log_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.91893853320467274178;
}

}  // namespace

std::vector<double> Trace::column(const std::string& label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw ConfigError("no trace for '" + label + "'");
  const auto k = static_cast<std::size_t>(it - labels.begin());
  std::vector<double> col;
  col.reserve(rows.size());
  for (const auto& r : rows) col.push_back(r[k]);
  return col;
}

// ---- PIMH ------------------------------------------------------------------------

PimhState pimh_init(const Graph& graph, const std::vector<std::string>& monitors,
                    std::uint64_t seed, const SmcOptions& smc) {
  if (monitors.empty()) throw ConfigError("PIMH needs at least one monitored variable");
  PimhState s;
  s.monitors = monitors;
  s.labels = labels_of(graph, monitors);
  s.smc = smc;
  s.arrangement = arrange(graph);
  s.rng.seed(seed);
  return s;
}

namespace {

void pimh_step(const Graph& graph, PimhState& s, std::size_t particles) {
  ++s.iterations;
  const SmcResult r =
      run_once(graph, s.arrangement, s.monitors, s.smc, particles, s.rng, {}, s.iterations);
  if (r.degenerate) {
    ++s.degenerate;
    return;
  }
  // Z(0) = 0, so the first proposal is always taken.
  const bool accept = s.log_marg_like == kNegInf ||
                      std::log(uniform_open(s.rng)) < r.log_z - s.log_marg_like;
  if (accept) {
    ++s.accepted;
    s.log_marg_like = r.log_z;
    s.sample = r.sample;
  }
}

}  // namespace

void pimh_update(const Graph& graph, PimhState& s, std::size_t n_iter, std::size_t particles) {
  for (std::size_t k = 0; k < n_iter; ++k) pimh_step(graph, s, particles);
}

PimhSamples pimh_samples(const Graph& graph, PimhState& s, std::size_t n_iter,
                         std::size_t particles, std::size_t thin) {
  if (thin < 1) throw ConfigError("thin must be at least 1");
  PimhSamples out;
  out.samples.labels = s.labels;
  const std::size_t acc0 = s.accepted;
  for (std::size_t k = 1; k <= n_iter; ++k) {
    pimh_step(graph, s, particles);
    if (k % thin == 0 && !s.sample.empty()) {
      out.samples.rows.push_back(s.sample);
      out.log_marg_like.push_back(s.log_marg_like);
    }
  }
  out.acceptance_rate = n_iter ? static_cast<double>(s.accepted - acc0) / n_iter : 0.0;
  return out;
}

// ---- PMMH ------------------------------------------------------------------------

double to_unconstrained(const ParamComponent& p, double x) {
  switch (p.transform) {
    case Transform::Identity:
      return x;
    case Transform::Log:
      return std::log(x - p.lower);
    case Transform::LogUpper:
      return std::log(p.upper - x);
    case Transform::Logit: {
      const double z = (x - p.lower) / (p.upper - p.lower);
      return std::log(z) - std::log1p(-z);
    }
  }
  return x;
}

double from_unconstrained(const ParamComponent& p, double u) {
  switch (p.transform) {
    case Transform::Identity:
      return u;
    case Transform::Log:
      return p.lower + std::exp(u);
    case Transform::LogUpper:
      return p.upper - std::exp(u);
    case Transform::Logit: {
      const double z = u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
      return p.lower + (p.upper - p.lower) * z;
    }
  }
  return u;
}

double log_jacobian(const ParamComponent& p, double x) {
  switch (p.transform) {
    case Transform::Identity:
      return 0.0;
    case Transform::Log:
      return -std::log(x - p.lower);
    case Transform::LogUpper:
      return -std::log(p.upper - x);
    case Transform::Logit:
      // d/dx logit((x-a)/(b-a)) = (b-a) / ((x-a)(b-x))
      return std::log(p.upper - p.lower) - std::log(x - p.lower) - std::log(p.upper - x);
  }
  return 0.0;
}

namespace {

/// Shared-bank evaluation of parameter priors: constants, data, θ, and the
/// logical nodes between them.
class PriorContext {
 public:
  PriorContext(const Graph& graph, const std::vector<ParamComponent>& params)
      : graph_(graph), params_(params), layout_(graph.shared_layout()) {
    std::vector<bool> is_param(graph.size(), false);
    for (const auto& p : params) is_param[p.node] = true;
    std::vector<bool> needed(graph.size(), false);
    std::vector<NodeId> stack;
    for (const auto& p : params)
      for (NodeId q : graph.node(p.node).parents) stack.push_back(q);
    while (!stack.empty()) {
      const NodeId v = stack.back();
      stack.pop_back();
      if (needed[v]) continue;
      needed[v] = true;
      const Node& n = graph.node(v);
      if (is_param[v] || n.kind == NodeKind::Constant || n.observed) continue;
      if (n.kind == NodeKind::Stochastic)
        throw ConfigError("the prior of a PMMH parameter depends on '" + n.label +
                          "', which is neither a parameter nor data");
      for (NodeId q : n.parents) stack.push_back(q);
    }
    for (NodeId v : graph.topological_order()) {
      if (is_param[v]) order_.push_back(v);
      else if (needed[v] && graph.node(v).kind == NodeKind::Logical) order_.push_back(v);
    }
    bank_ = graph.initial_shared(layout_);
  }

  /// Loads θ and evaluates dependent logical nodes. `values` aligned with params;
  /// NaN entries are drawn from the prior with `rng`.
  void load(std::vector<double>& values, Rng* rng = nullptr) {
    for (NodeId v : order_) {
      const Node& n = graph_.node(v);
      double* out = bank_.data() + layout_.offset[v];
      if (n.kind == NodeKind::Logical) {
        n.expr.eval(view(), std::span<double>(out, n.size()), ws_);
        continue;
      }
      for (std::size_t k = 0; k < params_.size(); ++k) {
        if (params_[k].node != v) continue;
        if (std::isnan(values[k])) {
          if (!rng) throw ConfigError("no value for '" + params_[k].label + "'");
          sample_node(n, view(), *rng, std::span<double>(out, 1), ws_);
          values[k] = *out;
        }
        *out = values[k];
      }
    }
  }

  double log_prior() {
    double lp = 0.0;
    for (const auto& p : params_) {
      const Node& n = graph_.node(p.node);
      lp += log_density_node(
          n, std::span<const double>(bank_.data() + layout_.offset[p.node], 1), view(), ws_);
    }
    return lp;
  }

  Interval support(const ParamComponent& p) {
    const Node& n = graph_.node(p.node);
    const auto bounds = node_bounds(n, view(), ws_);
    std::vector<std::vector<double>> vals;
    for (const auto& prog : n.params) vals.push_back(prog.eval(view()));
    std::vector<std::span<const double>> spans(vals.begin(), vals.end());
    return effective_support(*n.distribution, Args(spans), bounds);
  }

 private:
  ValueView view() const { return ValueView(layout_, bank_.data(), nullptr); }

  const Graph& graph_;
  const std::vector<ParamComponent>& params_;
  Layout layout_;
  std::vector<double> bank_;
  std::vector<NodeId> order_;
  Workspace ws_;
};

std::map<NodeId, std::vector<double>> fixed_values(const std::vector<ParamComponent>& params,
                                                   const std::vector<double>& values) {
  std::map<NodeId, std::vector<double>> m;
  for (std::size_t k = 0; k < params.size(); ++k) m[params[k].node] = {values[k]};
  return m;
}

std::vector<double> current_values(const PmmhState& s) {
  std::vector<double> v;
  for (const auto& p : s.params) v.push_back(p.value);
  return v;
}

}  // namespace

double pmmh_log_prior(const Graph& graph, const std::vector<ParamComponent>& params,
                      const std::vector<double>& values) {
  PriorContext ctx(graph, params);
  std::vector<double> v = values;
  ctx.load(v);
  return ctx.log_prior();
}

PmmhState pmmh_init(const Graph& graph, const std::vector<std::string>& param_names,
                    const std::map<std::string, double>& inits,
                    const std::vector<std::string>& latent_names, std::uint64_t seed,
                    const SmcOptions& smc) {
  if (param_names.empty()) throw ConfigError("PMMH needs at least one parameter");
  PmmhState s;
  s.rng.seed(seed);
  s.smc = smc;
  std::set<NodeId> seen;
  for (const auto& name : param_names) {
    for (const auto& e : graph.resolve(name)) {
      const Node& n = graph.node(e.node);
      if (!n.is_latent())
        throw ConfigError("PMMH parameter '" + e.label + "' must be an unobserved stochastic node");
      if (!n.distribution->has_density())
        throw ConfigError("PMMH parameter '" + e.label + "' has no prior density ('" +
                          n.distribution->name + "')");
      if (n.size() != 1)
        throw ConfigError("PMMH parameter '" + e.label + "' must be scalar; its node is '" +
                          n.label + "'");
      if (n.distribution->discrete)
        throw ConfigError("PMMH parameter '" + e.label + "' must be continuous");
      if (!seen.insert(e.node).second) throw ConfigError("parameter '" + e.label + "' given twice");
      ParamComponent p;
      p.label = e.label;
      p.node = e.node;
      s.params.push_back(p);
    }
  }
  std::set<std::string> known;
  for (const auto& p : s.params) known.insert(p.label);
  for (const auto& [label, v] : inits)
    if (!known.count(label)) throw ConfigError("initial value for unknown parameter '" + label + "'");

  std::vector<double> values;
  for (const auto& p : s.params) {
    const auto it = inits.find(p.label);
    values.push_back(it == inits.end() ? std::numeric_limits<double>::quiet_NaN() : it->second);
  }
  PriorContext ctx(graph, s.params);
  ctx.load(values, &s.rng);
  for (std::size_t k = 0; k < s.params.size(); ++k) {
    ParamComponent& p = s.params[k];
    p.value = values[k];
    const Interval sup = ctx.support(p);
    p.lower = sup.lower;
    p.upper = sup.upper;
    const bool lo = std::isfinite(p.lower), hi = std::isfinite(p.upper);
    p.transform = lo && hi ? Transform::Logit
                  : lo     ? Transform::Log
                  : hi     ? Transform::LogUpper
                           : Transform::Identity;
    if (!std::isfinite(p.value) || (lo && !(p.value > p.lower)) || (hi && !(p.value < p.upper)))
      throw ConfigError("initial value " + format_number(p.value) + " of '" + p.label +
                        "' is outside its support");
  }
  s.log_prior = ctx.log_prior();
  if (!std::isfinite(s.log_prior))
    throw ConfigError("the prior density is zero at the initial parameter values");

  s.latent_names = latent_names;
  s.latent_labels = labels_of(graph, latent_names);
  std::vector<bool> fixed(graph.size(), false);
  for (const auto& p : s.params) fixed[p.node] = true;
  s.arrangement = arrange(graph, fixed);
  s.adapt_mean.assign(s.params.size(), 0.0);
  s.adapt_m2.assign(s.params.size(), 0.0);
  return s;
}

namespace {

void pmmh_ensure_initialized(const Graph& graph, PmmhState& s, std::size_t particles) {
  if (s.initialized) return;
  const SmcResult r = run_once(graph, s.arrangement, s.latent_names, s.smc, particles, s.rng,
                               fixed_values(s.params, current_values(s)), 0);
  s.log_marg_like = r.log_z;
  s.latent = r.sample;
  if (r.degenerate) s.latent.assign(s.latent_labels.size(), std::numeric_limits<double>::quiet_NaN());
  s.initialized = true;
}

void pmmh_step(const Graph& graph, PmmhState& s, std::size_t particles, bool adapt) {
  ++s.iterations;
  ++s.phase_iterations;
  const std::size_t d = s.params.size();
  const double lambda = std::exp(s.log_lambda);
  std::vector<double> u(d), u_new(d), theta_new(d);
  double log_q_fwd = 0.0, log_q_bwd = 0.0, log_j = 0.0, log_j_new = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const ParamComponent& p = s.params[k];
    const double sd = lambda * p.scale;
    u[k] = to_unconstrained(p, p.value);
    u_new[k] = u[k] + sd * standard_normal(s.rng);
    theta_new[k] = from_unconstrained(p, u_new[k]);
    log_q_fwd += normal_log_pdf(u_new[k], u[k], sd);
    log_q_bwd += normal_log_pdf(u[k], u_new[k], sd);
    log_j += log_jacobian(p, p.value);
    log_j_new += log_jacobian(p, theta_new[k]);
  }
  s.last_log_q_forward = log_q_fwd;
  s.last_log_q_backward = log_q_bwd;

  const double lp_new = pmmh_log_prior(graph, s.params, theta_new);
  SmcResult r;
  if (std::isfinite(lp_new)) {
    r = run_once(graph, s.arrangement, s.latent_names, s.smc, particles, s.rng,
                 fixed_values(s.params, theta_new), s.iterations);
    if (r.degenerate) ++s.degenerate;
  }
  // log nu(θ | θ*) - log nu(θ* | θ), with nu the θ-space density of the random walk.
  const double log_nu_ratio = (log_q_bwd + log_j) - (log_q_fwd + log_j_new);
  double log_r = (r.log_z - s.log_marg_like) + (lp_new - s.log_prior) + log_nu_ratio;
  if (std::isnan(log_r)) log_r = kNegInf;
  if (s.log_marg_like == kNegInf && r.log_z > kNegInf && std::isfinite(lp_new))
    log_r = std::numeric_limits<double>::infinity();
  const bool accept = std::log(uniform_open(s.rng)) < log_r;
  if (accept) {
    for (std::size_t k = 0; k < d; ++k) s.params[k].value = theta_new[k];
    s.log_prior = lp_new;
    s.log_marg_like = r.log_z;
    s.latent = r.sample;
    ++s.accepted;
    ++s.phase_accepted;
  }
  if (!adapt) return;

  // Robbins-Monro on the global log-scale, toward the target acceptance rate.
  const double alpha = log_r >= 0 ? 1.0 : std::exp(log_r);
  const std::size_t n = ++s.adapt_iterations;
  const double gain = 1.0 / std::pow(static_cast<double>(n), 0.6);
  s.log_lambda += gain * (alpha - kTargetAcceptance);
  // Per-component shape from the running sd of the transformed chain.
  for (std::size_t k = 0; k < d; ++k) {
    const double x = to_unconstrained(s.params[k], s.params[k].value);
    const double delta = x - s.adapt_mean[k];
    s.adapt_mean[k] += delta / static_cast<double>(n);
    s.adapt_m2[k] += delta * (x - s.adapt_mean[k]);
  }
  if (n == kEmpiricalScaleAfter) s.log_lambda = std::log(2.38 / std::sqrt(static_cast<double>(d)));
  if (n >= kEmpiricalScaleAfter) {
    for (std::size_t k = 0; k < d; ++k) {
      const double sd = std::sqrt(s.adapt_m2[k] / static_cast<double>(n - 1));
      if (sd > 1e-6) s.params[k].scale = sd;
    }
  }
}

}  // namespace

void pmmh_update(const Graph& graph, PmmhState& s, std::size_t n_iter, std::size_t particles) {
  pmmh_ensure_initialized(graph, s, particles);
  s.phase_iterations = s.phase_accepted = 0;
  for (std::size_t k = 0; k < n_iter; ++k) pmmh_step(graph, s, particles, true);
}

PmmhSamples pmmh_samples(const Graph& graph, PmmhState& s, std::size_t n_iter,
                         std::size_t particles, std::size_t thin) {
  if (thin < 1) throw ConfigError("thin must be at least 1");
  pmmh_ensure_initialized(graph, s, particles);
  s.phase_iterations = s.phase_accepted = 0;
  PmmhSamples out;
  for (const auto& p : s.params) out.params.labels.push_back(p.label);
  out.latent.labels = s.latent_labels;
  for (std::size_t k = 1; k <= n_iter; ++k) {
    pmmh_step(graph, s, particles, false);
    if (k % thin != 0) continue;
    out.params.rows.push_back(current_values(s));
    out.latent.rows.push_back(s.latent);
    out.log_marg_like.push_back(s.log_marg_like);
    out.log_marg_like_pen.push_back(s.log_marg_like + s.log_prior);
  }
  out.acceptance_rate = s.acceptance_rate();
  return out;
}

// ---- sensitivity -------------------------------------------------------------------

std::vector<GridPoint> make_grid(
    const std::vector<std::pair<std::string, std::vector<double>>>& axes) {
  std::vector<GridPoint> points{GridPoint{}};
  for (const auto& [name, values] : axes) {
    if (values.empty()) return {};
    std::vector<GridPoint> next;
    for (const auto& p : points)
      for (double v : values) {
        GridPoint q = p;
        q[name] = v;
        next.push_back(std::move(q));
      }
    points = std::move(next);
  }
  return points;
}

SensitivityResult smc_sensitivity(const ModelAST& ast, const DataTable& data,
                                  const Registry& registry, const std::vector<GridPoint>& grid,
                                  const SmcOptions& options) {
  SensitivityResult res;
  if (grid.empty()) return res;
  for (const auto& [name, v] : grid.front()) res.names.push_back(name);
  std::vector<std::string> data_names, node_names;
  for (const auto& name : res.names) {
    const auto array = parse_element_label(name).first;
    (data.contains(array) ? data_names : node_names).push_back(name);
  }

  std::optional<Graph> shared_graph;
  if (data_names.empty()) shared_graph = compile(ast, data, registry);

  for (std::size_t k = 0; k < grid.size(); ++k) {
    const GridPoint& point = grid[k];
    if (point.size() != res.names.size())
      throw ConfigError("grid points must all assign the same names");
    std::optional<Graph> local;
    if (!data_names.empty()) {
      DataTable d = data;
      for (const auto& name : data_names) {
        try {
          d.set_element(name, point.at(name));
        } catch (const std::out_of_range&) {
          throw ConfigError("grid point lacks '" + name + "'");
        } catch (const Error& e) {
          throw ConfigError(e.what());
        }
      }
      local = compile(ast, d, registry);
    }
    const Graph& g = local ? *local : *shared_graph;

    std::vector<bool> fixed(g.size(), false);
    std::map<NodeId, std::vector<double>> values;
    for (const auto& name : node_names) {
      const auto refs = g.resolve(name);
      if (refs.size() != 1) throw ConfigError("grid name '" + name + "' must be a single element");
      const Node& n = g.node(refs[0].node);
      if (!n.is_latent() || n.size() != 1)
        throw ConfigError("grid name '" + name + "' must be a data entry or a scalar unobserved node");
      fixed[n.id] = true;
      values[n.id] = {point.at(name)};
    }
    SmcOptions opts = options;
    opts.seed = options.seed + k;
    res.points.push_back(point);
    try {
      const SmcOutput out = run_smc(g, arrange(g, fixed), {}, opts, values);
      res.log_marg_like.push_back(out.log_marg_like);
      res.failed.push_back(false);
    } catch (const InferenceError&) {
      res.log_marg_like.push_back(kNegInf);
      res.failed.push_back(true);
    } catch (const ParamError&) {
      res.log_marg_like.push_back(kNegInf);
      res.failed.push_back(true);
    }
  }
  for (std::size_t k = 1; k < res.log_marg_like.size(); ++k)
    if (res.log_marg_like[k] > res.log_marg_like[res.argmax]) res.argmax = k;
  return res;
}

// ---- serialization -----------------------------------------------------------------

std::string to_csv(const Trace& trace,
                   const std::vector<std::pair<std::string, std::vector<double>>>& extra) {
  std::ostringstream os;
  os << "iteration";
  for (const auto& l : trace.labels) os << ',' << '"' << l << '"';
  for (const auto& [name, col] : extra) os << ',' << name;
  os << '\n';
  for (std::size_t r = 0; r < trace.rows.size(); ++r) {
    os << r + 1;
    for (double v : trace.rows[r]) os << ',' << format_number(v);
    for (const auto& [name, col] : extra) os << ',' << format_number(col.at(r));
    os << '\n';
  }
  return os.str();
}

namespace {

nlohmann::json trace_json(const Trace& t) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t k = 0; k < t.labels.size(); ++k) j[t.labels[k]] = t.column(t.labels[k]);
  return j;
}

}  // namespace

std::string to_json(const PimhSamples& s) {
  nlohmann::json j;
  j["samples"] = trace_json(s.samples);
  j["log_marg_like"] = s.log_marg_like;
  j["acceptance_rate"] = s.acceptance_rate;
  return j.dump();
}

std::string to_json(const PmmhSamples& s) {
  nlohmann::json j;
  j["params"] = trace_json(s.params);
  j["latent"] = trace_json(s.latent);
  j["log_marg_like"] = s.log_marg_like;
  j["log_marg_like_pen"] = s.log_marg_like_pen;
  j["acceptance_rate"] = s.acceptance_rate;
  return j.dump();
}

std::string to_csv(const SensitivityResult& r) {
  std::ostringstream os;
  for (const auto& n : r.names) os << '"' << n << '"' << ',';
  os << "log_marg_like,failed\n";
  for (std::size_t k = 0; k < r.points.size(); ++k) {
    for (const auto& n : r.names) os << format_number(r.points[k].at(n)) << ',';
    os << format_number(r.log_marg_like[k]) << ',' << (r.failed[k] ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string to_json(const SensitivityResult& r) {
  nlohmann::json j;
  j["names"] = r.names;
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& n : r.names) row.push_back(p.at(n));
    pts.push_back(row);
  }
  j["points"] = pts;
  nlohmann::json lml = nlohmann::json::array();
  for (double v : r.log_marg_like) {
    if (std::isfinite(v)) lml.push_back(v);
    else lml.push_back(nullptr);
  }
  j["log_marg_like"] = lml;
  j["failed"] = r.failed;
  j["argmax"] = r.argmax;
  return j.dump();
}

}  // namespace bugsmc
