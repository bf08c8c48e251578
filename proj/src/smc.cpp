#include "bugsmc/smc.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include <Eigen/Dense>
#include <json.hpp>

namespace bugsmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Inverts the cumulative weights at sorted points u in [0, 1).
std::vector<std::size_t> invert_sorted(std::span<const double> w, std::span<const double> u) {
  const std::size_t n = w.size();
  std::vector<std::size_t> out(u.size());
  double cum = w[0];
  std::size_t j = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    while (u[i] >= cum && j + 1 < n) cum += w[++j];
    out[i] = j;
  }
  return out;
}

}  // namespace

std::string_view to_string(ResamplingKind kind) {
  switch (kind) {
    case ResamplingKind::Multinomial:
      return "multinomial";
    case ResamplingKind::Residual:
      return "residual";
    case ResamplingKind::Stratified:
      return "stratified";
    case ResamplingKind::Systematic:
      return "systematic";
  }
  return "systematic";
}

ResamplingKind parse_resampling(std::string_view name) {
  for (auto k : {ResamplingKind::Multinomial, ResamplingKind::Residual,
                 ResamplingKind::Stratified, ResamplingKind::Systematic})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown resampling kind '" + std::string(name) + "'");
}

std::vector<std::size_t> resample(std::span<const double> w, ResamplingKind kind, Rng& rng) {
  const std::size_t n = w.size();
  if (n == 0) return {};
  std::vector<double> u(n);
  switch (kind) {
    case ResamplingKind::Systematic: {
      const double u0 = uniform01(rng);
      for (std::size_t i = 0; i < n; ++i) u[i] = (static_cast<double>(i) + u0) / n;
      return invert_sorted(w, u);
    }
    case ResamplingKind::Stratified:
      for (std::size_t i = 0; i < n; ++i) u[i] = (static_cast<double>(i) + uniform01(rng)) / n;
      return invert_sorted(w, u);
    case ResamplingKind::Multinomial:
      for (auto& x : u) x = uniform01(rng);
      std::sort(u.begin(), u.end());
      return invert_sorted(w, u);
    case ResamplingKind::Residual: {
      std::vector<std::size_t> out;
      out.reserve(n);
      std::vector<double> rest(n);
      double rest_sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double nw = static_cast<double>(n) * w[i];
        const auto copies = static_cast<std::size_t>(std::floor(nw));
        out.insert(out.end(), copies, i);
        rest[i] = nw - static_cast<double>(copies);
        rest_sum += rest[i];
      }
      const std::size_t r = n - std::min(out.size(), n);
      out.resize(std::min(out.size(), n));
      if (r > 0) {
        for (auto& x : rest) x /= rest_sum;
        std::vector<double> ur(r);
        for (auto& x : ur) x = uniform01(rng);
        std::sort(ur.begin(), ur.end());
        const auto extra = invert_sorted(rest, ur);
        out.insert(out.end(), extra.begin(), extra.end());
        std::sort(out.begin(), out.end());
      }
      return out;
    }
  }
  return {};
}

double ess(std::span<const double> w) {
  double s = 0.0;
  for (double x : w) s += x * x;
  return 1.0 / s;
}

std::size_t Genealogy::anc(std::size_t i, std::size_t n, std::size_t k) const {
  for (std::size_t g = 0; g < k; ++g) {
    // particle i at step n - g descends from ancestors[n - g - 1][i] at step n - g - 1
    i = ancestors.at(n - g - 1).at(i);
  }
  return i;
}

namespace {

double grouped_inverse_square(std::span<const double> w, const std::vector<std::size_t>& group,
                              std::vector<double>& mass) {
  std::fill(mass.begin(), mass.end(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) mass[group[i]] += w[i];
  double s = 0.0;
  std::size_t occupied = 0;
  for (double m : mass) {
    s += m * m;
    occupied += m > 0.0;
  }
  // A fully coalesced genealogy is one particle, whatever the rounding in sum W.
  return occupied == 1 ? 1.0 : 1.0 / s;
}

}  // namespace

double sess(const Genealogy& g, std::span<const double> w, std::size_t n, std::size_t t) {
  if (t < 1 || t > n || n > g.steps()) throw Error("sess: need 1 <= t <= n <= steps");
  std::vector<std::size_t> group(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) group[i] = g.anc(i, n, n - t);
  std::vector<double> mass(w.size());
  return grouped_inverse_square(w, group, mass);
}

std::vector<double> sess_all(const Genealogy& g, std::span<const double> w) {
  const std::size_t n = g.steps();
  std::vector<double> out(n);
  std::vector<std::size_t> group(w.size());
  std::iota(group.begin(), group.end(), std::size_t{0});
  std::vector<double> mass(w.size());
  for (std::size_t t = n; t >= 1; --t) {
    out[t - 1] = grouped_inverse_square(w, group, mass);
    if (t == 1) break;
    const auto& a = g.ancestors[t - 1];
    for (auto& j : group) j = a[j];
  }
  return out;
}

std::vector<const ElementSamples*> SmcOutput::variable(const std::string& name) const {
  std::vector<const ElementSamples*> out;
  for (const auto& e : elements)
    if (e.variable == name) out.push_back(&e);
  return out;
}

const ElementSamples& SmcOutput::element(const std::string& label) const {
  for (const auto& e : elements)
    if (e.label == label) return e;
  throw ConfigError("'" + label + "' is not monitored");
}

namespace {

struct Target {
  ElementRef ref;
  std::string variable;
  bool per_particle = false;
  std::size_t row = 0;  // row in the particle matrix, or offset in the shared bank
};

/// Runs the ops of one step for one particle; returns the incremental log-weight.
double advance(const Graph& graph, const Step& step, const Layout& layout, const double* shared,
               double* particle, Rng& rng, Workspace& ws) {
  const ValueView view(layout, shared, particle);
  double inc = 0.0;
  for (NodeId id : step.ops) {
    const Node& n = graph.node(id);
    if (!layout.per_particle[id]) {
      if (n.observed)
        inc += log_density_node(n, std::span<const double>(shared + layout.offset[id], n.size()),
                                view, ws);
      continue;
    }
    std::span<double> out(particle + layout.offset[id], n.size());
    if (n.kind == NodeKind::Logical)
      n.expr.eval(view, out, ws);
    else
      sample_node(n, view, rng, out, ws);
  }
  return inc;
}

}  // namespace

SmcOutput run_smc(const Graph& graph, const Arrangement& arr,
                  const std::vector<std::string>& monitors, const SmcOptions& options,
                  const std::map<NodeId, std::vector<double>>& fixed) {
  const std::size_t N = options.particles;
  if (N < 1) throw ConfigError("the number of particles must be at least 1");
  if (!(options.threshold >= 0.0)) throw ConfigError("resampling threshold must be >= 0");
  if (arr.fixed.size() != graph.size()) throw ConfigError("arrangement does not match graph");

  const Layout layout = graph.particle_layout(arr.fixed);
  std::vector<double> shared = graph.initial_shared(layout);
  for (NodeId id = 0; id < graph.size(); ++id) {
    if (!arr.fixed[id]) continue;
    const auto it = fixed.find(id);
    if (it == fixed.end()) throw ConfigError("no value for fixed node '" + graph.node(id).label + "'");
    if (it->second.size() != graph.node(id).size())
      throw ConfigError("wrong number of values for fixed node '" + graph.node(id).label + "'");
    std::copy(it->second.begin(), it->second.end(), shared.begin() + layout.offset[id]);
  }

  SmcOutput out;
  out.options = options;
  out.monitors = monitors;

  // Step at which each particle node is computed.
  std::vector<std::size_t> step_of(graph.size(), 0);
  for (std::size_t t = 0; t < arr.steps.size(); ++t)
    for (NodeId id : arr.steps[t].ops) step_of[id] = t + 1;

  std::vector<Target> targets;
  for (const auto& m : monitors) {
    for (const auto& ref : graph.resolve(m)) {
      Target tg;
      tg.ref = ref;
      tg.variable = m;
      tg.per_particle = layout.per_particle[ref.node];
      tg.row = layout.offset[ref.node] + ref.offset;
      targets.push_back(tg);
      ElementSamples es;
      es.label = ref.label;
      es.variable = m;
      const Node& node = graph.node(ref.node);
      es.step = tg.per_particle ? std::max<std::size_t>(step_of[ref.node], 1) : 1;
      es.discrete = node.is_stochastic() && node.distribution->discrete;
      out.elements.push_back(std::move(es));
    }
  }

  Eigen::MatrixXd particles(static_cast<Eigen::Index>(layout.particle_size),
                            static_cast<Eigen::Index>(N));
  particles.setZero();
  std::vector<double> prev_w(N, 1.0 / static_cast<double>(N));
  std::vector<double> inc(N);
  std::vector<double> w(N);
  Rng rng(options.seed);
  Workspace ws;
  const std::size_t n_steps = arr.steps.size();
  std::vector<std::size_t> identity(N);
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  std::vector<std::size_t> ancestors = identity;

  for (std::size_t t = 0; t < n_steps; ++t) {
    const Step& step = arr.steps[t];
    out.genealogy.ancestors.push_back(ancestors);

    auto run_range = [&](std::size_t lo, std::size_t hi, Workspace& local, Rng* stream) {
      for (std::size_t i = lo; i < hi; ++i) {
        double* col = particles.col(static_cast<Eigen::Index>(i)).data();
        if (stream) {
          inc[i] = advance(graph, step, layout, shared.data(), col, *stream, local);
        } else {
          Rng own(derive_seed(options.seed, t + 1, i));
          inc[i] = advance(graph, step, layout, shared.data(), col, own, local);
        }
      }
    };
    try {
      if (options.threads == 0) {
        run_range(0, N, ws, &rng);
      } else {
        const std::size_t k = std::min(options.threads, N);
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(k);
        for (std::size_t j = 0; j < k; ++j) {
          pool.emplace_back([&, j] {
            try {
              Workspace local;
              run_range(N * j / k, N * (j + 1) / k, local, nullptr);
            } catch (...) {
              errors[j] = std::current_exception();
            }
          });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
          if (e) std::rethrow_exception(e);
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw ExtensionError(std::string("extension failed at step ") + std::to_string(t + 1) +
                           ": " + e.what());
    }

    // Weighting, in log space with a max shift.
    double m = kNegInf;
    for (std::size_t i = 0; i < N; ++i) {
      if (std::isnan(inc[i])) inc[i] = kNegInf;
      if (prev_w[i] > 0.0) m = std::max(m, inc[i]);
    }
    if (m == kNegInf) {
      std::vector<std::string> names;
      for (NodeId id : step.observed) names.push_back(graph.node(id).label);
      throw DegenerateWeights(t + 1, names);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      w[i] = prev_w[i] * std::exp(inc[i] - m);
      s += w[i];
    }
    out.log_marg_like += m + std::log(s);
    for (auto& x : w) x /= s;
    out.weights.push_back(w);
    out.ess.push_back(ess(w));

    for (std::size_t k = 0; k < targets.size(); ++k) {
      if (out.elements[k].step != t + 1) continue;
      auto& vals = out.elements[k].filtering;
      vals.resize(N);
      for (std::size_t i = 0; i < N; ++i)
        vals[i] = targets[k].per_particle
                      ? particles(static_cast<Eigen::Index>(targets[k].row),
                                  static_cast<Eigen::Index>(i))
                      : shared[targets[k].row];
    }

    const bool last = t + 1 == n_steps;
    const bool resample_now =
        !last && (options.threshold >= 1.0 || out.ess.back() < options.threshold * N);
    out.resampled.push_back(resample_now);
    if (resample_now) {
      ancestors = resample(w, options.resampling, rng);
      std::vector<Eigen::Index> idx(ancestors.begin(), ancestors.end());
      particles = particles(Eigen::all, idx).eval();
      std::fill(prev_w.begin(), prev_w.end(), 1.0 / static_cast<double>(N));
    } else {
      ancestors = identity;
      prev_w = w;
    }
  }

  for (std::size_t k = 0; k < targets.size(); ++k) {
    auto& vals = out.elements[k].smoothing;
    vals.resize(N);
    for (std::size_t i = 0; i < N; ++i)
      vals[i] = targets[k].per_particle ? particles(static_cast<Eigen::Index>(targets[k].row),
                                                    static_cast<Eigen::Index>(i))
                                        : shared[targets[k].row];
  }
  out.sess = sess_all(out.genealogy, out.final_weights());
  return out;
}

DiagnosisReport diagnose(const SmcOutput& output, double min_sess) {
  DiagnosisReport r;
  r.threshold = min_sess;
  r.min_sess = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < output.sess.size(); ++t) {
    if (output.sess[t] < r.min_sess) {
      r.min_sess = output.sess[t];
      r.argmin_step = t + 1;
    }
  }
  r.pass = r.min_sess >= min_sess;
  std::ostringstream os;
  os << "minimum smoothing ESS: " << r.min_sess << " at step " << r.argmin_step << " (threshold "
     << min_sess << ")\n";
  if (r.pass)
    os << "diagnosis: GOOD\n";
  else
    os << "diagnosis: POOR - the smoothing estimates are degenerate; increase the number of "
          "particles (currently "
       << output.options.particles << ")\n";
  r.text = os.str();
  return r;
}

double posterior_expectation(std::span<const double> values, std::span<const double> weights,
                             const std::function<double(double)>& h) {
  if (values.size() != weights.size() || values.empty())
    throw Error("posterior_expectation: values and weights must be nonempty and aligned");
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += weights[i] * (h ? h(values[i]) : values[i]);
  return s;
}

std::string to_json(const SmcOutput& o) {
  using nlohmann::json;
  json root;
  root["settings"] = {{"particles", o.options.particles},
                      {"resampling", std::string(to_string(o.options.resampling))},
                      {"threshold", o.options.threshold},
                      {"seed", o.options.seed},
                      {"proposal", o.proposal}};
  root["log_marg_like"] = o.log_marg_like;
  root["ess"] = o.ess;
  root["sess"] = o.sess;
  root["resampled"] = o.resampled;
  json vars = json::object();
  for (const auto& name : o.monitors) {
    json filtering = json::array(), smoothing = json::array();
    for (const auto* e : o.variable(name)) {
      filtering.push_back({{"label", e->label},
                           {"step", e->step},
                           {"values", e->filtering},
                           {"weights", o.weights[e->step - 1]}});
      smoothing.push_back({{"label", e->label}, {"values", e->smoothing}});
    }
    vars[name] = {{"filtering", std::move(filtering)},
                  {"smoothing", std::move(smoothing)},
                  {"smoothing_weights", o.final_weights()}};
  }
  root["variables"] = std::move(vars);
  return root.dump();
}

}  // namespace bugsmc
