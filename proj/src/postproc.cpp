#include "bugsmc/postproc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace bugsmc {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

/// Normalized copy of the weights (uniform when empty).
std::vector<double> normalized(std::span<const double> values, std::span<const double> weights) {
  if (values.empty()) throw ConfigError("cannot summarize an empty sample");
  if (weights.empty()) return std::vector<double>(values.size(), 1.0 / values.size());
  if (weights.size() != values.size())
    throw ConfigError("values and weights differ in length");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0) || !std::isfinite(w)) throw ConfigError("weights must be finite and >= 0");
    sum += w;
  }
  if (!(sum > 0)) throw ConfigError("weights sum to zero");
  std::vector<double> w(weights.begin(), weights.end());
  if (std::abs(sum - 1.0) > 1e-9)
    for (double& x : w) x /= sum;
  return w;
}

std::vector<std::size_t> sorted_order(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  return idx;
}

std::vector<double> quantiles_sorted(std::span<const double> values, std::span<const double> w,
                                     const std::vector<std::size_t>& idx,
                                     std::span<const double> probs) {
  std::vector<double> q;
  q.reserve(probs.size());
  for (double p : probs) {
    if (!(p > 0 && p < 1)) throw ConfigError("quantile levels must lie in (0, 1)");
    double cum = 0.0;
    double v = values[idx.back()];
    for (std::size_t i : idx) {
      cum += w[i];
      // Rounding in the running sum must not push an exact hit to the next value.
      if (cum >= p * (1.0 - 1e-12)) {
        v = values[i];
        break;
      }
    }
    q.push_back(v);
  }
  return q;
}

double weighted_mode(std::span<const double> values, std::span<const double> w) {
  std::map<double, double> mass;
  for (std::size_t i = 0; i < values.size(); ++i) mass[values[i]] += w[i];
  auto best = mass.begin();
  for (auto it = mass.begin(); it != mass.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

}  // namespace

std::vector<double> weighted_quantiles(std::span<const double> values,
                                       std::span<const double> weights,
                                       std::span<const double> probs) {
  const auto w = normalized(values, weights);
  return quantiles_sorted(values, w, sorted_order(values), probs);
}

Summary summarize(std::span<const double> values, std::span<const double> weights,
                  std::span<const double> probs, bool discrete) {
  const auto w = normalized(values, weights);
  Summary s;
  s.mean = posterior_expectation(values, w);
  double var = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) var += w[i] * (values[i] - s.mean) * (values[i] - s.mean);
  s.variance = var;
  s.probs.assign(probs.begin(), probs.end());
  s.quantiles = quantiles_sorted(values, w, sorted_order(values), probs);
  if (discrete) s.mode = weighted_mode(values, w);
  return s;
}

std::vector<Summary> summarize(const SmcOutput& output, std::span<const double> probs) {
  std::vector<Summary> out;
  for (const auto& e : output.elements) {
    Summary f = summarize(e.filtering, output.weights[e.step - 1], probs, e.discrete);
    f.label = e.label;
    f.flavor = "filtering";
    out.push_back(std::move(f));
    Summary s = summarize(e.smoothing, output.final_weights(), probs, e.discrete);
    s.label = e.label;
    s.flavor = "smoothing";
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Summary> summarize(const Trace& trace, std::span<const double> probs,
                               const std::vector<std::string>& discrete) {
  std::vector<Summary> out;
  if (trace.rows.empty()) return out;
  for (const auto& label : trace.labels) {
    const auto col = trace.column(label);
    const bool d = std::find(discrete.begin(), discrete.end(), label) != discrete.end();
    Summary s = summarize(col, {}, probs, d);
    s.label = label;
    s.flavor = "mcmc";
    out.push_back(std::move(s));
  }
  return out;
}

DensityEstimate density(std::span<const double> values, std::span<const double> weights,
                        std::optional<double> bandwidth, std::size_t grid_size) {
  const auto w = normalized(values, weights);
  if (grid_size < 2) throw ConfigError("density grid needs at least 2 points");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (w[i] <= 0) continue;
    lo = std::min(lo, values[i]);
    hi = std::max(hi, values[i]);
  }
  if (!(hi > lo))
    throw ConfigError("all sample values are identical; use a mass table instead of a density");

  double h;
  if (bandwidth) {
    if (!(*bandwidth > 0)) throw ConfigError("bandwidth must be positive");
    h = *bandwidth;
  } else {
    const Summary s = summarize(values, w, std::vector<double>{0.25, 0.75});
    const double sd = std::sqrt(s.variance);
    const double iqr = (s.quantiles[1] - s.quantiles[0]) / 1.34;
    const double spread = iqr > 0 ? std::min(sd, iqr) : sd;
    double sum_w2 = 0.0;
    for (double x : w) sum_w2 += x * x;
    h = 0.9 * spread * std::pow(1.0 / sum_w2, -0.2);
  }

  DensityEstimate d;
  d.bandwidth = h;
  const double a = lo - 3 * h, b = hi + 3 * h;
  const double step = (b - a) / static_cast<double>(grid_size - 1);
  d.grid.resize(grid_size);
  for (std::size_t g = 0; g < grid_size; ++g) d.grid[g] = a + step * static_cast<double>(g);
  d.density.assign(grid_size, 0.0);
  // Kernel contributions beyond 9 bandwidths are below double resolution.
  const double reach = 9 * h;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (w[i] <= 0) continue;
    const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil((values[i] - reach - a) / step)));
    const auto last = std::min<std::size_t>(
        grid_size - 1, static_cast<std::size_t>(std::max(0.0, std::floor((values[i] + reach - a) / step))));
    const double c = w[i] * kInvSqrt2Pi / h;
    for (std::size_t g = first; g <= last; ++g) {
      const double z = (d.grid[g] - values[i]) / h;
      d.density[g] += c * std::exp(-0.5 * z * z);
    }
  }
  return d;
}

MassTable table(std::span<const double> values, std::span<const double> weights) {
  const auto w = normalized(values, weights);
  std::map<double, double> mass;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (w[i] > 0) mass[values[i]] += w[i];
  MassTable t;
  for (const auto& [v, p] : mass) {
    t.support.push_back(v);
    t.probs.push_back(p);
  }
  return t;
}

// ---- emitters ----------------------------------------------------------------

std::string to_csv(const std::vector<Summary>& summaries) {
  std::ostringstream os;
  os << "label,flavor,mean,variance,mode";
  const std::vector<double> probs = summaries.empty() ? std::vector<double>{} : summaries.front().probs;
  for (double p : probs) os << ",q" << format_number(p);
  os << '\n';
  for (const auto& s : summaries) {
    os << '"' << s.label << "\"," << s.flavor << ',' << format_number(s.mean) << ','
       << format_number(s.variance) << ',';
    if (s.mode) os << format_number(*s.mode);
    for (double q : s.quantiles) os << ',' << format_number(q);
    os << '\n';
  }
  return os.str();
}

std::string to_json(const std::vector<Summary>& summaries) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : summaries) {
    nlohmann::json e = {{"label", s.label},
                        {"flavor", s.flavor},
                        {"mean", s.mean},
                        {"variance", s.variance},
                        {"probs", s.probs},
                        {"quantiles", s.quantiles}};
    if (s.mode) e["mode"] = *s.mode;
    j.push_back(e);
  }
  return j.dump();
}

std::string to_csv(const std::vector<DensityEstimate>& densities) {
  std::ostringstream os;
  os << "label,x,density\n";
  for (const auto& d : densities)
    for (std::size_t g = 0; g < d.grid.size(); ++g)
      os << '"' << d.label << "\"," << format_number(d.grid[g]) << ',' << format_number(d.density[g])
         << '\n';
  return os.str();
}

std::string to_json(const std::vector<DensityEstimate>& densities) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& d : densities)
    j.push_back({{"label", d.label}, {"bandwidth", d.bandwidth}, {"x", d.grid}, {"density", d.density}});
  return j.dump();
}

std::string to_csv(const std::vector<MassTable>& tables) {
  std::ostringstream os;
  os << "label,value,prob\n";
  for (const auto& t : tables)
    for (std::size_t k = 0; k < t.support.size(); ++k)
      os << '"' << t.label << "\"," << format_number(t.support[k]) << ',' << format_number(t.probs[k])
         << '\n';
  return os.str();
}

std::string to_json(const std::vector<MassTable>& tables) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& t : tables)
    j.push_back({{"label", t.label}, {"support", t.support}, {"probs", t.probs}});
  return j.dump();
}

}  // namespace bugsmc
