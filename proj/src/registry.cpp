#include "bugsmc/registry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

namespace bugsmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

// ---------------------------------------------------------------------------
// dimension rules

DimFn fixed_dims(Dims result) {
  return [result](std::span<const Dims> args) {
    for (std::size_t i = 0; i < args.size(); ++i)
      if (!is_scalar(args[i]))
        throw CompileError("argument " + std::to_string(i + 1) + " must be scalar, got dims " +
                           to_string(args[i]));
    return result;
  };
}

/// Elementwise broadcasting: all non-scalar arguments share one shape.
Dims broadcast_dims(std::span<const Dims> args) {
  Dims out{1};
  for (const auto& d : args) {
    if (is_scalar(d)) continue;
    if (is_scalar(out)) {
      out = squeeze(d);
    } else if (squeeze(d) != out) {
      throw CompileError("incompatible dims " + to_string(out) + " and " + to_string(d));
    }
  }
  return out;
}

inline double bcast(std::span<const double> v, std::size_t k) { return v.size() == 1 ? v[0] : v[k]; }

template <class F>
Function elementwise1(std::string name, F f) {
  Function fn;
  fn.name = std::move(name);
  fn.arity = 1;
  fn.dim = [](std::span<const Dims> a) { return squeeze(a[0]); };
  fn.eval = [f](Args a, std::span<double> out) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = f(a[0][k]);
  };
  return fn;
}

template <class F>
Function elementwise2(std::string name, F f) {
  Function fn;
  fn.name = std::move(name);
  fn.arity = 2;
  fn.dim = broadcast_dims;
  fn.eval = [f](Args a, std::span<double> out) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = f(bcast(a[0], k), bcast(a[1], k));
  };
  return fn;
}

void add_builtin_functions(Registry& r) {
  r.add_function(elementwise2("+", [](double x, double y) { return x + y; }));
  r.add_function(elementwise2("-", [](double x, double y) { return x - y; }));
  r.add_function(elementwise2("*", [](double x, double y) { return x * y; }));
  r.add_function(elementwise2("/", [](double x, double y) { return x / y; }));
  r.add_function(elementwise2("^", [](double x, double y) { return std::pow(x, y); }));
  r.add_function(elementwise2("pow", [](double x, double y) { return std::pow(x, y); }));
  r.add_function(elementwise2("==", [](double x, double y) { return x == y ? 1.0 : 0.0; }));
  r.add_function(elementwise2("!=", [](double x, double y) { return x != y ? 1.0 : 0.0; }));
  r.add_function(elementwise2("<", [](double x, double y) { return x < y ? 1.0 : 0.0; }));
  r.add_function(elementwise2("<=", [](double x, double y) { return x <= y ? 1.0 : 0.0; }));
  r.add_function(elementwise2(">", [](double x, double y) { return x > y ? 1.0 : 0.0; }));
  r.add_function(elementwise2(">=", [](double x, double y) { return x >= y ? 1.0 : 0.0; }));
  r.add_function(elementwise1(std::string(op::kNegate), [](double x) { return -x; }));
  r.add_function(elementwise1("exp", [](double x) { return std::exp(x); }));
  r.add_function(elementwise1("log", [](double x) { return std::log(x); }));
  r.add_function(elementwise1("sqrt", [](double x) { return std::sqrt(x); }));
  r.add_function(elementwise1("abs", [](double x) { return std::fabs(x); }));

  Function ifelse;
  ifelse.name = "ifelse";
  ifelse.arity = 3;
  ifelse.dim = broadcast_dims;
  ifelse.eval = [](Args a, std::span<double> out) {
    for (std::size_t k = 0; k < out.size(); ++k)
      out[k] = bcast(a[0], k) != 0.0 ? bcast(a[1], k) : bcast(a[2], k);
  };
  r.add_function(std::move(ifelse));

  Function sum;
  sum.name = "sum";
  sum.arity = 1;
  sum.dim = [](std::span<const Dims>) { return Dims{1}; };
  sum.eval = [](Args a, std::span<double> out) {
    double s = 0.0;
    for (double v : a[0]) s += v;
    out[0] = s;
  };
  r.add_function(std::move(sum));
}

// ---------------------------------------------------------------------------
// built-in distributions

void require(bool cond, const char* dist, const char* what) {
  if (!cond) throw ParamError(std::string(dist) + ": " + what);
}

double normal_sd(Args p) {
  require(std::isfinite(p[0][0]), "dnorm", "mean must be finite");
  require(p[1][0] > 0.0 && std::isfinite(p[1][0]), "dnorm", "precision must be positive");
  return 1.0 / std::sqrt(p[1][0]);
}

const boost::math::normal_distribution<double> kStdNormal{};

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0); }
double std_normal_ccdf(double z) { return 0.5 * std::erfc(z * std::numbers::sqrt2 / 2.0); }

double std_normal_quantile(double p) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  return boost::math::quantile(kStdNormal, p);
}

double std_normal_cquantile(double q) {
  if (q <= 0.0) return kInf;
  if (q >= 1.0) return -kInf;
  return boost::math::quantile(boost::math::complement(kStdNormal, q));
}

Distribution make_dnorm() {
  Distribution d;
  d.name = "dnorm";
  d.arity = 2;
  d.dim = fixed_dims({1});
  d.log_density = [](std::span<const double> x, Args p) {
    const double sd = normal_sd(p);
    const double z = (x[0] - p[0][0]) / sd;
    return -kLogSqrt2Pi - std::log(sd) - 0.5 * z * z;
  };
  d.sample = [](Args p, Rng& rng, std::span<double> out) {
    out[0] = p[0][0] + normal_sd(p) * standard_normal(rng);
  };
  d.support = [](Args) { return Interval{}; };
  d.cdf = [](double x, Args p) { return std_normal_cdf((x - p[0][0]) / normal_sd(p)); };
  d.quantile = [](double q, Args p) { return p[0][0] + normal_sd(p) * std_normal_quantile(q); };
  return d;
}

void check_gamma(Args p) {
  require(p[0][0] > 0.0 && std::isfinite(p[0][0]), "dgamma", "shape must be positive");
  require(p[1][0] > 0.0 && std::isfinite(p[1][0]), "dgamma", "rate must be positive");
}

Distribution make_dgamma() {
  Distribution d;
  d.name = "dgamma";
  d.arity = 2;
  d.dim = fixed_dims({1});
  d.log_density = [](std::span<const double> x, Args p) {
    check_gamma(p);
    const double a = p[0][0], b = p[1][0];
    if (x[0] < 0.0) return -kInf;
    if (x[0] == 0.0) return a == 1.0 ? std::log(b) : (a < 1.0 ? kInf : -kInf);
    return a * std::log(b) - std::lgamma(a) + (a - 1.0) * std::log(x[0]) - b * x[0];
  };
  d.sample = [](Args p, Rng& rng, std::span<double> out) {
    check_gamma(p);
    out[0] = standard_gamma(rng, p[0][0]) / p[1][0];
  };
  d.support = [](Args) { return Interval{0.0, kInf}; };
  d.cdf = [](double x, Args p) {
    check_gamma(p);
    return x <= 0.0 ? 0.0 : boost::math::gamma_p(p[0][0], p[1][0] * x);
  };
  d.quantile = [](double q, Args p) {
    check_gamma(p);
    if (q <= 0.0) return 0.0;
    if (q >= 1.0) return kInf;
    return boost::math::gamma_p_inv(p[0][0], q) / p[1][0];
  };
  return d;
}

void check_beta(Args p) {
  require(p[0][0] > 0.0 && std::isfinite(p[0][0]), "dbeta", "shape a must be positive");
  require(p[1][0] > 0.0 && std::isfinite(p[1][0]), "dbeta", "shape b must be positive");
}

Distribution make_dbeta() {
  Distribution d;
  d.name = "dbeta";
  d.arity = 2;
  d.dim = fixed_dims({1});
  d.log_density = [](std::span<const double> x, Args p) {
    check_beta(p);
    const double a = p[0][0], b = p[1][0], v = x[0];
    if (v < 0.0 || v > 1.0) return -kInf;
    const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    const double t1 = a == 1.0 ? 0.0 : (a - 1.0) * std::log(v);
    const double t2 = b == 1.0 ? 0.0 : (b - 1.0) * std::log1p(-v);
    return t1 + t2 - lbeta;
  };
  d.sample = [](Args p, Rng& rng, std::span<double> out) {
    check_beta(p);
    const double g1 = standard_gamma(rng, p[0][0]);
    const double g2 = standard_gamma(rng, p[1][0]);
    out[0] = g1 / (g1 + g2);
  };
  d.support = [](Args) { return Interval{0.0, 1.0}; };
  d.cdf = [](double x, Args p) {
    check_beta(p);
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return boost::math::ibeta(p[0][0], p[1][0], x);
  };
  d.quantile = [](double q, Args p) {
    check_beta(p);
    if (q <= 0.0) return 0.0;
    if (q >= 1.0) return 1.0;
    return boost::math::ibeta_inv(p[0][0], p[1][0], q);
  };
  return d;
}

void check_exp(Args p) {
  require(p[0][0] > 0.0 && std::isfinite(p[0][0]), "dexp", "rate must be positive");
}

Distribution make_dexp() {
  Distribution d;
  d.name = "dexp";
  d.arity = 1;
  d.dim = fixed_dims({1});
  d.log_density = [](std::span<const double> x, Args p) {
    check_exp(p);
    return x[0] < 0.0 ? -kInf : std::log(p[0][0]) - p[0][0] * x[0];
  };
  d.sample = [](Args p, Rng& rng, std::span<double> out) {
    check_exp(p);
    out[0] = standard_exponential(rng) / p[0][0];
  };
  d.support = [](Args) { return Interval{0.0, kInf}; };
  d.cdf = [](double x, Args p) {
    check_exp(p);
    return x <= 0.0 ? 0.0 : -std::expm1(-p[0][0] * x);
  };
  d.quantile = [](double q, Args p) {
    check_exp(p);
    if (q >= 1.0) return kInf;
    return -std::log1p(-q) / p[0][0];
  };
  return d;
}

void check_unif(Args p) {
  require(std::isfinite(p[0][0]) && std::isfinite(p[1][0]) && p[0][0] < p[1][0], "dunif",
          "bounds must be finite with lower < upper");
}

Distribution make_dunif() {
  Distribution d;
  d.name = "dunif";
  d.arity = 2;
  d.dim = fixed_dims({1});
  d.log_density = [](std::span<const double> x, Args p) {
    check_unif(p);
    const double a = p[0][0], b = p[1][0];
    return (x[0] < a || x[0] > b) ? -kInf : -std::log(b - a);
  };
  d.sample = [](Args p, Rng& rng, std::span<double> out) {
    check_unif(p);
    out[0] = p[0][0] + (p[1][0] - p[0][0]) * uniform01(rng);
  };
  d.support = [](Args p) {
    check_unif(p);
    return Interval{p[0][0], p[1][0]};
  };
  d.cdf = [](double x, Args p) {
    check_unif(p);
    return std::clamp((x - p[0][0]) / (p[1][0] - p[0][0]), 0.0, 1.0);
  };
  d.quantile = [](double q, Args p) {
    check_unif(p);
    return p[0][0] + q * (p[1][0] - p[0][0]);
  };
  return d;
}

void check_bern(Args p) {
  require(p[0][0] >= 0.0 && p[0][0] <= 1.0, "dbern", "probability must lie in [0,1]");
}

Distribution make_dbern() {
  Distribution d;
  d.name = "dbern";
  d.arity = 1;
  d.discrete = true;
  d.dim = fixed_dims({1});
  d.log_density = [](std::span<const double> x, Args p) {
    check_bern(p);
    if (x[0] == 1.0) return std::log(p[0][0]);
    if (x[0] == 0.0) return std::log1p(-p[0][0]);
    return -kInf;
  };
  d.sample = [](Args p, Rng& rng, std::span<double> out) {
    check_bern(p);
    out[0] = uniform01(rng) < p[0][0] ? 1.0 : 0.0;
  };
  d.support = [](Args) { return Interval{0.0, 1.0}; };
  d.cdf = [](double x, Args p) {
    check_bern(p);
    if (x < 0.0) return 0.0;
    return x < 1.0 ? 1.0 - p[0][0] : 1.0;
  };
  d.quantile = [](double q, Args p) {
    check_bern(p);
    return q <= 1.0 - p[0][0] ? 0.0 : 1.0;
  };
  return d;
}

/// Total of the (unnormalized) category weights; validates them.
double dcat_total(std::span<const double> w) {
  double total = 0.0;
  for (double v : w) {
    require(v >= 0.0 && std::isfinite(v), "dcat", "weights must be finite and non-negative");
    total += v;
  }
  require(total > 0.0, "dcat", "weights must not all be zero");
  return total;
}

Distribution make_dcat() {
  Distribution d;
  d.name = "dcat";
  d.arity = 1;
  d.discrete = true;
  d.dim = [](std::span<const Dims> a) {
    if (squeeze(a[0]).size() != 1)
      throw CompileError("dcat: probability argument must be a vector, got dims " +
                         to_string(a[0]));
    return Dims{1};
  };
  d.log_density = [](std::span<const double> x, Args p) {
    const double total = dcat_total(p[0]);
    const double v = x[0];
    if (v != std::floor(v) || v < 1.0 || v > static_cast<double>(p[0].size())) return -kInf;
    return std::log(p[0][static_cast<std::size_t>(v) - 1] / total);
  };
  d.sample = [](Args p, Rng& rng, std::span<double> out) {
    const double total = dcat_total(p[0]);
    const double u = uniform01(rng) * total;
    double cum = 0.0;
    std::size_t k = 0;
    for (; k + 1 < p[0].size(); ++k) {
      cum += p[0][k];
      if (u < cum) break;
    }
    while (p[0][k] == 0.0 && k > 0) --k;  // never land on a zero-weight category
    out[0] = static_cast<double>(k + 1);
  };
  d.support = [](Args p) { return Interval{1.0, static_cast<double>(p[0].size())}; };
  d.cdf = [](double x, Args p) {
    const double total = dcat_total(p[0]);
    double cum = 0.0;
    for (std::size_t k = 0; k < p[0].size() && static_cast<double>(k + 1) <= x; ++k) cum += p[0][k];
    return std::min(1.0, cum / total);
  };
  d.quantile = [](double q, Args p) {
    const double total = dcat_total(p[0]);
    double cum = 0.0;
    for (std::size_t k = 0; k < p[0].size(); ++k) {
      cum += p[0][k] / total;
      if (q <= cum && p[0][k] > 0.0) return static_cast<double>(k + 1);
    }
    return static_cast<double>(p[0].size());
  };
  return d;
}

// ---------------------------------------------------------------------------
// truncation helpers

/// log(exp(a) - exp(b)) for a >= b.
double log_diff_exp(double a, double b) {
  if (b == -kInf) return a;
  if (a <= b) return -kInf;
  return a + std::log1p(-std::exp(b - a));
}

double log_normal_ccdf(double z) {
  const double q = std_normal_ccdf(z);
  if (q > 1e-300) return std::log(q);
  // Far upper tail: log phi(z) + log of the Mills ratio, the latter from its
  // continued fraction 1/(z + 1/(z + 2/(z + ...))) evaluated backwards.
  double f = z;
  for (int k = 200; k >= 1; --k) f = z + k / f;
  return -0.5 * z * z - kLogSqrt2Pi - std::log(f);
}

/// Standard normal restricted to [a, b] with 0 < a, for intervals whose mass
/// underflows: exponential proposals (or uniform ones on narrow intervals)
/// with rejection.
double sample_normal_tail(double a, double b, Rng& rng) {
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  if ((b - a) * lambda < 1.0) {
    while (true) {
      const double z = a + (b - a) * uniform01(rng);
      if (std::log(uniform_open(rng)) <= 0.5 * (a * a - z * z)) return z;
    }
  }
  while (true) {
    const double z = a + standard_exponential(rng) / lambda;
    if (z > b) continue;
    if (std::log(uniform_open(rng)) <= -0.5 * (z - lambda) * (z - lambda)) return z;
  }
}

/// log P(a <= Z <= b) for a standard normal, stable in both tails.
double log_std_normal_mass(double a, double b) {
  if (a >= 0.0) return log_diff_exp(log_normal_ccdf(a), log_normal_ccdf(b));
  if (b <= 0.0) return log_diff_exp(log_normal_ccdf(-b), log_normal_ccdf(-a));
  return std::log(std_normal_cdf(b) - std_normal_cdf(a));
}

bool is_dnorm(const Distribution& d) { return d.name == "dnorm"; }

constexpr double kMinLogMass = -690.7755278982137;  // log(1e-300)

double discrete_lower_cdf(const Distribution& d, double lower, Args p) {
  // P(X < lower) for integer-valued X
  return d.cdf(std::ceil(lower) - 1.0, p);
}

void check_bounds(const Bounds& b) {
  if (std::isnan(b.lower) || std::isnan(b.upper))
    throw ParamError("truncation bounds must not be NaN");
  if (!(b.lower < b.upper))
    throw ParamError("truncation requires lower < upper");
}

}  // namespace

// ---------------------------------------------------------------------------
// Registry

bool Registry::taken(const std::string& name) const {
  return functions_.count(name) != 0 || distributions_.count(name) != 0;
}

void Registry::add_function(Function fn) {
  if (taken(fn.name)) throw DuplicateName(fn.name);
  auto name = fn.name;
  functions_.emplace(std::move(name), std::make_shared<const Function>(std::move(fn)));
}

void Registry::add_distribution(Distribution dist) {
  if (taken(dist.name)) throw DuplicateName(dist.name);
  if (!dist.sample) throw Error("distribution '" + dist.name + "' needs a sampler");
  auto name = dist.name;
  distributions_.emplace(std::move(name), std::make_shared<const Distribution>(std::move(dist)));
}

void Registry::register_function(std::string name, std::size_t n_inputs,
                                 std::function<void(Args, std::span<double>)> eval, DimFn dim) {
  Function fn;
  fn.name = std::move(name);
  fn.arity = n_inputs;
  fn.eval = std::move(eval);
  fn.dim = std::move(dim);
  add_function(std::move(fn));
}

void Registry::register_distribution(
    std::string name, std::size_t n_inputs, DimFn dim,
    std::function<void(Args, Rng&, std::span<double>)> sample_fn,
    std::function<double(std::span<const double>, Args)> log_density_fn) {
  Distribution d;
  d.name = std::move(name);
  d.arity = n_inputs;
  d.dim = std::move(dim);
  d.sample = std::move(sample_fn);
  d.log_density = std::move(log_density_fn);
  add_distribution(std::move(d));
}

const Function* Registry::find_function(std::string_view name) const {
  auto it = functions_.find(name);
  return it == functions_.end() ? nullptr : it->second.get();
}

const Distribution* Registry::find_distribution(std::string_view name) const {
  auto it = distributions_.find(name);
  return it == distributions_.end() ? nullptr : it->second.get();
}

std::shared_ptr<const Function> Registry::function_ptr(std::string_view name) const {
  auto it = functions_.find(name);
  return it == functions_.end() ? nullptr : it->second;
}

std::shared_ptr<const Distribution> Registry::distribution_ptr(std::string_view name) const {
  auto it = distributions_.find(name);
  return it == distributions_.end() ? nullptr : it->second;
}

std::vector<std::string> Registry::function_names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : functions_) out.push_back(k);
  return out;
}

std::vector<std::string> Registry::distribution_names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : distributions_) out.push_back(k);
  return out;
}

Registry Registry::with_builtins() {
  Registry r;
  add_builtin_functions(r);
  r.add_distribution(make_dnorm());
  r.add_distribution(make_dcat());
  r.add_distribution(make_dbeta());
  r.add_distribution(make_dgamma());
  r.add_distribution(make_dunif());
  r.add_distribution(make_dbern());
  r.add_distribution(make_dexp());
  return r;
}

// ---------------------------------------------------------------------------
// density / sampling with truncation

double log_truncation_mass(const Distribution& dist, Args params, const Bounds& b) {
  check_bounds(b);
  if (!dist.can_truncate())
    throw ParamError("distribution '" + dist.name + "' does not support truncation");
  if (is_dnorm(dist)) {
    const double sd = normal_sd(params);
    const double mu = params[0][0];
    return log_std_normal_mass((b.lower - mu) / sd, (b.upper - mu) / sd);
  }
  const double hi = dist.cdf(b.upper, params);
  const double lo = dist.discrete ? discrete_lower_cdf(dist, b.lower, params)
                                  : dist.cdf(b.lower, params);
  return hi > lo ? std::log(hi - lo) : -kInf;
}

double log_density(const Distribution& dist, std::span<const double> x, Args params,
                   const std::optional<Bounds>& bounds) {
  if (!dist.has_density())
    throw ParamError("distribution '" + dist.name + "' has no density");
  if (!bounds) return dist.log_density(x, params);
  if (x[0] < bounds->lower || x[0] > bounds->upper) {
    check_bounds(*bounds);
    return -kInf;
  }
  const double lm = log_truncation_mass(dist, params, *bounds);
  // The normal mass is computed in log space throughout, so only an empty
  // interval is fatal there.
  if (is_dnorm(dist) ? lm == -kInf : lm < kMinLogMass)
    throw TruncationError("truncation interval of '" + dist.name + "' has negligible mass");
  return dist.log_density(x, params) - lm;
}

void sample(const Distribution& dist, Args params, const std::optional<Bounds>& bounds, Rng& rng,
            std::span<double> out) {
  if (!bounds) {
    dist.sample(params, rng, out);
    return;
  }
  const Bounds& b = *bounds;
  const double lm = log_truncation_mass(dist, params, b);
  if (is_dnorm(dist) ? lm == -kInf : lm < kMinLogMass)
    throw TruncationError("truncation interval of '" + dist.name + "' has negligible mass");

  if (is_dnorm(dist) && lm < kMinLogMass) {
    const double mu = params[0][0];
    const double sd = normal_sd(params);
    const double a = (b.lower - mu) / sd, z_hi = (b.upper - mu) / sd;
    const double z = a > 0.0 ? sample_normal_tail(a, z_hi, rng) : -sample_normal_tail(-z_hi, -a, rng);
    out[0] = std::clamp(mu + sd * z, b.lower, b.upper);
    return;
  }
  if (is_dnorm(dist)) {
    // Inverse CDF on the truncated interval; the upper/lower tail is worked
    // through the complementary CDF so far-tail intervals keep precision.
    const double mu = params[0][0];
    const double sd = normal_sd(params);
    const double a = (b.lower - mu) / sd;
    const double z_hi = (b.upper - mu) / sd;
    const double u = uniform01(rng);
    double z;
    if (a >= 0.0) {
      const double qa = std_normal_ccdf(a), qb = std_normal_ccdf(z_hi);
      z = std_normal_cquantile(qb + u * (qa - qb));
    } else if (z_hi <= 0.0) {
      const double qa = std_normal_ccdf(-a), qb = std_normal_ccdf(-z_hi);
      z = -std_normal_cquantile(qb + u * (qa - qb));
    } else {
      const double pa = std_normal_cdf(a), pb = std_normal_cdf(z_hi);
      z = std_normal_quantile(pa + u * (pb - pa));
    }
    out[0] = std::clamp(mu + sd * z, b.lower, b.upper);
    return;
  }

  const double hi = dist.cdf(b.upper, params);
  const double lo = dist.discrete ? discrete_lower_cdf(dist, b.lower, params)
                                  : dist.cdf(b.lower, params);
  const double u = lo + uniform01(rng) * (hi - lo);
  double x = dist.quantile(u, params);
  if (dist.discrete) {
    // The quantile of `lo` itself may sit just below the bound.
    if (x < b.lower) x = std::ceil(b.lower);
  }
  out[0] = std::clamp(x, b.lower, b.upper);
}

Interval effective_support(const Distribution& dist, Args params,
                           const std::optional<Bounds>& bounds) {
  Interval s = dist.support ? dist.support(params) : Interval{};
  if (bounds) {
    s.lower = std::max(s.lower, bounds->lower);
    s.upper = std::min(s.upper, bounds->upper);
  }
  return s;
}

namespace {
const Distribution& lookup(const Registry& reg, std::string_view name) {
  const Distribution* d = reg.find_distribution(name);
  if (!d) throw Error("unknown distribution '" + std::string(name) + "'");
  return *d;
}

std::vector<std::span<const double>> as_args(const std::vector<std::vector<double>>& params) {
  std::vector<std::span<const double>> args;
  args.reserve(params.size());
  for (const auto& p : params) args.emplace_back(p);
  return args;
}
}  // namespace

double log_density(const Registry& reg, std::string_view name, const std::vector<double>& x,
                   const std::vector<std::vector<double>>& params,
                   const std::optional<Bounds>& bounds) {
  const auto args = as_args(params);
  return log_density(lookup(reg, name), x, args, bounds);
}

std::vector<double> sample(const Registry& reg, std::string_view name,
                           const std::vector<std::vector<double>>& params,
                           const std::optional<Bounds>& bounds, Rng& rng) {
  const Distribution& d = lookup(reg, name);
  const auto args = as_args(params);
  std::vector<Dims> dims;
  for (const auto& p : params) dims.push_back(Dims{p.size()});
  std::vector<double> out(element_count(d.dim(dims)));
  sample(d, args, bounds, rng, out);
  return out;
}

}  // namespace bugsmc
