#include "bugsmc/bundles.hpp"

#include <filesystem>
#include <fstream>

#include "bugsmc/compiler.hpp"
#include "bugsmc/lotka_volterra.hpp"

namespace bugsmc {

const char* const kVolatilityModel = R"(model
{
  c[1] ~ dcat(pi[c0,])
  mu[1] <- alpha[1] * (c[1] == 1) + alpha[2] * (c[1] == 2) + phi * x0
  x[1] ~ dnorm(mu[1], 1/sigma^2) T(-500,500)
  y[1] ~ dnorm(0, exp(-x[1]))
  for (t in 2:t_max)
  {
    c[t] ~ dcat(ifelse(c[t-1] == 1, pi[1,], pi[2,]))
    mu[t] <- alpha[1] * (c[t] == 1) + alpha[2] * (c[t] == 2) + phi * x[t-1]
    x[t] ~ dnorm(mu[t], 1/sigma^2) T(-500,500)
    y[t] ~ dnorm(0, exp(-x[t]))
  }
}
)";

const char* const kVolatilityParamModel = R"(model
{
  gamma[1] ~ dnorm(0, 1/100)
  gamma[2] ~ dnorm(0, 1/100) T(0,)
  alpha[1] <- gamma[1]
  alpha[2] <- gamma[1] + gamma[2]
  phi ~ dnorm(0, 1/100) T(-1,1)
  tau ~ dgamma(2.001, 1)
  sigma <- 1/sqrt(tau)
  pi[1,1] ~ dbeta(10, 1)
  pi[1,2] <- 1 - pi[1,1]
  pi[2,2] ~ dbeta(10, 1)
  pi[2,1] <- 1 - pi[2,2]

  c[1] ~ dcat(pi[1,])
  mu[1] <- alpha[1] * (c[1] == 1) + alpha[2] * (c[1] == 2)
  x[1] ~ dnorm(mu[1], 1/sigma^2) T(-500,500)
  prec_y[1] <- exp(-x[1])
  y[1] ~ dnorm(0, prec_y[1])
  for (t in 2:t_max)
  {
    c[t] ~ dcat(ifelse(c[t-1] == 1, pi[1,], pi[2,]))
    mu[t] <- alpha[1] * (c[t] == 1) + alpha[2] * (c[t] == 2) + phi * x[t-1]
    x[t] ~ dnorm(mu[t], 1/sigma^2) T(-500,500)
    prec_y[t] <- exp(-x[t])
    y[t] ~ dnorm(0, prec_y[t])
  }
}
)";

const char* const kKineticModel = R"(model
{
  x[,1] ~ LV(x_init, c[1], c[2], c[3], 1)
  y[1] ~ dnorm(x[1,1], 1/sigma^2)
  for (t in 2:t_max)
  {
    x[,t] ~ LV(x[,t-1], c[1], c[2], c[3], 1)
    y[t] ~ dnorm(x[1,t], 1/sigma^2)
  }
}
)";

const char* const kLgssmModel = R"(model
{
  x[1] ~ dnorm(0, 1)
  y[1] ~ dnorm(x[1], 1)
  for (t in 2:t_max)
  {
    x[t] ~ dnorm(phi * x[t-1], 1)
    y[t] ~ dnorm(x[t], 1)
  }
}
)";

const char* const kHmmModel = R"(model
{
  c[1] ~ dcat(p0)
  y[1] ~ dcat(ifelse(c[1] == 1, e[1,], e[2,]))
  for (t in 2:t_max)
  {
    c[t] ~ dcat(ifelse(c[t-1] == 1, a[1,], a[2,]))
    y[t] ~ dcat(ifelse(c[t] == 1, e[1,], e[2,]))
  }
}
)";

const char* const kNormalMeanModel = R"(model
{
  theta ~ dnorm(0, 0.01)
  for (i in 1:n)
  {
    y[i] ~ dnorm(theta, 1)
  }
}
)";

const char* const kNormalPairModel = R"(model
{
  x ~ dnorm(0, 1)
  y ~ dnorm(x, 1)
}
)";

namespace {

constexpr double kSigma = 0.4;
constexpr double kAlpha1 = -2.5;
constexpr double kAlpha2 = -1.0;
constexpr double kPhi = 0.5;

DataTable volatility_constants(std::size_t t_max) {
  DataTable d;
  d.set("t_max", DataArray::scalar(static_cast<double>(t_max)));
  d.set("sigma", DataArray::scalar(kSigma));
  d.set("alpha", DataArray::vector({kAlpha1, kAlpha2}));
  d.set("phi", DataArray::scalar(kPhi));
  d.set("pi", DataArray::matrix(2, 2, {0.9, 0.1, 0.1, 0.9}));
  d.set("c0", DataArray::scalar(1));
  d.set("x0", DataArray::scalar(0));
  return d;
}

void move_entry(DataTable& from, DataTable& to, const std::string& name) {
  to.set(name, *from.find(name));
}

}  // namespace

Bundle build_volatility_bundle(std::size_t t_max, std::uint64_t seed) {
  if (t_max < 1) throw ConfigError("t_max must be positive");
  const Registry reg = Registry::with_builtins();
  const DataTable constants = volatility_constants(t_max);
  const Graph g = compile(kVolatilityModel, constants, reg);
  DataTable sampled = forward_sample_data(g, {"x", "c", "y"}, seed);

  Bundle b;
  b.name = "volatility";
  b.model = kVolatilityModel;
  b.data = constants;
  move_entry(sampled, b.data, "y");
  move_entry(sampled, b.truth, "x");
  move_entry(sampled, b.truth, "c");
  b.monitors = {"x", "c"};
  b.notes = "switching stochastic volatility, known parameters, t_max=" + std::to_string(t_max);
  return b;
}

Bundle build_volatility_param_bundle(std::size_t t_max, std::uint64_t seed) {
  const Bundle known = build_volatility_bundle(t_max, seed);
  Bundle b;
  b.name = "volatility_param";
  b.model = kVolatilityParamModel;
  b.data.set("t_max", DataArray::scalar(static_cast<double>(t_max)));
  b.data.set("y", *known.data.find("y"));
  b.truth = known.truth;
  b.truth.set("gamma", DataArray::vector({kAlpha1, kAlpha2 - kAlpha1}));
  b.truth.set("phi", DataArray::scalar(kPhi));
  b.truth.set("tau", DataArray::scalar(1.0 / (kSigma * kSigma)));
  b.truth.set("pi", DataArray::matrix(2, 2, {0.9, 0.1, 0.1, 0.9}));
  b.monitors = {"x", "c"};
  b.params = {"gamma[1]", "gamma[2]", "phi", "tau", "pi[1,1]", "pi[2,2]"};
  b.notes = "switching stochastic volatility with unknown parameters, t_max=" +
            std::to_string(t_max);
  return b;
}

Bundle build_kinetic_bundle(std::size_t t_max, std::uint64_t seed) {
  if (t_max < 1) throw ConfigError("t_max must be positive");
  const Registry reg = bundle_registry();
  DataTable constants;
  constants.set("t_max", DataArray::scalar(static_cast<double>(t_max)));
  constants.set("x_init", DataArray::vector({100, 100}));
  constants.set("c", DataArray::vector({0.5, 0.0025, 0.3}));
  constants.set("sigma", DataArray::scalar(10));
  const Graph g = compile(kKineticModel, constants, reg);
  DataTable sampled = forward_sample_data(g, {"x", "y"}, seed);

  Bundle b;
  b.name = "kinetic";
  b.model = kKineticModel;
  b.data = constants;
  move_entry(sampled, b.data, "y");
  move_entry(sampled, b.truth, "x");
  b.monitors = {"x"};
  b.notes = "Lotka-Volterra kinetics (needs the LV extension), t_max=" + std::to_string(t_max);
  return b;
}

Bundle build_lgssm_bundle(std::size_t t_max, std::uint64_t seed) {
  if (t_max < 2) throw ConfigError("t_max must be at least 2");
  DataTable constants;
  constants.set("t_max", DataArray::scalar(static_cast<double>(t_max)));
  constants.set("phi", DataArray::scalar(0.9));
  const Graph g = compile(kLgssmModel, constants, Registry::with_builtins());
  DataTable sampled = forward_sample_data(g, {"x", "y"}, seed);

  Bundle b;
  b.name = "lgssm";
  b.model = kLgssmModel;
  b.data = constants;
  move_entry(sampled, b.data, "y");
  move_entry(sampled, b.truth, "x");
  b.monitors = {"x"};
  b.notes = "linear Gaussian state space model (Kalman oracle), t_max=" + std::to_string(t_max);
  return b;
}

Bundle build_hmm_bundle(std::size_t t_max, std::uint64_t seed) {
  if (t_max < 2) throw ConfigError("t_max must be at least 2");
  DataTable constants;
  constants.set("t_max", DataArray::scalar(static_cast<double>(t_max)));
  constants.set("p0", DataArray::vector({0.5, 0.5}));
  constants.set("a", DataArray::matrix(2, 2, {0.8, 0.2, 0.3, 0.7}));
  constants.set("e", DataArray::matrix(2, 3, {0.7, 0.2, 0.1, 0.1, 0.3, 0.6}));
  const Graph g = compile(kHmmModel, constants, Registry::with_builtins());
  DataTable sampled = forward_sample_data(g, {"c", "y"}, seed);

  Bundle b;
  b.name = "hmm";
  b.model = kHmmModel;
  b.data = constants;
  move_entry(sampled, b.data, "y");
  move_entry(sampled, b.truth, "c");
  b.monitors = {"c"};
  b.notes = "two-state hidden Markov model (forward algorithm oracle), t_max=" +
            std::to_string(t_max);
  return b;
}

Bundle build_normal_mean_bundle(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("n must be positive");
  DataTable constants;
  constants.set("n", DataArray::scalar(static_cast<double>(n)));
  const Graph g = compile(kNormalMeanModel, constants, Registry::with_builtins());
  DataTable sampled = forward_sample_data(g, {"theta", "y"}, seed);

  Bundle b;
  b.name = "normal_mean";
  b.model = kNormalMeanModel;
  b.data = constants;
  move_entry(sampled, b.data, "y");
  move_entry(sampled, b.truth, "theta");
  b.monitors = {"theta"};
  b.params = {"theta"};
  b.notes = "conjugate normal mean, n=" + std::to_string(n);
  return b;
}

Bundle build_normal_pair_bundle() {
  Bundle b;
  b.name = "normal_pair";
  b.model = kNormalPairModel;
  b.data.set("y", DataArray::scalar(0.0));
  b.monitors = {"x"};
  b.notes = "two-node normal model, marginal likelihood N(0; 0, 2)";
  return b;
}

std::vector<Bundle> all_bundles(std::uint64_t seed) {
  return {build_volatility_bundle(100, seed), build_volatility_param_bundle(100, seed),
          build_kinetic_bundle(40, seed),     build_lgssm_bundle(20, seed),
          build_hmm_bundle(15, seed),         build_normal_mean_bundle(20, seed),
          build_normal_pair_bundle()};
}

Registry bundle_registry() {
  Registry reg = Registry::with_builtins();
  register_lotka_volterra(reg);
  return reg;
}

void write_bundle(const Bundle& b, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base = std::filesystem::path(dir) / b.name;
  std::ofstream model(base.string() + ".bug");
  if (!model) throw Error("cannot write to '" + dir + "'");
  model << b.model;
  b.data.save(base.string() + ".json");
  b.truth.save(base.string() + ".truth.json");
}

}  // namespace bugsmc
