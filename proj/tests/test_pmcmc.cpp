#include <doctest.h>

#include <cmath>

#include "bugsmc/bundles.hpp"
#include "bugsmc/compiler.hpp"
#include "bugsmc/frontend.hpp"
#include "bugsmc/pmcmc.hpp"
#include "oracles.hpp"

using namespace bugsmc;

namespace {

const std::vector<std::string> kVolParams = {"gamma[1]", "gamma[2]", "phi", "tau", "pi[1,1]", "pi[2,2]"};
const std::map<std::string, double> kVolInits = {{"gamma[1]", -1}, {"gamma[2]", 1}, {"phi", .5},
                                                 {"tau", 5},       {"pi[1,1]", .8},  {"pi[2,2]", .8}};

Graph compiled(const Bundle& b) { return compile(b.model, b.data, bundle_registry()); }

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

TEST_SUITE("pmcmc") {

TEST_CASE("PIMH: the first iteration is always accepted") {
  const Graph g = compiled(build_volatility_bundle(20, 3));
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    PimhState s = pimh_init(g, {"x"}, seed);
    CHECK(s.labels.size() == 20);
    CHECK(s.log_marg_like == -std::numeric_limits<double>::infinity());
    pimh_update(g, s, 1, 20);
    CHECK(s.accepted == 1);
    CHECK(std::isfinite(s.log_marg_like));
  }
}

TEST_CASE("PIMH: monitors are checked") {
  const Graph g = compiled(build_volatility_bundle(5, 3));
  CHECK_THROWS_AS(pimh_init(g, {}), ConfigError);
  CHECK_THROWS_AS(pimh_init(g, {"nope"}), ConfigError);
}

TEST_CASE("PIMH: zero iterations change nothing") {
  const Graph g = compiled(build_volatility_bundle(10, 3));
  PimhState s = pimh_init(g, {"x"}, 4);
  pimh_update(g, s, 5, 20);
  const auto before = s.sample;
  const double lz = s.log_marg_like;
  pimh_update(g, s, 0, 20);
  CHECK(s.sample == before);
  CHECK(s.log_marg_like == lz);
  CHECK(s.iterations == 5);
  const PimhSamples none = pimh_samples(g, s, 0, 20);
  CHECK(none.samples.size() == 0);
  CHECK(s.sample == before);
}

TEST_CASE("PIMH: thinning") {
  const Graph g = compiled(build_volatility_bundle(10, 3));
  PimhState s = pimh_init(g, {"x", "c"}, 4);
  const PimhSamples a = pimh_samples(g, s, 100, 10, 1);
  CHECK(a.samples.size() == 100);
  CHECK(a.log_marg_like.size() == 100);
  CHECK(a.samples.labels.size() == 20);
  const PimhSamples b = pimh_samples(g, s, 100, 10, 10);
  CHECK(b.samples.size() == 10);
  const PimhSamples c = pimh_samples(g, s, 5, 10, 10);
  CHECK(c.samples.size() <= 1);
  CHECK(a.acceptance_rate >= 0.0);
  CHECK(a.acceptance_rate <= 1.0);
}

TEST_CASE("PIMH: the log-evidence trace follows acceptances") {
  const Graph g = compiled(build_volatility_bundle(10, 3));
  PimhState s = pimh_init(g, {"x"}, 8);
  const PimhSamples out = pimh_samples(g, s, 200, 10);
  const auto x1 = out.samples.column("x[1]");
  for (std::size_t k = 1; k < out.log_marg_like.size(); ++k)
    if (out.log_marg_like[k] == out.log_marg_like[k - 1]) CHECK(x1[k] == x1[k - 1]);
  CHECK(s.log_marg_like == out.log_marg_like.back());
}

TEST_CASE("PIMH on a two-node normal model matches the conjugate posterior") {
  const Graph g = compiled(build_normal_pair_bundle());
  PimhState s = pimh_init(g, {"x"}, 31);
  pimh_update(g, s, 200, 20);
  const PimhSamples out = pimh_samples(g, s, 10000, 20);
  const auto x = out.samples.column("x");
  const auto post = oracle::normal_mean_posterior({0.0}, 0.0, 1.0, 1.0);
  CHECK(std::abs(mean(x) - post.mean) < 4 * oracle::batch_means_se(x));
  std::vector<double> sq;
  for (double v : x) sq.push_back((v - post.mean) * (v - post.mean));
  CHECK(std::abs(mean(sq) - post.var) < 4 * oracle::batch_means_se(sq));
}

TEST_CASE("PIMH runs are reproducible") {
  const Graph g = compiled(build_volatility_bundle(10, 3));
  PimhState a = pimh_init(g, {"x"}, 8), b = pimh_init(g, {"x"}, 8);
  CHECK(to_json(pimh_samples(g, a, 50, 10)) == to_json(pimh_samples(g, b, 50, 10)));
}

TEST_CASE("PMMH: the documented inits give a valid state") {
  const Bundle b = build_volatility_param_bundle(20, 3);
  const Graph g = compiled(b);
  PmmhState s = pmmh_init(g, kVolParams, kVolInits, {"x", "alpha[1]", "alpha[2]", "sigma"}, 5);
  REQUIRE(s.params.size() == 6);
  CHECK(s.params[0].transform == Transform::Identity);
  CHECK(s.params[1].transform == Transform::Log);
  CHECK(s.params[2].transform == Transform::Logit);
  CHECK(s.params[2].lower == -1.0);
  CHECK(s.params[2].upper == 1.0);
  CHECK(s.params[3].transform == Transform::Log);
  CHECK(s.params[4].transform == Transform::Logit);
  for (const auto& p : s.params) CHECK(p.scale == 0.1);
  CHECK(std::isfinite(s.log_prior));
  CHECK(s.latent_labels.size() == 23);
  CHECK(std::find(s.latent_labels.begin(), s.latent_labels.end(), "alpha[1]") != s.latent_labels.end());
  CHECK(std::find(s.latent_labels.begin(), s.latent_labels.end(), "sigma") != s.latent_labels.end());
}

TEST_CASE("PMMH: inits outside the support and bad parameters are rejected") {
  const Graph g = compiled(build_volatility_param_bundle(10, 3));
  auto inits = kVolInits;
  inits["phi"] = 2.0;
  CHECK_THROWS_AS(pmmh_init(g, kVolParams, inits, {"x"}), ConfigError);
  inits = kVolInits;
  inits["tau"] = -1.0;
  CHECK_THROWS_AS(pmmh_init(g, kVolParams, inits, {"x"}), ConfigError);
  CHECK_THROWS_AS(pmmh_init(g, {"alpha[1]"}, {}, {"x"}), ConfigError);  // logical
  CHECK_THROWS_AS(pmmh_init(g, {"y[1]"}, {}, {"x"}), ConfigError);      // observed
  CHECK_THROWS_AS(pmmh_init(g, {"nope"}, {}, {"x"}), ConfigError);

  Registry reg = bundle_registry();
  reg.register_distribution(
      "dblack", 0, [](std::span<const Dims>) { return Dims{1}; },
      [](Args, Rng& rng, std::span<double> out) { out[0] = uniform01(rng); });
  DataTable d;
  d.set("y", DataArray::scalar(0.3));
  const Graph h = compile("model { th ~ dblack()\n y ~ dnorm(th, 1) }", d, reg);
  CHECK_THROWS_AS(pmmh_init(h, {"th"}, {{"th", 0.5}}, {}), ConfigError);
}

TEST_CASE("PMMH: missing inits are drawn from the prior") {
  const Graph g = compiled(build_volatility_param_bundle(10, 3));
  const PmmhState s = pmmh_init(g, kVolParams, {}, {"x"}, 17);
  for (const auto& p : s.params) {
    CHECK(p.value > p.lower);
    CHECK(p.value < p.upper);
  }
  CHECK(std::isfinite(s.log_prior));
}

TEST_CASE("transforms round-trip to 1e-12") {
  Rng rng(3);
  const ParamComponent id{"a", kNoNode, Transform::Identity};
  const ParamComponent lg{"b", kNoNode, Transform::Log, 2.0};
  const ParamComponent up{"c", kNoNode, Transform::LogUpper, -std::numeric_limits<double>::infinity(), 3.0};
  const ParamComponent lt{"d", kNoNode, Transform::Logit, -1.0, 1.0};
  for (int i = 0; i < 1000; ++i) {
    const double u = 6 * uniform01(rng) - 3;
    for (const auto* p : {&id, &lg, &up, &lt}) {
      const double x = from_unconstrained(*p, u);
      CHECK(x >= p->lower);
      CHECK(x <= p->upper);
      CHECK(std::abs(to_unconstrained(*p, x) - u) <= 1e-12 * std::max(1.0, std::abs(u)));
      CHECK(std::abs(from_unconstrained(*p, to_unconstrained(*p, x)) - x) <= 1e-12 * std::max(1.0, std::abs(x)));
    }
  }
  // Jacobians against a central difference.
  for (const auto* p : {&id, &lg, &up, &lt}) {
    const double x = from_unconstrained(*p, 0.3), h = 1e-6;
    const double fd = (to_unconstrained(*p, x + h) - to_unconstrained(*p, x - h)) / (2 * h);
    CHECK(log_jacobian(*p, x) == doctest::Approx(std::log(std::abs(fd))).epsilon(1e-6));
  }
}

TEST_CASE("PMMH: the symmetric proposal terms cancel exactly") {
  const Graph g = compiled(build_volatility_param_bundle(15, 3));
  PmmhState s = pmmh_init(g, kVolParams, kVolInits, {"x"}, 9);
  for (int i = 0; i < 30; ++i) {
    pmmh_update(g, s, 1, 10);
    CHECK(s.last_log_q_forward == s.last_log_q_backward);
    CHECK(s.last_log_q_forward - s.last_log_q_backward == 0.0);
  }
}

TEST_CASE("PMMH: zero iterations and thinning") {
  const Graph g = compiled(build_volatility_param_bundle(10, 3));
  PmmhState s = pmmh_init(g, kVolParams, kVolInits, {"x"}, 9);
  pmmh_update(g, s, 3, 10);
  const PmmhState before = s;
  pmmh_update(g, s, 0, 10);
  CHECK(s.iterations == before.iterations);
  CHECK(s.log_marg_like == before.log_marg_like);
  for (std::size_t i = 0; i < s.params.size(); ++i) CHECK(s.params[i].value == before.params[i].value);

  const PmmhSamples a = pmmh_samples(g, s, 40, 10, 10);
  CHECK(a.params.size() == 4);
  CHECK(a.latent.size() == 4);
  CHECK(a.log_marg_like.size() == 4);
  CHECK(a.log_marg_like_pen.size() == 4);
  const PmmhSamples b = pmmh_samples(g, s, 5, 10, 10);
  CHECK(b.params.size() <= 1);
  const PmmhSamples c = pmmh_samples(g, s, 0, 10, 1);
  CHECK(c.params.size() == 0);
}

TEST_CASE("PMMH: the penalized trace adds the log prior") {
  const Graph g = compiled(build_volatility_param_bundle(10, 3));
  PmmhState s = pmmh_init(g, kVolParams, kVolInits, {"x"}, 9);
  const PmmhSamples out = pmmh_samples(g, s, 20, 10);
  for (std::size_t k = 0; k < out.params.size(); ++k) {
    const double lp = pmmh_log_prior(g, s.params, out.params.rows[k]);
    CHECK(out.log_marg_like_pen[k] == doctest::Approx(out.log_marg_like[k] + lp).epsilon(1e-12));
  }
}

TEST_CASE("PMMH on the normal-mean model matches the conjugate posterior") {
  const Bundle b = build_normal_mean_bundle(20, 4);
  const Graph g = compiled(b);
  PmmhState s = pmmh_init(g, {"theta"}, {{"theta", 0.0}}, {}, 13);
  pmmh_update(g, s, 2000, 10);
  const PmmhSamples out = pmmh_samples(g, s, 20000, 10);
  CHECK(out.acceptance_rate > 0.1);
  CHECK(out.acceptance_rate < 0.6);
  const auto theta = out.params.column("theta");
  const auto post = oracle::normal_mean_posterior(b.data.find("y")->values, 0.0, 100.0, 1.0);
  CHECK(std::abs(mean(theta) - post.mean) < 4 * oracle::batch_means_se(theta));
  std::vector<double> sq;
  for (double v : theta) sq.push_back((v - post.mean) * (v - post.mean));
  CHECK(std::abs(mean(sq) - post.var) < 4 * oracle::batch_means_se(sq));
}

TEST_CASE("PMMH runs are reproducible") {
  const Graph g = compiled(build_volatility_param_bundle(10, 3));
  PmmhState a = pmmh_init(g, kVolParams, kVolInits, {"x"}, 9);
  PmmhState b = pmmh_init(g, kVolParams, kVolInits, {"x"}, 9);
  pmmh_update(g, a, 20, 10);
  pmmh_update(g, b, 20, 10);
  CHECK(to_json(pmmh_samples(g, a, 20, 10)) == to_json(pmmh_samples(g, b, 20, 10)));
}

TEST_CASE("make_grid: the first axis varies slowest") {
  const auto grid = make_grid({{"a", {1, 2}}, {"b", {10, 20, 30}}});
  REQUIRE(grid.size() == 6);
  CHECK(grid[0] == GridPoint{{"a", 1}, {"b", 10}});
  CHECK(grid[1] == GridPoint{{"a", 1}, {"b", 20}});
  CHECK(grid[3] == GridPoint{{"a", 2}, {"b", 10}});
  CHECK(make_grid({{"a", {}}}).empty());
}

TEST_CASE("sensitivity at one point equals a plain SMC run") {
  const Bundle b = build_volatility_bundle(20, 3);
  SmcOptions o;
  o.particles = 100;
  o.seed = 77;
  const auto res = smc_sensitivity(parse_model(b.model), b.data, bundle_registry(),
                                   {GridPoint{{"alpha[1]", -2.5}, {"alpha[2]", -1.0}}}, o);
  REQUIRE(res.log_marg_like.size() == 1);
  const Graph g = compiled(b);
  const SmcOutput ref = run_smc(g, arrange(g), {"x"}, o);
  CHECK(res.log_marg_like[0] == ref.log_marg_like);
  CHECK_FALSE(res.failed[0]);
}

TEST_CASE("sensitivity flags impossible points and continues") {
  DataTable d;
  d.set("a", DataArray::scalar(1.0));
  d.set("y", DataArray::scalar(5.0));
  SmcOptions o;
  o.particles = 50;
  const auto res = smc_sensitivity(parse_model("model { x ~ dunif(0, a)\n y ~ dunif(x, x + 1) }"), d,
                                   Registry::with_builtins(), make_grid({{"a", {1, 10, 2}}}), o);
  REQUIRE(res.log_marg_like.size() == 3);
  CHECK(res.failed == std::vector<bool>{true, false, true});
  CHECK(res.log_marg_like[0] == -std::numeric_limits<double>::infinity());
  CHECK(std::isfinite(res.log_marg_like[1]));
  CHECK(res.argmax == 1);
}

TEST_CASE("sensitivity over a fixed stochastic node") {
  const Bundle b = build_normal_pair_bundle();
  SmcOptions o;
  o.particles = 10;
  const auto res = smc_sensitivity(parse_model(b.model), b.data, bundle_registry(),
                                   make_grid({{"x", {-1.0, 0.0, 2.0}}}), o);
  REQUIRE(res.log_marg_like.size() == 3);
  // With x held fixed, the evidence is the likelihood of y = 0.
  CHECK(res.log_marg_like[0] == doctest::Approx(oracle::normal_log_pdf(0, -1, 1)).epsilon(1e-12));
  CHECK(res.log_marg_like[1] == doctest::Approx(oracle::normal_log_pdf(0, 0, 1)).epsilon(1e-12));
  CHECK(res.log_marg_like[2] == doctest::Approx(oracle::normal_log_pdf(0, 2, 1)).epsilon(1e-12));
  CHECK(res.argmax == 1);
  CHECK_THROWS_AS(smc_sensitivity(parse_model(b.model), b.data, bundle_registry(),
                                  make_grid({{"nope", {1.0}}}), o),
                  ConfigError);
}

TEST_CASE("trace serialization") {
  Trace t;
  t.labels = {"a", "b[1]"};
  t.rows = {{1.5, 2}, {0.25, -1}};
  const std::string csv = to_csv(t, {{"log_marg_like", {-3.5, -2}}});
  CHECK(csv.rfind("iteration,\"a\",\"b[1]\",log_marg_like\n", 0) == 0);
  CHECK(csv.find("\n1,1.5,2,-3.5\n") != std::string::npos);
  CHECK(t.column("b[1]") == std::vector<double>{2, -1});
  CHECK_THROWS_AS(t.column("c"), ConfigError);
}

}  // TEST_SUITE
