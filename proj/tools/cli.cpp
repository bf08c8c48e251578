#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "bugsmc/bundles.hpp"
#include "bugsmc/compiler.hpp"
#include "bugsmc/frontend.hpp"
#include "bugsmc/lotka_volterra.hpp"
#include "bugsmc/ordering.hpp"
#include "bugsmc/pmcmc.hpp"
#include "bugsmc/postproc.hpp"
#include "bugsmc/smc.hpp"

namespace bugsmc::cli {

namespace {

namespace fs = std::filesystem;

struct RunConfig {
  std::string model_path;
  std::string data_path;
  std::vector<std::string> monitors;
  std::size_t particles = 1000;
  std::string resampling = "systematic";
  double threshold = 0.5;
  std::uint64_t seed = kDefaultSeed;
  std::size_t burn = 0;
  std::size_t iter = 1000;
  std::size_t thin = 1;
  std::vector<std::string> params;  // name or name=init
  std::vector<std::string> latents;
  std::vector<double> probs{0.025, 0.975};
  std::string out_dir = "out";
  std::string format = "csv";
  std::size_t threads = 0;
  std::string dot_path;
  std::vector<std::string> grid;  // name=lo:step:hi
  std::vector<std::string> extensions;
  bool density = false;
  // bundle
  std::string bundle = "all";
  std::size_t t_max = 0;
};

/// Errors before inference starts map to exit 3, during inference to exit 5.
enum class Stage { Load, Run };

struct Loaded {
  ModelAST ast;
  DataTable data;
  Registry registry;
  Graph graph;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

fs::path out_dir(const RunConfig& c) {
  fs::create_directories(c.out_dir);
  return fs::path(c.out_dir);
}

Registry make_registry(const RunConfig& c) {
  Registry reg = Registry::with_builtins();
  for (const auto& e : c.extensions) {
    if (e == "lv" || e == "LV") register_lotka_volterra(reg);
    else throw ConfigError("unknown extension '" + e + "' (known: lv)");
  }
  return reg;
}

Loaded load(const RunConfig& c) {
  if (c.model_path.empty()) throw ConfigError("--model is required");
  ModelAST ast = parse_model(read_file(c.model_path));
  DataTable data;
  if (!c.data_path.empty()) {
    try {
      data = DataTable::from_json(read_file(c.data_path));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(c.data_path + ": " + e.what());
    }
  }
  Registry reg = make_registry(c);
  Graph g = compile(ast, data, reg);
  return {std::move(ast), std::move(data), std::move(reg), std::move(g)};
}

SmcOptions smc_options(const RunConfig& c) {
  SmcOptions o;
  o.particles = c.particles;
  o.resampling = parse_resampling(c.resampling);
  o.threshold = c.threshold;
  o.seed = c.seed;
  o.threads = c.threads;
  return o;
}

void check_counts(const RunConfig& c) {
  if (c.particles < 1) throw ConfigError("--particles must be at least 1");
  if (c.thin < 1) throw ConfigError("--thin must be at least 1");
  if (c.format != "csv" && c.format != "json") throw ConfigError("--format must be csv or json");
}

std::pair<std::string, std::optional<double>> split_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) return {s, std::nullopt};
  const std::string value = s.substr(eq + 1);
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return {s.substr(0, eq), v};
  } catch (const std::exception&) {
    throw ConfigError("cannot read a number from '" + s + "'");
  }
}

std::vector<double> parse_range(const std::string& name, const std::string& spec) {
  double lo, step, hi;
  char c1, c2;
  std::istringstream in(spec);
  if (!(in >> lo >> c1 >> step >> c2 >> hi) || c1 != ':' || c2 != ':' || !in.eof())
    throw ConfigError("grid for '" + name + "' must read lo:step:hi, got '" + spec + "'");
  if (!(step > 0) || hi < lo) throw ConfigError("grid for '" + name + "' needs step > 0 and lo <= hi");
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> v;
  for (std::size_t k = 0; k < count; ++k) v.push_back(lo + step * static_cast<double>(k));
  return v;
}

std::string sess_csv(const SmcOutput& o) {
  std::ostringstream os;
  os << "t,sess,ess,resampled\n";
  for (std::size_t t = 0; t < o.steps(); ++t)
    os << t + 1 << ',' << format_number(o.sess[t]) << ',' << format_number(o.ess[t]) << ','
       << (o.resampled[t] ? 1 : 0) << '\n';
  return os.str();
}

// ---- commands -------------------------------------------------------------------

int cmd_check(const RunConfig& c, std::ostream& out) {
  const Loaded m = load(c);
  const Graph& g = m.graph;
  const Arrangement arr = arrange(g);
  out << "nodes: " << g.size() << " (constant " << g.count(NodeKind::Constant) << ", logical "
      << g.count(NodeKind::Logical) << ", stochastic " << g.count(NodeKind::Stochastic)
      << ", observed " << g.count_observed() << ")\n";
  out << "n: " << arr.n() << '\n';
  if (!c.dot_path.empty()) {
    write_file(c.dot_path, export_dot(g, arr));
    out << "dot: " << c.dot_path << '\n';
  }
  return kOk;
}

int cmd_smc(const RunConfig& c, std::ostream& out, Stage& stage) {
  check_counts(c);
  if (c.monitors.empty()) throw ConfigError("smc needs at least one --monitor");
  const Loaded m = load(c);
  const SmcOptions opts = smc_options(c);
  for (const auto& name : c.monitors) m.graph.resolve(name);
  const Arrangement arr = arrange(m.graph);
  stage = Stage::Run;
  const SmcOutput o = run_smc(m.graph, arr, c.monitors, opts);
  const DiagnosisReport diag = diagnose(o);

  const fs::path dir = out_dir(c);
  write_file(dir / "smc_output.json", to_json(o));
  write_file(dir / "summary.csv", to_csv(summarize(o, c.probs)));
  write_file(dir / "sess.csv", sess_csv(o));
  write_file(dir / "diagnosis.txt", diag.text);
  if (c.density) {
    std::vector<DensityEstimate> dens;
    std::vector<MassTable> tables;
    for (const auto& e : o.elements) {
      if (e.discrete) {
        MassTable t = table(e.smoothing, o.final_weights());
        t.label = e.label;
        tables.push_back(std::move(t));
        continue;
      }
      try {
        DensityEstimate d = density(e.smoothing, o.final_weights());
        d.label = e.label;
        dens.push_back(std::move(d));
      } catch (const ConfigError&) {
        MassTable t = table(e.smoothing, o.final_weights());  // degenerate cloud
        t.label = e.label;
        tables.push_back(std::move(t));
      }
    }
    write_file(dir / "density.csv", to_csv(dens));
    write_file(dir / "table.csv", to_csv(tables));
  }
  out << "log_marg_like: " << format_number(o.log_marg_like) << '\n' << diag.text;
  return diag.pass ? kOk : kDiagnosisFailure;
}

int cmd_pimh(const RunConfig& c, std::ostream& out, Stage& stage) {
  check_counts(c);
  const Loaded m = load(c);
  PimhState s = pimh_init(m.graph, c.monitors, c.seed, smc_options(c));
  stage = Stage::Run;
  pimh_update(m.graph, s, c.burn, c.particles);
  const PimhSamples r = pimh_samples(m.graph, s, c.iter, c.particles, c.thin);

  const fs::path dir = out_dir(c);
  if (c.format == "json") {
    write_file(dir / "pimh.json", to_json(r));
  } else {
    write_file(dir / "trace.csv", to_csv(r.samples, {{"log_marg_like", r.log_marg_like}}));
    write_file(dir / "summary.csv", to_csv(summarize(r.samples, c.probs)));
  }
  out << "retained: " << r.samples.size() << "\nacceptance_rate: " << format_number(r.acceptance_rate)
      << '\n';
  return kOk;
}

int cmd_pmmh(const RunConfig& c, std::ostream& out, Stage& stage) {
  check_counts(c);
  const Loaded m = load(c);
  std::vector<std::string> names;
  std::map<std::string, double> inits;
  for (const auto& p : c.params) {
    const auto [name, value] = split_assignment(p);
    names.push_back(name);
    if (value) inits[name] = *value;
  }
  PmmhState s = pmmh_init(m.graph, names, inits, c.latents, c.seed, smc_options(c));
  stage = Stage::Run;

  std::ostringstream acc;
  acc << "phase,iteration,acceptance_rate,log_lambda\n";
  constexpr std::size_t kBlock = 100;
  for (std::size_t done = 0; done < c.burn;) {
    const std::size_t n = std::min(kBlock, c.burn - done);
    pmmh_update(m.graph, s, n, c.particles);
    done += n;
    acc << "adapt," << done << ',' << format_number(s.acceptance_rate()) << ','
        << format_number(s.log_lambda) << '\n';
  }
  const PmmhSamples r = pmmh_samples(m.graph, s, c.iter, c.particles, c.thin);
  acc << "sample," << c.burn + c.iter << ',' << format_number(r.acceptance_rate) << ','
      << format_number(s.log_lambda) << '\n';

  const fs::path dir = out_dir(c);
  write_file(dir / "acceptance.csv", acc.str());
  if (c.format == "json") {
    write_file(dir / "pmmh.json", to_json(r));
  } else {
    write_file(dir / "trace.csv", to_csv(r.params, {{"log_marg_like", r.log_marg_like},
                                                    {"log_marg_like_pen", r.log_marg_like_pen}}));
    if (!r.latent.labels.empty()) write_file(dir / "latent.csv", to_csv(r.latent));
    write_file(dir / "summary.csv", to_csv(summarize(r.params, c.probs)));
  }
  out << "retained: " << r.params.size() << "\nacceptance_rate: " << format_number(r.acceptance_rate)
      << '\n';
  return kOk;
}

int cmd_sensitivity(const RunConfig& c, std::ostream& out, Stage& stage) {
  check_counts(c);
  if (c.grid.empty()) throw ConfigError("sensitivity needs at least one --grid name=lo:step:hi");
  const Loaded m = load(c);
  std::vector<std::pair<std::string, std::vector<double>>> axes;
  for (const auto& g : c.grid) {
    const auto eq = g.find('=');
    if (eq == std::string::npos) throw ConfigError("--grid must read name=lo:step:hi");
    axes.emplace_back(g.substr(0, eq), parse_range(g.substr(0, eq), g.substr(eq + 1)));
  }
  const SmcOptions opts = smc_options(c);
  stage = Stage::Run;
  const SensitivityResult r = smc_sensitivity(m.ast, m.data, m.registry, make_grid(axes), opts);
  const fs::path dir = out_dir(c);
  if (c.format == "json") write_file(dir / "sensitivity.json", to_json(r));
  else write_file(dir / "grid.csv", to_csv(r));
  out << "points: " << r.points.size() << '\n';
  if (!r.points.empty()) {
    out << "argmax:";
    for (const auto& [name, v] : r.points[r.argmax]) out << ' ' << name << '=' << format_number(v);
    out << " (log_marg_like " << format_number(r.log_marg_like[r.argmax]) << ")\n";
  }
  return kOk;
}

int cmd_bundle(const RunConfig& c, std::ostream& out) {
  std::vector<Bundle> bundles;
  const std::string& n = c.bundle;
  auto tm = [&](std::size_t def) { return c.t_max ? c.t_max : def; };
  if (n == "all") bundles = all_bundles(c.seed);
  else if (n == "volatility") bundles.push_back(build_volatility_bundle(tm(100), c.seed));
  else if (n == "volatility_param") bundles.push_back(build_volatility_param_bundle(tm(100), c.seed));
  else if (n == "kinetic") bundles.push_back(build_kinetic_bundle(tm(40), c.seed));
  else if (n == "lgssm") bundles.push_back(build_lgssm_bundle(tm(20), c.seed));
  else if (n == "hmm") bundles.push_back(build_hmm_bundle(tm(15), c.seed));
  else if (n == "normal_mean") bundles.push_back(build_normal_mean_bundle(tm(20), c.seed));
  else if (n == "normal_pair") bundles.push_back(build_normal_pair_bundle());
  if (bundles.empty()) throw ConfigError("unknown bundle '" + c.bundle + "'");
  for (const auto& b : bundles) {
    write_bundle(b, c.out_dir);
    out << b.name << ": " << b.notes << '\n';
  }
  return kOk;
}

void add_model_options(CLI::App* app, RunConfig& c) {
  app->add_option("--model", c.model_path, "BUGS model file")->required();
  app->add_option("--data", c.data_path, "data JSON: {name: {dim, values, mask}}");
  app->add_option("--extension", c.extensions, "register a native extension (lv)");
}

void add_smc_options(CLI::App* app, RunConfig& c) {
  app->add_option("--particles", c.particles, "number of particles N")->capture_default_str();
  app->add_option("--resampling", c.resampling, "multinomial|residual|stratified|systematic")
      ->capture_default_str();
  app->add_option("--threshold", c.threshold, "resample when ESS < threshold*N")->capture_default_str();
  app->add_option("--seed", c.seed, "64-bit seed")->capture_default_str();
  app->add_option("--threads", c.threads, "0: sequential stream; k: k workers")->capture_default_str();
  app->add_option("--out", c.out_dir, "output directory")->capture_default_str();
  app->add_option("--probs", c.probs, "quantile levels, e.g. 0.025,0.975")->delimiter(',');
}

void add_mcmc_options(CLI::App* app, RunConfig& c) {
  app->add_option("--burn", c.burn, "burn-in (adaptation) iterations")->capture_default_str();
  app->add_option("--iter", c.iter, "iterations after burn-in")->capture_default_str();
  app->add_option("--thin", c.thin, "keep every thin-th iteration")->capture_default_str();
  app->add_option("--format", c.format, "csv|json")->capture_default_str();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"bugsmc: sequential Monte Carlo and particle MCMC for BUGS models"};
  app.require_subcommand(1);

  auto* check = app.add_subcommand("check", "parse and compile a model; print node counts and n");
  add_model_options(check, c);
  check->add_option("--dot", c.dot_path, "write the graph in Graphviz format");

  auto* smc = app.add_subcommand(
      "smc", "run SMC; writes smc_output.json, summary.csv, sess.csv (t,sess,ess,resampled), "
             "diagnosis.txt");
  add_model_options(smc, c);
  add_smc_options(smc, c);
  smc->add_option("--monitor", c.monitors, "variable to monitor (repeatable)");
  smc->add_flag("--density", c.density,
                "also write density.csv (label,x,density) and table.csv (label,value,prob)");

  auto* pimh = app.add_subcommand(
      "pimh", "particle independent MH; writes trace.csv (iteration, labels..., log_marg_like)");
  add_model_options(pimh, c);
  add_smc_options(pimh, c);
  add_mcmc_options(pimh, c);
  pimh->add_option("--monitor", c.monitors, "variable to sample (repeatable)");

  auto* pmmh = app.add_subcommand(
      "pmmh", "particle marginal MH; writes trace.csv (params, log_marg_like, log_marg_like_pen), "
              "latent.csv, acceptance.csv");
  add_model_options(pmmh, c);
  add_smc_options(pmmh, c);
  add_mcmc_options(pmmh, c);
  pmmh->add_option("--param", c.params, "parameter, optionally name=init (repeatable)")->required();
  pmmh->add_option("--latent", c.latents, "latent variable to sample (repeatable)");

  auto* sens = app.add_subcommand(
      "sensitivity", "log marginal likelihood over a grid; writes grid.csv (names..., "
                     "log_marg_like, failed)");
  add_model_options(sens, c);
  add_smc_options(sens, c);
  sens->add_option("--grid", c.grid, "axis name=lo:step:hi (repeatable)")->required();
  sens->add_option("--format", c.format, "csv|json")->capture_default_str();

  auto* bundle = app.add_subcommand("bundle", "write example models with forward-sampled data");
  bundle->add_option("--name", c.bundle, "volatility|volatility_param|kinetic|lgssm|hmm|normal_mean|normal_pair|all")
      ->capture_default_str();
  bundle->add_option("--t-max", c.t_max, "series length or sample size (default per bundle)");
  bundle->add_option("--seed", c.seed, "64-bit seed")->capture_default_str();
  bundle->add_option("--out", c.out_dir, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigFailure;
  }

  Stage stage = Stage::Load;
  try {
    if (check->parsed()) return cmd_check(c, out);
    if (smc->parsed()) return cmd_smc(c, out, stage);
    if (pimh->parsed()) return cmd_pimh(c, out, stage);
    if (pmmh->parsed()) return cmd_pmmh(c, out, stage);
    if (sens->parsed()) return cmd_sensitivity(c, out, stage);
    if (bundle->parsed()) return cmd_bundle(c, out);
  } catch (const LexError& e) {
    err << "error: " << e.what() << '\n';
    return kParseFailure;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kParseFailure;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const CompileError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const InferenceError& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return stage == Stage::Load ? kConfigFailure : kRuntimeFailure;
  }
  return kOk;
}

}  // namespace bugsmc::cli
