#pragma once

#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bugsmc/common.hpp"
#include "bugsmc/rng.hpp"

namespace bugsmc {

/// Argument list handed to functions and distributions: one flattened
/// (row-major) value per parameter.
using Args = std::span<const std::span<const double>>;

using DimFn = std::function<Dims(std::span<const Dims>)>;

struct Function {
  std::string name;
  std::size_t arity = 0;
  DimFn dim;  // throws CompileError on incompatible argument dims
  std::function<void(Args, std::span<double>)> eval;
};

/// Closed support interval of a scalar distribution.
struct Interval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

struct Distribution {
  std::string name;
  std::size_t arity = 0;
  bool discrete = false;
  DimFn dim;
  std::function<void(Args, Rng&, std::span<double>)> sample;
  /// Optional. Without it the distribution may only be attached to
  /// unobserved nodes sampled from their prior.
  std::function<double(std::span<const double>, Args)> log_density;
  /// Optional; scalar distributions only. Needed for truncation and for
  /// choosing parameter transforms.
  std::function<Interval(Args)> support;
  std::function<double(double, Args)> cdf;
  std::function<double(double, Args)> quantile;

  bool has_density() const { return static_cast<bool>(log_density); }
  bool can_truncate() const { return static_cast<bool>(cdf) && static_cast<bool>(support); }
};

/// Truncation bounds T(lower, upper); either side may be infinite.
struct Bounds {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

/// Name -> distribution and name -> deterministic function tables.
class Registry {
 public:
  /// An empty registry (no built-ins).
  Registry() = default;

  /// Registry holding every built-in distribution, function and operator.
  static Registry with_builtins();

  void add_function(Function fn);
  void add_distribution(Distribution dist);

  /// Registers a deterministic function usable on the right of `<-`.
  void register_function(std::string name, std::size_t n_inputs,
                         std::function<void(Args, std::span<double>)> eval, DimFn dim);

  /// Registers a sampler usable on the right of `~`. `log_density` may be
  /// empty for samplers without a tractable density.
  void register_distribution(std::string name, std::size_t n_inputs, DimFn dim,
                             std::function<void(Args, Rng&, std::span<double>)> sample,
                             std::function<double(std::span<const double>, Args)> log_density = {});

  const Function* find_function(std::string_view name) const;
  const Distribution* find_distribution(std::string_view name) const;
  std::shared_ptr<const Function> function_ptr(std::string_view name) const;
  std::shared_ptr<const Distribution> distribution_ptr(std::string_view name) const;

  std::vector<std::string> function_names() const;
  std::vector<std::string> distribution_names() const;

 private:
  bool taken(const std::string& name) const;

  std::map<std::string, std::shared_ptr<const Function>, std::less<>> functions_;
  std::map<std::string, std::shared_ptr<const Distribution>, std::less<>> distributions_;
};

/// Names under which the built-in operators are registered.
namespace op {
inline constexpr std::string_view kNegate = "neg";
}

// Density and sampling with optional truncation.

/// Natural log density/mass at `x`; -inf outside the (truncated) support.
/// A truncated density is renormalized by the interval mass.
double log_density(const Distribution& dist, std::span<const double> x, Args params,
                   const std::optional<Bounds>& bounds = std::nullopt);

/// Draw into `out`, honoring truncation bounds.
void sample(const Distribution& dist, Args params, const std::optional<Bounds>& bounds, Rng& rng,
            std::span<double> out);

/// log P(lower <= X <= upper) under the untruncated distribution.
double log_truncation_mass(const Distribution& dist, Args params, const Bounds& bounds);

/// Support of a scalar distribution intersected with the bounds.
Interval effective_support(const Distribution& dist, Args params,
                           const std::optional<Bounds>& bounds);

/// Convenience wrappers taking owned parameter vectors (tests, CLI).
double log_density(const Registry& reg, std::string_view dist, const std::vector<double>& x,
                   const std::vector<std::vector<double>>& params,
                   const std::optional<Bounds>& bounds = std::nullopt);
std::vector<double> sample(const Registry& reg, std::string_view dist,
                           const std::vector<std::vector<double>>& params,
                           const std::optional<Bounds>& bounds, Rng& rng);

}  // namespace bugsmc
