#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bugsmc/pmcmc.hpp"
#include "bugsmc/smc.hpp"

namespace bugsmc {

/// Marginal summary of one scalar element under one flavor
/// ("filtering", "smoothing" or "mcmc").
struct Summary {
  std::string label;
  std::string flavor;
  double mean = 0.0;
  double variance = 0.0;
  std::vector<double> probs;
  std::vector<double> quantiles;
  std::optional<double> mode;  // discrete variables only
};

/// Empty `weights` means uniform. Weights are normalized if they do not
/// already sum to one. Quantiles invert the weighted CDF from the left:
/// q(p) = min { v : F(v) >= p }.
Summary summarize(std::span<const double> values, std::span<const double> weights,
                  std::span<const double> probs, bool discrete = false);

/// Weighted quantiles only.
std::vector<double> weighted_quantiles(std::span<const double> values,
                                       std::span<const double> weights,
                                       std::span<const double> probs);

/// Both flavors of every monitored element, in element order.
std::vector<Summary> summarize(const SmcOutput& output, std::span<const double> probs);
/// Columns of an MCMC trace, uniformly weighted. Labels in `discrete` get a mode.
std::vector<Summary> summarize(const Trace& trace, std::span<const double> probs,
                               const std::vector<std::string>& discrete = {});

struct DensityEstimate {
  std::string label;
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
};

/// Gaussian-kernel weighted KDE. Default bandwidth: 0.9 min(sd, IQR/1.34) n_eff^-1/5
/// with n_eff = 1 / sum W^2; the grid spans the data +- 3 bandwidths.
/// Throws ConfigError when all values coincide.
DensityEstimate density(std::span<const double> values, std::span<const double> weights,
                        std::optional<double> bandwidth = std::nullopt,
                        std::size_t grid_size = 512);

struct MassTable {
  std::string label;
  std::vector<double> support;
  std::vector<double> probs;
};

/// Aggregated weight per distinct value, support ascending.
MassTable table(std::span<const double> values, std::span<const double> weights);

std::string to_csv(const std::vector<Summary>& summaries);
std::string to_json(const std::vector<Summary>& summaries);
std::string to_csv(const std::vector<DensityEstimate>& densities);
std::string to_json(const std::vector<DensityEstimate>& densities);
std::string to_csv(const std::vector<MassTable>& tables);
std::string to_json(const std::vector<MassTable>& tables);

}  // namespace bugsmc
