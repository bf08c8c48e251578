#include "bugsmc/lotka_volterra.hpp"

#include <cmath>

namespace bugsmc {

std::array<double, 2> gillespie_lv(std::array<double, 2> x, double c1, double c2, double c3,
                                   double dt, Rng& rng) {
  static constexpr int kChange[3][2] = {{1, 0}, {-1, 1}, {0, -1}};
  double t = 0.0;
  while (true) {
    const double rate[3] = {c1 * x[0], c2 * x[0] * x[1], c3 * x[1]};
    const double sum_rate = rate[0] + rate[1] + rate[2];
    if (!(sum_rate > 0.0)) return x;  // absorbing
    t -= std::log(uniform_open(rng)) / sum_rate;
    const double u = sum_rate * uniform01(rng);
    int ind = 2;
    double cum = 0.0;
    for (int k = 0; k < 3; ++k) {
      cum += rate[k];
      if (u <= cum) {
        ind = k;
        break;
      }
    }
    if (t > dt) break;
    x[0] += kChange[ind][0];
    x[1] += kChange[ind][1];
  }
  return x;
}

void register_lotka_volterra(Registry& registry) {
  auto dim = [](std::span<const Dims> a) {
    if (element_count(a[0]) != 2)
      throw CompileError("LV: state argument must have 2 elements, got dims " + to_string(a[0]));
    for (std::size_t i = 1; i < a.size(); ++i)
      if (!is_scalar(a[i]))
        throw CompileError("LV: argument " + std::to_string(i + 1) + " must be scalar");
    return Dims{2};
  };
  auto sampler = [](Args a, Rng& rng, std::span<double> out) {
    const double c1 = a[1][0], c2 = a[2][0], c3 = a[3][0], dt = a[4][0];
    if (c1 < 0 || c2 < 0 || c3 < 0 || !(dt > 0))
      throw ParamError("LV: rates must be >= 0 and dt > 0");
    const auto x = gillespie_lv({a[0][0], a[0][1]}, c1, c2, c3, dt, rng);
    out[0] = x[0];
    out[1] = x[1];
  };
  registry.register_distribution("LV", 5, dim, sampler);
}

}  // namespace bugsmc
