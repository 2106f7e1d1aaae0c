#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dtpc/capacity.hpp"
#include "dtpc/channel.hpp"
#include "dtpc/input_dist.hpp"

namespace dtpc {

// Closed-form variance proxy for the per-letter information density, base 2:
//   alpha = log2(1 + p_max/lambda), beta = p_max,
//   gamma = log2(e) (log2(e) (lambda+p_max)^2/lambda + p_max + 1)
//         + alpha^2 (lambda+p_max)^2 + 2 alpha beta (lambda+p_max) + beta^2.
struct GammaBound {
  double lambda = 0.0;
  double p_max = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

GammaBound gamma_bound(double lambda, double p_max);

// (1/n) sum_t log2 W(y_t|x_t) / P_Y(y_t); every y_t must carry output mass.
double info_density_bits(std::span<const double> x, std::span<const long> y,
                         const OutputDistribution& out, const PoissonChannel& ch);

struct InfoDensitySample {
  int n = 0;
  std::vector<double> values;  // bits

  double mean() const;
  double variance() const;
  double quantile(double q) const;  // empirical, by sorting a copy
  double tail_fraction(double threshold) const;
};

// Draws blocks i.i.d. from `dist` (rejecting blocks that violate the mean
// power constraint) and returns the normalized information densities against
// the induced output law.
InfoDensitySample sample_info_density(const PoissonChannel& ch,
                                      const DiscreteInputDistribution& dist,
                                      const PowerConstraint& pc, int n, long samples,
                                      std::uint64_t seed, int threads = 1);

struct ConverseRow {
  int n = 0;
  double nu = 0.0;
  double empirical_tail = 0.0;
  double chebyshev_bound = 0.0;  // gamma / n
  long samples = 0;
  std::uint64_t seed = 0;
};

// For each n: empirical Pr{ info density >= C + nu } and the bound gamma/n.
// Throws if any empirical tail exceeds its bound.
std::vector<ConverseRow> converse_experiment(const PoissonChannel& ch, const PowerConstraint& pc,
                                             const std::vector<int>& n_list, double nu,
                                             long samples, std::uint64_t seed,
                                             const CapacityResult* solved = nullptr,
                                             int threads = 1);

}  // namespace dtpc
