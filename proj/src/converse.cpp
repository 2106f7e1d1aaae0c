#include "dtpc/converse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dtpc/info_math.hpp"
#include "dtpc/parallel.hpp"
#include "dtpc/rng.hpp"

namespace dtpc {

GammaBound gamma_bound(double lambda, double p_max) {
  if (lambda <= 0.0) throw std::invalid_argument("gamma_bound: lambda must be positive");
  if (p_max <= 0.0) throw std::invalid_argument("gamma_bound: p_max must be positive");
  GammaBound g;
  g.lambda = lambda;
  g.p_max = p_max;
  g.alpha = std::log2(1.0 + p_max / lambda);
  g.beta = p_max;
  const double lp = lambda + p_max;
  g.gamma = kLog2e * (kLog2e * lp * lp / lambda + p_max + 1.0) + g.alpha * g.alpha * lp * lp +
            2.0 * g.alpha * g.beta * lp + g.beta * g.beta;
  return g;
}

double info_density_bits(std::span<const double> x, std::span<const long> y,
                         const OutputDistribution& out, const PoissonChannel& ch) {
  if (x.size() != y.size() || x.empty())
    throw std::invalid_argument("info_density_bits: length mismatch");
  double acc = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (y[t] > ch.y_max || out.pmf[y[t]] <= 0.0)
      throw std::runtime_error("info_density_bits: zero output mass, truncation too tight");
    acc += ch.log_pmf(x[t], y[t]) - std::log(out.pmf[y[t]]);
  }
  return bits_from_nats(acc) / double(x.size());
}

double InfoDensitySample::mean() const {
  double acc = 0.0;
  for (double v : values) acc += v;
  return values.empty() ? 0.0 : acc / double(values.size());
}

double InfoDensitySample::variance() const {
  if (values.size() < 2) return 0.0;
  const double m = mean();
  double acc = 0.0;
  for (double v : values) acc += (v - m) * (v - m);
  return acc / double(values.size() - 1);
}

double InfoDensitySample::quantile(double q) const {
  if (values.empty()) throw std::logic_error("InfoDensitySample::quantile: empty sample");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * double(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - double(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

double InfoDensitySample::tail_fraction(double threshold) const {
  long count = 0;
  for (double v : values)
    if (v >= threshold) ++count;
  return values.empty() ? 0.0 : double(count) / double(values.size());
}

InfoDensitySample sample_info_density(const PoissonChannel& ch,
                                      const DiscreteInputDistribution& dist,
                                      const PowerConstraint& pc, int n, long samples,
                                      std::uint64_t seed, int threads) {
  if (n < 1 || samples < 1) throw std::invalid_argument("sample_info_density: bad shape");
  const int k = dist.size();
  Eigen::ArrayXd q = output_distribution(dist, ch).pmf;

  // per-support-point tables of log2 W(y|x_j) - log2 q(y)
  Eigen::MatrixXd table(k, ch.y_max + 1);
  for (int j = 0; j < k; ++j)
    for (long y = 0; y <= ch.y_max; ++y)
      table(j, y) = (ch.log_pmf(dist.x[j], y) - std::log(q[y])) * kLog2e;

  // exact mixture extension for the rare draw beyond the table
  auto extended = [&](int j, long y) {
    double best = -std::numeric_limits<double>::infinity();
    Eigen::ArrayXd terms(k);
    for (int jj = 0; jj < k; ++jj) {
      terms[jj] = std::log(dist.p[jj]) + ch.log_pmf(dist.x[jj], y);
      best = std::max(best, terms[jj]);
    }
    const double logq = best + std::log((terms - best).exp().sum());
    return (ch.log_pmf(dist.x[j], y) - logq) * kLog2e;
  };

  Eigen::VectorXd cdf(k);
  double acc = 0.0;
  for (int j = 0; j < k; ++j) {
    acc += dist.p[j];
    cdf[j] = acc;
  }
  const bool enforce_mean = pc.average_can_bind();
  const double budget = double(n) * pc.effective_avg();

  InfoDensitySample out;
  out.n = n;
  out.values.assign(static_cast<std::size_t>(samples), 0.0);
  parallel_chunks(samples, threads, [&](int, long lo, long hi) {
    std::vector<int> picks(static_cast<std::size_t>(n));
    for (long s = lo; s < hi; ++s) {
      RngStream rng(seed, static_cast<std::uint64_t>(s));
      // rejection keeps the block inside the admissible input set
      for (;;) {
        double total = 0.0;
        for (int t = 0; t < n; ++t) {
          const double u = rng.next_unit();
          int j = 0;
          while (j + 1 < k && u > cdf[j]) ++j;
          picks[static_cast<std::size_t>(t)] = j;
          total += dist.x[j];
        }
        if (!enforce_mean || total <= budget + 1e-12) break;
      }
      double sum_bits = 0.0;
      for (int t = 0; t < n; ++t) {
        const int j = picks[static_cast<std::size_t>(t)];
        const long y = ch.sample(dist.x[j], rng);
        sum_bits += y <= ch.y_max ? table(j, y) : extended(j, y);
      }
      out.values[static_cast<std::size_t>(s)] = sum_bits / double(n);
    }
  });
  return out;
}

std::vector<ConverseRow> converse_experiment(const PoissonChannel& ch, const PowerConstraint& pc,
                                             const std::vector<int>& n_list, double nu,
                                             long samples, std::uint64_t seed,
                                             const CapacityResult* solved, int threads) {
  if (nu <= 0.0) throw std::invalid_argument("converse_experiment: nu must be positive");
  if (n_list.empty()) throw std::invalid_argument("converse_experiment: empty n list");

  CapacityResult local = solved ? *solved : capacity(ch, pc);
  const double threshold = local.capacity_bits + nu;
  const GammaBound g = gamma_bound(ch.dark_current, pc.p_max);

  std::vector<ConverseRow> rows;
  rows.reserve(n_list.size());
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    const int n = n_list[i];
    InfoDensitySample sample = sample_info_density(ch, local.distribution, pc, n, samples,
                                                   seed + 1000003ULL * i, threads);
    ConverseRow row;
    row.n = n;
    row.nu = nu;
    row.empirical_tail = sample.tail_fraction(threshold);
    row.chebyshev_bound = g.gamma / double(n);
    row.samples = samples;
    row.seed = seed + 1000003ULL * i;
    if (row.empirical_tail > row.chebyshev_bound)
      throw std::logic_error("converse_experiment: empirical tail exceeded the Chebyshev bound");
    rows.push_back(row);
  }
  return rows;
}

}  // namespace dtpc
