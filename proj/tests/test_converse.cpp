#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dtpc/capacity.hpp"
#include "dtpc/converse.hpp"
#include "dtpc/info_math.hpp"
#include "oracles.hpp"

using namespace dtpc;

namespace {

// independent re-derivation of the variance proxy, plain arithmetic
double gamma_reference(double lambda, double p_max) {
  const double log2e = 1.0 / std::log(2.0);
  const double lp = lambda + p_max;
  const double alpha = std::log(1.0 + p_max / lambda) / std::log(2.0);
  const double beta = p_max;
  return log2e * (log2e * lp * lp / lambda + p_max + 1.0) + alpha * alpha * lp * lp +
         2.0 * alpha * beta * lp + beta * beta;
}

}  // namespace

TEST_CASE("gamma bound closed form") {
  GammaBound g = gamma_bound(1.0, 1.0);
  CHECK(g.alpha == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g.beta == 1.0);
  CHECK(std::fabs(g.gamma - 20.210866) <= 1e-3);
  CHECK(g.gamma == doctest::Approx(gamma_reference(1.0, 1.0)).epsilon(1e-12));

  CHECK_THROWS_AS(gamma_bound(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(gamma_bound(1.0, 0.0), std::invalid_argument);

  // increasing in the peak at fixed dark current
  double prev = 0.0;
  for (double p : {1.0, 2.0, 5.0}) {
    const double val = gamma_bound(1.0, p).gamma;
    CHECK(val > prev);
    CHECK(val == doctest::Approx(gamma_reference(1.0, p)).epsilon(1e-12));
    prev = val;
  }

  // large dark current: the log2(e)^2 (lambda+p)^2/lambda term dominates and
  // the growth turns linear in lambda; one decade lower the small terms still
  // bite (gamma(100,1)/gamma(10,1) evaluates to ~6.43)
  CHECK(gamma_bound(100.0, 1.0).gamma / gamma_bound(10.0, 1.0).gamma ==
        doctest::Approx(6.4324).epsilon(1e-3));
  const double decade = gamma_bound(1000.0, 1.0).gamma / gamma_bound(100.0, 1.0).gamma;
  CHECK(std::fabs(decade - 10.0) <= 2.5);
}

TEST_CASE("info density: flat channel, expectation, length checks") {
  PoissonChannel ch = PoissonChannel::truncated(1.0, 5.0);
  // single-point input: the output law equals the row, density is zero
  Eigen::VectorXd x(1), p(1);
  x << 2.0;
  p << 1.0;
  DiscreteInputDistribution solo{x, p};
  OutputDistribution q = output_distribution(solo, ch);
  std::vector<double> xs{2.0, 2.0, 2.0};
  std::vector<long> ys{0, 3, 7};
  CHECK(info_density_bits(xs, ys, q, ch) == doctest::Approx(0.0).epsilon(1e-12));

  // n = 1: averaging over the channel row recovers the divergence
  Eigen::VectorXd x2(2), p2(2);
  x2 << 0.0, 5.0;
  p2 << 0.5, 0.5;
  DiscreteInputDistribution duo{x2, p2};
  OutputDistribution mix = output_distribution(duo, ch);
  double avg = 0.0;
  Eigen::ArrayXd row = ch.row(5.0);
  for (long yy = 0; yy <= ch.y_max; ++yy) {
    std::vector<double> one_x{5.0};
    std::vector<long> one_y{yy};
    avg += row[yy] * info_density_bits(one_x, one_y, mix, ch);
  }
  const double d_ref = oracle::kl_to_mixture_bits(5.0, {0.0, 5.0}, {0.5, 0.5}, 1.0, ch.y_max);
  CHECK(avg == doctest::Approx(d_ref).epsilon(1e-9));

  std::vector<long> bad{1};
  CHECK_THROWS_AS(info_density_bits(xs, bad, q, ch), std::invalid_argument);
  OutputDistribution holey{Eigen::ArrayXd::Zero(ch.y_max + 1)};
  CHECK_THROWS_AS(info_density_bits(xs, ys, holey, ch), std::runtime_error);
}

TEST_CASE("sampled info density concentrates on the capacity") {
  PoissonChannel ch = PoissonChannel::truncated(1.0, 5.0);
  PowerConstraint pc(5.0, 5.0);
  CapacityResult cap = capacity(ch, pc);
  InfoDensitySample s = sample_info_density(ch, cap.distribution, pc, 64, 100000, 99);
  // block mean of per-letter densities is the capacity in expectation
  const double se = std::sqrt(s.variance() / 100000.0);
  CHECK(std::fabs(s.mean() - cap.capacity_bits) <= 3.0 * se);
  // per-letter variance stays under the closed-form proxy
  CHECK(s.variance() * 64.0 <= gamma_bound(1.0, 5.0).gamma);
}

TEST_CASE("sampling is deterministic and thread-count invariant") {
  PoissonChannel ch = PoissonChannel::truncated(2.0, 1.0);
  PowerConstraint pc(1.0, 1.0);
  CapacityResult cap = capacity(ch, pc);
  InfoDensitySample a = sample_info_density(ch, cap.distribution, pc, 16, 4000, 7, 1);
  InfoDensitySample b = sample_info_density(ch, cap.distribution, pc, 16, 4000, 7, 2);
  REQUIRE(a.values.size() == b.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(a.values[i] == b.values[i]);
}

TEST_CASE("block rejection biases the density mean downward, never up") {
  PoissonChannel ch = PoissonChannel::truncated(1.0, 5.0);
  PowerConstraint pc(5.0, 1.0);
  CapacityResult cap = capacity(ch, pc);
  // rejecting blocks above the mean budget keeps only below-average inputs,
  // so the conditional density mean sits at C + mu (E[mean|accepted] - p_avg),
  // which is at most C
  InfoDensitySample s = sample_info_density(ch, cap.distribution, pc, 32, 20000, 11);
  const double se = std::sqrt(s.variance() / 20000.0);
  CHECK(s.mean() <= cap.capacity_bits + 4.0 * se);
  CHECK(s.mean() >= cap.capacity_bits - cap.mu_bits * pc.p_avg - 4.0 * se);
}

TEST_CASE("per-letter divergences never exceed the capacity at peak-only optimum") {
  PoissonChannel ch = PoissonChannel::truncated(2.0, 1.0);
  PowerConstraint pc(1.0, 1.0);
  CapacityResult cap = capacity(ch, pc);
  REQUIRE(cap.certified);
  std::vector<double> xs(cap.distribution.x.data(),
                         cap.distribution.x.data() + cap.distribution.size());
  std::vector<double> ps(cap.distribution.p.data(),
                         cap.distribution.p.data() + cap.distribution.size());
  for (int i = 0; i < 100; ++i) {
    const double x = 1.0 * i / 99.0;
    CHECK(oracle::kl_to_mixture_bits(x, xs, ps, 2.0, ch.y_max) <=
          cap.capacity_bits + 1e-4);
  }
}

TEST_CASE("chebyshev table: bounds hold and tails fall") {
  PoissonChannel ch = PoissonChannel::truncated(2.0, 1.0);
  PowerConstraint pc(1.0, 1.0);
  CapacityResult cap = capacity(ch, pc);
  auto rows = converse_experiment(ch, pc, {10, 100, 500}, 0.1, 20000, 12345, &cap);
  REQUIRE(rows.size() == 3);
  double prev = 1.0;
  for (const auto& row : rows) {
    CHECK(row.empirical_tail <= row.chebyshev_bound);
    CHECK(row.chebyshev_bound == doctest::Approx(gamma_reference(2.0, 1.0) / row.n).epsilon(1e-12));
    CHECK(row.empirical_tail <= prev);
    prev = row.empirical_tail;
  }
  CHECK(rows[0].empirical_tail > rows[2].empirical_tail);  // strictly falling overall

  // unreachable threshold: empty tail
  auto far = converse_experiment(ch, pc, {10}, 10.0 * cap.capacity_bits + 1.0, 2000, 5, &cap);
  CHECK(far[0].empirical_tail == 0.0);

  CHECK_THROWS_AS(converse_experiment(ch, pc, {10}, -0.1, 100, 5, &cap), std::invalid_argument);
  CHECK_THROWS_AS(converse_experiment(ch, pc, {}, 0.1, 100, 5, &cap), std::invalid_argument);
}

TEST_CASE("upper quantile of the block density stays near the capacity") {
  PoissonChannel ch = PoissonChannel::truncated(2.0, 1.0);
  PowerConstraint pc(1.0, 1.0);
  CapacityResult cap = capacity(ch, pc);
  InfoDensitySample s = sample_info_density(ch, cap.distribution, pc, 1000, 30000, 2025);
  CHECK(s.quantile(0.999) <= cap.capacity_bits + 0.05);
}
