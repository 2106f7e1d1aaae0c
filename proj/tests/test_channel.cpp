#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dtpc/channel.hpp"
#include "dtpc/info_math.hpp"
#include "oracles.hpp"

using namespace dtpc;

TEST_CASE("pmf closed-form values") {
  PoissonChannel ch = PoissonChannel::truncated(1.0, 5.0);
  CHECK(ch.pmf(0.0, 0) == doctest::Approx(0.36787944117144233).epsilon(1e-12));
  CHECK(ch.pmf(1.0, 2) == doctest::Approx(0.27067056647322540).epsilon(1e-12));
  // independent evaluation by summing log terms
  CHECK(ch.pmf(1.0, 2) == doctest::Approx(oracle::pmf(2.0, 2)).epsilon(1e-13));

  PoissonChannel zero = PoissonChannel::truncated(0.0, 0.0);
  CHECK(zero.pmf(0.0, 0) == 1.0);
  CHECK(zero.y_max == 0);
  CHECK(zero.log_pmf(0.0, 3) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("pmf input validation") {
  PoissonChannel ch = PoissonChannel::truncated(1.0, 5.0);
  CHECK_THROWS_AS(ch.pmf(-0.5, 0), std::invalid_argument);
  CHECK_THROWS_AS(ch.pmf(1.0, ch.y_max + 1), std::out_of_range);
  CHECK_THROWS_AS(PoissonChannel::truncated(-1.0, 5.0), std::invalid_argument);
}

TEST_CASE("truncation certificate holds on a 1000-point input grid") {
  for (double p_max : {5.0, 50.0}) {
    PoissonChannel ch = PoissonChannel::truncated(1.0, p_max);
    for (int i = 0; i < 1000; ++i) {
      const double x = p_max * i / 999.0;
      CHECK(std::fabs(ch.row(x).sum() - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("sample moments match the Poisson law") {
  PoissonChannel ch = PoissonChannel::truncated(1.0, 5.0);
  RngStream rng(12345);
  const long n = 1'000'000;
  double sum = 0.0, sumsq = 0.0;
  for (long i = 0; i < n; ++i) {
    const double v = double(ch.sample(2.0, rng));
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(mean == doctest::Approx(3.0).epsilon(0.01 / 3.0));
  CHECK(var == doctest::Approx(3.0).epsilon(0.02 / 3.0));
  // 5 sigma of the CLT prediction
  CHECK(std::fabs(mean - 3.0) <= 5.0 * std::sqrt(3.0 / n));
}

TEST_CASE("sampler is deterministic given seed and draw index") {
  PoissonChannel ch = PoissonChannel::truncated(1.0, 5.0);
  RngStream a(99, 7), b(99, 7);
  for (int i = 0; i < 100; ++i) CHECK(ch.sample(3.3, a) == ch.sample(3.3, b));
  RngStream c(99, 8);
  bool any_diff = false;
  RngStream a2(99, 7);
  for (int i = 0; i < 100; ++i) any_diff |= (ch.sample(3.3, a2) != ch.sample(3.3, c));
  CHECK(any_diff);
}

static void gof_check(double mean, long draws, std::uint64_t seed) {
  PoissonChannel ch = PoissonChannel::truncated(mean, std::max(1.0, 2 * mean));
  RngStream rng(seed);
  const long cap = std::min<long>(ch.y_max, static_cast<long>(mean + 8 * std::sqrt(mean + 1) + 10));
  std::vector<long> counts(cap + 2, 0);
  for (long i = 0; i < draws; ++i) {
    long y = poisson_sample(mean, rng);
    if (y > cap) y = cap + 1;
    ++counts[y];
  }
  // per-bin 3-sigma multinomial bands for bins with enough expected mass
  for (long y = 0; y <= cap; ++y) {
    const double p = oracle::pmf(mean, y);
    if (p * draws < 20.0) continue;
    const double emp = double(counts[y]) / draws;
    const double sigma = std::sqrt(p * (1.0 - p) / draws);
    CHECK(std::fabs(emp - p) <= 3.0 * sigma);
  }
}

TEST_CASE("sampler matches pmf, inversion regime") { gof_check(1.0, 1'000'000, 770); }
TEST_CASE("sampler matches pmf, rejection regime") { gof_check(45.0, 400'000, 771); }

TEST_CASE("kl_poisson closed form and series oracle") {
  CHECK(kl_poisson_bits(1.0, 1.0) == 0.0);
  CHECK(kl_poisson_bits(2.0, 1.0) == doctest::Approx(0.55730495911103659).epsilon(1e-12));
  CHECK(kl_poisson_bits(1.0, 2.0) == doctest::Approx(0.44269504088896341).epsilon(1e-12));
  CHECK(kl_poisson_bits(2.0, 1.0) == doctest::Approx(oracle::kl_poisson_bits(2.0, 1.0)).epsilon(1e-10));
  CHECK(kl_poisson_bits(1.0, 2.0) == doctest::Approx(oracle::kl_poisson_bits(1.0, 2.0)).epsilon(1e-10));
  CHECK_THROWS_AS(kl_poisson_bits(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(kl_poisson_bits(1.0, -2.0), std::invalid_argument);
}

TEST_CASE("kl dominates the Pinsker lower bound on random mean pairs") {
  std::uint64_t state = 4242;
  for (int i = 0; i < 100; ++i) {
    const double a = 20.0 * std::max(oracle::unit(state), 1e-3);
    const double b = 20.0 * std::max(oracle::unit(state), 1e-3);
    const double tv = oracle::tv_poisson(a, b);
    CHECK(kl_poisson_bits(a, b) >= 2.0 * tv * tv * kLog2e - 1e-12);
  }
}

TEST_CASE("total variation on rows") {
  PoissonChannel ch = PoissonChannel::truncated(0.0, 4.0);
  Eigen::ArrayXd p = ch.row(1.0);
  CHECK(total_variation(p, p) == 0.0);

  Eigen::ArrayXd a = Eigen::ArrayXd::Zero(3), b = Eigen::ArrayXd::Zero(3);
  a[0] = 1.0;
  b[1] = 1.0;
  CHECK(total_variation(a, b) == 1.0);
  CHECK_THROWS_AS(total_variation(a, Eigen::ArrayXd::Zero(4)), std::invalid_argument);

  const double tv = total_variation(ch.row(1.0), ch.row(2.0));
  CHECK(tv == doctest::Approx(oracle::tv_poisson(1.0, 2.0)).epsilon(1e-10));
}

TEST_CASE("averaged channel") {
  PoissonChannel one = PoissonChannel::truncated(1.0, 5.0);
  StateChannel same({{0.5, one}, {0.5, one}});
  GenericDmc dmc = averaged_channel(same, {0.0, 1.0, 5.0});
  for (int i = 0; i < 3; ++i) {
    Eigen::ArrayXd direct = one.row(dmc.inputs[i]);
    CHECK((dmc.rows.row(i).transpose().array() - direct).abs().maxCoeff() == 0.0);
  }

  // single state is bit-identical to the underlying rows
  StateChannel single({{1.0, one}});
  GenericDmc dmc1 = averaged_channel(single, {0.0, 2.5});
  CHECK((dmc1.rows.row(1).transpose().array() - one.row(2.5)).abs().maxCoeff() == 0.0);

  // hand-evaluated two-term mixture at x = 0
  PoissonChannel c0 = PoissonChannel::truncated(0.0, 5.0);
  PoissonChannel c2 = PoissonChannel::truncated(2.0, 5.0);
  StateChannel mix({{0.5, c0}, {0.5, c2}});
  CHECK(mix.row(0.0)[0] == doctest::Approx(0.56766764161830635).epsilon(1e-12));

  CHECK_THROWS_AS(StateChannel({{0.5, one}, {0.4, one}}), std::invalid_argument);
  CHECK_THROWS_AS(averaged_channel(mix, {}), std::invalid_argument);
}

TEST_CASE("generic dmc validation") {
  Eigen::VectorXd inputs(2);
  inputs << 0.0, 1.0;
  Eigen::MatrixXd rows(2, 2);
  rows << 0.5, 0.5, 0.7, 0.4;
  CHECK_THROWS_AS(GenericDmc(inputs, rows), std::invalid_argument);
  rows << 0.5, 0.5, 0.6, 0.4;
  CHECK_NOTHROW(GenericDmc(inputs, rows));
  Eigen::VectorXd bad(2);
  bad << 1.0, 0.0;
  CHECK_THROWS_AS(GenericDmc(bad, rows), std::invalid_argument);
}

TEST_CASE("optional multiplicative gain scales the input intensity") {
  PoissonChannel plain = PoissonChannel::truncated(1.0, 10.0);
  PoissonChannel amplified = PoissonChannel::truncated(1.0, 5.0, 1e-12, 2.0);
  CHECK(amplified.mean(3.0) == 7.0);
  // same law as an ungained channel driven at twice the input
  CHECK(amplified.pmf(2.0, 3) == doctest::Approx(plain.pmf(4.0, 3)).epsilon(1e-15));
  CHECK(amplified.truncation_tail(5.0) <= 1e-12);
  CHECK_THROWS_AS(PoissonChannel::truncated(1.0, 5.0, 1e-12, 0.0), std::invalid_argument);

  // degradedness compares like with like
  WiretapPair mixed{amplified, PoissonChannel::truncated(2.0, 5.0)};
  CHECK_FALSE(mixed.degraded());
}

TEST_CASE("wilson interval contains the point estimate") {
  auto ci = wilson_interval(3, 100);
  CHECK(ci.lower <= 0.03);
  CHECK(ci.upper >= 0.03);
  CHECK(ci.upper < 0.1);
}

TEST_CASE("pinsker bound values") {
  CHECK(pinsker_tv_bound(0.0) == 0.0);
  CHECK(pinsker_tv_bound(2.0) == 1.0);
  CHECK(pinsker_tv_bound(0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(pinsker_tv_bound(-0.1), std::invalid_argument);
}
