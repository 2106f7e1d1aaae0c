#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dtpc/info_math.hpp"
#include "dtpc/secrecy.hpp"
#include "oracles.hpp"

using namespace dtpc;

namespace {

MessageInputLaw point_law(std::vector<double> letters) {
  MessageInputLaw law;
  law.sequences.resize(1, static_cast<Eigen::Index>(letters.size()));
  for (std::size_t t = 0; t < letters.size(); ++t)
    law.sequences(0, static_cast<Eigen::Index>(t)) = letters[t];
  law.probs.resize(1);
  law.probs << 1.0;
  return law;
}

IdCodeSpec eve_rig(double letter_high, int n, std::uint64_t q, int bins, std::uint64_t seed) {
  PoissonChannel main = PoissonChannel::truncated(1.0, 30.0);
  PowerConstraint pc(30.0, 30.0);
  Eigen::VectorXd lx(2), lp(2);
  lx << 0.0, letter_high;
  lp << 0.5, 0.5;
  DiscreteInputDistribution letters(lx, lp);
  return build_id_code(main, pc, n, q, 1, seed, letters, 1.0, bins, 0.45, 0.45, 0.8,
                       /*check_rates=*/false);
}

}  // namespace

TEST_CASE("message input law validation") {
  MessageInputLaw law = point_law({1.0, 2.0});
  CHECK_NOTHROW(law.validate());
  law.probs[0] = 0.9;
  CHECK_THROWS_AS(law.validate(), std::invalid_argument);
  law.probs[0] = 1.0;
  law.sequences(0, 0) = -1.0;
  CHECK_THROWS_AS(law.validate(), std::invalid_argument);
}

TEST_CASE("exact output measure is a pmf up to truncation") {
  PoissonChannel eve = PoissonChannel::truncated(2.0, 10.0);
  MessageInputLaw law = point_law({0.0, 10.0});
  EveOutputMeasure m = exact_output_measure(law, eve);
  CHECK(m.pmf.size() == long(eve.y_max + 1) * (eve.y_max + 1));
  CHECK(std::fabs(m.pmf.sum() - 1.0) <= 1e-10);

  MessageInputLaw big = point_law(std::vector<double>(6, 1.0));
  CHECK_THROWS_AS(exact_output_measure(big, eve), std::runtime_error);
}

TEST_CASE("exact leakage: degenerate and near-noiseless ensembles") {
  PoissonChannel eve = PoissonChannel::truncated(1.0, 10.0);
  // all messages share one law: nothing to learn
  std::vector<MessageInputLaw> same{point_law({3.0, 1.0}), point_law({3.0, 1.0})};
  CHECK(exact_leakage_bits(same, eve) == doctest::Approx(0.0).epsilon(1e-12));

  // two messages with far-apart signatures at tiny dark current: one full bit
  PoissonChannel quiet = PoissonChannel::truncated(1e-9, 50.0);
  std::vector<MessageInputLaw> loud{point_law({0.0}), point_law({50.0})};
  const double bit = exact_leakage_bits(loud, quiet);
  CHECK(bit > 0.999);
  CHECK(bit <= 1.0 + 1e-12);

  // n = 1, inputs {0} vs {1} at heavy eve noise: matches a direct summation
  PoissonChannel noisy = PoissonChannel::truncated(10.0, 5.0);
  std::vector<MessageInputLaw> pairlaws{point_law({0.0}), point_law({1.0})};
  const double lib = exact_leakage_bits(pairlaws, noisy);
  double direct = 0.0;
  for (long z = 0; z <= noisy.y_max; ++z) {
    const double a = oracle::pmf(10.0, z), b = oracle::pmf(11.0, z);
    const double mix = 0.5 * (a + b);
    if (a > 0) direct += 0.5 * a * std::log(a / mix);
    if (b > 0) direct += 0.5 * b * std::log(b / mix);
  }
  direct /= std::log(2.0);
  CHECK(lib == doctest::Approx(direct).epsilon(1e-10));
  CHECK(lib > 0.0);
  CHECK(lib < 0.05);
}

TEST_CASE("exact leakage never exceeds the chain-rule bound on random ensembles") {
  for (int k = 0; k < 50; ++k) {
    CAPTURE(k);
    RngStream pick(900 + static_cast<std::uint64_t>(k));
    const int messages = 2 + static_cast<int>(pick.next_below(7));
    const int n = 1 + static_cast<int>(pick.next_below(3));
    const double lambda_e = 2.0 + 18.0 * pick.next_unit();
    const double eps = 0.05 + 0.45 * pick.next_unit();
    PoissonChannel eve = PoissonChannel::truncated(lambda_e, eps * lambda_e);
    auto ens = random_ensemble(messages, n, 3, eps * lambda_e, 1000 + static_cast<std::uint64_t>(k));
    const double exact = exact_leakage_bits(ens, eve);
    double chain = 0.0;
    for (double b : per_letter_kl_bounds_bits(ens, lambda_e)) chain += b;
    CHECK(exact <= chain + 1e-9);
  }
}

TEST_CASE("degraded eavesdropper learns no more than the legitimate receiver") {
  for (int k = 0; k < 10; ++k) {
    CAPTURE(k);
    PoissonChannel main = PoissonChannel::truncated(1.0, 3.0);
    PoissonChannel eve = PoissonChannel::truncated(6.0, 3.0);
    auto ens = random_ensemble(4, 2, 3, 3.0, 4000 + static_cast<std::uint64_t>(k));
    CHECK(exact_leakage_bits(ens, eve) <= exact_leakage_bits(ens, main) + 1e-9);
  }
}

TEST_CASE("per-letter divergence bound") {
  CHECK(per_letter_kl_bound_bits(0.0, 0.0, 10.0) == 0.0);
  // X = 0.1 * lambda_e deterministically
  CHECK(per_letter_kl_bound_bits(1.0, 1.0, 10.0) == doctest::Approx(0.06557704731).epsilon(1e-9));
  CHECK_THROWS_AS(per_letter_kl_bound_bits(-1.0, 1.0, 10.0), std::invalid_argument);

  // peak c/n per letter: the block bound decays like 1/n
  const double c = 2.0, lambda_e = 10.0;
  double prev = 1e18;
  for (int n : {10, 100, 1000}) {
    const double x = c / n * lambda_e;
    const double total = n * per_letter_kl_bound_bits(x, x * x, lambda_e);
    CHECK(total < prev / 5.0);
    prev = total;
  }
}

TEST_CASE("pinsker bound against exact TV on random Poisson mixtures") {
  for (int k = 0; k < 100; ++k) {
    CAPTURE(k);
    RngStream rng(31337 + static_cast<std::uint64_t>(k));
    PoissonChannel ch = PoissonChannel::truncated(0.5 + 5.0 * rng.next_unit(), 10.0);
    auto mixture = [&] {
      Eigen::ArrayXd q = Eigen::ArrayXd::Zero(ch.y_max + 1);
      const int comps = 2 + static_cast<int>(rng.next_below(2));
      double total = 0.0;
      std::vector<double> w(static_cast<std::size_t>(comps));
      for (double& v : w) {
        v = rng.next_unit() + 1e-3;
        total += v;
      }
      for (int c = 0; c < comps; ++c)
        q += (w[static_cast<std::size_t>(c)] / total) * ch.row(10.0 * rng.next_unit());
      return q;
    };
    Eigen::ArrayXd p = mixture(), q = mixture();
    const double tv = total_variation(p, q);
    const double kl = kl_nats(p, q);
    CHECK(tv <= pinsker_tv_bound(kl) + 1e-12);
  }
}

TEST_CASE("optimal test error sum: degenerate extremes") {
  PoissonChannel eve = PoissonChannel::truncated(5.0, 10.0);
  MessageInputLaw a = point_law({2.0, 1.0});
  CHECK(eve_lrt_exact(a, a, eve).error_sum == doctest::Approx(1.0).epsilon(1e-12));

  // dark current zero: the all-zero input emits nothing while a strong input
  // almost surely emits something, so the supports barely overlap
  PoissonChannel quiet = PoissonChannel::truncated(0.0, 40.0);
  LrtResult lr = eve_lrt_exact(point_law({0.0, 0.0}), point_law({40.0, 40.0}), quiet);
  CHECK(lr.error_sum <= 1e-9);
}

TEST_CASE("mc likelihood-ratio test matches the exact error sum at m = 2") {
  PoissonChannel eve = PoissonChannel::truncated(10.0, 30.0);
  IdCodeSpec spec = eve_rig(2.0, 1, 3, 8, 5);
  MessageInputLaw li = message_input_law(spec, 0), lj = message_input_law(spec, 1);
  LrtResult ex = eve_lrt_exact(li, lj, eve);
  LrtResult mc = eve_lrt_mc(li, lj, eve, 4000, 3);
  CHECK(ex.exact);
  CHECK_FALSE(mc.exact);
  CHECK(std::fabs(mc.error_sum - ex.error_sum) <= 3.0 * mc.std_error + 1e-9);
  // the dispatcher picks the exact path at small blocklengths
  CHECK(eve_indistinguishability(spec, eve, 0, 1, 10, 1).exact);
  CHECK_THROWS_AS(eve_indistinguishability(spec, eve, 2, 2, 10, 1), std::invalid_argument);
}

TEST_CASE("binned tag code blinds a tenfold-noisier eavesdropper") {
  PoissonChannel eve = PoissonChannel::truncated(10.0, 30.0);  // 10x the main dark current
  IdCodeSpec spec = eve_rig(1.0, 16, 5, 32, 5);
  LrtResult mc = eve_indistinguishability(spec, eve, 0, 1, 3000, 77);
  CHECK_FALSE(mc.exact);
  CHECK(mc.error_sum >= 0.9);
}

TEST_CASE("quantized measure certificates") {
  PoissonChannel eve = PoissonChannel::truncated(3.0, 8.0);
  MessageInputLaw law;
  law.sequences.resize(5, 1);
  law.sequences << 0.0, 2.0, 4.0, 6.0, 8.0;
  law.probs = Eigen::VectorXd::Constant(5, 0.2);

  // lossless: the grid holds the exact support and z0 is the full cap
  QuantizedMeasure lossless = quantized_measure(law, eve, eve.y_max, {0.0, 2.0, 4.0, 6.0, 8.0});
  CHECK(lossless.delta_prime <= 1e-12);

  // coarse two-point grid: certificate equals an independently summed TV
  QuantizedMeasure coarse = quantized_measure(law, eve, eve.y_max, {0.0, 8.0});
  CHECK(coarse.delta_prime > 0.0);
  double direct = 0.0;
  for (long z = 0; z <= eve.y_max; ++z) {
    double orig = 0.0, quant = 0.0;
    for (int s = 0; s < 5; ++s) {
      orig += 0.2 * oracle::pmf(3.0 + law.sequences(s, 0), z);
      quant += 0.2 * oracle::pmf(3.0 + coarse.quantized_law.sequences(s, 0), z);
    }
    direct += std::fabs(orig - quant);
  }
  CHECK(coarse.delta_prime == doctest::Approx(0.5 * direct).epsilon(1e-9));

  // certificates shrink as the grid refines
  double prev = 1e9;
  for (int pts : {2, 8, 32}) {
    std::vector<double> grid(static_cast<std::size_t>(pts));
    for (int i = 0; i < pts; ++i) grid[static_cast<std::size_t>(i)] = 8.0 * i / double(pts - 1);
    QuantizedMeasure qm = quantized_measure(law, eve, eve.y_max, grid);
    CHECK(qm.delta_prime <= prev + 1e-12);
    prev = qm.delta_prime;
  }

  CHECK_THROWS_AS(quantized_measure(law, eve, -1, {0.0}), std::invalid_argument);
}

TEST_CASE("event differences obey the quantized-model budget") {
  PoissonChannel eve = PoissonChannel::truncated(4.0, 6.0);
  IdCodeSpec spec = eve_rig(2.0, 1, 3, 4, 11);
  MessageInputLaw li = message_input_law(spec, 0), lj = message_input_law(spec, 1);
  std::vector<double> grid{0.0, 3.0, 6.0};
  QuantizedMeasure qi = quantized_measure(li, eve, eve.y_max - 4, grid);
  QuantizedMeasure qj = quantized_measure(lj, eve, eve.y_max - 4, grid);
  const double eps_q = total_variation(qi.measure.pmf, qj.measure.pmf);
  EveOutputMeasure mi = exact_output_measure(li, eve), mj = exact_output_measure(lj, eve);

  RngStream rng(2718);
  for (int ev = 0; ev < 1000; ++ev) {
    double pi = 0.0, pj = 0.0;
    for (Eigen::Index z = 0; z < mi.pmf.size(); ++z)
      if (rng.next_unit() < 0.5) {
        pi += mi.pmf[z];
        pj += mj.pmf[z];
      }
    CHECK(std::fabs(pi - pj) <= eps_q + qi.delta_prime + qj.delta_prime + 1e-12);
  }
}

TEST_CASE("leakage report carries coherent fields on both paths") {
  PoissonChannel eve = PoissonChannel::truncated(8.0, 4.0);
  auto small = random_ensemble(4, 2, 3, 2.0, 99);
  LeakageReport exact = leakage_report(small, eve, 2000, 5);
  CHECK(exact.path == "exact");
  REQUIRE(exact.exact_mi_bits.has_value());
  CHECK(*exact.exact_mi_bits <= exact.chain_rule_bound_bits + 1e-9);
  CHECK(exact.per_letter_kl_bounds.size() == 2);
  CHECK(exact.pinsker_tv_bound >= 0.0);
  CHECK(exact.pinsker_tv_bound <= 1.0);
  CHECK(exact.empirical_lrt_error_sum > 0.0);

  auto wide = random_ensemble(3, 5, 3, 2.0, 100);
  LeakageReport mc = leakage_report(wide, eve, 2000, 6);
  CHECK(mc.path == "mc");
  REQUIRE(mc.mc_mi.has_value());
  CHECK(mc.mc_mi->samples == 2000);
  CHECK(mc.mc_mi->jackknife_se_bits > 0.0);

  // the estimator agrees with the exact value on an enumerable ensemble
  McMutualInformation est = mc_leakage_bits(small, eve, 4000, 11);
  const double truth = exact_leakage_bits(small, eve);
  CHECK(std::fabs(est.mi_bits - truth) <= 4.0 * est.jackknife_se_bits + 1e-3);
}
