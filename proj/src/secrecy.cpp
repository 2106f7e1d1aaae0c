#include "dtpc/secrecy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dtpc/info_math.hpp"

namespace dtpc {
namespace {

long block_space_size(int n, int z_cap) {
  double size = 1.0;
  for (int t = 0; t < n; ++t) size *= double(z_cap + 1);
  if (size > 2.5e7) throw std::runtime_error("secrecy enumeration budget exceeded");
  return static_cast<long>(size);
}

// density of the measure at one block, exact mixture over the law's support
double log_density(const MessageInputLaw& law, const PoissonChannel& ch,
                   const std::vector<long>& z) {
  const Eigen::Index s_count = law.sequences.rows();
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(static_cast<std::size_t>(s_count));
  for (Eigen::Index s = 0; s < s_count; ++s) {
    double ll = std::log(std::max(law.probs[s], 1e-320));
    for (int t = 0; t < law.block_length(); ++t)
      ll += ch.log_pmf(law.sequences(s, t), z[static_cast<std::size_t>(t)]);
    terms[static_cast<std::size_t>(s)] = ll;
    best = std::max(best, ll);
  }
  if (!std::isfinite(best)) return best;
  double acc = 0.0;
  for (double v : terms) acc += std::exp(v - best);
  return best + std::log(acc);
}

}  // namespace

void MessageInputLaw::validate() const {
  if (sequences.rows() != probs.size() || sequences.rows() == 0)
    throw std::invalid_argument("MessageInputLaw: shape mismatch");
  if (probs.minCoeff() < 0.0) throw std::invalid_argument("MessageInputLaw: negative probability");
  if (std::fabs(probs.sum() - 1.0) > 1e-10)
    throw std::invalid_argument("MessageInputLaw: probabilities must sum to 1");
  if (sequences.minCoeff() < 0.0) throw std::invalid_argument("MessageInputLaw: negative input");
}

double MessageInputLaw::letter_mean(int t) const { return probs.dot(sequences.col(t)); }

double MessageInputLaw::letter_second_moment(int t) const {
  return probs.dot(sequences.col(t).cwiseProduct(sequences.col(t)));
}

EveOutputMeasure exact_output_measure(const MessageInputLaw& law, const PoissonChannel& ch,
                                      int message) {
  law.validate();
  const int n = law.block_length();
  const int cap = ch.y_max;
  const long cells = block_space_size(n, cap);

  EveOutputMeasure out;
  out.message = message;
  out.n = n;
  out.z_cap = cap;
  out.pmf = Eigen::ArrayXd::Zero(cells);

  // rows for every distinct letter of the support
  for (Eigen::Index s = 0; s < law.sequences.rows(); ++s) {
    std::vector<Eigen::ArrayXd> rows;
    rows.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) rows.push_back(ch.row(law.sequences(s, t)));
    const double w = law.probs[s];
    if (w == 0.0) continue;
    // last letter fastest
    for (long idx = 0; idx < cells; ++idx) {
      long rem = idx;
      double prod = w;
      for (int t = n - 1; t >= 0; --t) {
        prod *= rows[static_cast<std::size_t>(t)][rem % (cap + 1)];
        rem /= (cap + 1);
      }
      out.pmf[idx] += prod;
    }
  }
  return out;
}

double exact_leakage_bits(const std::vector<MessageInputLaw>& ensemble, const PoissonChannel& eve) {
  if (ensemble.empty()) throw std::invalid_argument("exact_leakage_bits: empty ensemble");
  if (static_cast<int>(ensemble.size()) > kExactMessageLimit)
    throw std::invalid_argument("exact_leakage_bits: more than 8 messages");
  const int n = ensemble.front().block_length();
  if (n > kExactBlockLimit) throw std::invalid_argument("exact_leakage_bits: block length above 3");

  std::vector<EveOutputMeasure> measures;
  measures.reserve(ensemble.size());
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    if (ensemble[i].block_length() != n)
      throw std::invalid_argument("exact_leakage_bits: mixed block lengths");
    measures.push_back(exact_output_measure(ensemble[i], eve, static_cast<int>(i)));
  }
  Eigen::ArrayXd mix = Eigen::ArrayXd::Zero(measures.front().pmf.size());
  const double pm = 1.0 / double(ensemble.size());
  for (const auto& m : measures) mix += pm * m.pmf;

  double acc = 0.0;
  for (const auto& m : measures) acc += pm * kl_nats(m.pmf, mix);
  return bits_from_nats(acc);
}

double per_letter_kl_bound_bits(double mean_x, double second_moment_x, double lambda_e) {
  if (mean_x < 0.0 || second_moment_x < mean_x * mean_x - 1e-12)
    throw std::invalid_argument("per_letter_kl_bound_bits: invalid moments");
  if (lambda_e <= 0.0 && mean_x <= 0.0) return 0.0;
  if (second_moment_x == 0.0) return 0.0;
  return bits_from_nats(second_moment_x / (2.0 * (lambda_e + mean_x)));
}

std::vector<double> per_letter_kl_bounds_bits(const std::vector<MessageInputLaw>& ensemble,
                                              double lambda_e) {
  if (ensemble.empty()) throw std::invalid_argument("per_letter_kl_bounds_bits: empty ensemble");
  const int n = ensemble.front().block_length();
  const double pm = 1.0 / double(ensemble.size());
  std::vector<double> bounds(static_cast<std::size_t>(n), 0.0);
  for (int t = 0; t < n; ++t) {
    double m1 = 0.0, m2 = 0.0;
    for (const auto& law : ensemble) {
      m1 += pm * law.letter_mean(t);
      m2 += pm * law.letter_second_moment(t);
    }
    bounds[static_cast<std::size_t>(t)] = per_letter_kl_bound_bits(m1, m2, lambda_e);
  }
  return bounds;
}

McMutualInformation mc_leakage_bits(const std::vector<MessageInputLaw>& ensemble,
                                    const PoissonChannel& eve, long samples, std::uint64_t seed) {
  if (samples < 2) throw std::invalid_argument("mc_leakage_bits: need at least two samples");
  const int messages = static_cast<int>(ensemble.size());
  const int n = ensemble.front().block_length();
  std::vector<double> values(static_cast<std::size_t>(samples));
  for (long s = 0; s < samples; ++s) {
    RngStream rng(seed, static_cast<std::uint64_t>(s));
    const int msg = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(messages)));
    const auto& law = ensemble[static_cast<std::size_t>(msg)];
    // draw a support sequence, then the channel outputs
    const double u = rng.next_unit();
    double cum = 0.0;
    Eigen::Index pick = law.sequences.rows() - 1;
    for (Eigen::Index k = 0; k < law.probs.size(); ++k) {
      cum += law.probs[k];
      if (u <= cum) {
        pick = k;
        break;
      }
    }
    std::vector<long> z(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) z[static_cast<std::size_t>(t)] = eve.sample(law.sequences(pick, t), rng);
    const double li = log_density(law, eve, z);
    // mixture density over messages
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> lls(static_cast<std::size_t>(messages));
    for (int mm = 0; mm < messages; ++mm) {
      lls[static_cast<std::size_t>(mm)] = log_density(ensemble[static_cast<std::size_t>(mm)], eve, z);
      best = std::max(best, lls[static_cast<std::size_t>(mm)]);
    }
    double mix = 0.0;
    for (double v : lls) mix += std::exp(v - best);
    const double lmix = best + std::log(mix / messages);
    values[static_cast<std::size_t>(s)] = (li - lmix) * kLog2e;
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= double(samples);
  // jackknife over leave-one-out means
  double var = 0.0;
  for (double v : values) {
    const double loo = (mean * samples - v) / double(samples - 1);
    var += (loo - mean) * (loo - mean);
  }
  var *= double(samples - 1) / double(samples);
  return {mean, std::sqrt(var), samples};
}

MessageInputLaw message_input_law(const IdCodeSpec& spec, std::uint64_t message) {
  const std::uint64_t q = spec.coloring.field_size;
  const int bins = spec.bin_size;
  const Eigen::Index rows = static_cast<Eigen::Index>(q) * bins;
  MessageInputLaw law;
  law.sequences.resize(rows, spec.total_blocklength());
  law.probs = Eigen::VectorXd::Constant(rows, 1.0 / double(rows));
  Eigen::Index r = 0;
  for (std::uint64_t j = 0; j < q; ++j) {
    const std::uint64_t color = spec.coloring.color(message, j);
    for (int b = 0; b < bins; ++b, ++r) {
      law.sequences.row(r).head(spec.inner.blocklength) =
          spec.inner.codewords.row(static_cast<Eigen::Index>(j));
      law.sequences.row(r).tail(spec.tag.blocklength) =
          spec.tag.codewords.row(static_cast<Eigen::Index>(color) * bins + b);
    }
  }
  return law;
}

LrtResult eve_lrt_exact(const MessageInputLaw& law_i, const MessageInputLaw& law_j,
                        const PoissonChannel& eve) {
  EveOutputMeasure qi = exact_output_measure(law_i, eve, 0);
  EveOutputMeasure qj = exact_output_measure(law_j, eve, 1);
  LrtResult res;
  res.error_sum = 1.0 - total_variation(qi.pmf, qj.pmf);
  res.exact = true;
  return res;
}

LrtResult eve_lrt_mc(const MessageInputLaw& law_i, const MessageInputLaw& law_j,
                     const PoissonChannel& eve, long trials, std::uint64_t seed) {
  const int n = law_i.block_length();
  if (trials < 1) throw std::invalid_argument("eve_lrt_mc: need at least one trial");
  // plug-in likelihood-ratio test at threshold 1; unbiased for 1 - TV
  long type1 = 0, type2 = 0;
  for (long t = 0; t < trials; ++t) {
    RngStream rng(seed, static_cast<std::uint64_t>(t));
    // draw from law_i
    {
      const double u = rng.next_unit();
      double cum = 0.0;
      Eigen::Index pick = law_i.sequences.rows() - 1;
      for (Eigen::Index k = 0; k < law_i.probs.size(); ++k) {
        cum += law_i.probs[k];
        if (u <= cum) {
          pick = k;
          break;
        }
      }
      std::vector<long> z(static_cast<std::size_t>(n));
      for (int tt = 0; tt < n; ++tt)
        z[static_cast<std::size_t>(tt)] = eve.sample(law_i.sequences(pick, tt), rng);
      if (log_density(law_j, eve, z) > log_density(law_i, eve, z)) ++type1;
    }
    // draw from law_j
    {
      const double u = rng.next_unit();
      double cum = 0.0;
      Eigen::Index pick = law_j.sequences.rows() - 1;
      for (Eigen::Index k = 0; k < law_j.probs.size(); ++k) {
        cum += law_j.probs[k];
        if (u <= cum) {
          pick = k;
          break;
        }
      }
      std::vector<long> z(static_cast<std::size_t>(n));
      for (int tt = 0; tt < n; ++tt)
        z[static_cast<std::size_t>(tt)] = eve.sample(law_j.sequences(pick, tt), rng);
      if (log_density(law_j, eve, z) <= log_density(law_i, eve, z)) ++type2;
    }
  }
  LrtResult res;
  const double a = double(type1) / double(trials);
  const double b = double(type2) / double(trials);
  res.error_sum = a + b;
  res.std_error = std::sqrt(a * (1.0 - a) / trials + b * (1.0 - b) / trials);
  res.exact = false;
  res.trials = trials;
  return res;
}

LrtResult eve_indistinguishability(const MessageInputLaw& law_i, const MessageInputLaw& law_j,
                                   const PoissonChannel& eve, long trials, std::uint64_t seed) {
  const int n = law_i.block_length();
  if (law_j.block_length() != n)
    throw std::invalid_argument("eve_indistinguishability: mixed block lengths");
  if (n <= kExactBlockLimit) return eve_lrt_exact(law_i, law_j, eve);
  return eve_lrt_mc(law_i, law_j, eve, trials, seed);
}

LrtResult eve_indistinguishability(const IdCodeSpec& spec, const PoissonChannel& eve,
                                   std::uint64_t i, std::uint64_t j, long trials,
                                   std::uint64_t seed) {
  if (i == j) throw std::invalid_argument("eve_indistinguishability: need two distinct messages");
  return eve_indistinguishability(message_input_law(spec, i), message_input_law(spec, j), eve,
                                  trials, seed);
}

QuantizedMeasure quantized_measure(const MessageInputLaw& law, const PoissonChannel& eve, int z0,
                                   const std::vector<double>& grid) {
  if (z0 < 0 || z0 > eve.y_max) throw std::invalid_argument("quantized_measure: z0 out of range");
  if (grid.empty()) throw std::invalid_argument("quantized_measure: empty grid");
  law.validate();

  QuantizedMeasure out;
  out.quantized_law = law;
  for (Eigen::Index s = 0; s < law.sequences.rows(); ++s)
    for (int t = 0; t < law.block_length(); ++t) {
      double best = grid.front();
      for (double g : grid)
        if (std::fabs(g - law.sequences(s, t)) < std::fabs(best - law.sequences(s, t))) best = g;
      out.quantized_law.sequences(s, t) = best;
    }

  EveOutputMeasure original = exact_output_measure(law, eve, 0);
  EveOutputMeasure quantized = exact_output_measure(out.quantized_law, eve, 0);

  const int cap = eve.y_max;
  const int n = law.block_length();
  // fold both measures' coordinates beyond z0 into z0 and compare on the full space
  auto fold = [&](const Eigen::ArrayXd& pmf) {
    Eigen::ArrayXd folded = Eigen::ArrayXd::Zero(pmf.size());
    for (long idx = 0; idx < pmf.size(); ++idx) {
      long rem = idx, out_idx = 0, mult = 1;
      for (int t = n - 1; t >= 0; --t) {
        long zt = rem % (cap + 1);
        rem /= (cap + 1);
        if (zt > z0) zt = z0;
        out_idx += zt * mult;
        mult *= (cap + 1);
      }
      folded[out_idx] += pmf[idx];
    }
    return folded;
  };
  Eigen::ArrayXd folded_quantized = fold(quantized.pmf);
  out.measure = EveOutputMeasure{0, n, cap, folded_quantized};
  out.delta_prime = total_variation(original.pmf, folded_quantized);
  return out;
}

LeakageReport leakage_report(const std::vector<MessageInputLaw>& ensemble,
                             const PoissonChannel& eve, long mc_samples, std::uint64_t seed) {
  if (ensemble.size() < 2) throw std::invalid_argument("leakage_report: need at least two messages");
  LeakageReport rep;
  rep.per_letter_kl_bounds = per_letter_kl_bounds_bits(ensemble, eve.dark_current);
  rep.chain_rule_bound_bits = 0.0;
  for (double b : rep.per_letter_kl_bounds) rep.chain_rule_bound_bits += b;

  const int n = ensemble.front().block_length();
  const bool exact_ok = n <= kExactBlockLimit && static_cast<int>(ensemble.size()) <= kExactMessageLimit;
  double mi_for_pinsker;
  if (exact_ok) {
    rep.exact_mi_bits = exact_leakage_bits(ensemble, eve);
    rep.path = "exact";
    mi_for_pinsker = *rep.exact_mi_bits;
  } else {
    rep.mc_mi = mc_leakage_bits(ensemble, eve, mc_samples, seed);
    rep.path = "mc";
    mi_for_pinsker = rep.chain_rule_bound_bits;  // estimates are biased, gate on the bound
  }
  rep.pinsker_tv_bound = pinsker_tv_bound(nats_from_bits(std::max(0.0, mi_for_pinsker)));

  double worst = 1.0;
  for (std::size_t i = 0; i < ensemble.size(); ++i)
    for (std::size_t j = i + 1; j < ensemble.size(); ++j) {
      LrtResult lrt = eve_indistinguishability(ensemble[i], ensemble[j], eve,
                                               std::max<long>(2000, mc_samples / 4),
                                               seed ^ (i * 1315423911ULL) ^ j);
      worst = std::min(worst, lrt.error_sum);
    }
  rep.empirical_lrt_error_sum = worst;
  return rep;
}

std::vector<MessageInputLaw> random_ensemble(int messages, int n, int support, double peak,
                                             std::uint64_t seed) {
  if (messages < 1 || n < 1 || support < 1)
    throw std::invalid_argument("random_ensemble: bad shape");
  std::vector<MessageInputLaw> out;
  out.reserve(static_cast<std::size_t>(messages));
  for (int i = 0; i < messages; ++i) {
    RngStream rng(seed, static_cast<std::uint64_t>(i));
    MessageInputLaw law;
    law.sequences.resize(support, n);
    law.probs.resize(support);
    double total = 0.0;
    for (int s = 0; s < support; ++s) {
      for (int t = 0; t < n; ++t) law.sequences(s, t) = peak * rng.next_unit();
      const double w = -std::log(std::max(rng.next_unit(), 1e-15));
      law.probs[s] = w;
      total += w;
    }
    law.probs /= total;
    out.push_back(std::move(law));
  }
  return out;
}

}  // namespace dtpc
