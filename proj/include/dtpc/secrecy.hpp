#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dtpc/channel.hpp"
#include "dtpc/id_code.hpp"

namespace dtpc {

// Q(.|i): finitely supported law over input blocks of length n.
struct MessageInputLaw {
  Eigen::MatrixXd sequences;  // support x n
  Eigen::VectorXd probs;      // sums to 1

  int block_length() const { return static_cast<int>(sequences.cols()); }
  void validate() const;
  double letter_mean(int t) const;
  double letter_second_moment(int t) const;
};

// Exact output measure of one message over the truncated block space
// {0..z_cap}^n, enumerable for n <= 3.
struct EveOutputMeasure {
  int message = 0;
  int n = 0;
  int z_cap = 0;
  Eigen::ArrayXd pmf;  // (z_cap+1)^n entries, last letter fastest
};

inline constexpr int kExactBlockLimit = 3;
inline constexpr int kExactMessageLimit = 8;

EveOutputMeasure exact_output_measure(const MessageInputLaw& law, const PoissonChannel& ch,
                                      int message = 0);

// Plug-in mutual information between a uniform message and the eavesdropper's
// block output, by full enumeration. Rejects n > 3 or more than 8 messages.
double exact_leakage_bits(const std::vector<MessageInputLaw>& ensemble, const PoissonChannel& eve);

// Per-letter divergence bound E[X^2] / (2 (lambda_e + E[X])), reported in bits.
double per_letter_kl_bound_bits(double mean_x, double second_moment_x, double lambda_e);

// Sum of the per-letter bounds over the block, with letter statistics taken
// across the uniform-message ensemble.
std::vector<double> per_letter_kl_bounds_bits(const std::vector<MessageInputLaw>& ensemble,
                                              double lambda_e);

// Monte-Carlo estimate of the leakage using exact per-message densities,
// with a jackknife standard error. For n beyond the enumeration budget.
struct McMutualInformation {
  double mi_bits = 0.0;
  double jackknife_se_bits = 0.0;
  long samples = 0;
};
McMutualInformation mc_leakage_bits(const std::vector<MessageInputLaw>& ensemble,
                                    const PoissonChannel& eve, long samples, std::uint64_t seed);

// Best binary test between the output measures of two messages: returns the
// minimum over thresholds of type I + type II error, which equals
// 1 - TV(Q_i V^m, Q_j V^m). Exact for m <= 3, likelihood-ratio Monte Carlo
// above.
struct LrtResult {
  double error_sum = 0.0;
  double std_error = 0.0;  // zero on the exact path
  bool exact = false;
  long trials = 0;
};

MessageInputLaw message_input_law(const IdCodeSpec& spec, std::uint64_t message);

LrtResult eve_lrt_exact(const MessageInputLaw& law_i, const MessageInputLaw& law_j,
                        const PoissonChannel& eve);
LrtResult eve_lrt_mc(const MessageInputLaw& law_i, const MessageInputLaw& law_j,
                     const PoissonChannel& eve, long trials, std::uint64_t seed);

LrtResult eve_indistinguishability(const IdCodeSpec& spec, const PoissonChannel& eve,
                                   std::uint64_t i, std::uint64_t j, long trials,
                                   std::uint64_t seed);
LrtResult eve_indistinguishability(const MessageInputLaw& law_i, const MessageInputLaw& law_j,
                                   const PoissonChannel& eve, long trials, std::uint64_t seed);

// Input snapped to a finite grid and output clumped at z0; delta' certifies
// the total-variation distance to the unquantized measure by enumeration.
struct QuantizedMeasure {
  EveOutputMeasure measure;
  MessageInputLaw quantized_law;
  double delta_prime = 0.0;
};
QuantizedMeasure quantized_measure(const MessageInputLaw& law, const PoissonChannel& eve, int z0,
                                   const std::vector<double>& grid);

struct LeakageReport {
  std::optional<double> exact_mi_bits;          // present on the enumeration path
  std::optional<McMutualInformation> mc_mi;     // present otherwise
  double chain_rule_bound_bits = 0.0;
  std::vector<double> per_letter_kl_bounds;     // bits
  double pinsker_tv_bound = 0.0;
  double empirical_lrt_error_sum = 0.0;         // worst message pair
  std::string path;                             // "exact" or "mc"
};

LeakageReport leakage_report(const std::vector<MessageInputLaw>& ensemble,
                             const PoissonChannel& eve, long mc_samples, std::uint64_t seed);

// Random small ensemble generator used by experiments: |M| messages, block
// length n, per-message support of `support` sequences with letters uniform
// on [0, peak].
std::vector<MessageInputLaw> random_ensemble(int messages, int n, int support, double peak,
                                             std::uint64_t seed);

}  // namespace dtpc
