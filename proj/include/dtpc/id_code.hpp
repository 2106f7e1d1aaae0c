#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dtpc/channel.hpp"
#include "dtpc/info_math.hpp"
#include "dtpc/input_dist.hpp"
#include "dtpc/rng.hpp"

namespace dtpc {

// Random block code with letters drawn i.i.d. from a fixed input law,
// resampled until the block power constraint holds, decoded by exact
// Poisson maximum likelihood (ties go to the lowest index).
struct InnerTransmissionCode {
  int blocklength = 0;
  Eigen::MatrixXd codewords;  // size x blocklength
  PoissonChannel channel;     // decode metric

  int size() const { return static_cast<int>(codewords.rows()); }
  double rate_bits() const { return std::log2(double(size())) / blocklength; }

  int decode(std::span<const long> y) const;

  // cached per-letter log-likelihood tables
  std::vector<double> letter_values;
  Eigen::MatrixXi letter_index;    // size x blocklength
  Eigen::MatrixXd letter_loglik;   // |letter_values| x (y_max + 1)
  void build_decode_tables();
};

// Builds ceil(2^{blocklength * rate_bits}) codewords. Letters are drawn from
// the capacity-achieving law of (ch, pc); rejects rates at or above capacity.
InnerTransmissionCode build_inner_code(const PoissonChannel& ch, const PowerConstraint& pc,
                                       int blocklength, double rate_bits, std::uint64_t seed);

// Same, with the letter law and a capacity lower bound supplied by the caller
// and an explicit codeword count. `distinct` resamples exact duplicates.
InnerTransmissionCode build_inner_code(const PoissonChannel& ch, const PowerConstraint& pc,
                                       int blocklength, long num_codewords, std::uint64_t seed,
                                       const DiscreteInputDistribution& letters,
                                       double capacity_bits, bool distinct = true);

// Degree-bounded polynomial evaluation over a prime field: message digits are
// the coefficients, the tag is T_message(point). Two distinct messages agree
// on at most `degree` points.
struct ColoringFamily {
  std::uint64_t field_size = 2;  // prime q
  int degree = 0;                // d

  ColoringFamily(std::uint64_t q, int d);

  double log2_family_size() const { return (degree + 1) * std::log2(double(field_size)); }
  std::uint64_t family_size() const;  // q^(d+1); throws above 2^62
  std::uint64_t color(std::uint64_t message, std::uint64_t point) const;
  // exact |{ j : T_a(j) = T_b(j) }|
  int collision_count(std::uint64_t msg_a, std::uint64_t msg_b) const;

  static bool is_prime(std::uint64_t n);
  static std::uint64_t next_prime(std::uint64_t n);
};

// Concatenated identification code: the field point rides on the inner code,
// its color on the tag code. bin_size > 1 pads every color with a uniformly
// random dummy index (one bin per color).
struct IdCodeSpec {
  InnerTransmissionCode inner;
  InnerTransmissionCode tag;
  ColoringFamily coloring;
  int bin_size = 1;
  double lambda1_target = 0.05;
  double lambda2_target = 0.05;

  int total_blocklength() const { return inner.blocklength + tag.blocklength; }
  void validate() const;
};

// Full construction: solves the channel capacity once, draws both codes from
// the capacity-achieving letter law, and checks the code rates against it.
IdCodeSpec build_id_code(const PoissonChannel& ch, const PowerConstraint& pc, int n,
                         std::uint64_t q, int degree, std::uint64_t seed, int bin_size = 1,
                         double lambda1 = 0.05, double lambda2 = 0.05, double rate_margin = 0.8);
// check_rates = false skips the reliability preconditions; eavesdropper-side
// measurement rigs use it where only the output measures matter.
IdCodeSpec build_id_code(const PoissonChannel& ch, const PowerConstraint& pc, int n,
                         std::uint64_t q, int degree, std::uint64_t seed,
                         const DiscreteInputDistribution& letters, double capacity_bits,
                         int bin_size = 1, double lambda1 = 0.05, double lambda2 = 0.05,
                         double rate_margin = 0.8, bool check_rates = true);

struct IdEncoding {
  Eigen::VectorXd x;      // length n + ceil(sqrt(n))
  std::uint64_t point;    // drawn uniformly on the field
  std::uint64_t color;
  std::uint64_t dummy;
};

IdEncoding encode_id_detailed(const IdCodeSpec& spec, std::uint64_t message, RngStream& rng);
Eigen::VectorXd encode_id(const IdCodeSpec& spec, std::uint64_t message, RngStream& rng);

std::vector<long> transmit(const PoissonChannel& ch, const Eigen::VectorXd& x, RngStream& rng);

// "Was `candidate` sent?" — decode the point and the color, accept iff the
// candidate's coloring maps the decoded point to the decoded color.
bool identify(const IdCodeSpec& spec, std::span<const long> received, std::uint64_t candidate);

struct TrialRow {
  long trial = 0;
  std::uint64_t true_message = 0;
  std::uint64_t candidate = 0;
  bool accepted = false;
  bool first_kind_error = false;
  bool second_kind_accept = false;
};

struct TrialReport {
  long trials = 0;
  double first_kind_rate = 0.0;
  WilsonInterval first_kind_ci;
  std::optional<double> second_kind_rate;
  WilsonInterval second_kind_ci;
  // worst pair over the sampled set, by exact collision enumeration
  std::optional<std::pair<std::uint64_t, std::uint64_t>> worst_pair;
  std::optional<double> worst_pair_exact_collision;
  std::uint64_t seed = 0;
};

// First kind: transmit i, test i. Second kind: exact collision enumeration
// picks the worst of the sampled pairs, then all trials probe that pair.
TrialReport measure_errors(const IdCodeSpec& spec, const PoissonChannel& ch, long trials,
                           std::uint64_t seed, int sampled_pairs = 256,
                           const std::vector<std::pair<std::uint64_t, std::uint64_t>>* pairs = nullptr,
                           std::uint64_t message_space_limit = 0, int threads = 1,
                           std::vector<TrialRow>* trace = nullptr);

// log2 log2 N / m with N the family size.
double id_rate_bits(double log2_family_size, int total_blocklength);
double rate_of(const IdCodeSpec& spec);

struct IdScalingRow {
  int n = 0;
  int m = 0;
  std::uint64_t q = 0;
  double d_plus_1 = 0.0;
  double log2_family_size = 0.0;
  double rate = 0.0;  // log2 log2 N / m
};

// Parameter schedule q = nextprime(2^ceil(sqrt(n) eps)), d+1 = floor(2^{L(C-2eps)}/log2 q)
// with L the exponent length (m when exponent_over_total, else n).
std::vector<IdScalingRow> id_scaling_schedule(const std::vector<int>& n_list, double capacity_bits,
                                              double eps_bits, bool exponent_over_total = true);

}  // namespace dtpc
