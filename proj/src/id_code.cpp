#include "dtpc/id_code.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "dtpc/capacity.hpp"
#include "dtpc/parallel.hpp"

namespace dtpc {

void InnerTransmissionCode::build_decode_tables() {
  std::map<double, int> values;
  for (Eigen::Index i = 0; i < codewords.rows(); ++i)
    for (Eigen::Index t = 0; t < codewords.cols(); ++t) values.emplace(codewords(i, t), 0);
  letter_values.clear();
  for (auto& [v, idx] : values) {
    idx = static_cast<int>(letter_values.size());
    letter_values.push_back(v);
  }
  letter_index.resize(codewords.rows(), codewords.cols());
  for (Eigen::Index i = 0; i < codewords.rows(); ++i)
    for (Eigen::Index t = 0; t < codewords.cols(); ++t)
      letter_index(i, t) = values[codewords(i, t)];
  letter_loglik.resize(static_cast<Eigen::Index>(letter_values.size()), channel.y_max + 1);
  for (std::size_t v = 0; v < letter_values.size(); ++v)
    for (long y = 0; y <= channel.y_max; ++y)
      letter_loglik(static_cast<Eigen::Index>(v), y) = channel.log_pmf(letter_values[v], y);
}

int InnerTransmissionCode::decode(std::span<const long> y) const {
  if (static_cast<int>(y.size()) != blocklength)
    throw std::invalid_argument("InnerTransmissionCode::decode: wrong length");
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < size(); ++i) {
    double score = 0.0;
    for (int t = 0; t < blocklength; ++t) {
      const long yt = y[static_cast<std::size_t>(t)];
      score += yt <= channel.y_max ? letter_loglik(letter_index(i, t), yt)
                                   : channel.log_pmf(letter_values[static_cast<std::size_t>(
                                                         letter_index(i, t))],
                                                     yt);
    }
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

InnerTransmissionCode build_inner_code(const PoissonChannel& ch, const PowerConstraint& pc,
                                       int blocklength, double rate_bits, std::uint64_t seed) {
  CapacityResult cap = capacity(ch, pc);
  const double count = std::ceil(std::exp2(blocklength * rate_bits) - 1e-9);
  if (count > double(1 << 22))
    throw std::invalid_argument("build_inner_code: codebook too large for simulation");
  return build_inner_code(ch, pc, blocklength, static_cast<long>(count), seed, cap.distribution,
                          cap.capacity_bits);
}

InnerTransmissionCode build_inner_code(const PoissonChannel& ch, const PowerConstraint& pc,
                                       int blocklength, long num_codewords, std::uint64_t seed,
                                       const DiscreteInputDistribution& letters,
                                       double capacity_bits, bool distinct) {
  if (blocklength < 1) throw std::invalid_argument("build_inner_code: blocklength must be >= 1");
  if (num_codewords < 1) throw std::invalid_argument("build_inner_code: need at least one codeword");
  const double rate = std::log2(double(num_codewords)) / blocklength;
  if (num_codewords > 1 && rate >= capacity_bits)
    throw std::invalid_argument("build_inner_code: rate at or above capacity, no vanishing-error regime");
  if (letters.max_point() > pc.p_max + 1e-12)
    throw std::invalid_argument("build_inner_code: letter law violates the peak constraint");

  InnerTransmissionCode code;
  code.blocklength = blocklength;
  code.channel = ch;
  code.codewords.resize(num_codewords, blocklength);

  // per-letter cdf for sampling
  Eigen::VectorXd cdf(letters.size());
  double acc = 0.0;
  for (int j = 0; j < letters.size(); ++j) {
    acc += letters.p[j];
    cdf[j] = acc;
  }
  const double power_budget = blocklength * pc.effective_avg() + pc.p_max;

  RngStream rng(seed, 0);
  std::set<std::vector<double>> seen;
  std::vector<double> word(static_cast<std::size_t>(blocklength));
  for (long i = 0; i < num_codewords; ++i) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 100000)
        throw std::runtime_error("build_inner_code: cannot satisfy block power constraint");
      double total = 0.0;
      for (int t = 0; t < blocklength; ++t) {
        const double u = rng.next_unit();
        int j = 0;
        while (j + 1 < letters.size() && u > cdf[j]) ++j;
        word[static_cast<std::size_t>(t)] = letters.x[j];
        total += letters.x[j];
      }
      if (total > power_budget) continue;
      if (distinct && attempt < 200 && seen.count(word)) continue;
      break;
    }
    if (distinct) seen.insert(word);
    for (int t = 0; t < blocklength; ++t) code.codewords(i, t) = word[static_cast<std::size_t>(t)];
  }
  code.build_decode_tables();
  return code;
}

ColoringFamily::ColoringFamily(std::uint64_t q, int d) : field_size(q), degree(d) {
  if (q >= (1ULL << 31)) throw std::invalid_argument("ColoringFamily: field size too large");
  if (!is_prime(q)) throw std::invalid_argument("ColoringFamily: field size must be prime");
  if (d < 0) throw std::invalid_argument("ColoringFamily: negative degree");
}

std::uint64_t ColoringFamily::family_size() const {
  if (log2_family_size() > 62.0)
    throw std::overflow_error("ColoringFamily: family too large to enumerate");
  std::uint64_t n = 1;
  for (int k = 0; k <= degree; ++k) n *= field_size;
  return n;
}

std::uint64_t ColoringFamily::color(std::uint64_t message, std::uint64_t point) const {
  if (point >= field_size) throw std::invalid_argument("ColoringFamily: point outside field");
  // digits of the message are the polynomial coefficients (low degree first)
  std::vector<std::uint64_t> coeffs(static_cast<std::size_t>(degree) + 1);
  std::uint64_t msg = message;
  for (auto& c : coeffs) {
    c = msg % field_size;
    msg /= field_size;
  }
  if (msg != 0) throw std::invalid_argument("ColoringFamily: message out of range");
  std::uint64_t acc = 0;
  for (int i = degree; i >= 0; --i)
    acc = (acc * point + coeffs[static_cast<std::size_t>(i)]) % field_size;
  return acc;
}

int ColoringFamily::collision_count(std::uint64_t msg_a, std::uint64_t msg_b) const {
  int count = 0;
  for (std::uint64_t j = 0; j < field_size; ++j)
    if (color(msg_a, j) == color(msg_b, j)) ++count;
  return count;
}

bool ColoringFamily::is_prime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t f = 2; f * f <= n; ++f)
    if (n % f == 0) return false;
  return true;
}

std::uint64_t ColoringFamily::next_prime(std::uint64_t n) {
  std::uint64_t c = std::max<std::uint64_t>(n, 2);
  while (!is_prime(c)) ++c;
  return c;
}

void IdCodeSpec::validate() const {
  if (!(lambda1_target + lambda2_target < 1.0))
    throw std::invalid_argument("IdCodeSpec: error targets must satisfy lambda1 + lambda2 < 1");
  if (inner.size() < static_cast<int>(coloring.field_size))
    throw std::invalid_argument("IdCodeSpec: inner code smaller than the field");
  if (tag.size() < static_cast<int>(coloring.field_size) * bin_size)
    throw std::invalid_argument("IdCodeSpec: tag code smaller than colors x bin size");
  const int expect_tag = static_cast<int>(std::ceil(std::sqrt(double(inner.blocklength))));
  if (tag.blocklength != expect_tag)
    throw std::invalid_argument("IdCodeSpec: tag blocklength must be ceil(sqrt(n))");
}

IdCodeSpec build_id_code(const PoissonChannel& ch, const PowerConstraint& pc, int n,
                         std::uint64_t q, int degree, std::uint64_t seed, int bin_size,
                         double lambda1, double lambda2, double rate_margin) {
  CapacityResult cap = capacity(ch, pc);
  return build_id_code(ch, pc, n, q, degree, seed, cap.distribution, cap.capacity_bits, bin_size,
                       lambda1, lambda2, rate_margin);
}

IdCodeSpec build_id_code(const PoissonChannel& ch, const PowerConstraint& pc, int n,
                         std::uint64_t q, int degree, std::uint64_t seed,
                         const DiscreteInputDistribution& letters, double capacity_bits,
                         int bin_size, double lambda1, double lambda2, double rate_margin,
                         bool check_rates) {
  if (bin_size < 1) throw std::invalid_argument("build_id_code: bin size must be >= 1");
  const int tag_len = static_cast<int>(std::ceil(std::sqrt(double(n))));
  const double inner_rate = std::log2(double(q)) / n;
  if (check_rates && inner_rate > rate_margin * capacity_bits)
    throw std::invalid_argument("build_id_code: index rate exceeds the configured capacity margin");
  const double claimed = check_rates
                             ? capacity_bits
                             : std::numeric_limits<double>::infinity();
  IdCodeSpec spec{
      build_inner_code(ch, pc, n, static_cast<long>(q), seed * 2 + 1, letters, claimed),
      build_inner_code(ch, pc, tag_len, static_cast<long>(q) * bin_size, seed * 2 + 2, letters,
                       claimed),
      ColoringFamily(q, degree),
      bin_size,
      lambda1,
      lambda2,
  };
  spec.validate();
  return spec;
}

IdEncoding encode_id_detailed(const IdCodeSpec& spec, std::uint64_t message, RngStream& rng) {
  IdEncoding enc;
  enc.point = rng.next_below(spec.coloring.field_size);
  enc.color = spec.coloring.color(message, enc.point);
  enc.dummy = spec.bin_size > 1 ? rng.next_below(static_cast<std::uint64_t>(spec.bin_size)) : 0;
  const Eigen::Index tag_row =
      static_cast<Eigen::Index>(enc.color) * spec.bin_size + static_cast<Eigen::Index>(enc.dummy);
  enc.x.resize(spec.total_blocklength());
  enc.x.head(spec.inner.blocklength) = spec.inner.codewords.row(static_cast<Eigen::Index>(enc.point));
  enc.x.tail(spec.tag.blocklength) = spec.tag.codewords.row(tag_row);
  return enc;
}

Eigen::VectorXd encode_id(const IdCodeSpec& spec, std::uint64_t message, RngStream& rng) {
  return encode_id_detailed(spec, message, rng).x;
}

std::vector<long> transmit(const PoissonChannel& ch, const Eigen::VectorXd& x, RngStream& rng) {
  std::vector<long> y(static_cast<std::size_t>(x.size()));
  for (Eigen::Index t = 0; t < x.size(); ++t) y[static_cast<std::size_t>(t)] = ch.sample(x[t], rng);
  return y;
}

bool identify(const IdCodeSpec& spec, std::span<const long> received, std::uint64_t candidate) {
  if (static_cast<int>(received.size()) != spec.total_blocklength())
    throw std::invalid_argument("identify: wrong received length");
  const int point_hat = spec.inner.decode(received.subspan(0, spec.inner.blocklength));
  const int tag_hat = spec.tag.decode(received.subspan(spec.inner.blocklength));
  const std::uint64_t color_hat = static_cast<std::uint64_t>(tag_hat / spec.bin_size);
  return color_hat == spec.coloring.color(candidate, static_cast<std::uint64_t>(point_hat));
}

TrialReport measure_errors(const IdCodeSpec& spec, const PoissonChannel& ch, long trials,
                           std::uint64_t seed, int sampled_pairs,
                           const std::vector<std::pair<std::uint64_t, std::uint64_t>>* pairs,
                           std::uint64_t message_space_limit, int threads,
                           std::vector<TrialRow>* trace) {
  if (trials < 1) throw std::invalid_argument("measure_errors: need at least one trial");
  std::uint64_t space = spec.coloring.family_size();
  if (message_space_limit > 0) space = std::min(space, message_space_limit);

  TrialReport report;
  report.trials = trials;
  report.seed = seed;
  if (trace) trace->assign(static_cast<std::size_t>(2 * trials), TrialRow{});

  // first kind: transmit i, test i
  std::vector<long> fails(static_cast<std::size_t>(std::max(1, threads)), 0);
  parallel_chunks(trials, threads, [&](int chunk, long lo, long hi) {
    long f = 0;
    for (long t = lo; t < hi; ++t) {
      RngStream rng(seed, 2 * static_cast<std::uint64_t>(t));
      const std::uint64_t msg = rng.next_below(space);
      IdEncoding enc = encode_id_detailed(spec, msg, rng);
      std::vector<long> y = transmit(ch, enc.x, rng);
      const bool ok = identify(spec, y, msg);
      if (!ok) ++f;
      if (trace) (*trace)[static_cast<std::size_t>(t)] = TrialRow{t, msg, msg, ok, !ok, false};
    }
    fails[static_cast<std::size_t>(chunk)] = f;
  });
  long first_fails = 0;
  for (long f : fails) first_fails += f;
  report.first_kind_rate = double(first_fails) / double(trials);
  report.first_kind_ci = wilson_interval(first_fails, trials);

  if (space < 2) return report;  // second kind undefined for a single message

  // second kind: pick the worst sampled pair by exact collision enumeration,
  // then spend all trials on it
  std::vector<std::pair<std::uint64_t, std::uint64_t>> pair_set;
  if (pairs) {
    pair_set = *pairs;
  } else {
    RngStream rng(seed ^ 0xABCDEF12345ULL, 1);
    for (int k = 0; k < sampled_pairs; ++k) {
      std::uint64_t a = rng.next_below(space);
      std::uint64_t b = rng.next_below(space);
      if (a == b) b = (b + 1) % space;
      pair_set.emplace_back(a, b);
    }
  }
  int worst_coll = -1;
  std::pair<std::uint64_t, std::uint64_t> worst{0, 1};
  for (const auto& pr : pair_set) {
    if (pr.first == pr.second) continue;
    const int c = spec.coloring.collision_count(pr.first, pr.second);
    if (c > worst_coll) {
      worst_coll = c;
      worst = pr;
    }
  }
  report.worst_pair = worst;
  report.worst_pair_exact_collision = double(worst_coll) / double(spec.coloring.field_size);

  std::vector<long> accepts(static_cast<std::size_t>(std::max(1, threads)), 0);
  parallel_chunks(trials, threads, [&](int chunk, long lo, long hi) {
    long a = 0;
    for (long t = lo; t < hi; ++t) {
      RngStream rng(seed, 2 * static_cast<std::uint64_t>(t) + 1);
      IdEncoding enc = encode_id_detailed(spec, worst.first, rng);
      std::vector<long> y = transmit(ch, enc.x, rng);
      const bool acc = identify(spec, y, worst.second);
      if (acc) ++a;
      if (trace)
        (*trace)[static_cast<std::size_t>(trials + t)] =
            TrialRow{trials + t, worst.first, worst.second, acc, false, acc};
    }
    accepts[static_cast<std::size_t>(chunk)] = a;
  });
  long second_accepts = 0;
  for (long a : accepts) second_accepts += a;
  report.second_kind_rate = double(second_accepts) / double(trials);
  report.second_kind_ci = wilson_interval(second_accepts, trials);
  return report;
}

double id_rate_bits(double log2_family_size, int total_blocklength) {
  if (!(log2_family_size > 0.0))
    throw std::invalid_argument("id_rate_bits: need at least two messages");
  return std::log2(log2_family_size) / total_blocklength;
}

double rate_of(const IdCodeSpec& spec) {
  return id_rate_bits(spec.coloring.log2_family_size(), spec.total_blocklength());
}

std::vector<IdScalingRow> id_scaling_schedule(const std::vector<int>& n_list, double capacity_bits,
                                              double eps_bits, bool exponent_over_total) {
  if (n_list.empty()) throw std::invalid_argument("id_scaling_schedule: empty n list");
  const double target = capacity_bits - 2.0 * eps_bits;
  if (target <= 0.0) throw std::invalid_argument("id_scaling_schedule: C - 2 eps must be positive");
  std::vector<IdScalingRow> rows;
  rows.reserve(n_list.size());
  for (int n : n_list) {
    IdScalingRow row;
    row.n = n;
    const int root = static_cast<int>(std::ceil(std::sqrt(double(n))));
    row.m = n + root;
    const double q_exp = std::ceil(std::sqrt(double(n)) * eps_bits);
    row.q = ColoringFamily::next_prime(
        static_cast<std::uint64_t>(std::llround(std::exp2(std::max(1.0, q_exp)))));
    const double log2q = std::log2(double(row.q));
    const int exponent_len = exponent_over_total ? row.m : n;
    row.d_plus_1 = std::floor(std::exp2(exponent_len * target) / log2q);
    if (row.d_plus_1 < 1.0) row.d_plus_1 = 1.0;
    row.log2_family_size = row.d_plus_1 * log2q;
    row.rate = std::log2(row.log2_family_size) / row.m;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace dtpc
