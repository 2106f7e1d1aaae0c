#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

namespace dtpc {

inline constexpr double kLn2 = 0.6931471805599453094;
inline constexpr double kLog2e = 1.4426950408889634074;

inline double bits_from_nats(double nats) { return nats * kLog2e; }
inline double nats_from_bits(double bits) { return bits * kLn2; }

// Sum p*log(p/q) in nats over a common finite support; 0*log(0/q) = 0.
template <typename D1, typename D2>
double kl_nats(const Eigen::ArrayBase<D1>& p, const Eigen::ArrayBase<D2>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_nats: support mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = p[i];
    if (pi > 0.0) acc += pi * (std::log(pi) - std::log(q[i]));
  }
  return acc;
}

template <typename D1, typename D2>
double kl_bits(const Eigen::ArrayBase<D1>& p, const Eigen::ArrayBase<D2>& q) {
  return bits_from_nats(kl_nats(p, q));
}

// (1/2) sum |p - q|, in [0,1] for probability vectors.
template <typename D1, typename D2>
double total_variation(const Eigen::ArrayBase<D1>& p, const Eigen::ArrayBase<D2>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("total_variation: support mismatch");
  return 0.5 * (p.derived() - q.derived()).abs().sum();
}

template <typename D>
double entropy_nats(const Eigen::ArrayBase<D>& p) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) acc -= p[i] * std::log(p[i]);
  return acc;
}

template <typename D>
double log_sum_exp(const Eigen::ArrayBase<D>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.derived() - m).exp().sum());
}

// Closed-form divergence between Poisson laws with the given means, in bits.
inline double kl_poisson_bits(double mu1, double mu2) {
  if (mu1 <= 0.0 || mu2 <= 0.0) throw std::invalid_argument("kl_poisson_bits: means must be positive");
  return bits_from_nats(mu1 * std::log(mu1 / mu2) + (mu2 - mu1));
}

// TV <= sqrt(D/2) with D in nats; clamped to the trivial bound 1.
inline double pinsker_tv_bound(double kl_nats_value) {
  if (kl_nats_value < 0.0) throw std::invalid_argument("pinsker_tv_bound: negative divergence");
  return std::min(1.0, std::sqrt(0.5 * kl_nats_value));
}

// 95% Wilson score interval for x successes in n trials.
struct WilsonInterval {
  double lower = 0.0;
  double upper = 1.0;
};

inline WilsonInterval wilson_interval(long successes, long trials, double z = 1.959963984540054) {
  if (trials <= 0) return {};
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = phat + z2 / (2.0 * n);
  const double half = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n));
  return {std::max(0.0, (center - half) / denom), std::min(1.0, (center + half) / denom)};
}

}  // namespace dtpc
