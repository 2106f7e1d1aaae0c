#include "dtpc/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dtpc {

int poisson_truncation_bound(double mean, double tail_eps) {
  if (mean < 0.0) throw std::invalid_argument("poisson_truncation_bound: negative mean");
  if (mean == 0.0) return 0;
  const double log_mean = std::log(mean);
  double log_term = -mean;  // log pmf at y = 0
  double cum = std::exp(log_term);
  long y = 0;
  const long hard_cap = 50'000'000;
  while (cum < 1.0 - tail_eps) {
    ++y;
    if (y > hard_cap) throw std::runtime_error("poisson_truncation_bound: cap exceeded");
    log_term += log_mean - std::log(static_cast<double>(y));
    cum += std::exp(log_term);
  }
  return static_cast<int>(y);
}

long poisson_sample(double mean, RngStream& rng) {
  if (mean < 0.0) throw std::invalid_argument("poisson_sample: negative mean");
  if (mean < 30.0) {
    // inversion by sequential search
    const double u = rng.next_unit();
    double term = std::exp(-mean);
    double cum = term;
    long k = 0;
    while (u > cum && k < 3000) {
      ++k;
      term *= mean / static_cast<double>(k);
      cum += term;
    }
    return k;
  }
  // Hormann's transformed rejection with squeeze (PTRS)
  const double b = 0.931 + 2.53 * std::sqrt(mean);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  const double log_mean = std::log(mean);
  for (;;) {
    const double u = rng.next_unit() - 0.5;
    const double v = rng.next_unit();
    const double us = 0.5 - std::fabs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (kf < 0.0) continue;
    const long k = static_cast<long>(kf);
    if (us >= 0.07 && v <= v_r) return k;
    if (us < 0.013 && v > us) continue;
    const double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
    const double rhs = -mean + kf * log_mean - std::lgamma(kf + 1.0);
    if (lhs <= rhs) return k;
  }
}

PoissonChannel PoissonChannel::truncated(double dark_current, double p_max,
                                         double tail_eps, double gain) {
  if (dark_current < 0.0) throw std::invalid_argument("PoissonChannel: negative dark current");
  if (p_max < 0.0) throw std::invalid_argument("PoissonChannel: negative peak power");
  if (gain <= 0.0) throw std::invalid_argument("PoissonChannel: gain must be positive");
  PoissonChannel ch;
  ch.dark_current = dark_current;
  ch.gain = gain;
  // half of the budget is left as slack so row sums stay within tail_eps
  ch.y_max = poisson_truncation_bound(gain * p_max + dark_current, 0.5 * tail_eps);
  return ch;
}

double PoissonChannel::log_pmf(double x, long y) const {
  if (x < 0.0) throw std::invalid_argument("PoissonChannel::log_pmf: negative input");
  if (y < 0) throw std::invalid_argument("PoissonChannel::log_pmf: negative output");
  const double mu = mean(x);
  if (mu == 0.0) return y == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return static_cast<double>(y) * std::log(mu) - mu - std::lgamma(static_cast<double>(y) + 1.0);
}

double PoissonChannel::pmf(double x, long y) const {
  if (y > y_max)
    throw std::out_of_range("PoissonChannel::pmf: y beyond truncation, extend y_max");
  return std::exp(log_pmf(x, y));
}

long PoissonChannel::sample(double x, RngStream& rng) const {
  if (x < 0.0) throw std::invalid_argument("PoissonChannel::sample: negative input");
  return poisson_sample(mean(x), rng);
}

Eigen::ArrayXd PoissonChannel::row(double x) const {
  if (x < 0.0) throw std::invalid_argument("PoissonChannel::row: negative input");
  const double mu = mean(x);
  Eigen::ArrayXd r(y_max + 1);
  if (mu == 0.0) {
    r.setZero();
    r[0] = 1.0;
    return r;
  }
  const double log_mu = std::log(mu);
  double log_term = -mu;
  r[0] = std::exp(log_term);
  for (int y = 1; y <= y_max; ++y) {
    log_term += log_mu - std::log(static_cast<double>(y));
    r[y] = std::exp(log_term);
  }
  return r;
}

double PoissonChannel::truncation_tail(double p_max) const {
  // Poisson upper tails are monotone in the mean, so the largest admissible
  // mean is the worst case.
  return std::max(0.0, 1.0 - row(p_max).sum());
}

PowerConstraint::PowerConstraint(double p_max_, double p_avg_) : p_max(p_max_), p_avg(p_avg_) {
  if (p_max <= 0.0 || p_avg <= 0.0)
    throw std::invalid_argument("PowerConstraint: powers must be positive");
}

StateChannel::StateChannel(std::vector<std::pair<double, PoissonChannel>> s) : states(std::move(s)) {
  if (states.empty()) throw std::invalid_argument("StateChannel: empty state list");
  double total = 0.0;
  for (const auto& [prob, ch] : states) {
    (void)ch;
    if (prob < 0.0) throw std::invalid_argument("StateChannel: negative state probability");
    total += prob;
  }
  if (std::fabs(total - 1.0) > 1e-9)
    throw std::invalid_argument("StateChannel: state probabilities must sum to 1");
}

int StateChannel::y_max() const {
  int m = 0;
  for (const auto& [prob, ch] : states) {
    (void)prob;
    m = std::max(m, ch.y_max);
  }
  return m;
}

Eigen::ArrayXd StateChannel::row(double x) const {
  const int cap = y_max();
  Eigen::ArrayXd r = Eigen::ArrayXd::Zero(cap + 1);
  for (const auto& [prob, ch] : states) {
    if (prob == 0.0) continue;
    Eigen::ArrayXd part = ch.row(x);
    r.head(part.size()) += prob * part;
  }
  return r;
}

GenericDmc::GenericDmc(Eigen::VectorXd inputs_, Eigen::MatrixXd rows_)
    : inputs(std::move(inputs_)), rows(std::move(rows_)) {
  if (inputs.size() != rows.rows() || rows.cols() == 0)
    throw std::invalid_argument("GenericDmc: shape mismatch");
  for (Eigen::Index i = 1; i < inputs.size(); ++i)
    if (!(inputs[i] > inputs[i - 1]))
      throw std::invalid_argument("GenericDmc: input labels must be strictly increasing");
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    if (rows.row(i).minCoeff() < 0.0) throw std::invalid_argument("GenericDmc: negative mass");
    if (std::fabs(rows.row(i).sum() - 1.0) > 1e-12)
      throw std::invalid_argument("GenericDmc: row does not sum to 1 within 1e-12");
  }
}

GenericDmc averaged_channel(const StateChannel& sc, const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("averaged_channel: empty grid");
  Eigen::VectorXd inputs(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) inputs[static_cast<Eigen::Index>(i)] = grid[i];
  Eigen::MatrixXd rows(inputs.size(), sc.y_max() + 1);
  for (Eigen::Index i = 0; i < inputs.size(); ++i) rows.row(i) = sc.row(inputs[i]).matrix();
  return GenericDmc(std::move(inputs), std::move(rows));
}

}  // namespace dtpc
