#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "dtpc/rng.hpp"

namespace dtpc {

// Smallest y_cap with upper-tail mass of Poisson(mean) beyond y_cap below tail_eps.
int poisson_truncation_bound(double mean, double tail_eps);

// Draw from Poisson(mean): sequential inversion below mean 30, transformed
// rejection (Hormann) above. Deterministic given the stream state.
long poisson_sample(double mean, RngStream& rng);

// One-shot counting channel: Y ~ Poisson(gain*x + dark_current). The output
// alphabet is truncated at y_max; truncated() picks y_max so that every
// admissible input keeps at least 1 - tail_eps of its mass on [0, y_max].
struct PoissonChannel {
  double dark_current = 0.0;
  int y_max = 0;
  double gain = 1.0;

  static PoissonChannel truncated(double dark_current, double p_max,
                                  double tail_eps = 1e-12, double gain = 1.0);

  double mean(double x) const { return gain * x + dark_current; }

  // log pmf at arbitrary y >= 0, no truncation applied
  double log_pmf(double x, long y) const;

  // truncated pmf; rejects x < 0 and y > y_max
  double pmf(double x, long y) const;

  long sample(double x, RngStream& rng) const;

  // pmf row over {0, ..., y_max}
  Eigen::ArrayXd row(double x) const;

  // worst-case mass lost to truncation over x in [0, p_max]
  double truncation_tail(double p_max) const;
};

struct PowerConstraint {
  double p_max;
  double p_avg;

  PowerConstraint(double p_max_, double p_avg_);

  // average constraint can only bind when p_avg < p_max
  bool average_can_bind() const { return p_avg < p_max; }
  double effective_avg() const { return p_avg < p_max ? p_avg : p_max; }
};

struct WiretapPair {
  PoissonChannel main;  // legitimate receiver
  PoissonChannel eve;   // eavesdropper

  // Poisson(x + dc_main) + independent Poisson(dc_eve - dc_main) = Poisson(x + dc_eve),
  // so the pair is stochastically degraded exactly when eve's dark current dominates.
  bool degraded() const { return eve.dark_current >= main.dark_current && main.gain == eve.gain; }
};

// Channel with an i.i.d. state unknown to both ends; only the state-averaged
// law matters for capacity.
struct StateChannel {
  std::vector<std::pair<double, PoissonChannel>> states;  // (probability, channel)

  explicit StateChannel(std::vector<std::pair<double, PoissonChannel>> s);

  int y_max() const;
  Eigen::ArrayXd row(double x) const;  // averaged pmf over {0, ..., y_max}
};

// Finite conditional pmf table; rows indexed by real-valued input labels.
struct GenericDmc {
  Eigen::VectorXd inputs;  // strictly increasing labels
  Eigen::MatrixXd rows;    // |inputs| x |outputs|, each row a pmf

  GenericDmc(Eigen::VectorXd inputs_, Eigen::MatrixXd rows_);
};

GenericDmc averaged_channel(const StateChannel& sc, const std::vector<double>& grid);

}  // namespace dtpc
