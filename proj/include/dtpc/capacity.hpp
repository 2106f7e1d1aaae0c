#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "dtpc/channel.hpp"
#include "dtpc/input_dist.hpp"

namespace dtpc {

struct CapacitySolveOptions {
  int grid_points = 2000;
  double ba_gap_tol_bits = 1e-6;
  double kkt_tol_bits = 1e-4;
  double mass_tol = 1e-9;            // prune masses below this
  double merge_tol_factor = 1e-4;    // merge support points closer than factor * p_max
  long max_iterations = 2'000'000;   // total multiplicative sweeps across all stages
  int verification_grid = 10001;
  bool refine_support = true;
  int secrecy_restarts = 8;
  std::uint64_t restart_seed = 0x5eedULL;
};

struct CapacityResult {
  double capacity_bits;
  DiscreteInputDistribution distribution;
  double mu_bits;                    // multiplier of the mean-power constraint, bits per unit power
  double kkt_max_violation_bits;     // max over the verification grid of -L(mu, x, P*)
  double kkt_support_residual_bits;  // max over support of |L(mu, x_j, P*)|
  double ba_gap_bits;                // final upper - lower bracket
  long iterations;
  bool certified;
};

// I(X;Y) = sum_j p_j D(W(.|x_j) || P_Y), in bits, on the truncated support.
double mutual_information_bits(const DiscreteInputDistribution& dist, const PoissonChannel& ch);

// L(mu, x, P_X) = I(X;Y) + mu (x - p_avg) - D(W(.|x) || P_Y), in bits.
double lagrangian_bits(double mu_bits, double x, const DiscreteInputDistribution& dist,
                       const PoissonChannel& ch, double p_avg);

// One multiplicative update p_j <- p_j exp(D_j - mu x_j) / Z on a fixed support.
// lower/upper bracket max_p [I(p) - mu E_p[X]] over that support; upper - lower
// is the Csiszar gap.
struct BaStep {
  DiscreteInputDistribution next;
  double lower_bits;
  double upper_bits;
};
BaStep ba_step(const DiscreteInputDistribution& dist, const Eigen::MatrixXd& rows, double mu_bits);
BaStep ba_step(const DiscreteInputDistribution& dist, const PoissonChannel& ch, double mu_bits);

// Certified solve of max I(X;Y) over supports in [0, p_max] with E[X] <= p_avg:
// fine-grid multiplicative ascent with a bisected multiplier, support
// extraction, continuous support refinement, and a Kuhn-Tucker check on a
// dense verification grid. A failed check is reported, never hidden.
CapacityResult capacity(const PoissonChannel& ch, const PowerConstraint& pc,
                        const CapacitySolveOptions& options = {});
CapacityResult capacity(const StateChannel& sc, const PowerConstraint& pc,
                        const CapacitySolveOptions& options = {});
// Grid-restricted variant: support stays on the table's input labels.
CapacityResult capacity(const GenericDmc& dmc, const PowerConstraint& pc,
                        const CapacitySolveOptions& options = {});

// max I(X;Y) - I(X;Z) over the same constrained class; requires wp.degraded().
CapacityResult secrecy_capacity(const WiretapPair& wp, const PowerConstraint& pc,
                                const CapacitySolveOptions& options = {});

inline constexpr double kSidPositivityThresholdBits = 1e-6;

struct SidReport {
  CapacityResult main;
  CapacityResult secrecy;
  bool secrecy_positive;
  double sid_capacity_bits;  // exactly main.capacity_bits or exactly 0
};
SidReport sid_capacity(const WiretapPair& wp, const PowerConstraint& pc,
                       const CapacitySolveOptions& options = {});
// State-averaged main channel against a Poisson eavesdropper; requires
// eve.dark_current >= every state's dark current.
SidReport sid_capacity(const StateChannel& main, const PoissonChannel& eve,
                       const PowerConstraint& pc, const CapacitySolveOptions& options = {});

}  // namespace dtpc
