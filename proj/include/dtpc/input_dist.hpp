#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "dtpc/channel.hpp"

namespace dtpc {

// Finitely supported input law: mass p[j] on point x[j].
struct DiscreteInputDistribution {
  Eigen::VectorXd x;  // strictly increasing support
  Eigen::VectorXd p;  // positive masses summing to 1

  DiscreteInputDistribution(Eigen::VectorXd x_, Eigen::VectorXd p_)
      : x(std::move(x_)), p(std::move(p_)) {
    if (x.size() != p.size() || x.size() == 0)
      throw std::invalid_argument("DiscreteInputDistribution: shape mismatch");
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      if (x[j] < 0.0) throw std::invalid_argument("DiscreteInputDistribution: negative support point");
      if (!(p[j] > 0.0)) throw std::invalid_argument("DiscreteInputDistribution: nonpositive mass");
      if (j > 0 && !(x[j] > x[j - 1]))
        throw std::invalid_argument("DiscreteInputDistribution: support must be strictly increasing");
    }
    if (std::fabs(p.sum() - 1.0) > 1e-10)
      throw std::invalid_argument("DiscreteInputDistribution: masses must sum to 1 within 1e-10");
  }

  int size() const { return static_cast<int>(x.size()); }
  double mean() const { return x.dot(p); }
  double second_moment() const { return x.cwiseProduct(x).dot(p); }
  double max_point() const { return x[x.size() - 1]; }
};

struct OutputDistribution {
  Eigen::ArrayXd pmf;  // over {0, ..., y_max}
};

inline OutputDistribution output_distribution(const DiscreteInputDistribution& dist,
                                              const PoissonChannel& ch) {
  Eigen::ArrayXd q = Eigen::ArrayXd::Zero(ch.y_max + 1);
  for (int j = 0; j < dist.size(); ++j) q += dist.p[j] * ch.row(dist.x[j]);
  return {std::move(q)};
}

}  // namespace dtpc
