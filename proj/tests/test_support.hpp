#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mfsim/model_zoo.hpp"

namespace testing {

inline std::vector<double> random_point(std::mt19937_64& rng, std::size_t d, double radius) {
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<double> x(d);
  for (double& v : x) v = u(rng);
  return x;
}

// Central differences with a step scaled to the coordinate.
inline Eigen::MatrixXd fd_jacobian(const std::function<mfsim::Vec(const mfsim::Vec&)>& f,
                                   const mfsim::Vec& x) {
  const std::size_t d = x.size();
  const mfsim::Vec f0 = f(x);
  Eigen::MatrixXd J(static_cast<Eigen::Index>(f0.size()), static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[j]));
    mfsim::Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const auto fp = f(xp), fm = f(xm);
    for (std::size_t i = 0; i < f0.size(); ++i)
      J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (fp[i] - fm[i]) / (2.0 * h);
  }
  return J;
}

inline double max_rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

inline mfsim::ModelSpec fhn_excitable() {
  return mfsim::make_model("fhn", {{"u", 1.0}, {"a", 1.0 / 3.0}, {"b", 1.0}, {"tau", 10.0}});
}

}  // namespace testing
