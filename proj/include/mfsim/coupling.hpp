#pragma once

#include <cstddef>
#include <vector>

namespace mfsim {

/// Diagonal interaction strength K, diagonal noise amplitude sigma and the
/// slow scale delta of the particle system
///   dX_i = (delta F(X_i) - K (X_i - mean)) dt + sqrt(2) sigma dB_i.
class CouplingSpec {
 public:
  CouplingSpec() = default;
  /// Throws ConfigError unless every k_i > 0, sigma_i >= 0, delta >= 0 and the
  /// two vectors have the same non-zero length.
  CouplingSpec(std::vector<double> k, std::vector<double> sigma, double delta);

  static CouplingSpec from_sigma2(std::vector<double> k, const std::vector<double>& sigma2,
                                  double delta);
  /// Same k, sigma and delta on each of the d axes.
  static CouplingSpec isotropic(std::size_t d, double k, double sigma, double delta);

  std::size_t dim() const noexcept { return k_.size(); }
  const std::vector<double>& k() const noexcept { return k_; }
  const std::vector<double>& sigma() const noexcept { return sigma_; }
  double delta() const noexcept { return delta_; }
  /// varpi_i = sigma_i^2 / k_i, the variance of the stationary Gaussian q_0 on axis i.
  const std::vector<double>& varpi() const noexcept { return varpi_; }
  double k_min() const noexcept;
  double k_max() const noexcept;

  CouplingSpec with_delta(double delta) const { return {k_, sigma_, delta}; }

  bool operator==(const CouplingSpec&) const = default;

 private:
  std::vector<double> k_;
  std::vector<double> sigma_;
  double delta_ = 0.0;
  std::vector<double> varpi_;
};

}  // namespace mfsim
