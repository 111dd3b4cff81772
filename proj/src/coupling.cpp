#include "mfsim/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mfsim/errors.hpp"

namespace mfsim {

CouplingSpec::CouplingSpec(std::vector<double> k, std::vector<double> sigma, double delta)
    : k_(std::move(k)), sigma_(std::move(sigma)), delta_(delta) {
  std::vector<std::string> errors;
  if (k_.empty()) errors.emplace_back("coupling.k must not be empty");
  if (k_.size() != sigma_.size()) errors.emplace_back("coupling.k and coupling.sigma differ in length");
  for (double v : k_)
    if (!(v > 0.0) || !std::isfinite(v)) errors.emplace_back("coupling.k entries must be positive");
  for (double v : sigma_)
    if (!(v >= 0.0) || !std::isfinite(v)) errors.emplace_back("coupling.sigma entries must be nonnegative");
  if (!(delta_ >= 0.0) || !std::isfinite(delta_)) errors.emplace_back("coupling.delta must be nonnegative");
  if (!errors.empty()) throw ConfigError(std::move(errors));
  varpi_.resize(k_.size());
  for (std::size_t i = 0; i < k_.size(); ++i) varpi_[i] = sigma_[i] * sigma_[i] / k_[i];
}

CouplingSpec CouplingSpec::from_sigma2(std::vector<double> k, const std::vector<double>& sigma2,
                                       double delta) {
  std::vector<double> sigma(sigma2.size());
  for (std::size_t i = 0; i < sigma2.size(); ++i) {
    if (!(sigma2[i] >= 0.0)) throw ConfigError("coupling.sigma2 entries must be nonnegative");
    sigma[i] = std::sqrt(sigma2[i]);
  }
  return {std::move(k), std::move(sigma), delta};
}

CouplingSpec CouplingSpec::isotropic(std::size_t d, double k, double sigma, double delta) {
  return {std::vector<double>(d, k), std::vector<double>(d, sigma), delta};
}

double CouplingSpec::k_min() const noexcept { return *std::min_element(k_.begin(), k_.end()); }
double CouplingSpec::k_max() const noexcept { return *std::max_element(k_.begin(), k_.end()); }

}  // namespace mfsim
