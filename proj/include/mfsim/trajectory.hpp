#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "mfsim/model_zoo.hpp"

namespace mfsim {

/// Sampled (t, m_t[, centred covariance]) records, shared by the particle
/// simulator and the reduced flow.
struct MeanTrajectory {
  std::size_t dim = 0;
  std::vector<double> times;
  std::vector<Vec> means;
  /// Either empty or one row-major d x d matrix per record.
  std::vector<Vec> cov;

  std::size_t size() const noexcept { return times.size(); }
  bool has_cov() const noexcept { return !cov.empty(); }
  void append(double t, Vec mean, Vec covariance = {});
  /// Throws NumericError unless times are strictly increasing and all values finite.
  void validate() const;
};

/// Text of a double with 17 significant digits (printf "%.17g").
std::string format_double(double v);

/// CSV with header "t,m1,...,md[,c11,c12,...,cdd]", one record per row.
void write_csv(const MeanTrajectory& traj, std::ostream& os);
void write_csv(const MeanTrajectory& traj, const std::string& path);
MeanTrajectory read_csv(std::istream& is);
MeanTrajectory read_csv_file(const std::string& path);

/// Polar read-out of the first two components about `center`: radius and the
/// continuously unwrapped angle for every record.
struct PolarTrace {
  std::vector<double> times;
  std::vector<double> radius;
  std::vector<double> angle;
};
PolarTrace polar_readout(const MeanTrajectory& traj, const Vec& center);

/// Signed number of full turns about `center` made by records with t >= t_from.
double winding_number(const MeanTrajectory& traj, const Vec& center, double t_from);

/// Sup over common record times of |a.mean - b.mean|; records are matched by
/// time with linear interpolation of `b`.
double sup_mean_gap(const MeanTrajectory& a, const MeanTrajectory& b);

}  // namespace mfsim
