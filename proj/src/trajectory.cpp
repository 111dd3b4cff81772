#include "mfsim/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mfsim/errors.hpp"

namespace mfsim {

void MeanTrajectory::append(double t, Vec mean, Vec covariance) {
  if (dim == 0) dim = mean.size();
  if (mean.size() != dim) throw DomainError("MeanTrajectory::append: dimension mismatch");
  if (!covariance.empty() && covariance.size() != dim * dim)
    throw DomainError("MeanTrajectory::append: covariance must be d x d");
  if (!covariance.empty() && cov.size() != times.size())
    throw DomainError("MeanTrajectory::append: covariance must be recorded for every sample");
  times.push_back(t);
  means.push_back(std::move(mean));
  if (!covariance.empty()) cov.push_back(std::move(covariance));
}

void MeanTrajectory::validate() const {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i])) throw NumericError("trajectory time is not finite");
    if (i > 0 && !(times[i] > times[i - 1]))
      throw NumericError("trajectory times are not strictly increasing");
    for (double v : means[i])
      if (!std::isfinite(v)) throw NumericError("trajectory mean is not finite", means[i]);
  }
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_csv(const MeanTrajectory& traj, std::ostream& os) {
  const std::size_t d = traj.dim;
  os << 't';
  for (std::size_t i = 1; i <= d; ++i) os << ",m" << i;
  if (traj.has_cov())
    for (std::size_t i = 1; i <= d; ++i)
      for (std::size_t j = 1; j <= d; ++j) os << ",c" << i << j;
  os << '\n';
  for (std::size_t r = 0; r < traj.size(); ++r) {
    os << format_double(traj.times[r]);
    for (double v : traj.means[r]) os << ',' << format_double(v);
    if (traj.has_cov())
      for (double v : traj.cov[r]) os << ',' << format_double(v);
    os << '\n';
  }
}

void write_csv(const MeanTrajectory& traj, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_csv(traj, os);
  if (!os) throw Error("write to '" + path + "' failed");
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  return out;
}

double parse_number(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) throw Error("malformed number '" + s + "'");
  return v;
}

}  // namespace

MeanTrajectory read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error("empty trajectory CSV");
  const auto header = split(line, ',');
  if (header.empty() || header[0] != "t") throw Error("trajectory CSV must start with column 't'");
  std::size_t d = 0;
  while (d + 1 < header.size() && header[d + 1] == "m" + std::to_string(d + 1)) ++d;
  const std::size_t extra = header.size() - 1 - d;
  if (d == 0 || (extra != 0 && extra != d * d)) throw Error("unrecognised trajectory CSV header");
  MeanTrajectory traj;
  traj.dim = d;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) throw Error("trajectory CSV row has the wrong width");
    Vec m(d), c;
    for (std::size_t i = 0; i < d; ++i) m[i] = parse_number(cells[1 + i]);
    for (std::size_t i = 0; i < extra; ++i) c.push_back(parse_number(cells[1 + d + i]));
    traj.append(parse_number(cells[0]), std::move(m), std::move(c));
  }
  return traj;
}

MeanTrajectory read_csv_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  return read_csv(is);
}

PolarTrace polar_readout(const MeanTrajectory& traj, const Vec& center) {
  if (traj.dim < 2 || center.size() < 2) throw DomainError("polar read-out needs d >= 2");
  PolarTrace out;
  out.times = traj.times;
  out.radius.reserve(traj.size());
  out.angle.reserve(traj.size());
  double prev = 0.0;
  for (std::size_t r = 0; r < traj.size(); ++r) {
    const double dx = traj.means[r][0] - center[0];
    const double dy = traj.means[r][1] - center[1];
    out.radius.push_back(std::hypot(dx, dy));
    double a = std::atan2(dy, dx);
    if (r > 0) {
      // Unwrap relative to the previous sample.
      a = prev + std::remainder(a - prev, 2.0 * std::numbers::pi);
    }
    out.angle.push_back(a);
    prev = a;
  }
  return out;
}

double winding_number(const MeanTrajectory& traj, const Vec& center, double t_from) {
  const PolarTrace p = polar_readout(traj, center);
  std::size_t first = 0;
  while (first < p.times.size() && p.times[first] < t_from) ++first;
  if (first + 1 >= p.times.size()) return 0.0;
  return (p.angle.back() - p.angle[first]) / (2.0 * std::numbers::pi);
}

double sup_mean_gap(const MeanTrajectory& a, const MeanTrajectory& b) {
  if (a.dim != b.dim) throw DomainError("sup_mean_gap: dimension mismatch");
  if (b.size() == 0) throw DomainError("sup_mean_gap: empty trajectory");
  double gap = 0.0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a.times[i];
    if (t < b.times.front() || t > b.times.back()) continue;
    while (j + 1 < b.size() && b.times[j + 1] < t) ++j;
    Vec mb = b.means[j];
    if (j + 1 < b.size() && b.times[j + 1] > b.times[j]) {
      const double w = std::clamp((t - b.times[j]) / (b.times[j + 1] - b.times[j]), 0.0, 1.0);
      for (std::size_t k = 0; k < a.dim; ++k) mb[k] += w * (b.means[j + 1][k] - b.means[j][k]);
    }
    double s = 0.0;
    for (std::size_t k = 0; k < a.dim; ++k) s += (a.means[i][k] - mb[k]) * (a.means[i][k] - mb[k]);
    gap = std::max(gap, std::sqrt(s));
  }
  return gap;
}

}  // namespace mfsim
