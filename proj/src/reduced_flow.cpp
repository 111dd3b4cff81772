#include "mfsim/reduced_flow.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mfsim/errors.hpp"
#include "mfsim/particle_sim.hpp"
#include "mfsim/philox.hpp"

namespace mfsim {

AveragedField::AveragedField(ModelSpec model, CouplingSpec coupling, bool use_closed_avg,
                             int quadrature_order)
    : model_(std::move(model)),
      coupling_(std::move(coupling)),
      dim_(model_.dim()),
      closed_(use_closed_avg),
      order_(quadrature_order) {
  if (coupling_.dim() != dim_) throw ConfigError("model and coupling dimensions differ");
  if (closed_ && !model_.has_closed_avg())
    throw ConfigError("model '" + model_.name + "' has no closed-form average");
  x_.resize(dim_);
  f_.resize(dim_);
  if (closed_) return;
  const QuadratureRule rule(order_, dim_);
  nodes_.resize(rule.size() * dim_);
  weights_.resize(rule.size());
  Vec z(dim_);
  for (std::size_t n = 0; n < rule.size(); ++n) {
    weights_[n] = rule.node(n, z);
    for (std::size_t i = 0; i < dim_; ++i)
      nodes_[n * dim_ + i] = std::sqrt(coupling_.varpi()[i]) * z[i];
  }
}

void AveragedField::eval(std::span<const double> m, std::span<double> out) const {
  if (closed_) {
    model_.field->closed_average(m, coupling_.varpi(), out);
    return;
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t n = 0; n < weights_.size(); ++n) {
    for (std::size_t i = 0; i < dim_; ++i) x_[i] = m[i] + nodes_[n * dim_ + i];
    model_.field->eval(x_, f_);
    for (std::size_t i = 0; i < dim_; ++i) out[i] += weights_[n] * f_[i];
  }
}

Vec AveragedField::operator()(const Vec& m) const {
  Vec out(dim_);
  eval(m, out);
  return out;
}

Eigen::MatrixXd AveragedField::jacobian(const Vec& m) const {
  return average_field_jacobian(model_, coupling_, m, QuadratureRule(order_, dim_));
}

void ReducedConfig::validate() const {
  std::vector<std::string> errs;
  if (!model.field) {
    errs.emplace_back("model is not set");
  } else {
    if (model.dim() != coupling.dim()) errs.emplace_back("model and coupling dimensions differ");
    if (m0.size() != model.dim()) errs.emplace_back("m0 has the wrong dimension");
    if (use_closed_avg && !model.has_closed_avg())
      errs.push_back("model '" + model.name + "' has no closed-form average");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) errs.emplace_back("dt must be > 0");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) errs.emplace_back("t_end must be >= 0");
  if (record_every < 1) errs.emplace_back("record_every must be >= 1");
  if (quadrature_order < 1) errs.emplace_back("quadrature order must be >= 1");
  if (!errs.empty()) throw ConfigError(std::move(errs));
}

MeanTrajectory integrate(const ReducedConfig& config) {
  config.validate();
  const AveragedField rhs(config.model, config.coupling, config.use_closed_avg,
                          config.quadrature_order);
  return integrate(rhs, config.m0, config.dt, config.t_end, config.record_every);
}

MeanTrajectory integrate(const AveragedField& rhs, const Vec& m0, double dt, double t_end,
                         std::size_t record_every) {
  const std::size_t d = rhs.dim();
  if (m0.size() != d) throw DomainError("integrate: m0 has the wrong dimension");
  if (record_every < 1) throw DomainError("integrate: record_every must be >= 1");
  const double delta = rhs.coupling().delta();
  const auto nsteps = static_cast<std::uint64_t>(std::llround(t_end / dt));
  Vec m = m0, k1(d), k2(d), k3(d), k4(d), tmp(d);
  MeanTrajectory traj;
  traj.dim = d;
  traj.append(0.0, m);
  for (std::uint64_t s = 1; s <= nsteps; ++s) {
    rhs.eval(m, k1);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = m[i] + 0.5 * dt * delta * k1[i];
    rhs.eval(tmp, k2);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = m[i] + 0.5 * dt * delta * k2[i];
    rhs.eval(tmp, k3);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = m[i] + dt * delta * k3[i];
    rhs.eval(tmp, k4);
    double norm2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      m[i] += dt * delta * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
      norm2 += m[i] * m[i];
    }
    const double t = static_cast<double>(s) * dt;
    if (!(norm2 <= kBlowUpThreshold * kBlowUpThreshold))
      throw BlowUpError("reduced flow left |m| <= 1e6 at t = " + format_double(t), t, 0);
    if (s % record_every == 0 || s == nsteps) traj.append(t, m);
  }
  return traj;
}

BoundaryReport boundary_inward_test(const ModelSpec& model, const CouplingSpec& coupling,
                                    double radius, std::size_t samples, int quadrature_order) {
  const std::size_t d = model.dim();
  const AveragedField rhs(model, coupling, false, quadrature_order);
  BoundaryReport rep;
  rep.radius = radius;
  rep.max_normal_drift = -std::numeric_limits<double>::infinity();
  Vec n(d), m(d), f(d);
  const std::size_t count = d == 1 ? 2 : samples;
  for (std::size_t s = 0; s < count; ++s) {
    if (d == 1) {
      n[0] = s == 0 ? 1.0 : -1.0;
    } else if (d == 2) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(s) / static_cast<double>(count);
      n[0] = std::cos(a);
      n[1] = std::sin(a);
    } else {
      double norm2 = 0.0;
      for (std::size_t j = 0; j < d; j += 2) {
        const auto z = normal_pair(0, s, 0, static_cast<std::uint32_t>(j / 2), StreamDomain::kInit);
        for (std::size_t jj = j; jj < std::min(j + 2, d); ++jj) {
          n[jj] = z[jj - j];
          norm2 += n[jj] * n[jj];
        }
      }
      for (double& v : n) v /= std::sqrt(norm2);
    }
    for (std::size_t i = 0; i < d; ++i) m[i] = radius * n[i];
    rhs.eval(m, f);
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += n[i] * f[i];
    if (dot > rep.max_normal_drift) {
      rep.max_normal_drift = dot;
      rep.argmax = m;
    }
  }
  rep.samples = count;
  rep.strictly_inward = rep.max_normal_drift < 0.0;
  return rep;
}

}  // namespace mfsim
