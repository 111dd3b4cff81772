#include "mfsim/model_zoo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mfsim/errors.hpp"

namespace mfsim {

void VectorField::closed_average(std::span<const double>, std::span<const double>,
                                 std::span<double>) const {
  throw DomainError("model has no closed-form Gaussian average");
}

Vec ModelSpec::eval_F(const Vec& x) const {
  if (x.size() != dim()) throw DomainError("eval_F: dimension mismatch");
  Vec out(dim());
  field->eval(x, out);
  return out;
}

Eigen::MatrixXd ModelSpec::eval_DF(const Vec& x) const {
  if (x.size() != dim()) throw DomainError("eval_DF: dimension mismatch");
  const auto d = static_cast<Eigen::Index>(dim());
  Vec buf(dim() * dim());
  field->jacobian(x, buf);
  Eigen::MatrixXd J(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) J(i, j) = buf[static_cast<std::size_t>(i * d + j)];
  return J;
}

std::optional<Vec> ModelSpec::closed_avg(const Vec& m, const Vec& varpi) const {
  if (!field->has_closed_average()) return std::nullopt;
  if (m.size() != dim() || varpi.size() != dim())
    throw DomainError("closed_avg: dimension mismatch");
  Vec out(dim());
  field->closed_average(m, varpi, out);
  return out;
}

namespace {

// F_{u,a,b,tau}(x, y) = (u x - x^3/3 - y, (x + a - b y) / tau).
// Averaging against N(m, diag(varpi)) only shifts u to u - varpi_1.
class FitzHughNagumo final : public VectorField {
 public:
  FitzHughNagumo(double u, double a, double b, double tau) : u_(u), a_(a), b_(b), tau_(tau) {}
  std::size_t dim() const override { return 2; }
  void eval(std::span<const double> x, std::span<double> out) const override {
    out[0] = u_ * x[0] - x[0] * x[0] * x[0] / 3.0 - x[1];
    out[1] = (x[0] + a_ - b_ * x[1]) / tau_;
  }
  void jacobian(std::span<const double> x, std::span<double> out) const override {
    out[0] = u_ - x[0] * x[0];
    out[1] = -1.0;
    out[2] = 1.0 / tau_;
    out[3] = -b_ / tau_;
  }
  bool has_closed_average() const override { return true; }
  void closed_average(std::span<const double> m, std::span<const double> varpi,
                      std::span<double> out) const override {
    const double u = u_ - varpi[0];
    out[0] = u * m[0] - m[0] * m[0] * m[0] / 3.0 - m[1];
    out[1] = (m[0] + a_ - b_ * m[1]) / tau_;
  }
  int polynomial_degree() const override { return 3; }

 private:
  double u_, a_, b_, tau_;
};

// F(x, y) = (x (a - r^2) - omega y, y (a - r^2) + omega x); in polar form
// r' = r (a - r^2), theta' = omega.
class StuartLandau final : public VectorField {
 public:
  StuartLandau(double a, double omega) : a_(a), omega_(omega) {}
  std::size_t dim() const override { return 2; }
  void eval(std::span<const double> x, std::span<double> out) const override {
    const double g = a_ - (x[0] * x[0] + x[1] * x[1]);
    out[0] = x[0] * g - omega_ * x[1];
    out[1] = x[1] * g + omega_ * x[0];
  }
  void jacobian(std::span<const double> x, std::span<double> out) const override {
    const double g = a_ - (x[0] * x[0] + x[1] * x[1]);
    out[0] = g - 2.0 * x[0] * x[0];
    out[1] = -2.0 * x[0] * x[1] - omega_;
    out[2] = -2.0 * x[0] * x[1] + omega_;
    out[3] = g - 2.0 * x[1] * x[1];
  }
  bool has_closed_average() const override { return true; }
  // E[x^3] = m^3 + 3 m v,  E[x y^2] = m_x (m_y^2 + v_y).
  // With equal varpi this is the same model with a replaced by a - 4 varpi.
  void closed_average(std::span<const double> m, std::span<const double> v,
                      std::span<double> out) const override {
    const double r2 = m[0] * m[0] + m[1] * m[1];
    out[0] = m[0] * (a_ - r2 - 3.0 * v[0] - v[1]) - omega_ * m[1];
    out[1] = m[1] * (a_ - r2 - v[0] - 3.0 * v[1]) + omega_ * m[0];
  }
  int polynomial_degree() const override { return 3; }

 private:
  double a_, omega_;
};

// F(x, y) = (x (1 - r^2) - (omega - b y) y, y (1 - r^2) + (omega - b y) x);
// polar form r' = r (1 - r^2), theta' = omega - b r sin(theta).
class StuartLandauModified final : public VectorField {
 public:
  StuartLandauModified(double omega, double b) : omega_(omega), b_(b) {}
  std::size_t dim() const override { return 2; }
  void eval(std::span<const double> x, std::span<double> out) const override {
    const double g = 1.0 - (x[0] * x[0] + x[1] * x[1]);
    const double w = omega_ - b_ * x[1];
    out[0] = x[0] * g - w * x[1];
    out[1] = x[1] * g + w * x[0];
  }
  void jacobian(std::span<const double> x, std::span<double> out) const override {
    const double g = 1.0 - (x[0] * x[0] + x[1] * x[1]);
    out[0] = g - 2.0 * x[0] * x[0];
    out[1] = -2.0 * x[0] * x[1] - omega_ + 2.0 * b_ * x[1];
    out[2] = -2.0 * x[0] * x[1] + omega_ - b_ * x[1];
    out[3] = g - 2.0 * x[1] * x[1] - b_ * x[0];
  }
  bool has_closed_average() const override { return true; }
  // Extra constant b varpi_y in the first component comes from E[b y^2].
  void closed_average(std::span<const double> m, std::span<const double> v,
                      std::span<double> out) const override {
    const double r2 = m[0] * m[0] + m[1] * m[1];
    const double w = omega_ - b_ * m[1];
    out[0] = m[0] * (1.0 - r2 - 3.0 * v[0] - v[1]) - w * m[1] + b_ * v[1];
    out[1] = m[1] * (1.0 - r2 - v[0] - 3.0 * v[1]) + w * m[0];
  }
  int polynomial_degree() const override { return 3; }

 private:
  double omega_, b_;
};

// F(x, y) = (x^2 - a, -b y): saddle-node at a = 0.
class SaddleNodeToy final : public VectorField {
 public:
  SaddleNodeToy(double a, double b) : a_(a), b_(b) {}
  std::size_t dim() const override { return 2; }
  void eval(std::span<const double> x, std::span<double> out) const override {
    out[0] = x[0] * x[0] - a_;
    out[1] = -b_ * x[1];
  }
  void jacobian(std::span<const double> x, std::span<double> out) const override {
    out[0] = 2.0 * x[0];
    out[1] = 0.0;
    out[2] = 0.0;
    out[3] = -b_;
  }
  bool has_closed_average() const override { return true; }
  void closed_average(std::span<const double> m, std::span<const double> v,
                      std::span<double> out) const override {
    out[0] = m[0] * m[0] + v[0] - a_;
    out[1] = -b_ * m[1];
  }
  int polynomial_degree() const override { return 2; }

 private:
  double a_, b_;
};

// F(v) = v (1 - |v|^2) in any dimension.
class CuckerSmale final : public VectorField {
 public:
  explicit CuckerSmale(std::size_t d) : d_(d) {}
  std::size_t dim() const override { return d_; }
  void eval(std::span<const double> x, std::span<double> out) const override {
    double n2 = 0.0;
    for (std::size_t i = 0; i < d_; ++i) n2 += x[i] * x[i];
    for (std::size_t i = 0; i < d_; ++i) out[i] = x[i] * (1.0 - n2);
  }
  void jacobian(std::span<const double> x, std::span<double> out) const override {
    double n2 = 0.0;
    for (std::size_t i = 0; i < d_; ++i) n2 += x[i] * x[i];
    for (std::size_t i = 0; i < d_; ++i)
      for (std::size_t j = 0; j < d_; ++j)
        out[i * d_ + j] = (i == j ? 1.0 - n2 : 0.0) - 2.0 * x[i] * x[j];
  }
  bool has_closed_average() const override { return true; }
  // E[v_i |v|^2] = m_i (|m|^2 + 2 varpi_i + sum_j varpi_j).
  void closed_average(std::span<const double> m, std::span<const double> v,
                      std::span<double> out) const override {
    double n2 = 0.0, vsum = 0.0;
    for (std::size_t i = 0; i < d_; ++i) {
      n2 += m[i] * m[i];
      vsum += v[i];
    }
    for (std::size_t i = 0; i < d_; ++i) out[i] = m[i] * (1.0 - n2 - 2.0 * v[i] - vsum);
  }
  int polynomial_degree() const override { return 3; }

 private:
  std::size_t d_;
};

class FunctionField final : public VectorField {
 public:
  FunctionField(std::size_t d, FieldFn f, FieldFn jac, int degree)
      : d_(d), f_(std::move(f)), jac_(std::move(jac)), degree_(degree) {}
  std::size_t dim() const override { return d_; }
  void eval(std::span<const double> x, std::span<double> out) const override { f_(x, out); }
  void jacobian(std::span<const double> x, std::span<double> out) const override {
    if (jac_) {
      jac_(x, out);
      return;
    }
    Vec xp(x.begin(), x.end()), fp(d_), fm(d_);
    for (std::size_t j = 0; j < d_; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
      xp[j] = x[j] + h;
      f_(xp, fp);
      xp[j] = x[j] - h;
      f_(xp, fm);
      xp[j] = x[j];
      for (std::size_t i = 0; i < d_; ++i) out[i * d_ + j] = (fp[i] - fm[i]) / (2.0 * h);
    }
  }
  int polynomial_degree() const override { return degree_; }

 private:
  std::size_t d_;
  FieldFn f_, jac_;
  int degree_;
};

struct Registration {
  const char* name;
  std::vector<std::string> keys;
};

const std::vector<Registration>& registry() {
  static const std::vector<Registration> table = {
      {"fhn", {"u", "a", "b", "tau"}},
      {"stuart_landau", {"a", "omega"}},
      {"stuart_landau_modified", {"omega", "b"}},
      {"saddle_node_toy", {"a", "b"}},
      {"cucker_smale", {"d"}},
  };
  return table;
}

}  // namespace

std::vector<std::string> model_names() {
  std::vector<std::string> out;
  for (const auto& r : registry()) out.emplace_back(r.name);
  return out;
}

std::vector<std::string> model_param_keys(const std::string& name) {
  for (const auto& r : registry())
    if (name == r.name) return r.keys;
  throw ConfigError("unknown model '" + name + "'");
}

ModelSpec make_model(const std::string& name, const ParamMap& params) {
  const auto keys = model_param_keys(name);
  std::vector<std::string> errors;
  for (const auto& [key, value] : params) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      errors.push_back("model '" + name + "' has no parameter '" + key + "'");
    else if (!std::isfinite(value))
      errors.push_back("model parameter '" + key + "' must be finite");
  }
  ParamMap full = params;
  if (name == "cucker_smale" && !full.contains("d")) full["d"] = 1.0;
  for (const auto& key : keys)
    if (!full.contains(key)) errors.push_back("model '" + name + "' requires parameter '" + key + "'");
  if (!errors.empty()) throw ConfigError(std::move(errors));

  ModelSpec spec{name, full, nullptr};
  if (name == "fhn") {
    if (!(full["tau"] > 0.0)) throw ConfigError("fhn requires tau > 0");
    spec.field = std::make_shared<FitzHughNagumo>(full["u"], full["a"], full["b"], full["tau"]);
  } else if (name == "stuart_landau") {
    spec.field = std::make_shared<StuartLandau>(full["a"], full["omega"]);
  } else if (name == "stuart_landau_modified") {
    spec.field = std::make_shared<StuartLandauModified>(full["omega"], full["b"]);
  } else if (name == "saddle_node_toy") {
    spec.field = std::make_shared<SaddleNodeToy>(full["a"], full["b"]);
  } else {
    const double d = full["d"];
    if (!(d >= 1.0) || d != std::floor(d) || d > 64.0)
      throw ConfigError("cucker_smale requires an integer dimension 1 <= d <= 64");
    spec.field = std::make_shared<CuckerSmale>(static_cast<std::size_t>(d));
  }
  return spec;
}

ModelSpec make_custom_model(std::string name, std::size_t d, FieldFn f, FieldFn jac,
                            int polynomial_degree) {
  if (d == 0) throw ConfigError("custom model needs d >= 1");
  if (!f) throw ConfigError("custom model needs a field function");
  return ModelSpec{std::move(name), {},
                   std::make_shared<FunctionField>(d, std::move(f), std::move(jac),
                                                   polynomial_degree)};
}

}  // namespace mfsim
