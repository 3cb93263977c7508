#include "phidep/copula.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "phidep/errors.hpp"
#include "phidep/parallel.hpp"
#include "phidep/stats.hpp"

namespace phidep {

namespace {

constexpr int kMaxDensityDim = 6;
constexpr double kBoundaryEps = 1e-12;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_interior(const Eigen::VectorXd& u) {
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (!(u[i] > kBoundaryEps && u[i] < 1.0 - kBoundaryEps))
      throw ValidationError("copula density needs u at least 1e-12 away from {0,1}");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string family_name(ArchimedeanFamily f) {
  return f == ArchimedeanFamily::Clayton ? "clayton" : "gumbel";
}

ArchimedeanFamily parse_family(const std::string& name) {
  if (name == "clayton") return ArchimedeanFamily::Clayton;
  if (name == "gumbel") return ArchimedeanFamily::Gumbel;
  throw ValidationError("unknown Archimedean family '" + name + "'");
}

void validate_theta(ArchimedeanFamily f, double theta) {
  if (f == ArchimedeanFamily::Clayton && !(theta > 0.0))
    throw ValidationError("Clayton theta must be > 0");
  if (f == ArchimedeanFamily::Gumbel && !(theta >= 1.0))
    throw ValidationError("Gumbel theta must be >= 1");
}

double generator_value(ArchimedeanFamily f, double theta, double t) {
  validate_theta(f, theta);
  if (!(t >= 0.0)) throw ValidationError("generator argument must be >= 0");
  if (f == ArchimedeanFamily::Clayton) return std::pow(1.0 + t, -1.0 / theta);
  return std::exp(-std::pow(t, 1.0 / theta));
}

namespace {

// Gumbel psi^(d)(t) = psi(t) t^-d P_d(x), x = t^(1/theta), with
// P_{d+1} = a x P_d' - (a x + d) P_d and P_1 = -a x (a = 1/theta). The
// coefficients of P_d all carry sign (-1)^d, so evaluation never cancels.
std::vector<double> gumbel_poly_coeffs(double a, int d) {
  std::vector<double> p{0.0, -a};
  for (int k = 1; k < d; ++k) {
    std::vector<double> next(p.size() + 1, 0.0);
    for (std::size_t j = 0; j < p.size(); ++j) {
      next[j] += (a * static_cast<double>(j) - k) * p[j];
      next[j + 1] += -a * p[j];
    }
    p = std::move(next);
  }
  return p;
}

void check_order(int order) {
  if (order < 0 || order > kMaxDensityDim)
    throw ValidationError("generator derivatives are available up to order 6");
}

}  // namespace

double generator_log_derivative_abs(ArchimedeanFamily f, double theta, double t, int order) {
  validate_theta(f, theta);
  check_order(order);
  if (!(t > 0.0)) throw ValidationError("generator derivative needs t > 0");
  if (f == ArchimedeanFamily::Clayton) {
    double acc = 0.0;
    for (int r = 0; r < order; ++r) acc += std::log(1.0 / theta + r);
    return acc + (-1.0 / theta - order) * std::log1p(t);
  }
  double a = 1.0 / theta;
  if (order == 0) return -std::pow(t, a);
  // |P_order(t^a)| / t^order in log space: sum_j |p_j| t^(a j - order) with
  // every exponent <= 0 for t >= 1, and at theta = 1 the single surviving
  // term makes the result exactly -t^a.
  auto p = gumbel_poly_coeffs(a, order);
  double logt = std::log(t);
  double mx = kNegInf;
  std::vector<double> lg(p.size(), kNegInf);
  for (std::size_t j = 1; j < p.size(); ++j) {
    if (p[j] == 0.0) continue;
    lg[j] = std::log(std::fabs(p[j])) + (a * static_cast<double>(j) - order) * logt;
    mx = std::max(mx, lg[j]);
  }
  double acc = 0.0;
  for (std::size_t j = 1; j < p.size(); ++j)
    if (lg[j] > kNegInf) acc += std::exp(lg[j] - mx);
  return -std::pow(t, a) + mx + std::log(acc);
}

double generator_derivative(ArchimedeanFamily f, double theta, double t, int order) {
  if (order == 0) return generator_value(f, theta, t);
  double sign = (order % 2 == 0) ? 1.0 : -1.0;
  return sign * std::exp(generator_log_derivative_abs(f, theta, t, order));
}

double generator_inverse(ArchimedeanFamily f, double theta, double u) {
  validate_theta(f, theta);
  if (!(u > 0.0 && u <= 1.0)) throw ValidationError("generator inverse needs u in (0,1]");
  if (f == ArchimedeanFamily::Clayton) return std::pow(u, -theta) - 1.0;
  return std::pow(-std::log(u), theta);
}

double generator_inverse_log_derivative_abs(ArchimedeanFamily f, double theta, double u) {
  validate_theta(f, theta);
  if (!(u > 0.0 && u < 1.0)) throw ValidationError("generator inverse derivative needs u in (0,1)");
  if (f == ArchimedeanFamily::Clayton) return std::log(theta) - (theta + 1.0) * std::log(u);
  return std::log(theta) + (theta - 1.0) * std::log(-std::log(u)) - std::log(u);
}

namespace {

// Partial Bell polynomial B_{d,m}(x_1..x_d) by the standard recursion. The
// arguments alternate in sign here, but every monomial of B_{d,m} carries the
// same sign (-1)^(d-m), so there is still no cancellation.
double bell_partial(int d, int m, const std::vector<double>& xs) {
  std::vector<std::vector<double>> b(static_cast<std::size_t>(d + 1),
                                     std::vector<double>(static_cast<std::size_t>(m + 1), 0.0));
  b[0][0] = 1.0;
  for (int dd = 1; dd <= d; ++dd) {
    double binom = 1.0;
    for (int mm = 1; mm <= std::min(m, dd); ++mm) {
      double s = 0.0;
      binom = 1.0;  // C(dd-1, j-1), updated multiplicatively over j
      for (int j = 1; j <= dd - mm + 1; ++j) {
        s += binom * xs[static_cast<std::size_t>(j - 1)] *
             b[static_cast<std::size_t>(dd - j)][static_cast<std::size_t>(mm - 1)];
        binom *= static_cast<double>(dd - j) / static_cast<double>(j);
      }
      b[static_cast<std::size_t>(dd)][static_cast<std::size_t>(mm)] = s;
    }
  }
  return b[static_cast<std::size_t>(d)][static_cast<std::size_t>(m)];
}

// Derivatives of the nesting function g = psi0^-1 o psi_i: a power function
// t^alpha for Gumbel and (1+t)^alpha - 1 for Clayton, alpha = theta0/theta_i.
std::vector<double> nesting_derivatives(ArchimedeanFamily f, double alpha, double t, int d_max) {
  std::vector<double> xs(static_cast<std::size_t>(d_max));
  double base = f == ArchimedeanFamily::Gumbel ? t : 1.0 + t;
  double coef = 1.0;
  for (int r = 1; r <= d_max; ++r) {
    coef *= alpha - (r - 1);
    xs[static_cast<std::size_t>(r - 1)] = coef * std::pow(base, alpha - r);
  }
  return xs;
}

}  // namespace

double archimedean_log_density(const ArchimedeanCopula& c, const Eigen::VectorXd& u) {
  validate_theta(c.family, c.theta);
  if (c.dim < 1 || c.dim > kMaxDensityDim)
    throw ValidationError("Archimedean density implemented for dimension 1..6");
  if (u.size() != c.dim) throw ValidationError("dimension mismatch in Archimedean density");
  check_interior(u);
  if (c.dim == 1) return 0.0;
  double t = 0.0, log_jac = 0.0;
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    t += generator_inverse(c.family, c.theta, u[j]);
    log_jac += generator_inverse_log_derivative_abs(c.family, c.theta, u[j]);
  }
  return generator_log_derivative_abs(c.family, c.theta, t, c.dim) + log_jac;
}

double archimedean_density(const ArchimedeanCopula& c, const Eigen::VectorXd& u) {
  return std::exp(archimedean_log_density(c, u));
}

double archimedean_cdf(const ArchimedeanCopula& c, const Eigen::VectorXd& u) {
  validate_theta(c.family, c.theta);
  if (u.size() != c.dim) throw ValidationError("dimension mismatch in Archimedean cdf");
  double t = 0.0;
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    if (!(u[j] > 0.0 && u[j] <= 1.0)) return 0.0;
    t += generator_inverse(c.family, c.theta, u[j]);
  }
  return generator_value(c.family, c.theta, t);
}

namespace {

void validate_nested(const NestedArchimedeanCopula& c) {
  if (c.groups.group_count() == 0 ||
      c.groups.group_count() != static_cast<int>(c.child_thetas.size()))
    throw ValidationError("nested copula needs one child theta per group");
  validate_theta(c.family, c.theta0);
  for (double th : c.child_thetas) {
    validate_theta(c.family, th);
    if (c.theta0 > th + 1e-12)
      throw ValidationError("sufficient nesting violated: root theta must satisfy theta0 <= theta_i");
  }
}

}  // namespace

double nested_log_density(const NestedArchimedeanCopula& c, const Eigen::VectorXd& u) {
  validate_nested(c);
  const int q = c.groups.dimension();
  if (q > kMaxDensityDim) throw ValidationError("nested density implemented for total dimension <= 6");
  if (u.size() != q) throw ValidationError("dimension mismatch in nested density");
  check_interior(u);
  const int k = c.groups.group_count();

  // Group sums t_i on the child generator scale, plus the inner Jacobian.
  std::vector<double> t(static_cast<std::size_t>(k), 0.0);
  double log_jac = 0.0, s = 0.0;
  for (int i = 0; i < k; ++i) {
    double thi = c.child_thetas[static_cast<std::size_t>(i)];
    int off = c.groups.offset(i), d = c.groups.sizes[static_cast<std::size_t>(i)];
    double group_jac = 0.0;
    for (int j = 0; j < d; ++j) {
      t[static_cast<std::size_t>(i)] += generator_inverse(c.family, thi, u[off + j]);
      group_jac += generator_inverse_log_derivative_abs(c.family, thi, u[off + j]);
    }
    log_jac += group_jac;
    double alpha = c.theta0 / thi;
    double base = c.family == ArchimedeanFamily::Gumbel ? std::pow(t[static_cast<std::size_t>(i)], alpha)
                                                        : std::pow(1.0 + t[static_cast<std::size_t>(i)], alpha) - 1.0;
    s += base;
  }

  // Sum over per-group Bell orders m_i of psi0^(sum m_i)(s) prod_i B_{d_i,m_i}.
  // All terms share the sign (-1)^q, so a log-sum-exp accumulates them safely.
  std::vector<std::vector<double>> log_bell(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    double alpha = c.theta0 / c.child_thetas[static_cast<std::size_t>(i)];
    int d = c.groups.sizes[static_cast<std::size_t>(i)];
    auto xs = nesting_derivatives(c.family, alpha, t[static_cast<std::size_t>(i)], d);
    log_bell[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(d) + 1, kNegInf);
    for (int m = 1; m <= d; ++m) {
      double b = bell_partial(d, m, xs);
      log_bell[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)] =
          b == 0.0 ? kNegInf : std::log(std::fabs(b));
    }
  }
  std::vector<int> m(static_cast<std::size_t>(k), 1);
  double max_log = kNegInf;
  std::vector<double> logs;
  for (;;) {
    int total_order = 0;
    double lg = 0.0;
    for (int i = 0; i < k; ++i) {
      total_order += m[static_cast<std::size_t>(i)];
      lg += log_bell[static_cast<std::size_t>(i)][static_cast<std::size_t>(m[static_cast<std::size_t>(i)])];
    }
    if (lg > kNegInf)
      lg += generator_log_derivative_abs(c.family, c.theta0, s, total_order);
    logs.push_back(lg);
    max_log = std::max(max_log, lg);
    int i = 0;
    while (i < k && ++m[static_cast<std::size_t>(i)] > c.groups.sizes[static_cast<std::size_t>(i)]) {
      m[static_cast<std::size_t>(i)] = 1;
      ++i;
    }
    if (i == k) break;
  }
  if (max_log == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double lg : logs) acc += std::exp(lg - max_log);
  return max_log + std::log(acc) + log_jac;
}

double nested_density(const NestedArchimedeanCopula& c, const Eigen::VectorXd& u) {
  return std::exp(nested_log_density(c, u));
}

double nested_cdf(const NestedArchimedeanCopula& c, const Eigen::VectorXd& u) {
  validate_nested(c);
  if (u.size() != c.groups.dimension()) throw ValidationError("dimension mismatch in nested cdf");
  double s = 0.0;
  for (int i = 0; i < c.groups.group_count(); ++i) {
    double thi = c.child_thetas[static_cast<std::size_t>(i)];
    int off = c.groups.offset(i), d = c.groups.sizes[static_cast<std::size_t>(i)];
    double t = 0.0;
    for (int j = 0; j < d; ++j) {
      if (!(u[off + j] > 0.0 && u[off + j] <= 1.0)) return 0.0;
      t += generator_inverse(c.family, thi, u[off + j]);
    }
    double alpha = c.theta0 / thi;
    s += c.family == ArchimedeanFamily::Gumbel ? std::pow(t, alpha) : std::pow(1.0 + t, alpha) - 1.0;
  }
  return generator_value(c.family, c.theta0, s);
}

double gaussian_copula_log_density(const BlockCorrelationMatrix& r, const Eigen::VectorXd& u) {
  r.validate();
  if (u.size() != r.r.rows()) throw ValidationError("dimension mismatch in Gaussian copula density");
  check_interior(u);
  Eigen::LLT<Eigen::MatrixXd> llt(r.r);
  if (llt.info() != Eigen::Success) throw NumericError("correlation matrix is singular");
  Eigen::VectorXd x(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) x[i] = normal_quantile(u[i]);
  double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  Eigen::VectorXd y = llt.solve(x);
  return -0.5 * logdet - 0.5 * (x.dot(y) - x.squaredNorm());
}

void validate_model(const CopulaModel& model) {
  std::visit(
      [](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, GaussianCopula>) {
          m.r.validate();
        } else if constexpr (std::is_same_v<T, ArchimedeanCopula>) {
          validate_theta(m.family, m.theta);
          if (m.dim < 1) throw ValidationError("copula dimension must be >= 1");
          if (!m.groups.sizes.empty() && m.groups.dimension() != m.dim)
            throw ValidationError("group sizes do not sum to the copula dimension");
        } else {
          validate_nested(m);
        }
      },
      model);
}

GroupStructure model_groups(const CopulaModel& model) {
  if (const auto* g = std::get_if<GaussianCopula>(&model)) return g->r.groups;
  if (const auto* a = std::get_if<ArchimedeanCopula>(&model)) {
    if (!a->groups.sizes.empty()) return a->groups;
    return GroupStructure(std::vector<int>(static_cast<std::size_t>(a->dim), 1));
  }
  return std::get<NestedArchimedeanCopula>(model).groups;
}

int model_dimension(const CopulaModel& model) {
  if (const auto* g = std::get_if<GaussianCopula>(&model)) return static_cast<int>(g->r.r.rows());
  if (const auto* a = std::get_if<ArchimedeanCopula>(&model)) return a->dim;
  return std::get<NestedArchimedeanCopula>(model).groups.dimension();
}

std::string model_spec_string(const CopulaModel& model) {
  if (const auto* g = std::get_if<GaussianCopula>(&model))
    return "gaussian(q=" + std::to_string(g->r.r.rows()) + ")";
  if (const auto* a = std::get_if<ArchimedeanCopula>(&model))
    return family_name(a->family) + "(th=" + fmt(a->theta) + ",d=" + std::to_string(a->dim) + ")";
  const auto& n = std::get<NestedArchimedeanCopula>(model);
  std::string out = "nested-" + family_name(n.family) + "(th0=" + fmt(n.theta0);
  for (int i = 0; i < n.groups.group_count(); ++i)
    out += "; th" + std::to_string(i + 1) + "=" + fmt(n.child_thetas[static_cast<std::size_t>(i)]) +
           ",d" + std::to_string(i + 1) + "=" + std::to_string(n.groups.sizes[static_cast<std::size_t>(i)]);
  return out + ")";
}

double model_log_density(const CopulaModel& model, const Eigen::VectorXd& u) {
  if (const auto* g = std::get_if<GaussianCopula>(&model))
    return gaussian_copula_log_density(g->r, u);
  if (const auto* a = std::get_if<ArchimedeanCopula>(&model)) return archimedean_log_density(*a, u);
  return nested_log_density(std::get<NestedArchimedeanCopula>(model), u);
}

double model_group_log_density(const CopulaModel& model, int group, const Eigen::VectorXd& u_group) {
  GroupStructure groups = model_groups(model);
  if (group < 0 || group >= groups.group_count()) throw ValidationError("group index out of range");
  if (u_group.size() != groups.sizes[static_cast<std::size_t>(group)])
    throw ValidationError("dimension mismatch in group margin density");
  if (u_group.size() == 1) {
    check_interior(u_group);
    return 0.0;
  }
  if (const auto* g = std::get_if<GaussianCopula>(&model)) {
    BlockCorrelationMatrix sub;
    sub.r = g->r.block(group);
    sub.groups = GroupStructure({static_cast<int>(sub.r.rows())});
    return gaussian_copula_log_density(sub, u_group);
  }
  if (const auto* a = std::get_if<ArchimedeanCopula>(&model)) {
    ArchimedeanCopula margin{a->family, a->theta, static_cast<int>(u_group.size()), {}};
    return archimedean_log_density(margin, u_group);
  }
  const auto& n = std::get<NestedArchimedeanCopula>(model);
  ArchimedeanCopula child{n.family, n.child_thetas[static_cast<std::size_t>(group)],
                          static_cast<int>(u_group.size()), {}};
  return archimedean_log_density(child, u_group);
}

double model_log_ratio(const CopulaModel& model, const Eigen::VectorXd& u) {
  GroupStructure groups = model_groups(model);
  double lr = model_log_density(model, u);
  for (int i = 0; i < groups.group_count(); ++i)
    lr -= model_group_log_density(model, i, u.segment(groups.offset(i), groups.sizes[static_cast<std::size_t>(i)]));
  return lr;
}

namespace {

constexpr double kOpenLo = 2.2250738585072014e-308;  // smallest normal double
const double kOpenHi = std::nextafter(1.0, 0.0);

double clamp_open(double u) { return std::min(kOpenHi, std::max(kOpenLo, u)); }

// Positive alpha-stable with Laplace transform exp(-t^alpha), alpha in (0,1],
// by the Chambers-Mallows-Stuck construction.
template <class Gen>
double positive_stable(double alpha, Gen& gen) {
  if (alpha >= 1.0) return 1.0;
  std::uniform_real_distribution<double> unif(std::numeric_limits<double>::min(),
                                              std::numbers::pi);
  std::exponential_distribution<double> expo(1.0);
  double w = unif(gen);
  double e = expo(gen);
  return std::sin(alpha * w) / std::pow(std::sin(w), 1.0 / alpha) *
         std::pow(std::sin((1.0 - alpha) * w) / e, (1.0 - alpha) / alpha);
}

// Exponentially tilted stable with Laplace transform exp(-h((1+t)^alpha - 1)),
// sampled blockwise by rejection (acceptance >= exp(-1) per block).
template <class Gen>
double tilted_stable(double h, double alpha, Gen& gen) {
  if (alpha >= 1.0) return h;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int blocks = std::max(1, static_cast<int>(std::ceil(h)));
  double scale = std::pow(h / blocks, 1.0 / alpha);
  double total = 0.0;
  for (int b = 0; b < blocks; ++b) {
    for (;;) {
      double s = scale * positive_stable(alpha, gen);
      if (unif(gen) <= std::exp(-s)) {
        total += s;
        break;
      }
    }
  }
  return total;
}

template <class Gen>
void sample_rows_gaussian(const Eigen::MatrixXd& chol_l, Eigen::Ref<Eigen::MatrixXd> out,
                          Gen& gen) {
  std::normal_distribution<double> nd;
  Eigen::VectorXd z(chol_l.rows());
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = nd(gen);
    Eigen::VectorXd x = chol_l * z;
    for (Eigen::Index k = 0; k < z.size(); ++k) out(r, k) = clamp_open(normal_cdf(x[k]));
  }
}

template <class Gen>
void sample_rows_archimedean(const ArchimedeanCopula& model, Eigen::Ref<Eigen::MatrixXd> out,
                             Gen& gen) {
  std::exponential_distribution<double> expo(1.0);
  std::gamma_distribution<double> gamma(1.0 / model.theta, 1.0);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    double v = model.family == ArchimedeanFamily::Clayton ? gamma(gen)
                                                          : positive_stable(1.0 / model.theta, gen);
    for (int j = 0; j < model.dim; ++j) {
      double e = expo(gen);
      double u = model.family == ArchimedeanFamily::Clayton
                     ? std::pow(1.0 + e / v, -1.0 / model.theta)
                     : std::exp(-std::pow(e / v, 1.0 / model.theta));
      out(r, j) = clamp_open(u);
    }
  }
}

template <class Gen>
void sample_rows_nested(const NestedArchimedeanCopula& model, Eigen::Ref<Eigen::MatrixXd> out,
                        Gen& gen) {
  std::exponential_distribution<double> expo(1.0);
  std::gamma_distribution<double> gamma(1.0 / model.theta0, 1.0);
  const int k = model.groups.group_count();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    double v0 = model.family == ArchimedeanFamily::Clayton
                    ? gamma(gen)
                    : positive_stable(1.0 / model.theta0, gen);
    for (int i = 0; i < k; ++i) {
      double thi = model.child_thetas[static_cast<std::size_t>(i)];
      double alpha = model.theta0 / thi;
      double vi;
      if (alpha >= 1.0) {
        vi = v0;
      } else if (model.family == ArchimedeanFamily::Gumbel) {
        vi = std::pow(v0, 1.0 / alpha) * positive_stable(alpha, gen);
      } else {
        vi = tilted_stable(v0, alpha, gen);
      }
      int off = model.groups.offset(i), d = model.groups.sizes[static_cast<std::size_t>(i)];
      for (int j = 0; j < d; ++j) {
        double e = expo(gen);
        double u = model.family == ArchimedeanFamily::Clayton
                       ? std::pow(1.0 + e / vi, -1.0 / thi)
                       : std::exp(-std::pow(e / vi, 1.0 / thi));
        out(r, off + j) = clamp_open(u);
      }
    }
  }
}

}  // namespace

void sample_rows(const CopulaModel& model, std::mt19937_64& gen, Eigen::Ref<Eigen::MatrixXd> out) {
  if (const auto* g = std::get_if<GaussianCopula>(&model)) {
    Eigen::LLT<Eigen::MatrixXd> llt(g->r.r);
    if (llt.info() != Eigen::Success)
      throw NumericError("correlation matrix is singular; cannot sample");
    sample_rows_gaussian(llt.matrixL(), out, gen);
  } else if (const auto* a = std::get_if<ArchimedeanCopula>(&model)) {
    sample_rows_archimedean(*a, out, gen);
  } else {
    sample_rows_nested(std::get<NestedArchimedeanCopula>(model), out, gen);
  }
}

Eigen::MatrixXd sample(const CopulaModel& model, std::uint64_t m, std::uint64_t seed, int threads) {
  validate_model(model);
  if (m == 0) throw ValidationError("sample size must be >= 1");
  const int q = model_dimension(model);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(m), q);

  const std::uint64_t chunk = 8192;
  const std::uint64_t n_chunks = (m + chunk - 1) / chunk;
  parallel_chunks(n_chunks, threads, [&](std::uint64_t c) {
    std::mt19937_64 gen(chunk_seed(seed, c));
    auto first = static_cast<Eigen::Index>(c * chunk);
    auto rows = static_cast<Eigen::Index>(std::min(chunk, m - c * chunk));
    auto block = out.middleRows(first, rows);
    sample_rows(model, gen, block);
  });
  return out;
}

namespace {

std::string strip(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::pair<std::string, std::string>> parse_kv_list(const std::string& body,
                                                               const std::string& spec) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = strip(item);
    if (item.empty()) continue;
    std::size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw ValidationError("expected key=value in copula spec '" + spec + "'");
    out.emplace_back(strip(item.substr(0, eq)), strip(item.substr(eq + 1)));
  }
  return out;
}

double parse_num(const std::string& s, const std::string& spec) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("unparseable number '" + s + "' in copula spec '" + spec + "'");
  }
}

}  // namespace

CopulaModel parse_copula_spec(const std::string& raw) {
  std::string spec = strip(raw);
  if (spec.rfind("gaussian:", 0) == 0) {
    GaussianCopula g{BlockCorrelationMatrix::load(strip(spec.substr(9)))};
    return g;
  }
  std::size_t open = spec.find('(');
  if (open == std::string::npos || spec.back() != ')')
    throw ValidationError("copula spec '" + spec + "' must look like family(par=..,..) or gaussian:file.json");
  std::string name = strip(spec.substr(0, open));
  std::string body = spec.substr(open + 1, spec.size() - open - 2);

  if (name.rfind("nested-", 0) == 0) {
    NestedArchimedeanCopula n;
    n.family = parse_family(name.substr(7));
    std::stringstream ss(body);
    std::string segment;
    bool have_theta0 = false;
    std::vector<int> dims;
    int index = 0;
    while (std::getline(ss, segment, ';')) {
      auto kvs = parse_kv_list(segment, spec);
      if (index == 0) {
        for (auto& [k, v] : kvs) {
          if (k != "th0") throw ValidationError("first segment of '" + spec + "' must set th0");
          n.theta0 = parse_num(v, spec);
          have_theta0 = true;
        }
      } else {
        double theta = 0.0;
        int dim = 0;
        std::string th_key = "th" + std::to_string(index), d_key = "d" + std::to_string(index);
        for (auto& [k, v] : kvs) {
          if (k == th_key)
            theta = parse_num(v, spec);
          else if (k == d_key)
            dim = static_cast<int>(parse_num(v, spec));
          else
            throw ValidationError("unexpected key '" + k + "' in copula spec '" + spec + "'");
        }
        if (theta == 0.0 || dim == 0)
          throw ValidationError("child segment " + std::to_string(index) + " of '" + spec +
                                "' needs " + th_key + " and " + d_key);
        n.child_thetas.push_back(theta);
        dims.push_back(dim);
      }
      ++index;
    }
    if (!have_theta0 || dims.empty())
      throw ValidationError("nested copula spec '" + spec + "' needs th0 and at least one child");
    n.groups = GroupStructure(dims);
    validate_model(CopulaModel{n});
    return n;
  }

  ArchimedeanCopula a;
  a.family = parse_family(name);
  bool have_theta = false, have_dim = false;
  for (auto& [k, v] : parse_kv_list(body, spec)) {
    if (k == "th") {
      a.theta = parse_num(v, spec);
      have_theta = true;
    } else if (k == "d") {
      a.dim = static_cast<int>(parse_num(v, spec));
      have_dim = true;
    } else {
      throw ValidationError("unexpected key '" + k + "' in copula spec '" + spec + "'");
    }
  }
  if (!have_theta || !have_dim)
    throw ValidationError("copula spec '" + spec + "' needs th and d");
  validate_model(CopulaModel{a});
  return a;
}

}  // namespace phidep
