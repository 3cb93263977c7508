#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "phidep/grouped.hpp"

namespace phidep {

// Archimedean generators psi with completely monotone derivatives:
//   Clayton  psi(t) = (1+t)^(-1/theta),   theta > 0
//   Gumbel   psi(t) = exp(-t^(1/theta)),  theta >= 1
enum class ArchimedeanFamily { Clayton, Gumbel };

std::string family_name(ArchimedeanFamily f);
ArchimedeanFamily parse_family(const std::string& name);
void validate_theta(ArchimedeanFamily f, double theta);

// psi and its derivatives up to order 6. Derivatives use exact coefficient
// recursions (no finite differencing); order 0 returns psi itself.
double generator_value(ArchimedeanFamily f, double theta, double t);
double generator_derivative(ArchimedeanFamily f, double theta, double t, int order);
// log |psi^(order)(t)|; the sign is (-1)^order.
double generator_log_derivative_abs(ArchimedeanFamily f, double theta, double t, int order);
double generator_inverse(ArchimedeanFamily f, double theta, double u);
// log |d/du psi^-1(u)| (the derivative itself is negative).
double generator_inverse_log_derivative_abs(ArchimedeanFamily f, double theta, double u);

struct ArchimedeanCopula {
  ArchimedeanFamily family = ArchimedeanFamily::Gumbel;
  double theta = 2.0;
  int dim = 2;
  // Optional grouping of the coordinates; empty means every coordinate forms
  // its own group. Group margins of an exchangeable copula keep the same theta.
  GroupStructure groups;
};

// Two-level nested copula C(u) = C0(C1(u_1), ..., Ck(u_k)) with one family
// throughout; sufficient nesting requires theta0 <= theta_i.
struct NestedArchimedeanCopula {
  ArchimedeanFamily family = ArchimedeanFamily::Gumbel;
  double theta0 = 2.0;
  std::vector<double> child_thetas;
  GroupStructure groups;
};

struct GaussianCopula {
  BlockCorrelationMatrix r;
};

using CopulaModel = std::variant<GaussianCopula, ArchimedeanCopula, NestedArchimedeanCopula>;

void validate_model(const CopulaModel& model);
GroupStructure model_groups(const CopulaModel& model);
int model_dimension(const CopulaModel& model);
std::string model_spec_string(const CopulaModel& model);

// Densities; u must stay 1e-12 away from {0,1} in every coordinate (enforced,
// never clamped). Dimension caps: d <= 6 (Archimedean), q <= 6 (nested).
double archimedean_log_density(const ArchimedeanCopula& c, const Eigen::VectorXd& u);
double archimedean_density(const ArchimedeanCopula& c, const Eigen::VectorXd& u);
double archimedean_cdf(const ArchimedeanCopula& c, const Eigen::VectorXd& u);
double nested_log_density(const NestedArchimedeanCopula& c, const Eigen::VectorXd& u);
double nested_density(const NestedArchimedeanCopula& c, const Eigen::VectorXd& u);
double nested_cdf(const NestedArchimedeanCopula& c, const Eigen::VectorXd& u);
double gaussian_copula_log_density(const BlockCorrelationMatrix& r, const Eigen::VectorXd& u);

// Joint copula log-density of a model, and the log-density of the copula of
// one group's margin (child copula for nested models, R_ii block for Gaussian,
// same-theta lower-dimensional copula for exchangeable Archimedean models).
double model_log_density(const CopulaModel& model, const Eigen::VectorXd& u);
double model_group_log_density(const CopulaModel& model, int group, const Eigen::VectorXd& u_group);
// log c(u) - sum_i log c_i(u_i); the ratio every estimator integrates against.
double model_log_ratio(const CopulaModel& model, const Eigen::VectorXd& u);

// m independent rows from the copula, in the open cube (0,1)^q. Frailty
// construction for Archimedean families (Gamma for Clayton, Chambers-Mallows-
// Stuck positive stable for Gumbel, scaled-stable / exponentially tilted
// stable inner frailties for the nested versions). Deterministic for fixed
// seed regardless of thread count.
Eigen::MatrixXd sample(const CopulaModel& model, std::uint64_t m, std::uint64_t seed,
                       int threads = 0);

// Fills every row of out from the model using gen (out must have
// model_dimension columns). Building block for estimators that need to redraw
// individual rows; sample() composes it over seeded chunks.
void sample_rows(const CopulaModel& model, std::mt19937_64& gen, Eigen::Ref<Eigen::MatrixXd> out);

// Parses fully specified model strings:
//   gaussian:R.json
//   clayton(th=2,d=3)            gumbel(th=3,d=2)
//   nested-gumbel(th0=3; th1=3,d1=2; th2=4,d2=2)   nested-clayton(...)
CopulaModel parse_copula_spec(const std::string& spec);

}  // namespace phidep
