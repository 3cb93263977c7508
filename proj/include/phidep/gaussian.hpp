#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phidep/grouped.hpp"
#include "phidep/phi.hpp"

namespace phidep {

// Dependence between groups of a centered Gaussian vector with block
// correlation matrix R, where R_0 is the block diagonal of R.
//
// Closed forms:
//   t log t      -(1/2) log(|R| / prod |R_ii|), +inf when the ratio
//                underflows below 1e-300 or R is singular
//   (sqrt t-1)^2  2 - 2 * 2^(q/2) |R|^(1/4) / (|I + R0^-1 R|^(1/2) prod |R_ii|^(1/4)),
//                equals its maximum 2 exactly in the singular limit
double mutual_information_gaussian(const BlockCorrelationMatrix& r);
double hellinger_gaussian(const BlockCorrelationMatrix& r);

struct NumericOptions {
  int gh_nodes = 20;               // per-axis Gauss-Hermite nodes (q <= 4)
  std::uint64_t mc_draws = 1'000'000;  // fallback / expectation budget for q > 4
  std::uint64_t seed = 42;
  int threads = 0;                 // 0 = logical cores
};

struct NumericValue {
  double value = 0.0;
  double se = 0.0;            // 0 for the deterministic quadrature path
  std::string method;         // "gauss-hermite" or "monte-carlo"
};

// E[Phi(k(X))] under N(0, R0) where k is the Gaussian density ratio; matches
// the closed forms for the two kinds above and covers every other Phi.
NumericValue phi_gaussian_numeric(const BlockCorrelationMatrix& r, const PhiFunction& phi,
                                  const NumericOptions& opts = {});

// Value at a known R: the closed forms above for t log t and Hellinger, the
// numeric expectation for every other kind.
double phi_gaussian_value(const BlockCorrelationMatrix& r, const PhiFunction& phi,
                          const NumericOptions& opts = {});

// Delta-method ingredients: zeta^2 = 2 tr((R (M - D_MR))^2) with D_MR the
// diagonal part of M R. M is closed-form for t log t and Hellinger and
// estimated by common-random-number Monte Carlo expectations otherwise.
struct DeltaMethodMatrices {
  Eigen::MatrixXd m_phi;   // symmetrized M
  Eigen::MatrixXd d_mr;    // diag(M R)
  Eigen::MatrixXd f1, f2;  // block-diagonal expectation terms (general path only)
  Eigen::MatrixXd gamma;   // Hellinger block correction (closed path only)
  Eigen::MatrixXd j;       // (R^-1 + R0^-1)^-1 (closed Hellinger path only)
  double value = 0.0;      // the divergence implied by the same computation
};

DeltaMethodMatrices delta_method_matrices(const BlockCorrelationMatrix& r, const PhiFunction& phi,
                                        const NumericOptions& opts = {},
                                        bool force_general_path = false);

// Asymptotic standard deviation zeta of sqrt(n) (D_hat - D). Throws
// ValidationError for non-differentiable kinds (total variation, power:1) and
// NumericError when R is singular.
double asymptotic_sd(const BlockCorrelationMatrix& r, const PhiFunction& phi,
                     const NumericOptions& opts = {}, bool force_general_path = false);

struct GaussianEstimate {
  double value = 0.0;       // may be +inf
  double normalized = 0.0;
  double sd = 0.0;          // NaN when unavailable
  double ci_lo = 0.0, ci_hi = 0.0;  // NaN when unavailable
  double alpha = 0.05;
  Eigen::Index n = 0;
  PhiFunction phi;
  BlockCorrelationMatrix r;
  std::string method;
  std::vector<std::string> warnings;
};

// Rank-based estimate under the Gaussian copula model: normal-scores
// correlation, plug-in value, plug-in zeta, and the (1 - alpha) interval
// value +/- z_{1-alpha/2} zeta / sqrt(n). Requires n >= q + 2.
GaussianEstimate estimate_gaussian(const GroupedSample& sample, const PhiFunction& phi,
                                   double alpha = 0.05, TiePolicy ties = TiePolicy::Error,
                                   const NumericOptions& opts = {});

}  // namespace phidep
