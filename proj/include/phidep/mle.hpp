#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phidep/copula.hpp"
#include "phidep/grouped.hpp"

namespace phidep {

// rank/(n+1) columnwise; strictly inside (0,1) and invariant under strictly
// increasing marginal transforms.
Eigen::MatrixXd pseudo_observations(const Eigen::MatrixXd& data, TiePolicy ties = TiePolicy::Error);

struct FitResult {
  Eigen::VectorXd theta_hat;
  Eigen::VectorXd start;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  CopulaModel model;  // the template with theta_hat substituted
};

// Maximizes the pseudo log-likelihood sum_l log c(rank obs; theta) over the
// admissible region, derivative-free: Brent for one parameter, Nelder-Mead
// with projection onto {box, theta0 <= min theta_i} for nested templates.
// The shape's own theta values are ignored; starts supplies the initial
// point ((theta) for one family, (theta0, theta_1..k) for nested).
FitResult fit_pseudo_mle(const GroupedSample& sample, const CopulaModel& shape,
                         const Eigen::VectorXd& starts, TiePolicy ties = TiePolicy::Error);

// Stage-1 starting vector (root_default, theta_hat_1..k): each child fitted
// marginally from start 2; root default 2 for Gumbel, 0.1 for Clayton.
Eigen::VectorXd staged_starts(const GroupedSample& sample, const NestedArchimedeanCopula& shape,
                              TiePolicy ties = TiePolicy::Error);

// Default protocol: single family from start 2, nested via staged_starts then
// a joint refinement.
FitResult fit_copula(const GroupedSample& sample, const CopulaModel& shape,
                     TiePolicy ties = TiePolicy::Error);

// n * cov(theta_hat) over row-bootstrap resamples (ranks recomputed per
// resample; resampling duplicates rows, so ties are resolved by midranks).
Eigen::MatrixXd bootstrap_parameter_variance(const GroupedSample& sample, const CopulaModel& shape,
                                             int replicates = 200, std::uint64_t seed = 42,
                                             int threads = 0);

// Brent minimizer on [lo, hi]; iterations_out (optional) reports the count.
double brent_minimize(const std::function<double(double)>& f, double lo, double hi,
                      double tol = 1e-9, int max_iter = 200, int* iterations_out = nullptr);

struct NelderMeadResult {
  Eigen::VectorXd x;
  double f_min = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Standard simplex moves (reflect 1, expand 2, contract 0.5, shrink 0.5);
// every candidate is passed through project before evaluation; stops when the
// simplex diameter drops below diameter_tol.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& start,
                             const std::function<void(Eigen::VectorXd&)>& project,
                             double step = 0.25, double diameter_tol = 1e-6, int max_iter = 500);

}  // namespace phidep
