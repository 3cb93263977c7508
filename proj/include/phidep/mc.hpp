#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phidep/copula.hpp"
#include "phidep/grouped.hpp"
#include "phidep/mle.hpp"
#include "phidep/phi.hpp"

namespace phidep {

enum class EstimatorForm { General, HellingerReduced };

// Auto selects the variance-reduced form exactly when Phi is Hellinger.
enum class FormChoice { Auto, General, Reduced };

struct McOptions {
  std::uint64_t draws = 10000;
  std::uint64_t seed = 42;
  int threads = 0;
  FormChoice form = FormChoice::Auto;
  TiePolicy ties = TiePolicy::Error;  // estimate_from_data ranking policy
};

struct McDependenceEstimate {
  double value = 0.0;
  double mc_standard_error = 0.0;
  std::uint64_t m_used = 0;
  std::uint64_t redraws = 0;  // boundary-adjacent draws replaced
  EstimatorForm estimator_form = EstimatorForm::General;
  std::uint64_t seed = 0;
  Eigen::VectorXd theta_used;           // empty when the model is fully specified
  double summand_kurtosis = 0.0;        // NaN when the summand is constant
  double sqrt_ratio_second_moment = 0.0;  // reduced form only, NaN otherwise; should be near 1
  std::vector<std::string> warnings;
  std::optional<FitResult> fit;  // set by estimate_from_data
};

// Plug-in Monte Carlo estimate of the Phi-dependence of a parametric copula:
// mean over model draws of (prod_i c_i / c) Phi(c / prod_i c_i). The reported
// standard error comes from the summand sample variance and is flagged
// unreliable when the summand kurtosis exceeds 100.
McDependenceEstimate estimate_phi_mc(const CopulaModel& model, const PhiFunction& phi,
                                     const McOptions& opts = {});

// Variance-reduced Hellinger form 2 - 2 mean(sqrt(prod_i c_i / c)); the
// summand has second moment exactly 1, so the standard error is trustworthy.
McDependenceEstimate estimate_hellinger_reduced(const CopulaModel& model,
                                                const McOptions& opts = {});

// Fits the template by pseudo maximum likelihood, then estimates at theta_hat.
McDependenceEstimate estimate_from_data(const GroupedSample& sample, const CopulaModel& shape,
                                        const PhiFunction& phi, const McOptions& opts = {});

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
};

// Deterministic tensor midpoint quadrature of the dependence integral for
// q <= 3, refined over three dyadic levels with empirical-rate extrapolation.
// The boundary is never evaluated; the error estimate is the magnitude of the
// final extrapolation step.
QuadratureResult quadrature_oracle(const CopulaModel& model, const PhiFunction& phi);

// Checks that the model density integrates to 1: defensive mixture importance
// sampling with proposal g = (c + 1)/2, drawing alternately from the model
// sampler and a Halton uniform stream, so the summand 2c/(c + 1) is bounded.
double density_integral_check(const CopulaModel& model, std::uint64_t draws,
                              std::uint64_t seed = 42, int threads = 0);

}  // namespace phidep
