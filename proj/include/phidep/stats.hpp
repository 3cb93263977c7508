#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace phidep {

// Standard normal cdf/pdf/quantile. The quantile uses a rational approximation
// polished with one Halley step, accurate to ~1e-15 over (0,1).
double normal_cdf(double x);
double normal_pdf(double x);
double normal_quantile(double p);

enum class TiePolicy { Error, Midrank };

// 1-based ranks; ties resolved by the policy (Error throws ValidationError,
// Midrank assigns average ranks). has_ties reports whether any tie was seen.
std::vector<double> ranks(const Eigen::VectorXd& x, TiePolicy policy, bool* has_ties = nullptr);

// Two-sided Kolmogorov-Smirnov test of a sample against N(0,1).
// p-value from the asymptotic Kolmogorov distribution.
double ks_statistic_vs_normal(std::vector<double> sample);
double ks_pvalue(double statistic, std::size_t n);

// Kendall tau via Knight's O(n log n) inversion count, Spearman rho via ranks.
double kendall_tau(const Eigen::VectorXd& x, const Eigen::VectorXd& y);
double spearman_rho(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Quantile functions used for simulation marginals.
double student_t3_quantile(double p);
double exponential_quantile(double p);
double beta22_quantile(double p);
double f26_quantile(double p);

double median(std::vector<double> values);

}  // namespace phidep
