#pragma once

#include <string>

namespace phidep {

// Convex functions Phi with Phi(1) = 0 defining the dependence measures.
// Infinite values are represented by IEEE +inf with the 0 * inf = 0 convention
// applied where the measure definitions require it.
enum class PhiKind {
  MutualInformation,  // t log t
  Pearson,            // (t-1)^2
  Hellinger,          // (sqrt(t)-1)^2
  TotalVariation,     // |t-1|
  JensenShannon,      // -(t+1) log((t+1)/2) + t log t
  PowerAlpha          // |t-1|^alpha, alpha >= 1
};

struct PhiFunction {
  PhiKind kind = PhiKind::MutualInformation;
  double alpha = 0.0;  // PowerAlpha exponent, unused otherwise

  static PhiFunction mutual_information() { return {PhiKind::MutualInformation, 0.0}; }
  static PhiFunction pearson() { return {PhiKind::Pearson, 0.0}; }
  static PhiFunction hellinger() { return {PhiKind::Hellinger, 0.0}; }
  static PhiFunction total_variation() { return {PhiKind::TotalVariation, 0.0}; }
  static PhiFunction jensen_shannon() { return {PhiKind::JensenShannon, 0.0}; }
  static PhiFunction power(double alpha);  // throws ValidationError if alpha < 1

  // Accepts the CLI spellings: mutual-information, pearson, hellinger,
  // total-variation, jensen-shannon, power:<alpha>.
  static PhiFunction parse(const std::string& name);
  std::string name() const;
};

double phi_value(const PhiFunction& phi, double t);       // t >= 0
double phi_derivative(const PhiFunction& phi, double t);  // t > 0, differentiable kinds

double phi_at_zero(const PhiFunction& phi);
double phi_star_at_zero(const PhiFunction& phi);  // lim Phi(t)/t, may be +inf
double phi_max_value(const PhiFunction& phi);     // Phi(0) + Phi*(0)

// False for TotalVariation and power:1 (kink at t = 1).
bool phi_differentiable(const PhiFunction& phi);

// Maps a raw divergence value into [0,1]: d / max when the max is finite,
// sqrt(1 - exp(-2d)) otherwise.
double normalize_dependence(const PhiFunction& phi, double d);

// (prod_i c_i / c) * Phi(c / prod_i c_i) evaluated from lr = log(c / prod_i c_i),
// written per kind so forming t = exp(lr) never overflows spuriously (kinds
// whose summand really grows like exp(lr) can still reach inf). This is the
// Monte Carlo / quadrature summand for every estimator in the library.
double phi_ratio_summand(const PhiFunction& phi, double lr);

}  // namespace phidep
