#include "phidep/phi.hpp"

#include <cmath>
#include <limits>

#include "phidep/errors.hpp"

namespace phidep {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLog2 = std::log(2.0);
}  // namespace

PhiFunction PhiFunction::power(double alpha) {
  if (!(alpha >= 1.0)) throw ValidationError("power phi requires alpha >= 1");
  return {PhiKind::PowerAlpha, alpha};
}

PhiFunction PhiFunction::parse(const std::string& name) {
  if (name == "mutual-information") return mutual_information();
  if (name == "pearson") return pearson();
  if (name == "hellinger") return hellinger();
  if (name == "total-variation") return total_variation();
  if (name == "jensen-shannon") return jensen_shannon();
  if (name.rfind("power:", 0) == 0) {
    std::size_t pos = 0;
    double alpha;
    try {
      alpha = std::stod(name.substr(6), &pos);
    } catch (const std::exception&) {
      throw ValidationError("unparseable power exponent in '" + name + "'");
    }
    if (pos != name.size() - 6) throw ValidationError("unparseable power exponent in '" + name + "'");
    return power(alpha);
  }
  throw ValidationError("unknown phi function '" + name + "'");
}

std::string PhiFunction::name() const {
  switch (kind) {
    case PhiKind::MutualInformation: return "mutual-information";
    case PhiKind::Pearson: return "pearson";
    case PhiKind::Hellinger: return "hellinger";
    case PhiKind::TotalVariation: return "total-variation";
    case PhiKind::JensenShannon: return "jensen-shannon";
    case PhiKind::PowerAlpha: return "power:" + std::to_string(alpha);
  }
  return "?";
}

double phi_value(const PhiFunction& phi, double t) {
  if (!(t >= 0.0)) throw ValidationError("phi argument must be >= 0");
  switch (phi.kind) {
    case PhiKind::MutualInformation:
      return t == 0.0 ? 0.0 : t * std::log(t);
    case PhiKind::Pearson:
      return (t - 1.0) * (t - 1.0);
    case PhiKind::Hellinger: {
      double s = std::sqrt(t) - 1.0;
      return s * s;
    }
    case PhiKind::TotalVariation:
      return std::fabs(t - 1.0);
    case PhiKind::JensenShannon:
      return -(t + 1.0) * std::log((t + 1.0) / 2.0) + (t == 0.0 ? 0.0 : t * std::log(t));
    case PhiKind::PowerAlpha:
      return std::pow(std::fabs(t - 1.0), phi.alpha);
  }
  return 0.0;
}

double phi_derivative(const PhiFunction& phi, double t) {
  if (!(t >= 0.0)) throw ValidationError("phi argument must be >= 0");
  switch (phi.kind) {
    case PhiKind::MutualInformation:
      return std::log(t) + 1.0;
    case PhiKind::Pearson:
      return 2.0 * (t - 1.0);
    case PhiKind::Hellinger:
      return 1.0 - 1.0 / std::sqrt(t);
    case PhiKind::TotalVariation:
      if (t == 1.0) throw NumericError("total-variation phi is not differentiable at t = 1");
      return t > 1.0 ? 1.0 : -1.0;
    case PhiKind::JensenShannon:
      return std::log(2.0 * t / (t + 1.0));
    case PhiKind::PowerAlpha: {
      if (phi.alpha == 1.0) {
        if (t == 1.0) throw NumericError("power:1 phi is not differentiable at t = 1");
        return t > 1.0 ? 1.0 : -1.0;
      }
      if (t == 1.0) return 0.0;
      double s = t > 1.0 ? 1.0 : -1.0;
      return phi.alpha * s * std::pow(std::fabs(t - 1.0), phi.alpha - 1.0);
    }
  }
  return 0.0;
}

double phi_at_zero(const PhiFunction& phi) {
  switch (phi.kind) {
    case PhiKind::MutualInformation: return 0.0;
    case PhiKind::Pearson: return 1.0;
    case PhiKind::Hellinger: return 1.0;
    case PhiKind::TotalVariation: return 1.0;
    case PhiKind::JensenShannon: return kLog2;
    case PhiKind::PowerAlpha: return 1.0;
  }
  return 0.0;
}

double phi_star_at_zero(const PhiFunction& phi) {
  switch (phi.kind) {
    case PhiKind::MutualInformation: return kInf;
    case PhiKind::Pearson: return kInf;
    case PhiKind::Hellinger: return 1.0;
    case PhiKind::TotalVariation: return 1.0;
    case PhiKind::JensenShannon: return kLog2;
    case PhiKind::PowerAlpha: return phi.alpha == 1.0 ? 1.0 : kInf;
  }
  return 0.0;
}

double phi_max_value(const PhiFunction& phi) {
  return phi_at_zero(phi) + phi_star_at_zero(phi);
}

bool phi_differentiable(const PhiFunction& phi) {
  if (phi.kind == PhiKind::TotalVariation) return false;
  if (phi.kind == PhiKind::PowerAlpha && phi.alpha == 1.0) return false;
  return true;
}

double normalize_dependence(const PhiFunction& phi, double d) {
  if (std::isnan(d) || d < 0.0) throw ValidationError("dependence value must be >= 0");
  double m = phi_max_value(phi);
  double out;
  if (std::isinf(m)) {
    out = std::isinf(d) ? 1.0 : std::sqrt(-std::expm1(-2.0 * d));
  } else {
    out = std::isinf(d) ? 1.0 : d / m;
  }
  return std::min(1.0, std::max(0.0, out));
}

double phi_ratio_summand(const PhiFunction& phi, double lr) {
  // w = exp(-lr) is the density ratio prod c_i / c, t = exp(lr) its inverse;
  // each branch evaluates w * Phi(t) in a form stable for large |lr|.
  switch (phi.kind) {
    case PhiKind::MutualInformation:
      return lr;
    case PhiKind::Pearson:
      return std::exp(lr) - 2.0 + std::exp(-lr);
    case PhiKind::Hellinger:
      return 1.0 - 2.0 * std::exp(-0.5 * lr) + std::exp(-lr);
    case PhiKind::TotalVariation:
      return std::fabs(1.0 - std::exp(-lr));
    case PhiKind::JensenShannon: {
      double w = std::exp(-lr);
      double log_half_t1 = lr - kLog2 + std::log1p(w);  // log((t+1)/2)
      return -(1.0 + w) * log_half_t1 + lr;
    }
    case PhiKind::PowerAlpha:
      return std::exp((phi.alpha - 1.0) * lr) * std::pow(std::fabs(1.0 - std::exp(-lr)), phi.alpha);
  }
  return 0.0;
}

}  // namespace phidep
