#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "phidep/errors.hpp"
#include "phidep/phi.hpp"

using namespace phidep;

namespace {
const double inf = std::numeric_limits<double>::infinity();
const double log2c = std::log(2.0);
}  // namespace

TEST_CASE("values at reference points") {
  CHECK(phi_value(PhiFunction::mutual_information(), 1.0) == 0.0);
  CHECK(phi_value(PhiFunction::mutual_information(), 2.0) == doctest::Approx(2.0 * log2c).epsilon(1e-15));
  CHECK(phi_value(PhiFunction::mutual_information(), 0.0) == 0.0);  // 0 log 0 = 0
  CHECK(phi_value(PhiFunction::pearson(), 3.0) == 4.0);
  CHECK(phi_value(PhiFunction::hellinger(), 4.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(phi_value(PhiFunction::total_variation(), 0.0) == 1.0);
  CHECK(phi_value(PhiFunction::total_variation(), 3.0) == 2.0);
  CHECK(phi_value(PhiFunction::jensen_shannon(), 1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(phi_value(PhiFunction::jensen_shannon(), 0.0) == doctest::Approx(log2c).epsilon(1e-15));
  CHECK(phi_value(PhiFunction::power(1.5), 2.0) == 1.0);
  CHECK_THROWS_AS(phi_value(PhiFunction::pearson(), -0.5), ValidationError);
}

TEST_CASE("every kind vanishes at 1 and is convex around it") {
  for (auto phi : {PhiFunction::mutual_information(), PhiFunction::pearson(),
                   PhiFunction::hellinger(), PhiFunction::total_variation(),
                   PhiFunction::jensen_shannon(), PhiFunction::power(1.3)}) {
    CHECK(phi_value(phi, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
    double mid = phi_value(phi, 1.0);
    double chord = 0.5 * (phi_value(phi, 0.6) + phi_value(phi, 1.4));
    CHECK(mid <= chord + 1e-15);
  }
}

TEST_CASE("derivatives match difference quotients") {
  const double h = 1e-6;
  for (auto phi : {PhiFunction::mutual_information(), PhiFunction::pearson(),
                   PhiFunction::hellinger(), PhiFunction::jensen_shannon(),
                   PhiFunction::power(2.5)}) {
    for (double t : {0.3, 0.9, 1.7, 4.0}) {
      double fd = (phi_value(phi, t + h) - phi_value(phi, t - h)) / (2.0 * h);
      CHECK(phi_derivative(phi, t) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
  CHECK(phi_derivative(PhiFunction::mutual_information(), 1.0) == doctest::Approx(1.0));
  CHECK(phi_derivative(PhiFunction::total_variation(), 1.5) == 1.0);
  CHECK(phi_derivative(PhiFunction::total_variation(), 0.5) == -1.0);
  CHECK_THROWS_AS(phi_derivative(PhiFunction::total_variation(), 1.0), NumericError);
  CHECK_THROWS_AS(phi_derivative(PhiFunction::power(1.0), 1.0), NumericError);
}

TEST_CASE("maximum values") {
  CHECK(std::isinf(phi_max_value(PhiFunction::mutual_information())));
  CHECK(std::isinf(phi_max_value(PhiFunction::pearson())));
  CHECK(phi_max_value(PhiFunction::hellinger()) == 2.0);
  CHECK(phi_max_value(PhiFunction::total_variation()) == 2.0);
  CHECK(phi_max_value(PhiFunction::jensen_shannon()) == doctest::Approx(2.0 * log2c).epsilon(1e-15));
  CHECK(std::isinf(phi_max_value(PhiFunction::power(2.0))));
  CHECK(phi_max_value(PhiFunction::power(1.0)) == 2.0);
}

TEST_CASE("differentiability flags") {
  CHECK(phi_differentiable(PhiFunction::mutual_information()));
  CHECK(phi_differentiable(PhiFunction::hellinger()));
  CHECK_FALSE(phi_differentiable(PhiFunction::total_variation()));
  CHECK_FALSE(phi_differentiable(PhiFunction::power(1.0)));
  CHECK(phi_differentiable(PhiFunction::power(1.5)));
}

TEST_CASE("normalization") {
  // infinite max: sqrt(1 - exp(-2 d))
  CHECK(normalize_dependence(PhiFunction::mutual_information(), 0.5) ==
        doctest::Approx(0.7950600976206501).epsilon(1e-14));
  CHECK(normalize_dependence(PhiFunction::mutual_information(), 0.0) == 0.0);
  CHECK(normalize_dependence(PhiFunction::mutual_information(), inf) == 1.0);
  // finite max: d / max
  CHECK(normalize_dependence(PhiFunction::hellinger(), 0.3) == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(normalize_dependence(PhiFunction::hellinger(), 2.0) == 1.0);
  CHECK(normalize_dependence(PhiFunction::jensen_shannon(), 2.0 * log2c) == 1.0);
  CHECK_THROWS_AS(normalize_dependence(PhiFunction::hellinger(), -0.1), ValidationError);
}

TEST_CASE("ratio summand agrees with the direct formula") {
  for (auto phi : {PhiFunction::mutual_information(), PhiFunction::pearson(),
                   PhiFunction::hellinger(), PhiFunction::total_variation(),
                   PhiFunction::jensen_shannon(), PhiFunction::power(1.7)}) {
    for (double lr : {-2.0, -0.4, 0.0, 0.3, 1.1, 3.0}) {
      double t = std::exp(lr);
      double direct = phi_value(phi, t) / t;
      CHECK(phi_ratio_summand(phi, lr) == doctest::Approx(direct).epsilon(1e-12));
    }
    CHECK(phi_ratio_summand(phi, 0.0) == 0.0);
  }
}

TEST_CASE("ratio summand survives extreme log ratios") {
  // w = exp(-lr) overflows at lr = -800 if formed naively; the bounded kinds
  // must stay finite there.
  CHECK(phi_ratio_summand(PhiFunction::mutual_information(), 800.0) == 800.0);
  CHECK(phi_ratio_summand(PhiFunction::hellinger(), 800.0) == doctest::Approx(1.0));
  CHECK(phi_ratio_summand(PhiFunction::total_variation(), 800.0) == doctest::Approx(1.0));
  CHECK(std::isfinite(phi_ratio_summand(PhiFunction::jensen_shannon(), 800.0)));
  CHECK(std::isfinite(phi_ratio_summand(PhiFunction::hellinger(), -800.0)) == false);
  CHECK(phi_ratio_summand(PhiFunction::hellinger(), -800.0) > 0.0);  // +inf, not NaN
}

TEST_CASE("parsing") {
  CHECK(PhiFunction::parse("mutual-information").kind == PhiKind::MutualInformation);
  CHECK(PhiFunction::parse("hellinger").kind == PhiKind::Hellinger);
  CHECK(PhiFunction::parse("power:1.5").alpha == 1.5);
  CHECK(PhiFunction::parse("power:2").name() == PhiFunction::power(2.0).name());
  CHECK_THROWS_AS(PhiFunction::parse("power:0.5"), ValidationError);
  CHECK_THROWS_AS(PhiFunction::parse("kl"), ValidationError);
  CHECK_THROWS_AS(PhiFunction::power(0.9), ValidationError);
}
