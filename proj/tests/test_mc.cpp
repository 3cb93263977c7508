#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "phidep/copula.hpp"
#include "phidep/errors.hpp"
#include "phidep/mc.hpp"

using namespace phidep;

namespace {

const CopulaModel kGumbel3 = ArchimedeanCopula{ArchimedeanFamily::Gumbel, 3.0, 2, {}};
const double kGumbel3Hellinger = 0.4105688896488504;  // high-accuracy quadrature

NestedArchimedeanCopula nested_gumbel() {
  NestedArchimedeanCopula c;
  c.family = ArchimedeanFamily::Gumbel;
  c.theta0 = 1.5;
  c.child_thetas = {2.0, 3.0};
  c.groups = GroupStructure{{2, 2}};
  return c;
}

}  // namespace

TEST_CASE("independence gives exactly zero in both forms") {
  CopulaModel ind = ArchimedeanCopula{ArchimedeanFamily::Gumbel, 1.0, 3, {}};
  McOptions opts;
  opts.draws = 2000;

  auto gen = estimate_phi_mc(ind, PhiFunction{PhiKind::MutualInformation}, opts);
  CHECK(gen.value == 0.0);
  CHECK(gen.mc_standard_error == 0.0);
  CHECK(gen.m_used == 2000);
  CHECK(std::isnan(gen.summand_kurtosis));  // constant summand

  auto red = estimate_hellinger_reduced(ind, opts);
  CHECK(red.value == 0.0);
  CHECK(red.mc_standard_error == 0.0);
  CHECK(red.sqrt_ratio_second_moment == 1.0);
  CHECK(red.estimator_form == EstimatorForm::HellingerReduced);
}

TEST_CASE("reduced form estimates the hellinger dependence") {
  McOptions opts;
  opts.draws = 400'000;
  auto est = estimate_hellinger_reduced(kGumbel3, opts);
  CHECK(est.estimator_form == EstimatorForm::HellingerReduced);
  CHECK(est.value == doctest::Approx(kGumbel3Hellinger).epsilon(0.02));
  CHECK(std::fabs(est.value - kGumbel3Hellinger) < 5.0 * est.mc_standard_error + 1e-4);
  // The square root summand has second moment exactly one in expectation.
  CHECK(est.sqrt_ratio_second_moment == doctest::Approx(1.0).epsilon(0.01));
  CHECK(est.mc_standard_error > 0.0);
  CHECK(est.mc_standard_error < 0.005);
}

TEST_CASE("general form agrees with the reduced form") {
  McOptions opts;
  opts.draws = 200'000;
  auto gen = estimate_phi_mc(kGumbel3, PhiFunction{PhiKind::Hellinger}, opts);
  auto red = estimate_hellinger_reduced(kGumbel3, opts);
  CHECK(gen.estimator_form == EstimatorForm::General);
  CHECK(std::fabs(gen.value - red.value) <
        5.0 * (gen.mc_standard_error + red.mc_standard_error) + 1e-4);
  // The whole point of the reduced form: a much tighter standard error.
  CHECK(red.mc_standard_error < gen.mc_standard_error);
}

TEST_CASE("monte carlo runs are reproducible and thread independent") {
  McOptions a;
  a.draws = 60'000;
  a.threads = 1;
  McOptions b = a;
  b.threads = 4;
  auto ra = estimate_phi_mc(nested_gumbel(), PhiFunction{PhiKind::MutualInformation}, a);
  auto rb = estimate_phi_mc(nested_gumbel(), PhiFunction{PhiKind::MutualInformation}, b);
  CHECK(ra.value == rb.value);
  CHECK(ra.mc_standard_error == rb.mc_standard_error);
  CHECK(ra.seed == 42);

  McOptions c = a;
  c.seed = 43;
  auto rc = estimate_phi_mc(nested_gumbel(), PhiFunction{PhiKind::MutualInformation}, c);
  CHECK(rc.value != ra.value);
}

TEST_CASE("quadrature oracle") {
  auto hel = quadrature_oracle(kGumbel3, PhiFunction{PhiKind::Hellinger});
  CHECK(std::fabs(hel.value / 2.0 - 0.2052844448244252) < 5e-4);
  CHECK(hel.error_estimate < 0.01);

  BlockCorrelationMatrix r;
  r.groups = GroupStructure{{1, 1}};
  r.r = Eigen::MatrixXd::Identity(2, 2);
  r.r(0, 1) = r.r(1, 0) = 0.5;
  auto mi = quadrature_oracle(CopulaModel{GaussianCopula{r}}, PhiFunction{PhiKind::MutualInformation});
  CHECK(std::fabs(mi.value - 0.14384103622589046) < 1e-4);

  CopulaModel ind = ArchimedeanCopula{ArchimedeanFamily::Gumbel, 1.0, 2, {}};
  CHECK(quadrature_oracle(ind, PhiFunction{PhiKind::MutualInformation}).value == 0.0);

  CHECK_THROWS_AS(quadrature_oracle(nested_gumbel(), PhiFunction{PhiKind::Hellinger}),
                  ValidationError);
}

TEST_CASE("estimate from data") {
  auto data = sample(kGumbel3, 800, 31);
  GroupedSample s;
  s.data = data;
  s.groups = GroupStructure{{1, 1}};

  McOptions opts;
  opts.draws = 100'000;
  auto est = estimate_from_data(s, ArchimedeanCopula{ArchimedeanFamily::Gumbel, 2.0, 2, {}},
                                PhiFunction{PhiKind::Hellinger}, opts);
  REQUIRE(est.fit.has_value());
  CHECK(est.fit->converged);
  CHECK(est.estimator_form == EstimatorForm::HellingerReduced);  // Auto picks reduced
  REQUIRE(est.theta_used.size() == 1);
  CHECK(est.theta_used[0] == doctest::Approx(3.0).epsilon(0.15));
  CHECK(est.value == doctest::Approx(kGumbel3Hellinger).epsilon(0.12));

  McOptions gopts = opts;
  gopts.form = FormChoice::General;
  auto gen = estimate_from_data(s, ArchimedeanCopula{ArchimedeanFamily::Gumbel, 2.0, 2, {}},
                                PhiFunction{PhiKind::Hellinger}, gopts);
  CHECK(gen.estimator_form == EstimatorForm::General);

  McOptions bad = opts;
  bad.form = FormChoice::Reduced;
  CHECK_THROWS_AS(estimate_from_data(s, ArchimedeanCopula{ArchimedeanFamily::Gumbel, 2.0, 2, {}},
                                     PhiFunction{PhiKind::MutualInformation}, bad),
                  ValidationError);

  auto mi = estimate_from_data(s, ArchimedeanCopula{ArchimedeanFamily::Gumbel, 2.0, 2, {}},
                               PhiFunction{PhiKind::MutualInformation}, opts);
  CHECK(std::isfinite(mi.summand_kurtosis));
  CHECK(mi.summand_kurtosis > 1.0);
}

TEST_CASE("density integrates to one") {
  CHECK(density_integral_check(kGumbel3, 400'000) == doctest::Approx(1.0).epsilon(0.005));
  CHECK(density_integral_check(CopulaModel{nested_gumbel()}, 400'000) ==
        doctest::Approx(1.0).epsilon(0.005));
  // deterministic in the seed, regardless of threads
  double a = density_integral_check(kGumbel3, 50'000, 7, 1);
  double b = density_integral_check(kGumbel3, 50'000, 7, 4);
  CHECK(a == b);
}
