#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "phidep/errors.hpp"
#include "phidep/gaussian.hpp"
#include "phidep/inference.hpp"

using namespace phidep;

namespace {

GaussianEstimate make_estimate(double value, double sd, Eigen::Index n) {
  GaussianEstimate e;
  e.value = value;
  e.sd = sd;
  e.n = n;
  return e;
}

GroupedSample correlated_sample(int n, double rho, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  GroupedSample s;
  s.groups = GroupStructure{{1, 1}};
  s.data = Eigen::MatrixXd(n, 2);
  for (int i = 0; i < n; ++i) {
    double a = nd(gen), b = nd(gen);
    s.data(i, 0) = a;
    s.data(i, 1) = rho * a + std::sqrt(1.0 - rho * rho) * b;
  }
  return s;
}

}  // namespace

TEST_CASE("contagion test at frozen inputs") {
  auto calm = make_estimate(0.1, 0.5, 400);
  auto crisis = make_estimate(0.4, 0.5, 400);

  auto inc = contagion_test(calm, crisis, ContagionDirection::IncreaseIntoCrisis);
  CHECK(inc.z == doctest::Approx(-8.4852813742385703).epsilon(1e-12));
  CHECK(inc.p_value == doctest::Approx(1.0759868356249456e-17).epsilon(1e-10));
  CHECK(inc.direction == ContagionDirection::IncreaseIntoCrisis);
  CHECK(inc.first.value == 0.1);
  CHECK(inc.second.value == 0.4);

  auto dec = contagion_test(calm, crisis, ContagionDirection::DecreaseAfterCrisis);
  CHECK(dec.z == inc.z);
  CHECK(dec.p_value > 0.99999999);

  auto flat = contagion_test(calm, calm, ContagionDirection::IncreaseIntoCrisis);
  CHECK(flat.z == 0.0);
  CHECK(flat.p_value == 0.5);
}

TEST_CASE("contagion test is exactly antisymmetric under swapping") {
  auto a = make_estimate(0.23456, 0.41, 317);
  auto b = make_estimate(0.34567, 0.29, 523);
  auto ab = contagion_test(a, b, ContagionDirection::IncreaseIntoCrisis);
  auto ba = contagion_test(b, a, ContagionDirection::IncreaseIntoCrisis);
  CHECK(ba.z == -ab.z);

  // Testing an increase of (a,b) is the same event as a decrease of (b,a).
  auto ba_dec = contagion_test(b, a, ContagionDirection::DecreaseAfterCrisis);
  CHECK(ba_dec.p_value == ab.p_value);
}

TEST_CASE("contagion test preconditions") {
  auto good = make_estimate(0.2, 0.3, 100);
  auto inf = make_estimate(std::numeric_limits<double>::infinity(), 0.3, 100);
  auto no_sd = make_estimate(0.2, std::numeric_limits<double>::quiet_NaN(), 100);
  auto zero_sd = make_estimate(0.2, 0.0, 100);
  auto no_n = make_estimate(0.2, 0.3, 0);
  CHECK_THROWS_AS(contagion_test(inf, good, ContagionDirection::IncreaseIntoCrisis), NumericError);
  CHECK_THROWS_AS(contagion_test(good, no_sd, ContagionDirection::IncreaseIntoCrisis),
                  NumericError);
  CHECK_THROWS_AS(contagion_test(good, zero_sd, ContagionDirection::IncreaseIntoCrisis),
                  NumericError);
  CHECK_THROWS_AS(contagion_test(no_n, good, ContagionDirection::IncreaseIntoCrisis),
                  NumericError);
}

TEST_CASE("rolling dependence matches per-window estimates") {
  auto s = correlated_sample(120, 0.5, 17);
  auto series = rolling_dependence(s, 30, 30, PhiFunction{PhiKind::MutualInformation});
  REQUIRE(series.entries.size() == 4);
  CHECK(series.window == 30);
  CHECK(series.step == 30);

  for (int w = 0; w < 4; ++w) {
    const auto& e = series.entries[static_cast<std::size_t>(w)];
    CHECK(e.span.first == 30 * w + 1);
    CHECK(e.span.last == 30 * (w + 1));
    CHECK_FALSE(e.singular);
    CHECK(e.label == std::to_string(30 * w + 1));

    GroupedSample win;
    win.groups = s.groups;
    win.data = s.data.middleRows(30 * w, 30);
    auto direct = estimate_gaussian(win, PhiFunction{PhiKind::MutualInformation});
    CHECK(e.estimate.value == direct.value);
    CHECK(e.estimate.sd == direct.sd);
    CHECK(e.estimate.ci_lo == direct.ci_lo);
  }
}

TEST_CASE("rolling tail absorption and labels") {
  auto s = correlated_sample(125, 0.4, 23);
  s.row_labels.resize(125);
  for (int i = 0; i < 125; ++i) s.row_labels[static_cast<std::size_t>(i)] = "d" + std::to_string(i + 1);

  auto series = rolling_dependence(s, 30, 30, PhiFunction{PhiKind::MutualInformation});
  REQUIRE(series.entries.size() == 4);
  CHECK(series.entries[3].span.first == 91);
  CHECK(series.entries[3].span.last == 125);
  CHECK(series.entries[3].span.irregular);
  CHECK(series.entries[3].estimate.n == 35);
  CHECK(series.entries[0].label == "d1");
  CHECK(series.entries[3].label == "d91");

  CHECK_THROWS_AS(rolling_dependence(s, 3, 3, PhiFunction{PhiKind::MutualInformation}),
                  ValidationError);

  // Thread count changes nothing.
  auto t1 = rolling_dependence(s, 20, 10, PhiFunction{PhiKind::MutualInformation}, 0.05,
                               TiePolicy::Error, {}, 1);
  auto t4 = rolling_dependence(s, 20, 10, PhiFunction{PhiKind::MutualInformation}, 0.05,
                               TiePolicy::Error, {}, 4);
  REQUIRE(t1.entries.size() == t4.entries.size());
  for (std::size_t i = 0; i < t1.entries.size(); ++i)
    CHECK(t1.entries[i].estimate.value == t4.entries[i].estimate.value);
}

TEST_CASE("rolling flags singular windows instead of failing") {
  GroupedSample s;
  s.groups = GroupStructure{{1, 1}};
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  s.data = Eigen::MatrixXd(60, 2);
  for (int i = 0; i < 60; ++i) {
    double a = nd(gen);
    s.data(i, 0) = a;
    s.data(i, 1) = a * a * a;  // monotone copy: perfect rank dependence
  }
  auto series = rolling_dependence(s, 20, 20, PhiFunction{PhiKind::MutualInformation});
  REQUIRE(series.entries.size() == 3);
  for (const auto& e : series.entries) {
    CHECK(e.singular);
    CHECK(std::isinf(e.estimate.value));
    CHECK(std::isnan(e.estimate.sd));
  }
}

TEST_CASE("studentized replicates look standard normal") {
  BlockCorrelationMatrix r;
  r.groups = GroupStructure{{1, 1}};
  r.r = Eigen::MatrixXd::Identity(2, 2);
  r.r(0, 1) = r.r(1, 0) = 0.5;

  auto z = studentized_replicates(r, PhiFunction{PhiKind::MutualInformation}, 400, 300, 77);
  REQUIRE(z.size() == 300);
  double mean = 0.0, m2 = 0.0;
  for (double v : z) mean += v;
  mean /= static_cast<double>(z.size());
  for (double v : z) m2 += (v - mean) * (v - mean);
  double sd = std::sqrt(m2 / static_cast<double>(z.size() - 1));
  CHECK(std::fabs(mean) < 0.2);
  CHECK(sd > 0.8);
  CHECK(sd < 1.25);

  // The estimator sees only ranks, so replacing the normal marginals by the
  // mixed continuous set reproduces the identical replicate stream.
  auto zm = studentized_replicates(r, PhiFunction{PhiKind::MutualInformation}, 400, 300, 77,
                                   MarginalSet::Mixed);
  REQUIRE(zm.size() == z.size());
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(zm[i] == z[i]);

  auto zt = studentized_replicates(r, PhiFunction{PhiKind::MutualInformation}, 400, 300, 77,
                                   MarginalSet::Normal, 3);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(zt[i] == z[i]);
}
