#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phidep/gaussian.hpp"
#include "phidep/grouped.hpp"
#include "phidep/phi.hpp"

namespace phidep {

enum class ContagionDirection { IncreaseIntoCrisis, DecreaseAfterCrisis };

struct ContagionTestResult {
  double z = 0.0;
  double p_value = 0.0;
  ContagionDirection direction = ContagionDirection::IncreaseIntoCrisis;
  GaussianEstimate first, second;
};

// z = (D_1 - D_2) / sqrt(zeta_1^2/n_1 + zeta_2^2/n_2); the p-value is the
// left tail of z for IncreaseIntoCrisis (small when dependence rose) and the
// right tail for DecreaseAfterCrisis. Throws NumericError when either
// estimate is infinite or carries no standard deviation.
ContagionTestResult contagion_test(const GaussianEstimate& first, const GaussianEstimate& second,
                                   ContagionDirection direction);

struct RollingEntry {
  WindowSpan span;
  std::string label;  // left-bound row label (the date when the CSV had one)
  GaussianEstimate estimate;
  bool singular = false;  // infinite value or undefined sd; excluded from tests
};

struct RollingSeries {
  std::vector<RollingEntry> entries;
  int window = 0, step = 0;
  double alpha = 0.05;
};

// Dependence series over rolling windows; the last window absorbs the tail
// (see rolling_windows) and singular windows are flagged rather than fatal.
RollingSeries rolling_dependence(const GroupedSample& sample, int window, int step,
                                 const PhiFunction& phi, double alpha = 0.05,
                                 TiePolicy ties = TiePolicy::Error,
                                 const NumericOptions& opts = {}, int threads = 0);

// Marginal laws applied to latent Gaussian draws in replicate experiments.
// Mixed cycles Student t(3), Exp(1), Beta(2,2), F(2,6) over the columns;
// estimates are rank-based, so this exercises invariance rather than changing
// the answer.
enum class MarginalSet { Normal, Mixed };

// n_reps independent draws of sqrt(n) (D_hat - D) / zeta_hat under the
// Gaussian model with block correlation matrix r; the reference law is
// standard normal in the large-sample limit.
std::vector<double> studentized_replicates(const BlockCorrelationMatrix& r, const PhiFunction& phi,
                                           int n, int n_reps, std::uint64_t seed,
                                           MarginalSet marginals = MarginalSet::Normal,
                                           int threads = 0);

}  // namespace phidep
