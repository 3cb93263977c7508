#include "phidep/inference.hpp"

#include <cmath>
#include <random>

#include "phidep/errors.hpp"
#include "phidep/parallel.hpp"
#include "phidep/stats.hpp"

namespace phidep {

ContagionTestResult contagion_test(const GaussianEstimate& first, const GaussianEstimate& second,
                                   ContagionDirection direction) {
  for (const GaussianEstimate* e : {&first, &second}) {
    if (!std::isfinite(e->value))
      throw NumericError("period estimate is infinite (singular window); z-test undefined");
    if (!(e->sd > 0.0))
      throw NumericError("period estimate has no usable standard deviation; z-test undefined");
    if (e->n <= 0) throw NumericError("period estimate lacks a sample size");
  }
  ContagionTestResult out;
  out.direction = direction;
  out.first = first;
  out.second = second;
  double var = first.sd * first.sd / static_cast<double>(first.n) +
               second.sd * second.sd / static_cast<double>(second.n);
  out.z = (first.value - second.value) / std::sqrt(var);
  out.p_value = direction == ContagionDirection::IncreaseIntoCrisis ? normal_cdf(out.z)
                                                                    : normal_cdf(-out.z);
  return out;
}

RollingSeries rolling_dependence(const GroupedSample& sample, int window, int step,
                                 const PhiFunction& phi, double alpha, TiePolicy ties,
                                 const NumericOptions& opts, int threads) {
  const int q = static_cast<int>(sample.q());
  if (window < q + 2) throw ValidationError("window must be at least q + 2 rows");
  std::vector<WindowSpan> spans = rolling_windows(static_cast<int>(sample.n()), window, step);

  RollingSeries series;
  series.window = window;
  series.step = step;
  series.alpha = alpha;
  series.entries.resize(spans.size());
  parallel_chunks(spans.size(), threads, [&](std::uint64_t w) {
    const WindowSpan& span = spans[w];
    GroupedSample slice;
    slice.data = sample.data.middleRows(span.first - 1, span.length());
    slice.groups = sample.groups;
    RollingEntry entry;
    entry.span = span;
    entry.label = sample.row_labels.empty()
                      ? std::to_string(span.first)
                      : sample.row_labels[static_cast<std::size_t>(span.first) - 1];
    entry.estimate = estimate_gaussian(slice, phi, alpha, ties, opts);
    entry.singular = !std::isfinite(entry.estimate.value) || !(entry.estimate.sd > 0.0);
    series.entries[w] = std::move(entry);
  });
  return series;
}

namespace {

double mixed_marginal_quantile(int column, double u) {
  switch (column % 4) {
    case 0: return student_t3_quantile(u);
    case 1: return exponential_quantile(u);
    case 2: return beta22_quantile(u);
    default: return f26_quantile(u);
  }
}

}  // namespace

std::vector<double> studentized_replicates(const BlockCorrelationMatrix& r, const PhiFunction& phi,
                                           int n, int n_reps, std::uint64_t seed,
                                           MarginalSet marginals, int threads) {
  r.validate();
  if (n_reps < 1) throw ValidationError("need at least one replicate");
  const int q = static_cast<int>(r.r.rows());
  if (n < q + 2) throw ValidationError("replicate size must be at least q + 2");

  NumericOptions opts;
  opts.threads = 1;  // replicates already run in parallel
  const double truth = phi_gaussian_value(r, phi, opts);
  if (!std::isfinite(truth)) throw ValidationError("true dependence is infinite for this R");

  Eigen::LLT<Eigen::MatrixXd> llt(r.r);
  if (llt.info() != Eigen::Success) throw NumericError("correlation matrix is singular");
  Eigen::MatrixXd chol_l = llt.matrixL();

  std::vector<double> out(static_cast<std::size_t>(n_reps));
  parallel_chunks(static_cast<std::uint64_t>(n_reps), threads, [&](std::uint64_t rep) {
    std::mt19937_64 gen(chunk_seed(seed, rep));
    std::normal_distribution<double> nd;
    GroupedSample sim;
    sim.data.resize(n, q);
    sim.groups = r.groups;
    Eigen::VectorXd z(q);
    for (int row = 0; row < n; ++row) {
      for (int j = 0; j < q; ++j) z[j] = nd(gen);
      Eigen::VectorXd x = chol_l * z;
      if (marginals == MarginalSet::Mixed)
        for (int j = 0; j < q; ++j) x[j] = mixed_marginal_quantile(j, normal_cdf(x[j]));
      sim.data.row(row) = x.transpose();
    }
    GaussianEstimate est = estimate_gaussian(sim, phi, 0.05, TiePolicy::Error, opts);
    out[rep] = std::sqrt(static_cast<double>(n)) * (est.value - truth) / est.sd;
  });
  return out;
}

}  // namespace phidep
