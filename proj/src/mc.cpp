#include "phidep/mc.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "phidep/errors.hpp"
#include "phidep/parallel.hpp"

namespace phidep {

namespace {

constexpr double kBoundaryEps = 1e-12;
constexpr std::uint64_t kChunk = 16384;
constexpr int kMaxRedraw = 100;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Kahan {
  double sum = 0.0, carry = 0.0;
  void add(double v) {
    double y = v - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

// Power sums of the summand within one chunk plus the redraw count.
struct ChunkMoments {
  double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
  double n = 0.0;
  double redraws = 0.0;
};

ChunkMoments merge(const ChunkMoments& a, const ChunkMoments& b) {
  return {a.s1 + b.s1, a.s2 + b.s2, a.s3 + b.s3, a.s4 + b.s4, a.n + b.n, a.redraws + b.redraws};
}

// Fixed-order pairwise tree over the chunk partials; independent of how many
// threads produced them.
ChunkMoments pairwise_reduce(std::vector<ChunkMoments>& parts) {
  for (std::size_t width = 1; width < parts.size(); width *= 2)
    for (std::size_t i = 0; i + width < parts.size(); i += 2 * width)
      parts[i] = merge(parts[i], parts[i + width]);
  return parts.empty() ? ChunkMoments{} : parts[0];
}

bool interior(const Eigen::MatrixXd& buf, Eigen::Index row) {
  for (Eigen::Index j = 0; j < buf.cols(); ++j)
    if (!(buf(row, j) > kBoundaryEps && buf(row, j) < 1.0 - kBoundaryEps)) return false;
  return true;
}

// Draws chunk rows, replacing boundary-adjacent rows, and accumulates the
// moments of summand(lr).
template <class Summand>
ChunkMoments run_chunk(const CopulaModel& model, std::uint64_t seed, std::uint64_t chunk_index,
                       std::uint64_t rows, const Summand& summand) {
  std::mt19937_64 gen(chunk_seed(seed, chunk_index));
  Eigen::MatrixXd buf(static_cast<Eigen::Index>(rows), model_dimension(model));
  sample_rows(model, gen, buf);
  Eigen::MatrixXd one(1, buf.cols());
  Kahan k1, k2, k3, k4;
  ChunkMoments m;
  for (Eigen::Index r = 0; r < buf.rows(); ++r) {
    int tries = 0;
    while (!interior(buf, r)) {
      if (++tries > kMaxRedraw)
        throw NumericError("sampler repeatedly produced boundary-adjacent draws");
      sample_rows(model, gen, one);
      buf.row(r) = one.row(0);
      m.redraws += 1.0;
    }
    double s = summand(model_log_ratio(model, buf.row(r).transpose()));
    k1.add(s);
    double s2 = s * s;
    k2.add(s2);
    k3.add(s2 * s);
    k4.add(s2 * s2);
  }
  m.s1 = k1.sum;
  m.s2 = k2.sum;
  m.s3 = k3.sum;
  m.s4 = k4.sum;
  m.n = static_cast<double>(rows);
  return m;
}

struct SummandStats {
  double mean = 0.0, sd = 0.0, kurtosis = 0.0;
  std::uint64_t redraws = 0;
};

template <class Summand>
SummandStats mc_moments(const CopulaModel& model, const McOptions& opts, const Summand& summand) {
  validate_model(model);
  if (opts.draws == 0) throw ValidationError("Monte Carlo needs at least one draw");
  const std::uint64_t n_chunks = (opts.draws + kChunk - 1) / kChunk;
  std::vector<ChunkMoments> parts(n_chunks);
  parallel_chunks(n_chunks, opts.threads, [&](std::uint64_t c) {
    std::uint64_t rows = std::min(kChunk, opts.draws - c * kChunk);
    parts[c] = run_chunk(model, opts.seed, c, rows, summand);
  });
  ChunkMoments total = pairwise_reduce(parts);

  SummandStats out;
  double n = total.n;
  double mean = total.s1 / n;
  double m2 = total.s2 / n - mean * mean;
  out.mean = mean;
  out.redraws = static_cast<std::uint64_t>(total.redraws);
  if (m2 <= 0.0) {
    out.sd = 0.0;
    out.kurtosis = kNaN;
    return out;
  }
  out.sd = std::sqrt(m2 * n / std::max(1.0, n - 1.0));
  double m4 = total.s4 / n - 4.0 * mean * total.s3 / n + 6.0 * mean * mean * total.s2 / n -
              3.0 * mean * mean * mean * mean;
  out.kurtosis = m4 / (m2 * m2);
  return out;
}

void kurtosis_warning(McDependenceEstimate& est) {
  if (std::isfinite(est.summand_kurtosis) && est.summand_kurtosis > 100.0)
    est.warnings.push_back(
        "summand kurtosis exceeds 100; the Monte Carlo standard error may be unreliable");
}

}  // namespace

McDependenceEstimate estimate_phi_mc(const CopulaModel& model, const PhiFunction& phi,
                                     const McOptions& opts) {
  auto stats = mc_moments(model, opts,
                          [&phi](double lr) { return phi_ratio_summand(phi, lr); });
  McDependenceEstimate est;
  est.value = stats.mean;
  est.mc_standard_error = stats.sd / std::sqrt(static_cast<double>(opts.draws));
  est.m_used = opts.draws;
  est.redraws = stats.redraws;
  est.estimator_form = EstimatorForm::General;
  est.seed = opts.seed;
  est.summand_kurtosis = stats.kurtosis;
  est.sqrt_ratio_second_moment = kNaN;
  kurtosis_warning(est);
  return est;
}

McDependenceEstimate estimate_hellinger_reduced(const CopulaModel& model, const McOptions& opts) {
  // Moments of s = sqrt(prod_i c_i / c) = exp(-lr/2); E[s^2] = 1 identically,
  // which the estimate reports as a diagnostic.
  auto stats = mc_moments(model, opts, [](double lr) { return std::exp(-0.5 * lr); });
  McDependenceEstimate est;
  est.value = 2.0 - 2.0 * stats.mean;
  est.mc_standard_error = 2.0 * stats.sd / std::sqrt(static_cast<double>(opts.draws));
  est.m_used = opts.draws;
  est.redraws = stats.redraws;
  est.estimator_form = EstimatorForm::HellingerReduced;
  est.seed = opts.seed;
  est.summand_kurtosis = stats.kurtosis;
  double m2_about_mean = stats.sd * stats.sd;
  est.sqrt_ratio_second_moment = m2_about_mean * (1.0 - 1.0 / static_cast<double>(opts.draws)) +
                                 stats.mean * stats.mean;
  kurtosis_warning(est);
  return est;
}

McDependenceEstimate estimate_from_data(const GroupedSample& sample, const CopulaModel& shape,
                                        const PhiFunction& phi, const McOptions& opts) {
  bool reduced;
  switch (opts.form) {
    case FormChoice::General: reduced = false; break;
    case FormChoice::Reduced:
      if (phi.kind != PhiKind::Hellinger)
        throw ValidationError("the reduced estimator form exists only for hellinger");
      reduced = true;
      break;
    default: reduced = phi.kind == PhiKind::Hellinger; break;
  }
  FitResult fit = fit_copula(sample, shape, opts.ties);
  McDependenceEstimate est = reduced ? estimate_hellinger_reduced(fit.model, opts)
                                     : estimate_phi_mc(fit.model, phi, opts);
  est.theta_used = fit.theta_hat;
  if (!fit.converged) est.warnings.push_back("parameter fit stopped before convergence");
  est.fit = std::move(fit);
  return est;
}

namespace {

// Midpoint-rule value of the dependence integral on an N^q grid, written as
// integral of c(u) * summand(lr(u)) du; parallel over the first axis.
double midpoint_level(const CopulaModel& model, const PhiFunction& phi, int n_per_axis,
                      int threads) {
  const int q = model_dimension(model);
  const GroupStructure groups = model_groups(model);
  std::vector<Kahan> parts(static_cast<std::size_t>(n_per_axis));
  parallel_chunks(static_cast<std::uint64_t>(n_per_axis), threads, [&](std::uint64_t slice) {
    Eigen::VectorXd u(q);
    u[0] = (2.0 * static_cast<double>(slice) + 1.0) / (2.0 * n_per_axis);
    std::uint64_t inner = 1;
    for (int a = 1; a < q; ++a) inner *= static_cast<std::uint64_t>(n_per_axis);
    Kahan acc;
    for (std::uint64_t flat = 0; flat < inner; ++flat) {
      std::uint64_t rem = flat;
      for (int a = 1; a < q; ++a) {
        u[a] = (2.0 * static_cast<double>(rem % static_cast<std::uint64_t>(n_per_axis)) + 1.0) /
               (2.0 * n_per_axis);
        rem /= static_cast<std::uint64_t>(n_per_axis);
      }
      double log_c = model_log_density(model, u);
      double lr = log_c;
      for (int i = 0; i < groups.group_count(); ++i)
        lr -= model_group_log_density(model, i,
                                      u.segment(groups.offset(i),
                                                groups.sizes[static_cast<std::size_t>(i)]));
      acc.add(std::exp(log_c) * phi_ratio_summand(phi, lr));
    }
    parts[slice] = acc;
  });
  Kahan total;
  for (const auto& p : parts) total.add(p.sum);
  double volume = 1.0;
  for (int a = 0; a < q; ++a) volume /= n_per_axis;
  return total.sum * volume;
}

double radical_inverse(std::uint64_t index, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base);
  double f = inv, value = 0.0;
  while (index > 0) {
    value += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return value;
}

constexpr std::uint64_t kHaltonBases[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41};

}  // namespace

QuadratureResult quadrature_oracle(const CopulaModel& model, const PhiFunction& phi) {
  validate_model(model);
  const int q = model_dimension(model);
  if (q > 3) throw ValidationError("quadrature oracle covers dimension <= 3");
  const int base = q <= 2 ? 200 : 64;
  double i1 = midpoint_level(model, phi, base, 0);
  double i2 = midpoint_level(model, phi, 2 * base, 0);
  double i3 = midpoint_level(model, phi, 4 * base, 0);
  double d1 = i2 - i1, d2 = i3 - i2;
  if (d1 == 0.0 || d2 == 0.0 || std::fabs(d2) >= std::fabs(d1))
    return {i3, std::fabs(d2)};
  double rho = d2 / d1;
  double correction = d2 * rho / (1.0 - rho);
  return {i3 + correction, std::fabs(correction)};
}

double density_integral_check(const CopulaModel& model, std::uint64_t draws, std::uint64_t seed,
                              int threads) {
  validate_model(model);
  if (draws == 0) throw ValidationError("integral check needs at least one draw");
  const int q = model_dimension(model);
  if (static_cast<std::size_t>(q) > std::size(kHaltonBases))
    throw ValidationError("integral check covers dimension <= 13");
  const std::uint64_t n_chunks = (draws + kChunk - 1) / kChunk;
  std::vector<Kahan> parts(n_chunks);
  parallel_chunks(n_chunks, threads, [&](std::uint64_t c) {
    std::mt19937_64 gen(chunk_seed(seed, c));
    Eigen::MatrixXd one(1, q);
    Eigen::VectorXd u(q);
    Kahan acc;
    std::uint64_t first = c * kChunk, rows = std::min(kChunk, draws - first);
    for (std::uint64_t r = 0; r < rows; ++r) {
      std::uint64_t index = first + r;
      if (index % 2 == 0) {
        int tries = 0;
        do {
          if (++tries > kMaxRedraw)
            throw NumericError("sampler repeatedly produced boundary-adjacent draws");
          sample_rows(model, gen, one);
        } while (!interior(one, 0));
        u = one.row(0).transpose();
      } else {
        for (int a = 0; a < q; ++a)
          u[a] = radical_inverse(index / 2 + 1, kHaltonBases[static_cast<std::size_t>(a)]);
      }
      double c_val = std::exp(model_log_density(model, u));
      acc.add(2.0 * c_val / (c_val + 1.0));
    }
    parts[c] = acc;
  });
  Kahan total;
  for (const auto& p : parts) total.add(p.sum);
  return total.sum / static_cast<double>(draws);
}

}  // namespace phidep
