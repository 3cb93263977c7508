#include "phidep/gaussian.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "phidep/errors.hpp"
#include "phidep/parallel.hpp"

namespace phidep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kLogRatioFloor = -690.77552789821368;  // log(1e-300)

// log det of a PD matrix via Cholesky; false when not PD.
bool logdet_spd(const Eigen::MatrixXd& a, double* out) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) return false;
  *out = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return true;
}

struct BlockDets {
  double logdet_r0 = 0.0;  // sum of block log-determinants
  bool r_pd = false;
  double logdet_r = 0.0;
};

BlockDets block_determinants(const BlockCorrelationMatrix& r) {
  r.validate();
  BlockDets out;
  for (int i = 0; i < r.groups.group_count(); ++i) {
    double ld;
    if (!logdet_spd(r.block(i), &ld))
      throw ValidationError("within-group correlation block " + std::to_string(i + 1) +
                            " is singular");
    out.logdet_r0 += ld;
  }
  out.r_pd = logdet_spd(r.r, &out.logdet_r);
  return out;
}

}  // namespace

double mutual_information_gaussian(const BlockCorrelationMatrix& r) {
  BlockDets d = block_determinants(r);
  if (!d.r_pd) return kInf;
  double log_ratio = d.logdet_r - d.logdet_r0;
  if (log_ratio < kLogRatioFloor) return kInf;
  return std::max(0.0, -0.5 * log_ratio);
}

double hellinger_gaussian(const BlockCorrelationMatrix& r) {
  BlockDets d = block_determinants(r);
  if (!d.r_pd) return 2.0;
  // R equal to its block diagonal means independent groups; return an exact
  // zero instead of letting the three log-determinants cancel to rounding.
  if ((r.r - r.block_diagonal()).cwiseAbs().maxCoeff() == 0.0) return 0.0;
  const double q = static_cast<double>(r.r.rows());
  double logdet_sum;  // |R0 + R|, PD whenever the blocks are
  if (!logdet_spd(r.block_diagonal() + r.r, &logdet_sum))
    throw NumericError("R0 + R unexpectedly not positive definite");
  double log_a = 0.5 * q * std::numbers::ln2 + 0.25 * d.logdet_r -
                 0.5 * (logdet_sum - d.logdet_r0) - 0.25 * d.logdet_r0;
  return std::min(2.0, std::max(0.0, 2.0 - 2.0 * std::exp(log_a)));
}

namespace {

// Probabilists' Gauss-Hermite rule via Golub-Welsch; weights sum to 1.
void gauss_hermite(int n, Eigen::VectorXd* nodes, Eigen::VectorXd* weights) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    double b = std::sqrt(static_cast<double>(i));
    jac(i - 1, i) = b;
    jac(i, i - 1) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  *nodes = es.eigenvalues();
  *weights = es.eigenvectors().row(0).array().square();
}

struct RatioContext {
  Eigen::MatrixXd l0;        // chol(R0)
  Eigen::MatrixXd l;         // chol(R)
  Eigen::MatrixXd a;         // R^-1 - R0^-1
  Eigen::MatrixXd r_inv, r0_inv;
  double log_m = 0.0;        // log(prod |R_ii|^(1/2) / |R|^(1/2))
};

RatioContext ratio_context(const BlockCorrelationMatrix& r) {
  BlockDets d = block_determinants(r);
  if (!d.r_pd) throw NumericError("correlation matrix is singular");
  RatioContext ctx;
  Eigen::MatrixXd r0 = r.block_diagonal();
  ctx.l0 = Eigen::LLT<Eigen::MatrixXd>(r0).matrixL();
  ctx.l = Eigen::LLT<Eigen::MatrixXd>(r.r).matrixL();
  ctx.r_inv = r.r.llt().solve(Eigen::MatrixXd::Identity(r.r.rows(), r.r.cols()));
  ctx.r0_inv = r0.llt().solve(Eigen::MatrixXd::Identity(r.r.rows(), r.r.cols()));
  ctx.a = ctx.r_inv - ctx.r0_inv;
  ctx.log_m = 0.5 * (d.logdet_r0 - d.logdet_r);
  return ctx;
}

// log k(x) for the Gaussian density ratio k = c_R / c_R0.
inline double log_k(const RatioContext& ctx, const Eigen::VectorXd& x) {
  return ctx.log_m - 0.5 * x.dot(ctx.a * x);
}

}  // namespace

NumericValue phi_gaussian_numeric(const BlockCorrelationMatrix& r, const PhiFunction& phi,
                                  const NumericOptions& opts) {
  RatioContext ctx = ratio_context(r);
  const int q = static_cast<int>(r.r.rows());
  NumericValue out;
  if (q <= 4) {
    Eigen::VectorXd nodes, weights;
    gauss_hermite(opts.gh_nodes, &nodes, &weights);
    const int n = opts.gh_nodes;
    std::uint64_t total = 1;
    for (int i = 0; i < q; ++i) total *= static_cast<std::uint64_t>(n);
    double acc = 0.0;
    Eigen::VectorXd z(q), x(q);
    for (std::uint64_t flat = 0; flat < total; ++flat) {
      std::uint64_t rem = flat;
      double w = 1.0;
      for (int i = 0; i < q; ++i) {
        int d = static_cast<int>(rem % static_cast<std::uint64_t>(n));
        rem /= static_cast<std::uint64_t>(n);
        z[i] = nodes[d];
        w *= weights[d];
      }
      x.noalias() = ctx.l0 * z;
      acc += w * phi_value(phi, std::exp(log_k(ctx, x)));
    }
    out.value = acc;
    out.se = 0.0;
    out.method = "gauss-hermite";
    return out;
  }

  // Monte Carlo under N(0, R0), chunked for reproducibility.
  const std::uint64_t chunk = 16384;
  const std::uint64_t n_chunks = (opts.mc_draws + chunk - 1) / chunk;
  std::vector<double> sums(n_chunks, 0.0), sums2(n_chunks, 0.0);
  parallel_chunks(n_chunks, opts.threads, [&](std::uint64_t c) {
    std::mt19937_64 gen(chunk_seed(opts.seed, c));
    std::normal_distribution<double> nd;
    std::uint64_t count = std::min(chunk, opts.mc_draws - c * chunk);
    Eigen::VectorXd z(q), x(q);
    double s = 0.0, s2 = 0.0;
    for (std::uint64_t i = 0; i < count; ++i) {
      for (int k = 0; k < q; ++k) z[k] = nd(gen);
      x.noalias() = ctx.l0 * z;
      double v = phi_value(phi, std::exp(log_k(ctx, x)));
      s += v;
      s2 += v * v;
    }
    sums[c] = s;
    sums2[c] = s2;
  });
  double s = 0.0, s2 = 0.0;
  for (std::uint64_t c = 0; c < n_chunks; ++c) {
    s += sums[c];
    s2 += sums2[c];
  }
  const double m = static_cast<double>(opts.mc_draws);
  out.value = s / m;
  out.se = std::sqrt(std::max(0.0, s2 / m - out.value * out.value) / m);
  out.method = "monte-carlo";
  return out;
}

DeltaMethodMatrices delta_method_matrices(const BlockCorrelationMatrix& r, const PhiFunction& phi,
                                        const NumericOptions& opts, bool force_general_path) {
  if (!phi_differentiable(phi))
    throw ValidationError("asymptotic variance needs a differentiable phi; " + phi.name() +
                          " has a kink at t = 1");
  const Eigen::Index q = r.r.rows();
  RatioContext ctx = ratio_context(r);
  DeltaMethodMatrices out;

  if (!force_general_path && phi.kind == PhiKind::MutualInformation) {
    out.m_phi = -0.5 * ctx.a;
    out.value = mutual_information_gaussian(r);
  } else if (!force_general_path && phi.kind == PhiKind::Hellinger) {
    double d_mut = mutual_information_gaussian(r);
    Eigen::MatrixXd r0 = r.block_diagonal();
    double logdet_sum, logdet_r0;
    logdet_spd(r0 + r.r, &logdet_sum);
    logdet_spd(r0, &logdet_r0);
    // |I + R0^-1 R| = |R0 + R| / |R0|
    double log_pref = 0.5 * static_cast<double>(q) * std::numbers::ln2 - 0.5 * d_mut -
                      0.5 * (logdet_sum - logdet_r0);
    out.j = (ctx.r_inv + ctx.r0_inv).llt().solve(Eigen::MatrixXd::Identity(q, q));
    out.gamma = Eigen::MatrixXd::Zero(q, q);
    for (int i = 0; i < r.groups.group_count(); ++i) {
      int off = r.groups.offset(i), d = r.groups.sizes[static_cast<std::size_t>(i)];
      Eigen::MatrixXd rii_inv =
          r.block(i).llt().solve(Eigen::MatrixXd::Identity(d, d));
      out.gamma.block(off, off, d, d) = rii_inv * out.j.block(off, off, d, d) * rii_inv;
    }
    Eigen::MatrixXd mid = (r0 + r.r).llt().solve(Eigen::MatrixXd::Identity(q, q));  // (I + R0^-1 R)^-1 R0^-1
    out.m_phi = std::exp(log_pref) * (-0.5 * ctx.a + mid - out.gamma);
    out.value = hellinger_gaussian(r);
  } else {
    // General path: expectations under N(0,R0) and N(0,R) with shared normals.
    const std::uint64_t chunk = 16384;
    const std::uint64_t n_chunks = (opts.mc_draws + chunk - 1) / chunk;
    struct Acc {
      double d = 0.0, ealp = 0.0;
      Eigen::MatrixXd a_xx0, p_xx;
    };
    std::vector<Acc> accs(n_chunks);
    parallel_chunks(n_chunks, opts.threads, [&](std::uint64_t c) {
      std::mt19937_64 gen(chunk_seed(opts.seed, c));
      std::normal_distribution<double> nd;
      std::uint64_t count = std::min(chunk, opts.mc_draws - c * chunk);
      Acc acc;
      acc.a_xx0 = Eigen::MatrixXd::Zero(q, q);
      acc.p_xx = Eigen::MatrixXd::Zero(q, q);
      Eigen::VectorXd z(q), x0(q), x(q);
      for (std::uint64_t i = 0; i < count; ++i) {
        for (Eigen::Index k = 0; k < q; ++k) z[k] = nd(gen);
        x0.noalias() = ctx.l0 * z;
        x.noalias() = ctx.l * z;
        double k0 = std::exp(log_k(ctx, x0));
        double k1 = std::max(std::exp(log_k(ctx, x)), 1e-300);
        double alpha0 = phi_value(phi, k0);
        double alpha1p = phi_derivative(phi, k1);
        acc.d += alpha0;
        acc.ealp += alpha1p;
        acc.a_xx0.noalias() += alpha0 * (x0 * x0.transpose());
        acc.p_xx.noalias() += alpha1p * (x * x.transpose());
      }
      accs[c] = std::move(acc);
    });
    double d_sum = 0.0, ealp_sum = 0.0;
    Eigen::MatrixXd a_xx0 = Eigen::MatrixXd::Zero(q, q), p_xx = Eigen::MatrixXd::Zero(q, q);
    for (auto& acc : accs) {
      d_sum += acc.d;
      ealp_sum += acc.ealp;
      a_xx0 += acc.a_xx0;
      p_xx += acc.p_xx;
    }
    const double m = static_cast<double>(opts.mc_draws);
    double d_val = d_sum / m, ealp = ealp_sum / m;
    a_xx0 /= m;
    p_xx /= m;
    out.f1 = Eigen::MatrixXd::Zero(q, q);
    out.f2 = Eigen::MatrixXd::Zero(q, q);
    for (int i = 0; i < r.groups.group_count(); ++i) {
      int off = r.groups.offset(i), d = r.groups.sizes[static_cast<std::size_t>(i)];
      Eigen::MatrixXd rii_inv = r.block(i).llt().solve(Eigen::MatrixXd::Identity(d, d));
      out.f1.block(off, off, d, d) = rii_inv * a_xx0.block(off, off, d, d) * rii_inv;
      out.f2.block(off, off, d, d) = rii_inv * p_xx.block(off, off, d, d) * rii_inv;
    }
    out.m_phi = 0.5 * (out.f1 - d_val * ctx.r0_inv - ealp * ctx.a +
                       ctx.r_inv * p_xx * ctx.r_inv - out.f2);
    out.value = d_val;
  }

  out.m_phi = 0.5 * (out.m_phi + out.m_phi.transpose()).eval();
  out.d_mr = (out.m_phi * r.r).diagonal().asDiagonal();
  return out;
}

double phi_gaussian_value(const BlockCorrelationMatrix& r, const PhiFunction& phi,
                          const NumericOptions& opts) {
  switch (phi.kind) {
    case PhiKind::MutualInformation: return mutual_information_gaussian(r);
    case PhiKind::Hellinger: return hellinger_gaussian(r);
    default: return phi_gaussian_numeric(r, phi, opts).value;
  }
}

double asymptotic_sd(const BlockCorrelationMatrix& r, const PhiFunction& phi,
                     const NumericOptions& opts, bool force_general_path) {
  DeltaMethodMatrices t = delta_method_matrices(r, phi, opts, force_general_path);
  Eigen::MatrixXd rm = r.r * (t.m_phi - t.d_mr);
  return std::sqrt(std::max(0.0, 2.0 * (rm * rm).trace()));
}

GaussianEstimate estimate_gaussian(const GroupedSample& sample, const PhiFunction& phi,
                                   double alpha, TiePolicy ties, const NumericOptions& opts) {
  const Eigen::Index n = sample.n(), q = sample.q();
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0,1)");
  if (n < q + 2)
    throw ValidationError("need n >= q + 2 rows (" + std::to_string(n) + " < " +
                          std::to_string(q + 2) + ")");
  GaussianEstimate out;
  out.phi = phi;
  out.alpha = alpha;
  out.n = n;
  out.r = normal_scores_correlation(sample, ties);

  bool singular = false;
  switch (phi.kind) {
    case PhiKind::MutualInformation:
      out.value = mutual_information_gaussian(out.r);
      singular = std::isinf(out.value);
      out.method = "gaussian-closed-form";
      break;
    case PhiKind::Hellinger:
      out.value = hellinger_gaussian(out.r);
      singular = (out.value == 2.0);
      out.method = "gaussian-closed-form";
      break;
    default: {
      Eigen::LLT<Eigen::MatrixXd> llt(out.r.r);
      singular = llt.info() != Eigen::Success;
      if (singular) {
        out.value = phi_max_value(phi);  // may be +inf
        out.method = "gaussian-closed-form";
      } else {
        NumericValue nv = phi_gaussian_numeric(out.r, phi, opts);
        out.value = nv.value;
        out.method = "gaussian-" + nv.method;
        if (nv.se > 0.0)
          out.warnings.push_back("value is Monte Carlo based (se " + std::to_string(nv.se) + ")");
      }
      break;
    }
  }
  out.normalized = normalize_dependence(phi, out.value);

  if (singular) {
    out.sd = out.ci_lo = out.ci_hi = kNaN;
    out.warnings.push_back("normal-scores correlation is singular; no asymptotic sd");
    return out;
  }
  if (!phi_differentiable(phi)) {
    out.sd = out.ci_lo = out.ci_hi = kNaN;
    out.warnings.push_back("no asymptotic sd for " + phi.name() + " (not differentiable at 1)");
    return out;
  }
  out.sd = asymptotic_sd(out.r, phi, opts);
  bool general = phi.kind != PhiKind::MutualInformation && phi.kind != PhiKind::Hellinger;
  if (general)
    out.warnings.push_back(
        "sd uses Monte Carlo expectations; differentiation under the integral assumed");
  double z = normal_quantile(1.0 - alpha / 2.0);
  double half = z * out.sd / std::sqrt(static_cast<double>(n));
  out.ci_lo = out.value - half;
  out.ci_hi = out.value + half;
  return out;
}

}  // namespace phidep
