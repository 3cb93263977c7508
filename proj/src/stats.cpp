#include "phidep/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "phidep/errors.hpp"

namespace phidep {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

namespace {

// Acklam's rational approximation, |relative error| < 1.2e-9.
double normal_quantile_approx(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) return -normal_quantile_approx(1.0 - p);
  double q = p - 0.5, r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal quantile requires p in (0,1)");
  double x = normal_quantile_approx(p);
  // One Halley step against the exact cdf brings the error near machine epsilon.
  double e = normal_cdf(x) - p;
  double u = e / normal_pdf(x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

std::vector<double> ranks(const Eigen::VectorXd& x, TiePolicy policy, bool* has_ties) {
  const auto n = static_cast<std::size_t>(x.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[static_cast<Eigen::Index>(a)] < x[static_cast<Eigen::Index>(b)]; });
  std::vector<double> r(n);
  bool ties = false;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[static_cast<Eigen::Index>(order[j + 1])] == x[static_cast<Eigen::Index>(order[i])]) ++j;
    if (j > i) {
      ties = true;
      if (policy == TiePolicy::Error)
        throw ValidationError("tied values present; rerun with the midrank tie policy if intended");
    }
    double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // average of ranks i+1..j+1
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  if (has_ties) *has_ties = ties;
  return r;
}

double ks_statistic_vs_normal(std::vector<double> sample) {
  if (sample.empty()) throw ValidationError("empty sample in KS test");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    double f = normal_cdf(sample[i]);
    d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

double ks_pvalue(double statistic, std::size_t n) {
  double lambda = std::sqrt(static_cast<double>(n)) * statistic;
  if (lambda < 1e-9) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    double term = 2.0 * ((j % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lambda * lambda);
    sum += term;
    if (std::fabs(term) < 1e-12) break;
  }
  return std::min(1.0, std::max(0.0, sum));
}

namespace {

// Merge-sort based inversion counting (Knight's algorithm).
std::uint64_t count_inversions(std::vector<double>& v, std::vector<double>& buf,
                               std::size_t lo, std::size_t hi) {
  if (hi - lo <= 1) return 0;
  std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t cnt = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
  std::size_t a = lo, b = mid, out = lo;
  while (a < mid && b < hi) {
    if (v[b] < v[a]) {
      cnt += mid - a;
      buf[out++] = v[b++];
    } else {
      buf[out++] = v[a++];
    }
  }
  while (a < mid) buf[out++] = v[a++];
  while (b < hi) buf[out++] = v[b++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return cnt;
}

}  // namespace

double kendall_tau(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("kendall_tau needs two equal-length vectors");
  const auto n = static_cast<std::size_t>(x.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto ai = static_cast<Eigen::Index>(a), bi = static_cast<Eigen::Index>(b);
    if (x[ai] != x[bi]) return x[ai] < x[bi];
    return y[ai] < y[bi];
  });
  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[static_cast<Eigen::Index>(order[i])];
  std::uint64_t inv = count_inversions(ys, buf, 0, n);
  double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  return 1.0 - 2.0 * static_cast<double>(inv) / pairs;
}

double spearman_rho(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  auto rx = ranks(x, TiePolicy::Midrank);
  auto ry = ranks(y, TiePolicy::Midrank);
  const double n = static_cast<double>(rx.size());
  double mx = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    double a = rx[i] - mx, b = ry[i] - mx;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  return sxy / std::sqrt(sxx * syy);
}

namespace {

double invert_increasing_cdf(double p, double lo, double hi, double (*cdf)(double)) {
  for (int i = 0; i < 200 && hi - lo > 1e-13 * (1.0 + std::fabs(lo) + std::fabs(hi)); ++i) {
    double mid = 0.5 * (lo + hi);
    (cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double t3_cdf(double x) {
  double z = x / std::sqrt(3.0);
  return 0.5 + (std::atan(z) + z / (1.0 + z * z)) / std::numbers::pi;
}

double beta22_cdf(double t) { return t * t * (3.0 - 2.0 * t); }

}  // namespace

double student_t3_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("quantile requires p in (0,1)");
  return invert_increasing_cdf(p, -1e8, 1e8, &t3_cdf);
}

double exponential_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("quantile requires p in (0,1)");
  return -std::log1p(-p);
}

double beta22_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("quantile requires p in (0,1)");
  return invert_increasing_cdf(p, 0.0, 1.0, &beta22_cdf);
}

double f26_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("quantile requires p in (0,1)");
  // F(2,6) cdf is 1 - (1 + x/3)^(-3).
  return 3.0 * (std::pow(1.0 - p, -1.0 / 3.0) - 1.0);
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of empty set");
  std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace phidep
