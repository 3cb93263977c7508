#include "phidep/mle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "phidep/errors.hpp"
#include "phidep/parallel.hpp"
#include "phidep/stats.hpp"

namespace phidep {

Eigen::MatrixXd pseudo_observations(const Eigen::MatrixXd& data, TiePolicy ties) {
  if (data.rows() < 2) throw ValidationError("pseudo-observations need at least 2 rows");
  Eigen::MatrixXd out(data.rows(), data.cols());
  const double denom = static_cast<double>(data.rows()) + 1.0;
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    std::vector<double> r = ranks(data.col(j), ties);
    for (Eigen::Index i = 0; i < data.rows(); ++i)
      out(i, j) = r[static_cast<std::size_t>(i)] / denom;
  }
  return out;
}

double brent_minimize(const std::function<double(double)>& f, double lo, double hi, double tol,
                      int max_iter, int* iterations_out) {
  if (!(lo < hi)) throw ValidationError("Brent needs lo < hi");
  const double gold = 0.3819660112501051;
  double a = lo, b = hi;
  double x = a + gold * (b - a), w = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  int it = 0;
  for (; it < max_iter; ++it) {
    double m = 0.5 * (a + b);
    double tol1 = tol * std::fabs(x) + 1e-12, tol2 = 2.0 * tol1;
    if (std::fabs(x - m) <= tol2 - 0.5 * (b - a)) break;
    bool parabolic = false;
    if (std::fabs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::fabs(q);
      double e_old = e;
      e = d;
      if (std::fabs(p) < std::fabs(0.5 * q * e_old) && p > q * (a - x) && p < q * (b - x)) {
        parabolic = true;
        d = p / q;
        double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = x < m ? tol1 : -tol1;
      }
    }
    if (!parabolic) {
      e = (x < m ? b : a) - x;
      d = gold * e;
    }
    double u = std::fabs(d) >= tol1 ? x + d : x + (d > 0.0 ? tol1 : -tol1);
    double fu = f(u);
    if (fu <= fx) {
      if (u < x) b = x; else a = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  if (iterations_out) *iterations_out = it;
  return x;
}

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& start,
                             const std::function<void(Eigen::VectorXd&)>& project, double step,
                             double diameter_tol, int max_iter) {
  const int p = static_cast<int>(start.size());
  std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(p) + 1);
  std::vector<double> fs(static_cast<std::size_t>(p) + 1);
  auto eval = [&](Eigen::VectorXd& x) {
    project(x);
    double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };
  simplex[0] = start;
  fs[0] = eval(simplex[0]);
  for (int i = 0; i < p; ++i) {
    Eigen::VectorXd x = simplex[0];
    x[i] += step;
    simplex[static_cast<std::size_t>(i) + 1] = x;
    fs[static_cast<std::size_t>(i) + 1] = eval(simplex[static_cast<std::size_t>(i) + 1]);
  }
  auto order = [&] {
    std::vector<int> idx(simplex.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      return fs[static_cast<std::size_t>(a)] < fs[static_cast<std::size_t>(b)];
    });
    std::vector<Eigen::VectorXd> s2(simplex.size());
    std::vector<double> f2(fs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      s2[i] = simplex[static_cast<std::size_t>(idx[i])];
      f2[i] = fs[static_cast<std::size_t>(idx[i])];
    }
    simplex = std::move(s2);
    fs = std::move(f2);
  };
  int it = 0;
  bool converged = false;
  for (; it < max_iter; ++it) {
    order();
    double diameter = 0.0;
    for (std::size_t i = 1; i < simplex.size(); ++i)
      diameter = std::max(diameter, (simplex[i] - simplex[0]).norm());
    if (diameter < diameter_tol) {
      converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < p; ++i) centroid += simplex[static_cast<std::size_t>(i)];
    centroid /= static_cast<double>(p);
    auto& worst = simplex.back();
    double& f_worst = fs.back();

    Eigen::VectorXd refl = centroid + (centroid - worst);
    double f_refl = eval(refl);
    if (f_refl < fs[0]) {
      Eigen::VectorXd expa = centroid + 2.0 * (centroid - worst);
      double f_expa = eval(expa);
      if (f_expa < f_refl) {
        worst = expa; f_worst = f_expa;
      } else {
        worst = refl; f_worst = f_refl;
      }
      continue;
    }
    if (f_refl < fs[simplex.size() - 2]) {
      worst = refl; f_worst = f_refl;
      continue;
    }
    Eigen::VectorXd contr = centroid + 0.5 * ((f_refl < f_worst ? refl : worst) - centroid);
    double f_contr = eval(contr);
    if (f_contr < std::min(f_refl, f_worst)) {
      worst = contr; f_worst = f_contr;
      continue;
    }
    for (std::size_t i = 1; i < simplex.size(); ++i) {
      simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0]);
      fs[i] = eval(simplex[i]);
    }
  }
  order();
  return {simplex[0], fs[0], it, converged};
}

namespace {

struct ThetaBox {
  double lo = 0.0, hi = 0.0;
};

ThetaBox family_box(ArchimedeanFamily family) {
  if (family == ArchimedeanFamily::Clayton) return {1e-3, 100.0};
  return {1.0, 100.0};
}

double negative_loglik(const Eigen::MatrixXd& pobs, const CopulaModel& model) {
  double ll = 0.0;
  for (Eigen::Index r = 0; r < pobs.rows(); ++r) {
    double lc = model_log_density(model, pobs.row(r).transpose());
    if (!std::isfinite(lc)) return std::numeric_limits<double>::max();
    ll += lc;
  }
  return -ll;
}

CopulaModel substitute_theta(const CopulaModel& shape, const Eigen::VectorXd& theta) {
  if (const auto* a = std::get_if<ArchimedeanCopula>(&shape)) {
    ArchimedeanCopula out = *a;
    out.theta = theta[0];
    return out;
  }
  NestedArchimedeanCopula out = std::get<NestedArchimedeanCopula>(shape);
  out.theta0 = theta[0];
  out.child_thetas.assign(theta.data() + 1, theta.data() + theta.size());
  return out;
}

}  // namespace

FitResult fit_pseudo_mle(const GroupedSample& sample, const CopulaModel& shape,
                         const Eigen::VectorXd& starts, TiePolicy ties) {
  if (std::holds_alternative<GaussianCopula>(shape))
    throw ValidationError(
        "the Gaussian model is fitted by normal-scores correlation, not pseudo-likelihood");
  Eigen::MatrixXd pobs = pseudo_observations(sample.data, ties);

  FitResult result;
  result.start = starts;

  if (const auto* a = std::get_if<ArchimedeanCopula>(&shape)) {
    if (a->dim != static_cast<int>(sample.q()))
      throw ValidationError("copula dimension does not match the data");
    if (starts.size() != 1) throw ValidationError("one-family fit takes a single starting value");
    ThetaBox box = family_box(a->family);
    auto nll = [&](double th) {
      Eigen::VectorXd v(1);
      v << th;
      return negative_loglik(pobs, substitute_theta(shape, v));
    };
    int iters = 0;
    const int max_iter = 200;
    double th = brent_minimize(nll, box.lo, box.hi, 1e-9, max_iter, &iters);
    double f_th = nll(th);
    double start_th = std::clamp(starts[0], box.lo, box.hi);
    double f_start = nll(start_th);
    if (f_start < f_th) {
      th = start_th;
      f_th = f_start;
    }
    result.theta_hat = Eigen::VectorXd::Constant(1, th);
    result.loglik = -f_th;
    result.iterations = iters;
    result.converged = iters < max_iter;
  } else {
    const auto& nested = std::get<NestedArchimedeanCopula>(shape);
    if (nested.groups.dimension() != static_cast<int>(sample.q()) ||
        !(nested.groups == sample.groups))
      throw ValidationError("nested template groups do not match the data");
    const int k = nested.groups.group_count();
    if (starts.size() != k + 1)
      throw ValidationError("nested fit takes a (theta0, theta_1..k) starting vector");
    ThetaBox box = family_box(nested.family);
    auto project = [box, k](Eigen::VectorXd& x) {
      for (int i = 0; i <= k; ++i) x[i] = std::clamp(x[i], box.lo, box.hi);
      double min_child = x.tail(k).minCoeff();
      x[0] = std::min(x[0], min_child);
    };
    auto nll = [&](const Eigen::VectorXd& th) {
      return negative_loglik(pobs, substitute_theta(shape, th));
    };
    NelderMeadResult nm = nelder_mead(nll, starts, project, 0.25, 1e-6, 500);
    Eigen::VectorXd projected_start = starts;
    project(projected_start);
    double f_start = nll(projected_start);
    if (f_start < nm.f_min) {
      nm.x = projected_start;
      nm.f_min = f_start;
    }
    result.theta_hat = nm.x;
    result.loglik = -nm.f_min;
    result.iterations = nm.iterations;
    result.converged = nm.converged;
  }
  result.model = substitute_theta(shape, result.theta_hat);
  return result;
}

Eigen::VectorXd staged_starts(const GroupedSample& sample, const NestedArchimedeanCopula& shape,
                              TiePolicy ties) {
  const int k = shape.groups.group_count();
  if (shape.groups.dimension() != static_cast<int>(sample.q()))
    throw ValidationError("nested template groups do not match the data");
  for (int size : shape.groups.sizes)
    if (size < 2)
      throw ValidationError(
          "every group needs at least two coordinates to identify its child parameter");
  Eigen::VectorXd starts(k + 1);
  starts[0] = shape.family == ArchimedeanFamily::Clayton ? 0.1 : 2.0;
  for (int i = 0; i < k; ++i) {
    int off = shape.groups.offset(i), d = shape.groups.sizes[static_cast<std::size_t>(i)];
    GroupedSample sub;
    sub.data = sample.data.middleCols(off, d);
    sub.groups = GroupStructure({d});
    ArchimedeanCopula child{shape.family, 2.0, d, {}};
    FitResult fit = fit_pseudo_mle(sub, child, Eigen::VectorXd::Constant(1, 2.0), ties);
    starts[i + 1] = fit.theta_hat[0];
  }
  return starts;
}

FitResult fit_copula(const GroupedSample& sample, const CopulaModel& shape, TiePolicy ties) {
  if (const auto* n = std::get_if<NestedArchimedeanCopula>(&shape)) {
    Eigen::VectorXd starts = staged_starts(sample, *n, ties);
    return fit_pseudo_mle(sample, shape, starts, ties);
  }
  return fit_pseudo_mle(sample, shape, Eigen::VectorXd::Constant(1, 2.0), ties);
}

Eigen::MatrixXd bootstrap_parameter_variance(const GroupedSample& sample, const CopulaModel& shape,
                                             int replicates, std::uint64_t seed, int threads) {
  if (replicates < 2) throw ValidationError("bootstrap needs at least 2 replicates");
  const Eigen::Index n = sample.n();
  const int p = std::holds_alternative<NestedArchimedeanCopula>(shape)
                    ? std::get<NestedArchimedeanCopula>(shape).groups.group_count() + 1
                    : 1;
  Eigen::MatrixXd draws(replicates, p);
  parallel_chunks(static_cast<std::uint64_t>(replicates), threads, [&](std::uint64_t b) {
    std::mt19937_64 gen(chunk_seed(seed, b));
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    GroupedSample resampled;
    resampled.data.resize(n, sample.q());
    for (Eigen::Index r = 0; r < n; ++r) resampled.data.row(r) = sample.data.row(pick(gen));
    resampled.groups = sample.groups;
    FitResult fit = fit_copula(resampled, shape, TiePolicy::Midrank);
    draws.row(static_cast<Eigen::Index>(b)) = fit.theta_hat.transpose();
  });
  Eigen::RowVectorXd mean = draws.colwise().mean();
  Eigen::MatrixXd centered = draws.rowwise() - mean;
  return static_cast<double>(n) * (centered.transpose() * centered) /
         static_cast<double>(replicates - 1);
}

}  // namespace phidep
