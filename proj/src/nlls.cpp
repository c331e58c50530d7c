#include "bullseye/nlls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bullseye::fit {

namespace {

struct Evaluator {
  const Problem& problem;
  int evaluations = 0;

  Eigen::VectorXd residual(std::span<const double> p) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(problem.num_residuals));
    problem.residual(p, std::span<double>(r.data(), problem.num_residuals));
    ++evaluations;
    return r;
  }

  void jacobian(std::span<const double> p, Eigen::MatrixXd& jac) {
    jac.resize(static_cast<Eigen::Index>(problem.num_residuals), static_cast<Eigen::Index>(p.size()));
    if (problem.jacobian) {
      problem.jacobian(p, jac);
    } else {
      numeric_jacobian(problem, p, jac, 1e-6);
    }
  }
};

void project(std::vector<double>& p, const Bounds& b) {
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (k < b.lower.size()) p[k] = std::max(p[k], b.lower[k]);
    if (k < b.upper.size()) p[k] = std::min(p[k], b.upper[k]);
  }
}

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

// Largest cosine between r and a Jacobian column, ignoring components pinned
// at an active bound whose descent direction points outward.
double gradient_cosine(const Eigen::MatrixXd& jac, const Eigen::VectorXd& r, const std::vector<double>& p,
                       const Bounds& b) {
  const double rn = r.norm();
  if (rn == 0.0) return 0.0;
  const Eigen::VectorXd g = jac.transpose() * r;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const bool at_lo = uk < b.lower.size() && p[uk] <= b.lower[uk];
    const bool at_hi = uk < b.upper.size() && p[uk] >= b.upper[uk];
    if ((at_lo && g[k] > 0.0) || (at_hi && g[k] < 0.0)) continue;
    const double cn = jac.col(k).norm();
    if (cn == 0.0) continue;
    worst = std::max(worst, std::abs(g[k]) / (cn * rn));
  }
  return worst;
}

}  // namespace

double Result::sigma(std::size_t k) const {
  const auto i = static_cast<Eigen::Index>(k);
  if (covariance.rows() <= i) return 0.0;
  return std::sqrt(std::max(0.0, covariance(i, i)));
}

void numeric_jacobian(const Problem& problem, std::span<const double> params, Eigen::MatrixXd& jac,
                      double rel_step) {
  const auto m = static_cast<Eigen::Index>(problem.num_residuals);
  const auto n = static_cast<Eigen::Index>(params.size());
  jac.resize(m, n);
  std::vector<double> p(params.begin(), params.end());
  Eigen::VectorXd rp(m), rm(m);
  auto eval = [&](Eigen::VectorXd& out) {
    problem.residual(p, std::span<double>(out.data(), problem.num_residuals));
  };
  auto central = [&](std::size_t k, double h) {
    const double saved = p[k];
    p[k] = saved + h;
    eval(rp);
    p[k] = saved - h;
    eval(rm);
    p[k] = saved;
    return Eigen::VectorXd((rp - rm) / (2.0 * h));
  };
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const double h = rel_step * std::max(std::abs(p[uk]), 1e-3);
    // Richardson: (4 D(h/2) - D(h)) / 3 cancels the h^2 term.
    const Eigen::VectorXd d1 = central(uk, h);
    const Eigen::VectorXd d2 = central(uk, 0.5 * h);
    jac.col(k) = (4.0 * d2 - d1) / 3.0;
  }
}

Eigen::MatrixXd covariance_from_jacobian(const Eigen::MatrixXd& jac, double cost) {
  const Eigen::Index m = jac.rows(), n = jac.cols();
  const Eigen::MatrixXd a = jac.transpose() * jac;
  // Scale to unit diagonal before judging conditioning.
  Eigen::VectorXd d = a.diagonal().cwiseSqrt();
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!(d[k] > 0.0)) throw Error(ErrorKind::SingularNormalMatrix, "parameter has no effect on residuals");
  }
  const Eigen::MatrixXd scaled = d.asDiagonal().inverse() * a * d.asDiagonal().inverse();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 1e-14 * hi)) throw Error(ErrorKind::SingularNormalMatrix, "normal matrix is singular");
  const Eigen::MatrixXd inv_scaled = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                                     eig.eigenvectors().transpose();
  const Eigen::MatrixXd inv = d.asDiagonal().inverse() * inv_scaled * d.asDiagonal().inverse();
  const double s2 = m > n ? 2.0 * cost / static_cast<double>(m - n) : 1.0;
  return s2 * inv;
}

Result nlls_minimize(const Problem& problem, std::vector<double> p, const Bounds& bounds,
                     const Options& options) {
  if (p.empty()) throw Error(ErrorKind::InvalidArgument, "no parameters to fit");
  if (problem.num_residuals < p.size()) {
    throw Error(ErrorKind::InvalidArgument, "fewer residuals than parameters");
  }
  Evaluator ev{problem};
  project(p, bounds);
  Eigen::VectorXd r = ev.residual(p);
  if (!all_finite(r)) throw Error(ErrorKind::InvalidArgument, "residuals not finite at the initial point");
  double cost = 0.5 * r.squaredNorm();

  const auto n = static_cast<Eigen::Index>(p.size());
  Eigen::MatrixXd jac;
  Result res;
  double lambda = -1.0;
  double nu = 2.0;
  bool need_jac = true;
  Eigen::MatrixXd a;
  Eigen::VectorXd g;

  for (int iter = 0;; ++iter) {
    if (need_jac) {
      ev.jacobian(p, jac);
      a = jac.transpose() * jac;
      g = jac.transpose() * r;
      need_jac = false;
    }
    res.gradient_cosine = gradient_cosine(jac, r, p, bounds);
    if (r.squaredNorm() == 0.0 || res.gradient_cosine <= options.gtol) {
      res.stop_reason = "gradient";
      break;
    }
    if (iter >= options.max_iterations) {
      throw NoConvergence("nlls: iteration limit reached", p, cost);
    }
    if (lambda < 0.0) lambda = options.initial_damping * a.diagonal().maxCoeff();

    Eigen::VectorXd scale = a.diagonal();
    for (Eigen::Index k = 0; k < n; ++k) scale[k] = std::max(scale[k], 1e-30);

    // Parameters resting on a bound with the descent direction pointing
    // outward are frozen for this iteration.
    std::vector<Eigen::Index> free;
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      const bool at_lo = uk < bounds.lower.size() && p[uk] <= bounds.lower[uk];
      const bool at_hi = uk < bounds.upper.size() && p[uk] >= bounds.upper[uk];
      if (!((at_lo && g[k] > 0.0) || (at_hi && g[k] < 0.0))) free.push_back(k);
    }
    const auto nf = static_cast<Eigen::Index>(free.size());

    bool accepted = false;
    bool converged = false;
    for (int inner = 0; inner < 60; ++inner) {
      Eigen::MatrixXd damped(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (Eigen::Index u = 0; u < nf; ++u) {
        rhs[u] = -g[free[static_cast<std::size_t>(u)]];
        for (Eigen::Index v = 0; v < nf; ++v) {
          damped(u, v) = a(free[static_cast<std::size_t>(u)], free[static_cast<std::size_t>(v)]);
        }
        damped(u, u) += lambda * scale[free[static_cast<std::size_t>(u)]];
      }
      const Eigen::VectorXd reduced = damped.ldlt().solve(rhs);
      Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
      for (Eigen::Index u = 0; u < nf; ++u) step[free[static_cast<std::size_t>(u)]] = reduced[u];
      std::vector<double> trial(p);
      for (Eigen::Index k = 0; k < n; ++k) trial[static_cast<std::size_t>(k)] += step[k];
      project(trial, bounds);
      // Per-parameter test, so a large parameter (a 442 nm centre) cannot
      // hide steps that still matter for the small ones.
      Eigen::VectorXd actual_step(n);
      bool tiny_step = true;
      for (Eigen::Index k = 0; k < n; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        actual_step[k] = trial[uk] - p[uk];
        tiny_step = tiny_step && std::abs(actual_step[k]) <= options.xtol * (std::abs(p[uk]) + options.xtol);
      }

      Eigen::VectorXd r_new = ev.residual(trial);
      const double cost_new = all_finite(r_new) ? 0.5 * r_new.squaredNorm()
                                                : std::numeric_limits<double>::infinity();
      const Eigen::VectorXd jstep = jac * actual_step;
      const double predicted = -(g.dot(actual_step) + 0.5 * jstep.squaredNorm());
      if (cost_new < cost) {
        const double rho = predicted > 0.0 ? (cost - cost_new) / predicted : 1.0;
        const double rel_drop = (cost - cost_new) / std::max(cost, 1e-300);
        p = std::move(trial);
        r = std::move(r_new);
        cost = cost_new;
        lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        nu = 2.0;
        accepted = true;
        need_jac = true;
        ++res.iterations;
        if (tiny_step) {
          res.stop_reason = "step";
          converged = true;
        } else if (rel_drop <= options.ftol) {
          res.stop_reason = "cost";
          converged = true;
        }
        break;
      }
      // Within rounding of the cost the comparison above is blind: a
      // Gauss-Newton step at cosine c gains only ~c^2 of the cost. Judge such
      // steps by the gradient instead.
      if (cost_new <= cost * (1.0 + 16.0 * std::numeric_limits<double>::epsilon())) {
        Eigen::MatrixXd jac_trial;
        ev.jacobian(trial, jac_trial);
        if (gradient_cosine(jac_trial, r_new, trial, bounds) < 0.5 * res.gradient_cosine) {
          p = std::move(trial);
          r = std::move(r_new);
          cost = cost_new;
          accepted = true;
          need_jac = true;
          ++res.iterations;
          break;
        }
      }
      if (tiny_step) {
        res.stop_reason = "step";
        converged = true;
        break;
      }
      lambda *= nu;
      nu *= 2.0;
    }
    if (converged) {
      ev.jacobian(p, jac);
      res.gradient_cosine = gradient_cosine(jac, r, p, bounds);
      break;
    }
    if (!accepted) {
      throw NoConvergence("nlls: damping exhausted without progress", p, cost);
    }
  }

  res.params = p;
  res.cost = cost;
  res.evaluations = ev.evaluations;
  if (options.compute_covariance) res.covariance = covariance_from_jacobian(jac, cost);
  return res;
}

}  // namespace bullseye::fit
