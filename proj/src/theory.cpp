#include "syco/theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace syco {

namespace {

SmoothTestProblem quadratic_from(Vec lam, Vec c) {
  SmoothTestProblem p;
  p.dim = static_cast<int>(lam.size());
  p.beta = *std::max_element(lam.begin(), lam.end());
  p.theta_star = c;
  p.loss_at_star = 0.0;
  p.family = "diag_quadratic";
  p.loss = [lam, c](const Vec& t) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double d = t[i] - c[i];
      s += 0.5 * lam[i] * d * d;
    }
    return s;
  };
  p.grad = [lam, c](const Vec& t) {
    Vec g(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) g[i] = lam[i] * (t[i] - c[i]);
    return g;
  };
  return p;
}

// global minimizer of f(x) = 0.5 lam (x - c)^2 + eps sin(x); all stationary
// points satisfy |x - c| <= eps / lam, so a grid scan of that window plus
// Newton polish finds the global minimum
double locate_sin_min(double lam, double c, double eps) {
  const double w = eps / lam + 0.25;
  const int grid = 400;
  auto f = [&](double x) {
    return 0.5 * lam * (x - c) * (x - c) + eps * std::sin(x);
  };
  auto fp = [&](double x) { return lam * (x - c) + eps * std::cos(x); };
  auto fpp = [&](double x) { return lam - eps * std::sin(x); };

  double best_x = c, best_f = f(c);
  for (int i = 0; i <= grid; ++i) {
    const double x0 = c - w + 2.0 * w * i / grid;
    double x = x0;
    for (int it = 0; it < 60; ++it) {
      const double d1 = fp(x);
      const double d2 = fpp(x);
      if (std::fabs(d2) < 1e-12) break;
      const double step = d1 / d2;
      x -= step;
      if (std::fabs(step) < 1e-15) break;
    }
    if (std::fabs(fp(x)) < 1e-10 && f(x) < best_f) {
      best_f = f(x);
      best_x = x;
    }
  }
  return best_x;
}

}  // namespace

SmoothTestProblem make_diag_quadratic(int d, RngState& rng) {
  Vec lam(d), c(d);
  for (int i = 0; i < d; ++i) {
    lam[i] = 0.05 + 0.95 * rng.next_double();
    c[i] = rng.next_gaussian();
  }
  return quadratic_from(std::move(lam), std::move(c));
}

SmoothTestProblem make_identity_quadratic(int d, RngState& rng) {
  Vec lam(d, 1.0), c(d);
  for (int i = 0; i < d; ++i) c[i] = rng.next_gaussian();
  SmoothTestProblem p = quadratic_from(std::move(lam), std::move(c));
  p.family = "identity_quadratic";
  return p;
}

SmoothTestProblem make_sin_quadratic(int d, RngState& rng, double eps) {
  Vec lam(d), c(d);
  for (int i = 0; i < d; ++i) {
    lam[i] = 0.15 + 0.60 * rng.next_double();
    c[i] = rng.next_gaussian();
  }
  SmoothTestProblem p;
  p.dim = d;
  p.beta = *std::max_element(lam.begin(), lam.end()) + eps;
  p.family = "sin_quadratic";
  p.theta_star.resize(d);
  for (int i = 0; i < d; ++i) p.theta_star[i] = locate_sin_min(lam[i], c[i], eps);
  p.loss = [lam, c, eps](const Vec& t) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double d2 = t[i] - c[i];
      s += 0.5 * lam[i] * d2 * d2 + eps * std::sin(t[i]);
    }
    return s;
  };
  p.grad = [lam, c, eps](const Vec& t) {
    Vec g(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      g[i] = lam[i] * (t[i] - c[i]) + eps * std::cos(t[i]);
    }
    return g;
  };
  p.loss_at_star = p.loss(p.theta_star);
  const Vec g_star = p.grad(p.theta_star);
  if (norm(g_star) > 1e-8) {
    throw std::runtime_error("make_sin_quadratic: minimizer location failed");
  }
  return p;
}

double audit_beta(const SmoothTestProblem& p, int n_pairs, RngState& rng) {
  double worst = 0.0;
  for (int k = 0; k < n_pairs; ++k) {
    Vec a(p.dim), b(p.dim);
    for (int i = 0; i < p.dim; ++i) {
      a[i] = p.theta_star[i] + 2.0 * rng.next_gaussian();
      b[i] = p.theta_star[i] + 2.0 * rng.next_gaussian();
    }
    const double dn = norm(vec_sub(a, b));
    if (dn < 1e-12) continue;
    worst = std::max(worst, norm(vec_sub(p.grad(a), p.grad(b))) / dn);
  }
  return worst;
}

Vec Projector::apply(const Vec& v) const {
  Vec out(v.size(), 0.0);
  for (int i : plastic) out[i] = v[i];
  return out;
}

Projector make_plastic_projector(int d, double alpha, RngState& rng) {
  const int k = static_cast<int>(std::ceil(alpha * d - 1e-9));
  std::vector<int> idx(d);
  for (int i = 0; i < d; ++i) idx[i] = i;
  for (int i = d - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_u64() % (i + 1));
    std::swap(idx[i], idx[j]);
  }
  std::vector<int> plastic(idx.begin(), idx.begin() + k);
  std::sort(plastic.begin(), plastic.end());
  return {d, std::move(plastic)};
}

Projector make_fixed_projector(int d, std::vector<int> plastic) {
  std::sort(plastic.begin(), plastic.end());
  return {d, std::move(plastic)};
}

MinRhoResult min_rho(const Vec& theta0, const Vec& theta_star,
                     const Projector& p, double alpha) {
  const Vec delta = vec_sub(theta0, theta_star);
  const double n2 = dot(delta, delta);
  if (n2 == 0.0) {
    throw std::invalid_argument("min_rho: theta0 equals theta_star");
  }
  const Vec pd = p.apply(delta);
  const double ratio = dot(pd, pd) / n2;
  if (ratio <= 1.0 - alpha) return {0.0, true};
  const double rho = (ratio - (1.0 - alpha)) / alpha;
  return {rho, rho < 1.0};
}

Trajectory run_projected_gd(const SmoothTestProblem& p, const Projector& proj,
                            int n_steps, const Vec& theta0, double beta_scale) {
  Trajectory traj;
  traj.beta_used = p.beta * beta_scale;
  const double eta = 1.0 / traj.beta_used;
  Vec theta = theta0;
  traj.theta.push_back(theta);
  traj.loss_values.push_back(p.loss(theta));
  for (int t = 0; t < n_steps; ++t) {
    Vec pg = proj.apply(p.grad(theta));
    traj.proj_grad_sq.push_back(dot(pg, pg));
    axpy(theta, -eta, pg);
    const double lv = p.loss(theta);
    if (!std::isfinite(lv) || lv > 1e12) {
      throw std::runtime_error(
          "run_projected_gd: divergence; the smoothness constant looks "
          "mis-certified");
    }
    traj.theta.push_back(theta);
    traj.loss_values.push_back(lv);
  }
  return traj;
}

BoundReport check_bound(const Trajectory& traj, const SmoothTestProblem& p,
                        const Projector& proj, double alpha) {
  BoundReport rep;
  MinRhoResult mr = min_rho(traj.theta.front(), p.theta_star, proj, alpha);
  rep.rho = mr.rho;
  rep.rho_satisfiable = mr.satisfiable;
  if (!mr.satisfiable) {
    rep.ok = false;
    return rep;
  }
  const Vec delta = vec_sub(traj.theta.front(), p.theta_star);
  const double rhs_const =
      p.beta * (1.0 - alpha + alpha * mr.rho) * dot(delta, delta);
  double cum = 0.0;
  rep.worst_ratio = 0.0;
  for (std::size_t n = 0; n < traj.proj_grad_sq.size(); ++n) {
    cum += traj.proj_grad_sq[n];
    // the averaged bound at prefix N reads cum / N <= rhs_const / N
    const double ratio = cum / rhs_const;
    if (ratio > rep.worst_ratio) {
      rep.worst_ratio = ratio;
      rep.worst_prefix = static_cast<int>(n) + 1;
    }
  }
  rep.ok = rep.worst_ratio <= 1.0 + 1e-9;
  return rep;
}

DescentReport check_descent_step(const Trajectory& traj, double abs_slack) {
  DescentReport rep;
  rep.ok = true;
  for (std::size_t t = 0; t < traj.proj_grad_sq.size(); ++t) {
    const double allowed = traj.loss_values[t] -
                           traj.proj_grad_sq[t] / (2.0 * traj.beta_used);
    const double violation = traj.loss_values[t + 1] - allowed;
    if (violation > rep.worst_violation) {
      rep.worst_violation = violation;
      rep.worst_step = static_cast<int>(t);
    }
    if (violation > abs_slack) rep.ok = false;
  }
  return rep;
}

bool check_telescoping(const Trajectory& traj, const SmoothTestProblem& p,
                       double abs_slack) {
  double cum = 0.0;
  for (double g : traj.proj_grad_sq) cum += g;
  const double bound =
      2.0 * p.beta * (traj.loss_values.front() - p.loss_at_star);
  return cum <= bound + abs_slack;
}

bool check_gap_link(const SmoothTestProblem& p, const Vec& theta0,
                    double abs_slack) {
  const Vec delta = vec_sub(theta0, p.theta_star);
  return p.loss(theta0) - p.loss_at_star <=
         0.5 * p.beta * dot(delta, delta) + abs_slack;
}

nlohmann::json verify_theorem(const TheoremRunConfig& cfg) {
  nlohmann::json runs = nlohmann::json::array();
  bool all_ok = true;

  auto run_one = [&](const SmoothTestProblem& p, double alpha,
                     std::uint64_t seed, const Vec& theta0,
                     const Projector& proj, int steps) {
    Trajectory traj = run_projected_gd(p, proj, steps, theta0, cfg.beta_scale);
    BoundReport bound = check_bound(traj, p, proj, alpha);
    DescentReport descent = check_descent_step(traj);
    const bool telescoping = check_telescoping(traj, p);
    const bool gap = check_gap_link(p, theta0);
    const bool ok = bound.ok && descent.ok && telescoping && gap;
    all_ok = all_ok && ok;
    runs.push_back({{"family", p.family},
                    {"alpha", alpha},
                    {"seed", seed},
                    {"rho", bound.rho},
                    {"rho_satisfiable", bound.rho_satisfiable},
                    {"tightness_ratio", bound.worst_ratio},
                    {"bound_ok", bound.ok},
                    {"descent_ok", descent.ok},
                    {"descent_worst_violation", descent.worst_violation},
                    {"telescoping_ok", telescoping},
                    {"gap_link_ok", gap},
                    {"ok", ok}});
  };

  for (double alpha : cfg.alphas) {
    for (int s = 0; s < cfg.seeds; ++s) {
      const auto seed = static_cast<std::uint64_t>(s + 1);
      for (int family = 0; family < 2; ++family) {
        RngState rng =
            RngState(seed).fork(family == 0 ? 0xD1A6u : 0x51Au);
        SmoothTestProblem p = family == 0
                                  ? make_diag_quadratic(cfg.dim, rng)
                                  : make_sin_quadratic(cfg.dim, rng);
        Projector proj = make_plastic_projector(cfg.dim, alpha, rng);
        Vec theta0 = p.theta_star;
        for (auto& v : theta0) v += rng.next_gaussian();
        run_one(p, alpha, seed, theta0, proj, cfg.steps);
      }
    }
  }

  // equality case: identity quadratic, mismatch concentrated on the plastic
  // subspace, one step; the bound is met with ratio 1
  {
    const double alpha = 0.1;
    RngState rng(1234);
    SmoothTestProblem p = make_identity_quadratic(cfg.dim, rng);
    Projector proj = make_plastic_projector(cfg.dim, alpha, rng);
    Vec theta0 = p.theta_star;
    const int k = static_cast<int>(proj.plastic.size());
    const double kept_mass = 0.02;
    const auto n_kept = static_cast<double>(cfg.dim - k);
    std::vector<char> is_plastic(cfg.dim, 0);
    for (int i : proj.plastic) is_plastic[i] = 1;
    for (int i = 0; i < cfg.dim; ++i) {
      theta0[i] += is_plastic[i] ? 1.0 : std::sqrt(kept_mass / n_kept);
    }
    Trajectory traj = run_projected_gd(p, proj, 1, theta0, cfg.beta_scale);
    BoundReport bound = check_bound(traj, p, proj, alpha);
    const bool tight = std::fabs(bound.worst_ratio - 1.0) <= 1e-12;
    const bool ok = bound.ok && tight;
    all_ok = all_ok && ok;
    runs.push_back({{"family", "identity_tight"},
                    {"alpha", alpha},
                    {"seed", 1234},
                    {"rho", bound.rho},
                    {"rho_satisfiable", bound.rho_satisfiable},
                    {"tightness_ratio", bound.worst_ratio},
                    {"bound_ok", bound.ok},
                    {"tightness_is_one", tight},
                    {"ok", ok}});
  }

  return nlohmann::json{{"all_ok", all_ok},
                        {"n_runs", runs.size()},
                        {"config",
                         {{"alphas", cfg.alphas},
                          {"seeds", cfg.seeds},
                          {"dim", cfg.dim},
                          {"steps", cfg.steps},
                          {"beta_scale", cfg.beta_scale}}},
                        {"runs", runs}};
}

Vec flatten_plastic(const std::vector<SvdAdapter>& adapters,
                    const std::vector<PlasticityMask>& masks) {
  if (adapters.size() != masks.size()) {
    throw std::invalid_argument("flatten_plastic: adapter/mask count mismatch");
  }
  Vec out;
  for (std::size_t l = 0; l < adapters.size(); ++l) {
    const SvdAdapter& a = adapters[l];
    for (int j = 0; j < a.rank(); ++j) {
      if (masks[l].is_kept(j)) continue;
      out.push_back(a.sigma[j]);
      for (int i = 0; i < a.u.rows; ++i) out.push_back(a.u.at(i, j));
      for (int i = 0; i < a.v.rows; ++i) out.push_back(a.v.at(i, j));
    }
  }
  return out;
}

double estimate_local_beta(const std::vector<Vec>& thetas,
                           const std::vector<Vec>& grads) {
  if (thetas.size() != grads.size() || thetas.size() < 2) {
    throw std::invalid_argument("estimate_local_beta: need >= 2 matched pairs");
  }
  double worst = 0.0;
  for (std::size_t t = 1; t < thetas.size(); ++t) {
    const double dn = norm(vec_sub(thetas[t], thetas[t - 1]));
    if (dn < 1e-15) continue;
    worst = std::max(worst, norm(vec_sub(grads[t], grads[t - 1])) / dn);
  }
  return worst;
}

}  // namespace syco
