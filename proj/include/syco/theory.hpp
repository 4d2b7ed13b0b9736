#pragma once

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "syco/rac1.hpp"
#include "syco/tensor.hpp"

namespace syco {

// Smooth test problem with a certified gradient-Lipschitz constant and a
// located minimizer, so every quantity in the projected-stationarity bound
// is computable exactly.
struct SmoothTestProblem {
  int dim = 0;
  double beta = 0.0;
  Vec theta_star;
  double loss_at_star = 0.0;
  std::function<double(const Vec&)> loss;
  std::function<Vec(const Vec&)> grad;
  std::string family;
};

// 0.5 sum_i lam_i (theta_i - c_i)^2 with lam_i in [0.05, 1]; beta = max lam
SmoothTestProblem make_diag_quadratic(int d, RngState& rng);

// all eigenvalues exactly 1 (beta = 1); the equality case of the bound
SmoothTestProblem make_identity_quadratic(int d, RngState& rng);

// quadratic plus eps * sum_i sin(theta_i); lam_i in [0.15, 0.75] and
// eps = 0.25 > min lam makes some coordinates non-convex while keeping
// beta = max lam + eps <= 1; the minimizer is located per coordinate by
// grid scan plus Newton polish
SmoothTestProblem make_sin_quadratic(int d, RngState& rng, double eps = 0.25);

// max ||grad(a) - grad(b)|| / ||a - b|| over n random pairs
double audit_beta(const SmoothTestProblem& p, int n_pairs, RngState& rng);

// Orthogonal projector onto a plastic coordinate subset.
struct Projector {
  int dim = 0;
  std::vector<int> plastic;  // ascending

  Vec apply(const Vec& v) const;
};

// plastic dimension ceil(alpha * d), coordinates drawn without replacement
Projector make_plastic_projector(int d, double alpha, RngState& rng);
Projector make_fixed_projector(int d, std::vector<int> plastic);

struct MinRhoResult {
  double rho = 0.0;
  bool satisfiable = true;
};

// smallest rho in [0, 1) with ||P(theta0 - theta*)||^2 <=
// (1 - alpha + alpha rho) ||theta0 - theta*||^2; flagged unsatisfiable when
// the required rho reaches 1
MinRhoResult min_rho(const Vec& theta0, const Vec& theta_star,
                     const Projector& p, double alpha);

struct Trajectory {
  std::vector<Vec> theta;             // n_steps + 1 iterates
  std::vector<double> proj_grad_sq;   // ||P grad||^2 at steps 0..n-1
  std::vector<double> loss_values;    // n_steps + 1
  double beta_used = 0.0;
};

// projected gradient descent with constant step 1/(beta * beta_scale)
Trajectory run_projected_gd(const SmoothTestProblem& p, const Projector& proj,
                            int n_steps, const Vec& theta0,
                            double beta_scale = 1.0);

struct BoundReport {
  bool ok = false;
  double rho = 0.0;
  bool rho_satisfiable = true;
  double worst_ratio = 0.0;  // max over prefixes of LHS/RHS
  int worst_prefix = 0;
};

// checks the averaged projected-gradient bound at every prefix, with rho
// taken as the tightest admissible value
BoundReport check_bound(const Trajectory& traj, const SmoothTestProblem& p,
                        const Projector& proj, double alpha);

struct DescentReport {
  bool ok = false;
  double worst_violation = 0.0;
  int worst_step = -1;
};

// per-step descent: L(t+1) <= L(t) - ||P grad||^2 / (2 beta) within slack
DescentReport check_descent_step(const Trajectory& traj, double abs_slack = 1e-9);

// cumulative sum bounded by 2 beta (L(theta0) - L(theta*))
bool check_telescoping(const Trajectory& traj, const SmoothTestProblem& p,
                       double abs_slack = 1e-9);

// L(theta0) - L(theta*) <= beta/2 ||theta0 - theta*||^2
bool check_gap_link(const SmoothTestProblem& p, const Vec& theta0,
                    double abs_slack = 1e-9);

struct TheoremRunConfig {
  std::vector<double> alphas = {0.1, 0.3, 0.5};
  int seeds = 20;
  int dim = 32;
  int steps = 200;
  double beta_scale = 1.0;  // test hook; values != 1 mis-specify beta
};

// full harness over both problem families plus the equality case; the
// "all_ok" field gates the CLI exit code
nlohmann::json verify_theorem(const TheoremRunConfig& cfg);

// flattened view of the plastic coordinates of an adapter stack (sigma plus
// plastic U/V columns), for auditing the bound on recorded trajectories
Vec flatten_plastic(const std::vector<SvdAdapter>& adapters,
                    const std::vector<PlasticityMask>& masks);

// max ||g2 - g1|| / ||x2 - x1|| over consecutive recorded pairs
double estimate_local_beta(const std::vector<Vec>& thetas,
                           const std::vector<Vec>& grads);

}  // namespace syco
