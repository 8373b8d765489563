#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hh/leader.hpp"
#include "hh/nash.hpp"

namespace hh {

/// Closed registry of C^1 cap W^{1,inf} nonlinearities. Declared bounds are
/// part of the contract and spot-checked by the registry self-test.
struct Nonlinearity {
    std::string name;
    double kappa = 0.0;
    std::function<double(double)> f;
    std::function<double(double)> fprime;
    double bound_f = 0;       // ||F||_inf
    double bound_fprime = 0;  // ||F'||_inf
    double bound_fsecond = 0; // ||F''||_inf (both built-ins are W^{2,inf})
    bool is_zero = false;

    Field apply(const Field& y) const;
    Field apply_prime(const Field& y) const;
};

/// name in { "zero", "tanh", "sine" }; tanh is kappa*tanh(y), sine is
/// kappa*sin(y).
Nonlinearity make_nonlinearity(const std::string& name, double kappa);

/// Sweeps the evaluators over a wide argument range and verifies the declared
/// bounds; returns the largest observed |F| and |F'|.
std::pair<double, double> spot_check_bounds(const Nonlinearity& nl, int points = 10000);

/// Uncontrolled (or source-driven) semilinear solve with the theta-scheme and
/// a per-step Picard correction on the implicit F(y) sample.
Field solve_semilinear_forward(const Propagator& prop, const Nonlinearity& nl,
                               const Eigen::VectorXd& y0, const Field* src = nullptr,
                               double picard_tol = 1e-10, int max_picard = 60);

/// G(x,t;z) = int_0^1 F'(ybar + tau z) dtau by Gauss-Legendre quadrature.
Field secant_coefficient(const Field& z, const Field& ybar, const Nonlinearity& nl,
                         int quad_nodes = 8);

/// Problem data for the semilinear machinery, phrased in the y variables.
struct SemilinearSetup {
    const DiscreteOperator* op = nullptr;
    const RegionSet* regions = nullptr;
    TimeGrid time;
    double alpha1 = 1e3, alpha2 = 1e3;
    Eigen::VectorXd y0;     // initial data of the controlled equation
    Eigen::VectorXd ybar0;  // initial data of the reference trajectory
    Field y1d, y2d;         // follower targets
    Nonlinearity nl;

    double alpha(int i) const { return i == 1 ? alpha1 : alpha2; }
    const Field& yd(int i) const { return i == 1 ? y1d : y2d; }
};

struct SemilinearState {
    Field y;
    Field phi1, phi2;
    ControlPair controls;  // v^i = -(1/alpha_i) phi^i on O_i
    int outer_iterations = 0;
    double final_increment = 0;
    std::vector<double> trace;  // outer increment per iteration
};

/// Nash quasi-equilibrium by the frozen-coefficient fixed point: freeze u,
/// solve the linearized coupled system for (y_u, phi^1, phi^2), set u <- y_u.
SemilinearState solve_quasi_nash(const Field& f, const SemilinearSetup& s, double tol = 1e-8,
                                 int max_outer = 200, double inner_tol = 1e-11);

/// Follower cost J_i at explicit controls: the full nonlinear state is
/// recomputed for every evaluation.
double follower_cost(const SemilinearSetup& s, const Field& f, const ControlPair& v, int i);

struct ProbeRow {
    int follower = 0;
    double eps = 0;
    double min_diff = 0;   // min over directions of J_i(perturbed) - J_i(base)
    double mean_diff = 0;
};

struct ProbeReport {
    std::vector<ProbeRow> rows;
    double min_diff = 0;          // over all probes
    double slope1 = 0, slope2 = 0;  // log-log scaling of mean diff vs eps
};

/// Samples J_i around a quasi-equilibrium along random unit directions and
/// epsilon scalings; nonnegative differences support the equilibrium claim,
/// and the eps^2 scaling is the testable content of first-order flatness.
ProbeReport equilibrium_probe(const SemilinearState& state, const Field& f,
                              const SemilinearSetup& s, int n_dirs,
                              const std::vector<double>& eps_list, Rng& rng);

struct SemilinearLeaderResult {
    LeaderResult leader;     // last inner linear leader solve
    Field z;                 // converged difference trajectory
    Field ybar;              // reference trajectory
    double terminal_norm = 0;
    int outer_iterations = 0;
    std::vector<double> increments;  // per outer iteration
    std::vector<double> f_norms;     // ||f_z|| per outer iteration
};

/// Outer fixed point of the semilinear leader construction: freeze the secant
/// coefficient and F', run the linear penalized-duality leader on the frozen
/// systems, replace z by the controlled state, repeat.
SemilinearLeaderResult semilinear_leader(const SemilinearSetup& s, double eps,
                                         double outer_tol = 1e-6, int max_outer = 60,
                                         double leader_tol = 1e-9,
                                         PenaltyKind penalty = PenaltyKind::exact_norm);

} // namespace hh
