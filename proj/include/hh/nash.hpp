#pragma once

#include <string>
#include <vector>

#include "hh/propagator.hpp"
#include "hh/rng.hpp"

namespace hh {

/// Everything a coupled forward/adjoint solve needs. `state` propagates the
/// state equation; `adj` is the propagator whose exact transpose realizes the
/// follower adjoint states (both point to the same object in the linear case;
/// they differ in the semilinear frozen-coefficient systems, where the state
/// carries the secant coefficient and the adjoints carry F').
struct CoupledSetup {
    const Propagator* state = nullptr;
    const Propagator* adj = nullptr;
    const RegionSet* regions = nullptr;
    double alpha1 = 1e3;
    double alpha2 = 1e3;
    Eigen::VectorXd z0;
    Field zd1, zd2;

    double alpha(int i) const { return i == 1 ? alpha1 : alpha2; }
    const Field& zd(int i) const { return i == 1 ? zd1 : zd2; }
    const Eigen::VectorXd& mass() const { return state->op().mass; }
    const TimeGrid& time() const { return state->time(); }

    /// Same geometry and operators, homogeneous data (for Gramian applies).
    CoupledSetup zero_data() const;
};

/// Pair of follower controls, supported on O_1 x (0,T) and O_2 x (0,T).
struct ControlPair {
    Field v1, v2;

    const Field& operator[](int i) const { return i == 1 ? v1 : v2; }
    Field& operator[](int i) { return i == 1 ? v1 : v2; }
};

double inner_h(const ControlPair& a, const ControlPair& b, const CoupledSetup& s);
inline double norm_h(const ControlPair& a, const CoupledSetup& s) {
    return std::sqrt(std::max(0.0, inner_h(a, a, s)));
}

struct NashSolution {
    ControlPair controls;       // zero outside O_i x (0,T)
    Field phi1, phi2;           // adjoint states
    Field z;                    // coupled state
    double r1 = 0, r2 = 0;      // stationarity residuals
    int iterations = 0;
    double final_residual = 0;  // algorithm-specific convergence measure
    std::string algorithm;
    std::vector<std::pair<int, double>> trace;
};

struct CostReport {
    double j1 = 0, j2 = 0, j_leader = 0;
    double tracking1 = 0, tracking2 = 0;  // ||z - z_{i,d}||^2 on O_{i,d}
    double energy1 = 0, energy2 = 0;      // ||v^i||^2 on O_i
};

/// Control-to-state map L_i: forward solve with zero data and source v 1_{O_i}.
Field apply_L(const CoupledSetup& s, int i, const Field& v);

/// Exact adjoint of L_i with respect to the trapezoidal space-time products:
/// backward sweep with source g, restricted to O_i x (0,T).
Field apply_L_star(const CoupledSetup& s, int i, const Field& g);

struct NormEstimate {
    double value = 0;
    int iterations = 0;
    double gap = 0;  // relative change of the last Rayleigh quotient
};

/// Power iteration on L_i* L_i in H_i. The Rayleigh quotients are monotone
/// nondecreasing; NonConvergence if the final relative gap exceeds 1e-6.
NormEstimate operator_norm_L(const CoupledSetup& s, int i, int iterations, Rng& rng);

/// delta = min_i (alpha_i - ||L_i||^2 / 4); positive delta certifies the
/// Lax-Milgram hypothesis at the discrete level.
double check_coercivity(double alpha1, double alpha2, double norm_l1, double norm_l2);

/// State driven by a given leader and follower pair (linear case).
Field state_for_controls(const CoupledSetup& s, const Field& f, const ControlPair& v);

/// A(v) = (alpha_i v^i + L_i*((L_1 v^1 + L_2 v^2) 1_{O_{i,d}}))_i, the
/// Lax-Milgram operator of the Nash optimality conditions.
ControlPair apply_nash_operator(const CoupledSetup& s, const ControlPair& v);

NashSolution solve_nash_cg(const Field& f, const CoupledSetup& s, double tol = 1e-8,
                           int max_iterations = 400);

NashSolution solve_nash_contraction(const Field& f, const CoupledSetup& s, double tol = 1e-8,
                                    int max_iterations = 500);

CostReport evaluate_costs(const CoupledSetup& s, const Field& f, const ControlPair& v);

/// ||phi^i 1_{O_i} + alpha_i v^i|| / (1 + ||alpha_i v^i||) with phi^i from the
/// discrete adjoint characterization.
double stationarity_residual(const CoupledSetup& s, int i, const Field& f, const ControlPair& v);

/// Measured ratio ||S(w1) - S(w2)||_Q / ||w1 - w2||_Q of the optimality-system
/// contraction map for one random pair.
double contraction_ratio_sample(const CoupledSetup& s, Rng& rng);

} // namespace hh
