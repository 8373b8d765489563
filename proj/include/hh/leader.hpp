#pragma once

#include <string>
#include <vector>

#include "hh/carleman.hpp"
#include "hh/nash.hpp"

namespace hh {

/// Solution of the coupled adjoint system: psi marches backward from psi_T
/// and collects the gamma feedback; each gamma^i marches forward driven by
/// -(1/alpha_i) psi on O_i. Assembled so that the duality identity against
/// the optimality system holds to machine precision (the coupled solve is the
/// exact transpose of the Nash optimality solve).
///
/// Pairing conventions (implicit Euler): a leader source pairs against psi
/// levels 0..nt-1 through dual_pair_forward_source; targets pair against
/// gamma levels 0..nt-1 through pair_interval_left; the initial slice psi^0
/// pairs against z^0 under the plain mass product.
struct AdjointTriple {
    Field psi;            // level nt carries psi_T exactly
    Field gamma1, gamma2; // level 0 is exactly zero
    Eigen::VectorXd psiT;
    int sweeps = 0;
    double final_increment = 0;

    const Field& gamma(int i) const { return i == 1 ? gamma1 : gamma2; }
};

/// Block fixed-point solve of the coupled adjoint system. Requires the
/// implicit-Euler scheme (the exact-duality bookkeeping is built for it).
AdjointTriple solve_adjoint_coupled(const Eigen::VectorXd& psiT, const CoupledSetup& s,
                                    double tol = 1e-10, int max_sweeps = 200);

/// The leader control induced by an adjoint solution: psi restricted to O,
/// with the terminal-level scaling that compensates the trapezoidal
/// half-weight (this is the discrete realization of f = psi 1_O).
Field leader_control_from(const AdjointTriple& triple, const CoupledSetup& s);

/// |LHS - RHS| / (1 + |RHS|) of the duality identity
///   iint_O f psi = (z(T), psi_T) - (z^0, psi(0)) + sum_i iint z_{i,d} gamma^i
/// with (z, phi) from the optimality system driven by f and (psi, gamma)
/// from the adjoint system driven by psi_T.
double duality_residual(const CoupledSetup& s, const Field& f, const Eigen::VectorXd& psiT,
                        double inner_tol = 1e-13);

enum class PenaltyKind { exact_norm, quadratic };

double eval_F_eps(const Eigen::VectorXd& psiT, double eps, const CoupledSetup& s,
                  PenaltyKind penalty, double inner_tol = 1e-13);

/// Gradient of the smooth part plus the penalty subgradient: z(T) + eps dP.
/// Exact at the discrete level: z solves the optimality system with
/// f = leader_control_from(psi).
Eigen::VectorXd grad_F_eps(const Eigen::VectorXd& psiT, double eps, const CoupledSetup& s,
                           PenaltyKind penalty, double inner_tol = 1e-13);

struct LeaderResult {
    Field fhat;                 // zero outside O x (0,T)
    Field z;                    // optimality-system state under fhat
    Eigen::VectorXd psiT_min;
    double eps = 0;
    double terminal_norm = 0;   // ||z(T)||
    double cost = 0;            // J(fhat)
    int iterations = 0;
    std::string branch;         // "zero-minimizer" | "stationary" | "quadratic"
    std::vector<std::pair<int, double>> trace;
};

/// Penalized-duality leader construction. Quadratic penalty: plain CG on the
/// strictly convex functional. Exact-norm penalty: either the zero-minimizer
/// branch (data already controllable to eps with f = 0) or the stationary
/// branch z(T) = -eps psi/||psi||, located by a scalar secular iteration on
/// ||psi|| with a CG solve per evaluation.
LeaderResult minimize_leader(const CoupledSetup& s, double eps, double tol = 1e-8,
                             int max_iterations = 400,
                             PenaltyKind penalty = PenaltyKind::exact_norm,
                             const Eigen::VectorXd* warm_start = nullptr);

struct ObservabilityStats {
    std::vector<double> samples;
    double max_ratio = 0;
    double mean_ratio = 0;
    int infinite = 0;  // samples where psi vanished identically on O
};

/// Empirical observability ratios: for random unit psi_T,
/// (||psi(0)||^2 + weighted gamma term) / iint_O |psi|^2, with the gamma term
/// given by the case flag (shared: rho^{-2}|gamma^1+gamma^2|^2 on O_d;
/// distinct: sum_i rho^{-2}|gamma^i|^2 on O_{i,d}).
ObservabilityStats observability_ratio(const CoupledSetup& s, const CarlemanWeightSet& w,
                                       int n_samples, Rng& rng, double coupling_tol = 1e-11);

} // namespace hh
