#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/SparseCholesky>

#include "hh/field.hpp"
#include "hh/operators.hpp"

namespace hh {

/// theta in {1 (implicit Euler), 1/2 (Crank-Nicolson)}.
struct ThetaScheme {
    double theta = 1.0;
};

void validate_scheme(const ThetaScheme& scheme, const TimeGrid& time);

/// Result of the exact discrete-adjoint sweep. q[n] (n = 0..nt-1) are the
/// multipliers of the forward stepping constraints; they satisfy
///
///   B_{nt-1} q^{nt-1} = M m_T + w_nt dt M g^{nt}
///   B_{m-1}  q^{m-1}  = C_m q^m + w_m dt M g^m      (m = nt-1 .. 1)
///
/// with B_n, C_n the forward step matrices and w_k the trapezoidal weights.
/// Two assemblies of the same data are exposed:
///
///  * dual_field(): u^k = [theta q^{k-1} + (1-theta) q^k] / w_k, the field
///    that satisfies <forward_src(f), g>_Q + (y(T), m_T) =
///    <f, dual_field>_Q + (y(0), init_covector) exactly (W-adjoint).
///  * state_field(b): level n holds q^n, level nt holds the prescribed
///    terminal slice b; this is the presentation-side trajectory (for
///    theta = 1 and zero sources it coincides with the mirrored backward
///    stepper on every level).
struct AdjointSolution {
    std::vector<Eigen::VectorXd> q;
    Eigen::VectorXd init_covector;  // C_0 q^0 + w_0 dt M g^0
    TimeGrid time;
    double theta = 1.0;

    Field dual_field() const;
    Field state_field(const Eigen::VectorXd& terminal) const;
};

/// Time stepper for  y_t - Delta y - (mu/|x|^2) y - a(x,t) y = src  with the
/// mirrored theta-scheme, plus the exact transpose sweep used by every
/// duality-critical computation. The optional reaction field a makes the
/// per-step operators time dependent (semilinear frozen-coefficient systems);
/// factorizations are cached per step.
class Propagator {
public:
    Propagator(const DiscreteOperator& op, const TimeGrid& time, ThetaScheme scheme,
               const Field* reaction = nullptr);

    /// y(0) = y0;  B_n y^{n+1} = C_n y^n + dt M [theta src^{n+1} + (1-theta) src^n].
    Field forward(const Eigen::VectorXd& y0, const Field* src = nullptr) const;

    /// Exact time-mirror of forward(): u(T) = uT;
    /// B u^n = C u^{n+1} + dt M [theta src^n + (1-theta) src^{n+1}].
    /// Reaction-free only; the coupled systems use adjoint() instead.
    Field backward(const Eigen::VectorXd& uT, const Field* src = nullptr) const;

    /// Exact W-adjoint sweep; either input may be null (treated as zero).
    /// m_T is the terminal functional weight: the returned solution makes
    /// (y(T), m_T)_M + <y, g>_Q exactly equal to <f, dual>_Q + (y0, covector).
    AdjointSolution adjoint(const Eigen::VectorXd* m_T, const Field* g) const;

    const DiscreteOperator& op() const { return *op_; }
    const TimeGrid& time() const { return time_; }
    double theta() const { return scheme_.theta; }
    bool has_reaction() const { return reaction_.has_value(); }

    /// Building blocks for custom (e.g. Picard-corrected) stepping:
    /// B_step^{-1} rhs and C_level x.
    Eigen::VectorXd implicit_solve(int step, const Eigen::VectorXd& rhs) const;
    Eigen::VectorXd explicit_apply(int level, const Eigen::VectorXd& x) const;  // C_level x

private:
    using Factor = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>;

    const Eigen::SparseMatrix<double>& implicit_matrix(int step) const;
    const Factor& factor(int step) const;

    const DiscreteOperator* op_;
    TimeGrid time_;
    ThetaScheme scheme_;
    std::optional<Field> reaction_;

    std::vector<Eigen::SparseMatrix<double>> B_;        // per step (or single)
    std::vector<std::unique_ptr<Factor>> factors_;
};

/// <f, u>_* = dt sum_{n<nt} [theta f^{n+1} + (1-theta) f^n]^T M u^n : the
/// pairing of a forward-equation source against a backward-state trajectory
/// under which the mirrored pair is exactly adjoint.
double dual_pair_forward_source(const Field& f, const Field& u, const Eigen::VectorXd& mass,
                                const Mask* mask, double theta);

/// Mirror image: dt sum_{n<nt} (y^{n+1})^T M [theta g^n + (1-theta) g^{n+1}].
double dual_pair_backward_source(const Field& y, const Field& g, const Eigen::VectorXd& mass,
                                 const Mask* mask, double theta);

/// dt sum_{n<nt} (a^n)^T M b^n, left-label rectangle pairing (targets against
/// the gamma trajectories in the duality identity).
double pair_interval_left(const Field& a, const Field& b, const Eigen::VectorXd& mass,
                          const Mask* mask);

} // namespace hh
