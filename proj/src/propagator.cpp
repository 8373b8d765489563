#include "hh/propagator.hpp"

#include <cmath>

namespace hh {

void validate_scheme(const ThetaScheme& scheme, const TimeGrid& time) {
    if (scheme.theta != 1.0 && scheme.theta != 0.5)
        raise(ErrorCode::InvalidArgument, "theta must be 1 (implicit Euler) or 0.5 (Crank-Nicolson)");
    if (time.nt < 2 || time.T <= 0.0)
        raise(ErrorCode::InvalidArgument, "time grid needs nt >= 2 and T > 0");
}

Propagator::Propagator(const DiscreteOperator& op, const TimeGrid& time, ThetaScheme scheme,
                       const Field* reaction)
    : op_(&op), time_(time), scheme_(scheme) {
    validate_scheme(scheme, time);
    if (reaction) {
        if (reaction->cells() != op.size() || reaction->nt() != time.nt)
            raise(ErrorCode::ShapeMismatch, "reaction field does not match operator/time grid");
        reaction_ = *reaction;
    }

    const double dt = time_.dt();
    const Eigen::Index n = op.size();
    Eigen::SparseMatrix<double> mass_diag(n, n);
    mass_diag = Eigen::SparseMatrix<double>(Eigen::VectorXd(op.mass).asDiagonal());

    const int nfactors = reaction_ ? time_.nt : 1;
    B_.reserve(nfactors);
    factors_.reserve(nfactors);
    for (int s = 0; s < nfactors; ++s) {
        Eigen::SparseMatrix<double> A_lvl = op.A;
        if (reaction_) {
            const Eigen::VectorXd a = reaction_->v.col(s + 1);  // implicit level of step s
            A_lvl -= Eigen::SparseMatrix<double>(
                Eigen::VectorXd(op.mass.cwiseProduct(a)).asDiagonal());
        }
        Eigen::SparseMatrix<double> B = mass_diag + scheme_.theta * dt * A_lvl;
        B.makeCompressed();
        auto f = std::make_unique<Factor>();
        f->compute(B);
        if (f->info() != Eigen::Success)
            raise(ErrorCode::LinearSolveFailure, "implicit step matrix factorization failed");
        B_.push_back(std::move(B));
        factors_.push_back(std::move(f));
    }
}

const Eigen::SparseMatrix<double>& Propagator::implicit_matrix(int step) const {
    return B_[reaction_ ? step : 0];
}

const Propagator::Factor& Propagator::factor(int step) const {
    return *factors_[reaction_ ? step : 0];
}

Eigen::VectorXd Propagator::implicit_solve(int step, const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x = factor(step).solve(rhs);
    if (!x.allFinite())
        raise(ErrorCode::LinearSolveFailure, "implicit step solve produced non-finite values");
    return x;
}

Eigen::VectorXd Propagator::explicit_apply(int level, const Eigen::VectorXd& x) const {
    // C_level x = M x - (1-theta) dt (A - M diag(a^level)) x
    const double c = (1.0 - scheme_.theta) * time_.dt();
    Eigen::VectorXd out = op_->mass.cwiseProduct(x);
    if (c != 0.0) {
        out -= c * (op_->A * x);
        if (reaction_)
            out += c * op_->mass.cwiseProduct(reaction_->v.col(level).cwiseProduct(x));
    }
    return out;
}

namespace {

void check_solution(const Eigen::VectorXd& x) {
    if (!x.allFinite())
        raise(ErrorCode::LinearSolveFailure, "linear step produced non-finite values");
}

} // namespace

Field Propagator::forward(const Eigen::VectorXd& y0, const Field* src) const {
    if (y0.size() != op_->size()) raise(ErrorCode::ShapeMismatch, "initial data size");
    if (src && (src->cells() != op_->size() || src->nt() != time_.nt))
        raise(ErrorCode::ShapeMismatch, "source field shape");

    Field y(op_->size(), time_);
    y.v.col(0) = y0;
    const double dt = time_.dt();
    const double th = scheme_.theta;
    for (int n = 0; n < time_.nt; ++n) {
        Eigen::VectorXd rhs = explicit_apply(n, y.v.col(n));
        if (src) {
            Eigen::VectorXd s = th * src->v.col(n + 1);
            if (th != 1.0) s += (1.0 - th) * src->v.col(n);
            rhs += dt * op_->mass.cwiseProduct(s);
        }
        y.v.col(n + 1) = factor(n).solve(rhs);
        check_solution(y.v.col(n + 1));
    }
    return y;
}

Field Propagator::backward(const Eigen::VectorXd& uT, const Field* src) const {
    if (reaction_)
        raise(ErrorCode::InvalidArgument, "mirror backward stepper is reaction-free; use adjoint()");
    if (uT.size() != op_->size()) raise(ErrorCode::ShapeMismatch, "terminal data size");
    if (src && (src->cells() != op_->size() || src->nt() != time_.nt))
        raise(ErrorCode::ShapeMismatch, "source field shape");

    Field u(op_->size(), time_);
    u.v.col(time_.nt) = uT;
    const double dt = time_.dt();
    const double th = scheme_.theta;
    for (int n = time_.nt - 1; n >= 0; --n) {
        Eigen::VectorXd rhs = explicit_apply(n, u.v.col(n + 1));
        if (src) {
            Eigen::VectorXd s = th * src->v.col(n);
            if (th != 1.0) s += (1.0 - th) * src->v.col(n + 1);
            rhs += dt * op_->mass.cwiseProduct(s);
        }
        u.v.col(n) = factor(n).solve(rhs);
        check_solution(u.v.col(n));
    }
    return u;
}

AdjointSolution Propagator::adjoint(const Eigen::VectorXd* m_T, const Field* g) const {
    if (m_T && m_T->size() != op_->size()) raise(ErrorCode::ShapeMismatch, "terminal weight size");
    if (g && (g->cells() != op_->size() || g->nt() != time_.nt))
        raise(ErrorCode::ShapeMismatch, "adjoint source shape");

    AdjointSolution sol;
    sol.time = time_;
    sol.theta = scheme_.theta;
    sol.q.assign(time_.nt, Eigen::VectorXd());

    const double dt = time_.dt();
    const int nt = time_.nt;

    // seed: B_{nt-1} q^{nt-1} = M m_T + w_nt dt M g^{nt}
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(op_->size());
    if (m_T) rhs += op_->mass.cwiseProduct(*m_T);
    if (g) rhs += time_.omega(nt) * dt * op_->mass.cwiseProduct(g->v.col(nt));
    sol.q[nt - 1] = factor(nt - 1).solve(rhs);
    check_solution(sol.q[nt - 1]);

    for (int m = nt - 1; m >= 1; --m) {
        rhs = explicit_apply(m, sol.q[m]);
        if (g) rhs += time_.omega(m) * dt * op_->mass.cwiseProduct(g->v.col(m));
        sol.q[m - 1] = factor(m - 1).solve(rhs);
        check_solution(sol.q[m - 1]);
    }

    sol.init_covector = explicit_apply(0, sol.q[0]);
    if (g) sol.init_covector += time_.omega(0) * dt * op_->mass.cwiseProduct(g->v.col(0));
    return sol;
}

Field AdjointSolution::dual_field() const {
    const int nt = time.nt;
    Field u(q.empty() ? 0 : q[0].size(), time);
    for (int k = 0; k <= nt; ++k) {
        Eigen::VectorXd val = Eigen::VectorXd::Zero(u.cells());
        if (k >= 1) val += theta * q[k - 1];
        if (k <= nt - 1) val += (1.0 - theta) * q[k];
        u.v.col(k) = val / time.omega(k);
    }
    return u;
}

Field AdjointSolution::state_field(const Eigen::VectorXd& terminal) const {
    const int nt = time.nt;
    Field u(q.empty() ? 0 : q[0].size(), time);
    for (int n = 0; n < nt; ++n) u.v.col(n) = q[n];
    u.v.col(nt) = terminal;
    return u;
}

namespace {

Eigen::VectorXd weighted(const Eigen::VectorXd& mass, const Mask* mask) {
    return mask ? Eigen::VectorXd(mass.cwiseProduct(mask->w)) : mass;
}

} // namespace

double dual_pair_forward_source(const Field& f, const Field& u, const Eigen::VectorXd& mass,
                                const Mask* mask, double theta) {
    check_same_shape(f, u);
    const Eigen::VectorXd w = weighted(mass, mask);
    const double dt = f.time.dt();
    double acc = 0.0;
    for (int n = 0; n < f.nt(); ++n) {
        Eigen::VectorXd s = theta * f.v.col(n + 1);
        if (theta != 1.0) s += (1.0 - theta) * f.v.col(n);
        acc += dt * (s.array() * u.v.col(n).array() * w.array()).sum();
    }
    return acc;
}

double dual_pair_backward_source(const Field& y, const Field& g, const Eigen::VectorXd& mass,
                                 const Mask* mask, double theta) {
    check_same_shape(y, g);
    const Eigen::VectorXd w = weighted(mass, mask);
    const double dt = y.time.dt();
    double acc = 0.0;
    for (int n = 0; n < y.nt(); ++n) {
        Eigen::VectorXd s = theta * g.v.col(n);
        if (theta != 1.0) s += (1.0 - theta) * g.v.col(n + 1);
        acc += dt * (y.v.col(n + 1).array() * s.array() * w.array()).sum();
    }
    return acc;
}

double pair_interval_left(const Field& a, const Field& b, const Eigen::VectorXd& mass,
                          const Mask* mask) {
    check_same_shape(a, b);
    const Eigen::VectorXd w = weighted(mass, mask);
    const double dt = a.time.dt();
    double acc = 0.0;
    for (int n = 0; n < a.nt(); ++n)
        acc += dt * (a.v.col(n).array() * b.v.col(n).array() * w.array()).sum();
    return acc;
}

} // namespace hh
