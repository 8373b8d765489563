#include "hh/semilinear.hpp"

#include <cmath>

namespace hh {

Field Nonlinearity::apply(const Field& y) const {
    Field out = y;
    if (is_zero) {
        out.v.setZero();
        return out;
    }
    for (Eigen::Index c = 0; c < y.v.cols(); ++c)
        for (Eigen::Index r = 0; r < y.v.rows(); ++r) out.v(r, c) = f(y.v(r, c));
    return out;
}

Field Nonlinearity::apply_prime(const Field& y) const {
    Field out = y;
    if (is_zero) {
        out.v.setZero();
        return out;
    }
    for (Eigen::Index c = 0; c < y.v.cols(); ++c)
        for (Eigen::Index r = 0; r < y.v.rows(); ++r) out.v(r, c) = fprime(y.v(r, c));
    return out;
}

Nonlinearity make_nonlinearity(const std::string& name, double kappa) {
    Nonlinearity nl;
    nl.name = name;
    nl.kappa = kappa;
    if (name == "zero") {
        nl.f = [](double) { return 0.0; };
        nl.fprime = [](double) { return 0.0; };
        nl.is_zero = true;
    } else if (name == "tanh") {
        nl.f = [kappa](double y) { return kappa * std::tanh(y); };
        nl.fprime = [kappa](double y) {
            const double c = std::cosh(y);
            return kappa / (c * c);
        };
        nl.bound_f = kappa;
        nl.bound_fprime = kappa;
        nl.bound_fsecond = kappa * 4.0 / (3.0 * std::sqrt(3.0));
    } else if (name == "sine") {
        nl.f = [kappa](double y) { return kappa * std::sin(y); };
        nl.fprime = [kappa](double y) { return kappa * std::cos(y); };
        nl.bound_f = kappa;
        nl.bound_fprime = kappa;
        nl.bound_fsecond = kappa;
    } else {
        raise(ErrorCode::InvalidArgument, "unknown nonlinearity '" + name + "'");
    }
    return nl;
}

std::pair<double, double> spot_check_bounds(const Nonlinearity& nl, int points) {
    double worst_f = 0, worst_fp = 0;
    for (int k = 0; k < points; ++k) {
        const double y = -50.0 + 100.0 * k / (points - 1);
        worst_f = std::max(worst_f, std::abs(nl.f(y)));
        worst_fp = std::max(worst_fp, std::abs(nl.fprime(y)));
    }
    if (worst_f > nl.bound_f + 1e-12 || worst_fp > nl.bound_fprime + 1e-12)
        raise(ErrorCode::ValidationError, "nonlinearity exceeds its declared bounds");
    return {worst_f, worst_fp};
}

Field solve_semilinear_forward(const Propagator& prop, const Nonlinearity& nl,
                               const Eigen::VectorXd& y0, const Field* src, double picard_tol,
                               int max_picard) {
    if (prop.has_reaction())
        raise(ErrorCode::InvalidArgument, "semilinear stepping expects the plain propagator");
    const Eigen::Index n = prop.op().size();
    if (y0.size() != n) raise(ErrorCode::ShapeMismatch, "initial data size");

    const TimeGrid& tg = prop.time();
    const double dt = tg.dt();
    const double th = prop.theta();
    Field y(n, tg);
    y.v.col(0) = y0;

    auto feval = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd out(n);
        for (Eigen::Index j = 0; j < n; ++j) out[j] = nl.f(v[j]);
        return out;
    };

    for (int step = 0; step < tg.nt; ++step) {
        Eigen::VectorXd base = prop.explicit_apply(step, y.v.col(step));
        Eigen::VectorXd s_old = nl.is_zero ? Eigen::VectorXd::Zero(n) : feval(y.v.col(step));
        if (src) s_old += src->v.col(step);
        Eigen::VectorXd s_new_fixed = src ? Eigen::VectorXd(src->v.col(step + 1))
                                          : Eigen::VectorXd::Zero(n);
        if (th != 1.0) base += dt * (1.0 - th) * prop.op().mass.cwiseProduct(s_old);

        // Picard on the implicit F(y^{n+1}) sample
        Eigen::VectorXd guess = y.v.col(step);
        double prev_inc = -1;
        for (int it = 0;; ++it) {
            Eigen::VectorXd s_new = s_new_fixed;
            if (!nl.is_zero) s_new += feval(guess);
            const Eigen::VectorXd next = prop.implicit_solve(
                step, base + dt * th * prop.op().mass.cwiseProduct(s_new));
            const double inc = (next - guess).norm() / (1.0 + next.norm());
            guess = next;
            if (inc <= picard_tol || nl.is_zero) break;
            if (it >= max_picard || (prev_inc >= 0 && inc > prev_inc && it > 3))
                raise(ErrorCode::PicardDivergence,
                      "per-step Picard correction stalled (dt too large for ||F'||)");
            prev_inc = inc;
        }
        y.v.col(step + 1) = guess;
    }
    return y;
}

namespace {

/// Gauss-Legendre nodes/weights on [0,1] by Newton iteration on P_n.
void gauss_legendre_unit(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.resize(n);
    weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));  // [-1,1] guess
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) {
                const double w = 2.0 / ((1.0 - x * x) * dp * dp);
                nodes[i] = 0.5 * (x + 1.0);
                weights[i] = 0.5 * w;
                break;
            }
        }
    }
}

} // namespace

Field secant_coefficient(const Field& z, const Field& ybar, const Nonlinearity& nl,
                         int quad_nodes) {
    check_same_shape(z, ybar);
    if (quad_nodes < 4) raise(ErrorCode::InvalidArgument, "secant quadrature needs >= 4 nodes");
    Field g = z;
    g.v.setZero();
    if (nl.is_zero) return g;
    std::vector<double> tau, wgt;
    gauss_legendre_unit(quad_nodes, tau, wgt);
    for (Eigen::Index c = 0; c < z.v.cols(); ++c)
        for (Eigen::Index r = 0; r < z.v.rows(); ++r) {
            double acc = 0;
            for (int q = 0; q < quad_nodes; ++q)
                acc += wgt[q] * nl.fprime(ybar.v(r, c) + tau[q] * z.v(r, c));
            g.v(r, c) = acc;
        }
    return g;
}

namespace {

struct InnerResult {
    Field y;
    Field phi1, phi2;
};

/// One frozen-coefficient coupled solve: reaction F'(u) on the adjoints,
/// frozen source F(u) on the state.
InnerResult solve_frozen_coupled(const Field& f, const Field& u, const SemilinearSetup& s,
                                 const Propagator& plain, double tol, int max_iterations) {
    const Field a = s.nl.apply_prime(u);
    const Propagator adj(*s.op, s.time, ThetaScheme{1.0}, s.nl.is_zero ? nullptr : &a);

    Field src_base = masked(f, s.regions->leader);
    if (!s.nl.is_zero) src_base += s.nl.apply(u);

    Field w = plain.forward(s.y0, &src_base);
    const double scale = std::max(1.0, norm_q(w, s.op->mass, nullptr));
    InnerResult res;
    double prev_inc = -1;
    int grow = 0;
    for (int it = 0; it < max_iterations; ++it) {
        Field src = src_base;
        for (int i = 1; i <= 2; ++i) {
            const Field gsrc = masked(w - s.yd(i), s.regions->target(i));
            Field phi = adj.adjoint(nullptr, &gsrc).dual_field();
            src -= (1.0 / s.alpha(i)) * masked(phi, s.regions->follower(i));
            ((i == 1) ? res.phi1 : res.phi2) = std::move(phi);
        }
        const Field y = plain.forward(s.y0, &src);
        const double inc = norm_q(y - w, s.op->mass, nullptr);
        w = y;
        if (inc <= tol * scale) {
            res.y = std::move(w);
            return res;
        }
        if (prev_inc >= 0) {
            grow = (inc >= prev_inc) ? grow + 1 : 0;
            if (grow >= 3)
                raise(ErrorCode::ContractionFailure,
                      "frozen-coefficient coupling diverging (alpha too small)");
        }
        prev_inc = inc;
    }
    raise(ErrorCode::MaxIterations, "frozen-coefficient coupling did not converge");
}

} // namespace

SemilinearState solve_quasi_nash(const Field& f, const SemilinearSetup& s, double tol,
                                 int max_outer, double inner_tol) {
    const Propagator plain(*s.op, s.time, ThetaScheme{1.0});
    const Field f_src = masked(f, s.regions->leader);
    Field u = solve_semilinear_forward(plain, s.nl, s.y0, &f_src);
    const double scale = std::max(1.0, norm_q(u, s.op->mass, nullptr));

    SemilinearState st;
    double prev_inc = -1;
    int grow = 0;
    for (int it = 0; it < max_outer; ++it) {
        InnerResult inner = solve_frozen_coupled(f, u, s, plain, inner_tol, 500);
        const double inc = norm_q(inner.y - u, s.op->mass, nullptr);
        st.trace.push_back(inc / scale);
        u = inner.y;
        st.outer_iterations = it + 1;
        st.final_increment = inc / scale;
        if (inc <= tol * scale) {
            st.y = std::move(inner.y);
            st.phi1 = std::move(inner.phi1);
            st.phi2 = std::move(inner.phi2);
            st.controls.v1 = (-1.0 / s.alpha1) * masked(st.phi1, s.regions->follower1);
            st.controls.v2 = (-1.0 / s.alpha2) * masked(st.phi2, s.regions->follower2);
            return st;
        }
        if (prev_inc >= 0) {
            grow = (inc >= prev_inc) ? grow + 1 : 0;
            if (grow >= 3)
                raise(ErrorCode::ContractionFailure, "quasi-equilibrium outer loop diverging");
        }
        prev_inc = inc;
    }
    raise(ErrorCode::MaxIterations, "quasi-equilibrium fixed point did not converge");
}

double follower_cost(const SemilinearSetup& s, const Field& f, const ControlPair& v, int i) {
    const Propagator plain(*s.op, s.time, ThetaScheme{1.0});
    Field src = masked(f, s.regions->leader);
    src += masked(v.v1, s.regions->follower1);
    src += masked(v.v2, s.regions->follower2);
    const Field y = solve_semilinear_forward(plain, s.nl, s.y0, &src);
    const Field diff = y - s.yd(i);
    const double tracking = inner_q(diff, diff, s.op->mass, &s.regions->target(i));
    const double energy = inner_q(v[i], v[i], s.op->mass, &s.regions->follower(i));
    return 0.5 * tracking + 0.5 * s.alpha(i) * energy;
}

ProbeReport equilibrium_probe(const SemilinearState& state, const Field& f,
                              const SemilinearSetup& s, int n_dirs,
                              const std::vector<double>& eps_list, Rng& rng) {
    ProbeReport rep;
    rep.min_diff = 1e300;
    const double base1 = follower_cost(s, f, state.controls, 1);
    const double base2 = follower_cost(s, f, state.controls, 2);

    std::vector<std::vector<double>> mean_by_eps(2, std::vector<double>(eps_list.size(), 0.0));
    for (int i = 1; i <= 2; ++i) {
        const double base = (i == 1) ? base1 : base2;
        for (size_t e = 0; e < eps_list.size(); ++e) {
            ProbeRow row;
            row.follower = i;
            row.eps = eps_list[e];
            row.min_diff = 1e300;
            for (int d = 0; d < n_dirs; ++d) {
                Rng dr = rng.fork(10000 * i + 100 * e + d);
                Field dir(s.op->size(), s.time);
                for (int k = 0; k < dir.levels(); ++k)
                    dir.v.col(k) = dr.normal_vector(s.op->size());
                dir = masked(dir, s.regions->follower(i));
                dir *= 1.0 / norm_q(dir, s.op->mass, &s.regions->follower(i));
                ControlPair v = state.controls;
                v[i] += eps_list[e] * dir;
                const double diff = follower_cost(s, f, v, i) - base;
                row.min_diff = std::min(row.min_diff, diff);
                row.mean_diff += diff / n_dirs;
            }
            mean_by_eps[i - 1][e] = std::abs(row.mean_diff);
            rep.min_diff = std::min(rep.min_diff, row.min_diff);
            rep.rows.push_back(row);
        }
    }

    // least-squares slope of log(mean diff) against log(eps)
    auto slope = [&](const std::vector<double>& m) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const int n = static_cast<int>(eps_list.size());
        for (int e = 0; e < n; ++e) {
            const double x = std::log(eps_list[e]);
            const double y = std::log(std::max(m[e], 1e-300));
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    };
    rep.slope1 = slope(mean_by_eps[0]);
    rep.slope2 = slope(mean_by_eps[1]);
    return rep;
}

SemilinearLeaderResult semilinear_leader(const SemilinearSetup& s, double eps, double outer_tol,
                                         int max_outer, double leader_tol, PenaltyKind penalty) {
    const Propagator plain(*s.op, s.time, ThetaScheme{1.0});
    SemilinearLeaderResult out;
    out.ybar = solve_semilinear_forward(plain, s.nl, s.ybar0, nullptr);

    const Eigen::VectorXd z0 = s.y0 - s.ybar0;
    const Field zd1 = s.y1d - out.ybar;
    const Field zd2 = s.y2d - out.ybar;

    Field z(s.op->size(), s.time);
    Eigen::VectorXd warm;
    double scale = 0, prev_inc = -1;
    int grow = 0;
    for (int it = 0; it < max_outer; ++it) {
        const Field G = secant_coefficient(z, out.ybar, s.nl);
        Field yz = out.ybar + z;
        const Field a = s.nl.apply_prime(yz);
        const Propagator p_state(*s.op, s.time, ThetaScheme{1.0}, s.nl.is_zero ? nullptr : &G);
        const Propagator p_adj(*s.op, s.time, ThetaScheme{1.0}, s.nl.is_zero ? nullptr : &a);

        CoupledSetup cs;
        cs.state = &p_state;
        cs.adj = &p_adj;
        cs.regions = s.regions;
        cs.alpha1 = s.alpha1;
        cs.alpha2 = s.alpha2;
        cs.z0 = z0;
        cs.zd1 = zd1;
        cs.zd2 = zd2;
        out.leader = minimize_leader(cs, eps, leader_tol, 4000, penalty,
                                     warm.size() ? &warm : nullptr);
        warm = out.leader.psiT_min;
        out.f_norms.push_back(
            std::sqrt(2.0 * out.leader.cost));  // ||f|| in the leader norm

        const Field w = out.leader.z;
        const double inc = norm_q(w - z, s.op->mass, nullptr);
        z = w;
        if (it == 0) scale = std::max(1.0, norm_q(z, s.op->mass, nullptr));
        out.increments.push_back(inc / scale);
        out.outer_iterations = it + 1;
        if (it > 0 && inc <= outer_tol * scale) {
            out.z = z;
            out.terminal_norm = norm_x(z.v.col(s.time.nt), s.op->mass);
            return out;
        }
        if (prev_inc >= 0 && it > 1) {
            grow = (inc >= prev_inc) ? grow + 1 : 0;
            if (grow >= 3)
                raise(ErrorCode::OuterDivergence, "semilinear leader outer loop diverging");
        }
        prev_inc = inc;
    }
    raise(ErrorCode::MaxIterations, "semilinear leader outer loop did not converge");
}

} // namespace hh
