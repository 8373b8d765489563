#include "hh/nash.hpp"

#include <cmath>

namespace hh {

CoupledSetup CoupledSetup::zero_data() const {
    CoupledSetup s = *this;
    s.z0.setZero();
    s.zd1.v.setZero();
    s.zd2.v.setZero();
    return s;
}

double inner_h(const ControlPair& a, const ControlPair& b, const CoupledSetup& s) {
    return inner_q(a.v1, b.v1, s.mass(), &s.regions->follower1) +
           inner_q(a.v2, b.v2, s.mass(), &s.regions->follower2);
}

Field apply_L(const CoupledSetup& s, int i, const Field& v) {
    const Field src = masked(v, s.regions->follower(i));
    return s.state->forward(Eigen::VectorXd::Zero(s.state->op().size()), &src);
}

Field apply_L_star(const CoupledSetup& s, int i, const Field& g) {
    return masked(s.adj->adjoint(nullptr, &g).dual_field(), s.regions->follower(i));
}

NormEstimate operator_norm_L(const CoupledSetup& s, int i, int iterations, Rng& rng) {
    if (iterations < 20) raise(ErrorCode::InvalidArgument, "operator_norm_L needs iters >= 20");
    const Mask& oi = s.regions->follower(i);
    Field v(s.state->op().size(), s.time());
    for (int k = 0; k < v.levels(); ++k) v.v.col(k) = rng.normal_vector(v.cells());
    v = masked(v, oi);

    NormEstimate est;
    double prev = 0.0;
    for (int it = 0; it < iterations; ++it) {
        const double nv = std::sqrt(inner_q(v, v, s.mass(), &oi));
        if (nv == 0.0) raise(ErrorCode::NonConvergence, "power iteration collapsed to zero");
        v *= 1.0 / nv;
        const Field w = apply_L(s, i, v);
        const double rho = inner_q(w, w, s.mass(), nullptr);  // = <L*L v, v>_{H_i}
        est.value = std::sqrt(std::max(0.0, rho));
        est.iterations = it + 1;
        est.gap = std::abs(rho - prev) / std::max(rho, 1e-300);
        prev = rho;
        v = apply_L_star(s, i, w);
    }
    if (est.gap > 1e-6)
        raise(ErrorCode::NonConvergence, "operator_norm_L Rayleigh gap above 1e-6");
    return est;
}

double check_coercivity(double alpha1, double alpha2, double norm_l1, double norm_l2) {
    const double d1 = alpha1 - 0.25 * norm_l1 * norm_l1;
    const double d2 = alpha2 - 0.25 * norm_l2 * norm_l2;
    return std::min(d1, d2);
}

Field state_for_controls(const CoupledSetup& s, const Field& f, const ControlPair& v) {
    Field src = masked(f, s.regions->leader);
    src += masked(v.v1, s.regions->follower1);
    src += masked(v.v2, s.regions->follower2);
    return s.state->forward(s.z0, &src);
}

ControlPair apply_nash_operator(const CoupledSetup& s, const ControlPair& v) {
    Field src = masked(v.v1, s.regions->follower1) + masked(v.v2, s.regions->follower2);
    const Field w = s.state->forward(Eigen::VectorXd::Zero(s.state->op().size()), &src);
    ControlPair out;
    for (int i = 1; i <= 2; ++i) {
        const Field wi = masked(w, s.regions->target(i));
        Field avi = apply_L_star(s, i, wi);
        avi += s.alpha(i) * masked(v[i], s.regions->follower(i));
        out[i] = avi;
    }
    return out;
}

namespace {

Field adjoint_state(const CoupledSetup& s, int i, const Field& z) {
    const Field src = masked(z - s.zd(i), s.regions->target(i));
    return s.adj->adjoint(nullptr, &src).dual_field();
}

NashSolution finalize(const CoupledSetup& s, const Field& f, ControlPair v,
                      std::string algorithm, int iterations, double residual,
                      std::vector<std::pair<int, double>> trace) {
    NashSolution sol;
    sol.controls.v1 = masked(v.v1, s.regions->follower1);
    sol.controls.v2 = masked(v.v2, s.regions->follower2);
    sol.z = state_for_controls(s, f, sol.controls);
    sol.phi1 = adjoint_state(s, 1, sol.z);
    sol.phi2 = adjoint_state(s, 2, sol.z);
    for (int i = 1; i <= 2; ++i) {
        const Field& phi = (i == 1) ? sol.phi1 : sol.phi2;
        const Mask& oi = s.regions->follower(i);
        const Field num = masked(phi + s.alpha(i) * sol.controls[i], oi);
        const double den = 1.0 + s.alpha(i) * norm_q(sol.controls[i], s.mass(), &oi);
        ((i == 1) ? sol.r1 : sol.r2) = norm_q(num, s.mass(), &oi) / den;
    }
    sol.algorithm = std::move(algorithm);
    sol.iterations = iterations;
    sol.final_residual = residual;
    sol.trace = std::move(trace);
    return sol;
}

bool all_zero_data(const CoupledSetup& s, const Field& f) {
    return f.v.norm() == 0.0 && s.z0.norm() == 0.0 && s.zd1.v.norm() == 0.0 &&
           s.zd2.v.norm() == 0.0;
}

} // namespace

NashSolution solve_nash_cg(const Field& f, const CoupledSetup& s, double tol, int max_iterations) {
    const Eigen::Index n = s.state->op().size();
    ControlPair v{Field(n, s.time()), Field(n, s.time())};
    if (all_zero_data(s, f))
        return finalize(s, f, v, "cg", 0, 0.0, {});

    // RHS_i = L_i*((z_{i,d} - u) 1_{O_{i,d}}), u the follower-free state
    const Field fm = masked(f, s.regions->leader);
    const Field u = s.state->forward(s.z0, &fm);
    ControlPair rhs;
    for (int i = 1; i <= 2; ++i) {
        const Field g = masked(s.zd(i) - u, s.regions->target(i));
        rhs[i] = apply_L_star(s, i, g);
    }
    const double rhs_norm = norm_h(rhs, s);
    if (rhs_norm == 0.0)
        return finalize(s, f, v, "cg", 0, 0.0, {});

    ControlPair r = rhs;  // residual at v = 0
    ControlPair p = r;
    double rr = inner_h(r, r, s);
    std::vector<std::pair<int, double>> trace;
    int it = 0;
    for (; it < max_iterations; ++it) {
        const double res = std::sqrt(rr) / rhs_norm;
        trace.emplace_back(it, res);
        if (res <= tol) break;
        const ControlPair ap = apply_nash_operator(s, p);
        const double pap = inner_h(p, ap, s);
        if (pap <= 0.0)
            raise(ErrorCode::CoercivityFailure,
                  "nash operator lost positivity along a CG direction (alpha too small)");
        const double alpha_cg = rr / pap;
        for (int i = 1; i <= 2; ++i) {
            v[i].v += alpha_cg * p[i].v;
            r[i].v -= alpha_cg * ap[i].v;
        }
        const double rr_new = inner_h(r, r, s);
        const double beta = rr_new / rr;
        rr = rr_new;
        for (int i = 1; i <= 2; ++i) p[i].v = r[i].v + beta * p[i].v;
    }
    if (it >= max_iterations)
        raise(ErrorCode::MaxIterations, "nash CG did not reach tolerance");
    return finalize(s, f, v, "cg", it, std::sqrt(rr) / rhs_norm, std::move(trace));
}

NashSolution solve_nash_contraction(const Field& f, const CoupledSetup& s, double tol,
                                    int max_iterations) {
    const Eigen::Index n = s.state->op().size();
    if (all_zero_data(s, f)) {
        ControlPair v{Field(n, s.time()), Field(n, s.time())};
        return finalize(s, f, v, "contraction", 1, 0.0, {});
    }

    const Field fm = masked(f, s.regions->leader);
    Field w = s.state->forward(s.z0, &fm);  // follower-free state as initial guess
    const double scale = std::max(1.0, norm_q(w, s.mass(), nullptr));

    std::vector<std::pair<int, double>> trace;
    double prev_inc = -1.0;
    int grow_streak = 0;
    for (int it = 0; it < max_iterations; ++it) {
        Field src = fm;
        ControlPair v;
        for (int i = 1; i <= 2; ++i) {
            const Field phi = adjoint_state(s, i, w);
            v[i] = (-1.0 / s.alpha(i)) * masked(phi, s.regions->follower(i));
            src += v[i];
        }
        const Field z = s.state->forward(s.z0, &src);
        const double inc = norm_q(z - w, s.mass(), nullptr);
        trace.emplace_back(it, inc);
        w = z;
        if (inc <= tol * scale)
            return finalize(s, f, v, "contraction", it + 1, inc / scale, std::move(trace));
        if (prev_inc >= 0.0) {
            grow_streak = (inc >= prev_inc) ? grow_streak + 1 : 0;
            if (grow_streak >= 3)
                raise(ErrorCode::ContractionFailure,
                      "optimality-system iteration diverging (alpha too small)");
        }
        prev_inc = inc;
    }
    raise(ErrorCode::MaxIterations, "nash contraction did not reach tolerance");
}

CostReport evaluate_costs(const CoupledSetup& s, const Field& f, const ControlPair& v) {
    CostReport rep;
    const Field z = state_for_controls(s, f, v);
    for (int i = 1; i <= 2; ++i) {
        const Field diff = z - s.zd(i);
        const double tracking = inner_q(diff, diff, s.mass(), &s.regions->target(i));
        const double energy = inner_q(v[i], v[i], s.mass(), &s.regions->follower(i));
        if (i == 1) {
            rep.tracking1 = tracking;
            rep.energy1 = energy;
            rep.j1 = 0.5 * tracking + 0.5 * s.alpha1 * energy;
        } else {
            rep.tracking2 = tracking;
            rep.energy2 = energy;
            rep.j2 = 0.5 * tracking + 0.5 * s.alpha2 * energy;
        }
    }
    rep.j_leader = 0.5 * inner_q(f, f, s.mass(), &s.regions->leader);
    return rep;
}

double stationarity_residual(const CoupledSetup& s, int i, const Field& f, const ControlPair& v) {
    const Field z = state_for_controls(s, f, v);
    const Field phi = adjoint_state(s, i, z);
    const Mask& oi = s.regions->follower(i);
    const Field num = masked(phi + s.alpha(i) * v[i], oi);
    const double den = 1.0 + s.alpha(i) * norm_q(v[i], s.mass(), &oi);
    return norm_q(num, s.mass(), &oi) / den;
}

double contraction_ratio_sample(const CoupledSetup& s, Rng& rng) {
    const Eigen::Index n = s.state->op().size();
    auto apply_S_diff = [&](const Field& dw) {
        // S(w1) - S(w2) depends only on w1 - w2: propagate the difference
        Field src(n, s.time());
        for (int i = 1; i <= 2; ++i) {
            const Field g = masked(dw, s.regions->target(i));
            const Field phi = s.adj->adjoint(nullptr, &g).dual_field();
            src -= (1.0 / s.alpha(i)) * masked(phi, s.regions->follower(i));
        }
        return s.state->forward(Eigen::VectorXd::Zero(n), &src);
    };
    Field dw(n, s.time());
    for (int k = 0; k < dw.levels(); ++k) dw.v.col(k) = rng.normal_vector(n);
    const double before = norm_q(dw, s.mass(), nullptr);
    const Field ds = apply_S_diff(dw);
    return norm_q(ds, s.mass(), nullptr) / before;
}

} // namespace hh
