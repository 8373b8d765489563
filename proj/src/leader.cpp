#include "hh/leader.hpp"

#include <cmath>
#include <functional>

namespace hh {

namespace {

void require_implicit_euler(const CoupledSetup& s) {
    if (s.state->theta() != 1.0 || s.adj->theta() != 1.0)
        raise(ErrorCode::InvalidArgument,
              "coupled duality machinery requires the implicit Euler scheme");
}

Field gamma_sum_masked(const AdjointTriple& t, const CoupledSetup& s) {
    return masked(t.gamma1, s.regions->target1) + masked(t.gamma2, s.regions->target2);
}

} // namespace

AdjointTriple solve_adjoint_coupled(const Eigen::VectorXd& psiT, const CoupledSetup& s,
                                    double tol, int max_sweeps) {
    require_implicit_euler(s);
    const Eigen::Index n = s.state->op().size();
    if (psiT.size() != n) raise(ErrorCode::ShapeMismatch, "psiT size");

    AdjointTriple t;
    t.psiT = psiT;
    t.gamma1 = Field(n, s.time());
    t.gamma2 = Field(n, s.time());
    t.psi = Field(n, s.time());

    double scale = 0, prev_inc = -1;
    int grow_streak = 0;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        const Field g = gamma_sum_masked(t, s);
        const auto adj = s.state->adjoint(&psiT, &g);
        const Field psi_new = adj.state_field(psiT);
        const Field dual = adj.dual_field();

        double inc = norm_q(psi_new - t.psi, s.mass(), nullptr);
        t.psi = psi_new;
        for (int i = 1; i <= 2; ++i) {
            const Field src = (-1.0 / s.alpha(i)) * masked(dual, s.regions->follower(i));
            Field gnew = s.adj->forward(Eigen::VectorXd::Zero(n), &src);
            Field& gi = (i == 1) ? t.gamma1 : t.gamma2;
            inc += norm_q(gnew - gi, s.mass(), nullptr);
            gi = std::move(gnew);
        }

        if (sweep == 0) scale = std::max(1e-300, inc);
        t.sweeps = sweep + 1;
        t.final_increment = inc / scale;
        if (inc <= tol * scale) return t;
        if (prev_inc >= 0) {
            grow_streak = (inc >= prev_inc) ? grow_streak + 1 : 0;
            if (grow_streak >= 3)
                raise(ErrorCode::CouplingDivergence,
                      "adjoint coupling sweeps diverging (alpha too small)");
        }
        prev_inc = inc;
    }
    raise(ErrorCode::MaxIterations, "adjoint coupling did not reach tolerance");
}

Field leader_control_from(const AdjointTriple& triple, const CoupledSetup& s) {
    const int nt = s.time().nt;
    Field f(triple.psi.cells(), s.time());
    for (int k = 1; k <= nt; ++k)
        f.v.col(k) = triple.psi.v.col(k - 1) / s.time().omega(k);
    return masked(f, s.regions->leader);
}

double duality_residual(const CoupledSetup& s, const Field& f, const Eigen::VectorXd& psiT,
                        double inner_tol) {
    require_implicit_euler(s);
    const auto nash = solve_nash_contraction(f, s, inner_tol, 2000);
    const auto triple = solve_adjoint_coupled(psiT, s, inner_tol, 2000);

    const double lhs = dual_pair_forward_source(f, triple.psi, s.mass(), &s.regions->leader, 1.0);
    double rhs = inner_x(nash.z.v.col(s.time().nt), psiT, s.mass()) -
                 inner_x(s.z0, triple.psi.v.col(0), s.mass());
    rhs += pair_interval_left(s.zd1, triple.gamma1, s.mass(), &s.regions->target1);
    rhs += pair_interval_left(s.zd2, triple.gamma2, s.mass(), &s.regions->target2);
    return std::abs(lhs - rhs) / (1.0 + std::abs(rhs));
}

namespace {

double quadratic_part(const AdjointTriple& t, const CoupledSetup& s) {
    const Field f = leader_control_from(t, s);
    return 0.5 * dual_pair_forward_source(f, t.psi, s.mass(), &s.regions->leader, 1.0);
}

double linear_part(const AdjointTriple& t, const CoupledSetup& s) {
    double v = inner_x(s.z0, t.psi.v.col(0), s.mass());
    v -= pair_interval_left(s.zd1, t.gamma1, s.mass(), &s.regions->target1);
    v -= pair_interval_left(s.zd2, t.gamma2, s.mass(), &s.regions->target2);
    return v;
}

} // namespace

double eval_F_eps(const Eigen::VectorXd& psiT, double eps, const CoupledSetup& s,
                  PenaltyKind penalty, double inner_tol) {
    require_implicit_euler(s);
    const auto t = solve_adjoint_coupled(psiT, s, inner_tol, 2000);
    const double nrm = std::sqrt(std::max(0.0, inner_x(psiT, psiT, s.mass())));
    const double pen = (penalty == PenaltyKind::exact_norm) ? nrm : 0.5 * nrm * nrm;
    return quadratic_part(t, s) + eps * pen + linear_part(t, s);
}

Eigen::VectorXd grad_F_eps(const Eigen::VectorXd& psiT, double eps, const CoupledSetup& s,
                           PenaltyKind penalty, double inner_tol) {
    require_implicit_euler(s);
    const double nrm = std::sqrt(std::max(0.0, inner_x(psiT, psiT, s.mass())));
    if (penalty == PenaltyKind::exact_norm && nrm == 0.0)
        raise(ErrorCode::ZeroPointNondifferentiable,
              "exact-norm penalty is not differentiable at psiT = 0");

    const auto t = solve_adjoint_coupled(psiT, s, inner_tol, 2000);
    const Field f = leader_control_from(t, s);
    const auto nash = solve_nash_contraction(f, s, inner_tol, 2000);
    Eigen::VectorXd grad = nash.z.v.col(s.time().nt);
    if (penalty == PenaltyKind::exact_norm)
        grad += (eps / nrm) * psiT;
    else
        grad += eps * psiT;
    return grad;
}

namespace {

struct GramianContext {
    const CoupledSetup* s;
    CoupledSetup homogeneous;
    double inner_tol;
    int applies = 0;

    explicit GramianContext(const CoupledSetup& setup, double tol)
        : s(&setup), homogeneous(setup.zero_data()), inner_tol(tol) {}

    /// Lambda0 x: terminal slice of the optimality state driven by the
    /// control induced by x, with homogeneous data. Symmetric PSD in the
    /// mass inner product by the exact-transpose construction.
    Eigen::VectorXd apply(const Eigen::VectorXd& x) {
        ++applies;
        const auto t = solve_adjoint_coupled(x, *s, inner_tol, 2000);
        const Field f = leader_control_from(t, *s);
        const auto nash = solve_nash_contraction(f, homogeneous, inner_tol, 2000);
        return nash.z.v.col(s->time().nt);
    }
};

/// CG in the mass inner product for (Lambda0 + shift I) x = b.
Eigen::VectorXd cg_shifted(GramianContext& ctx, double shift, const Eigen::VectorXd& b,
                           double tol, int max_iterations, const Eigen::VectorXd* x0,
                           std::vector<std::pair<int, double>>* trace) {
    const Eigen::VectorXd& mass = ctx.s->mass();
    auto dot = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& c) {
        return inner_x(a, c, mass);
    };
    Eigen::VectorXd x = x0 ? *x0 : Eigen::VectorXd::Zero(b.size());
    Eigen::VectorXd r = x0 ? Eigen::VectorXd(b - (ctx.apply(x) + shift * x)) : b;
    const double bnorm = std::sqrt(std::max(dot(b, b), 1e-300));
    Eigen::VectorXd p = r;
    double rr = dot(r, r);
    double best = std::sqrt(rr) / bnorm;
    int stagnant = 0;
    for (int it = 0; it < max_iterations; ++it) {
        const double res = std::sqrt(rr) / bnorm;
        if (trace) trace->emplace_back(it, res);
        if (res <= tol) return x;
        if (res < best * (1.0 - 1e-12)) {
            best = res;
            stagnant = 0;
        } else if (++stagnant > 60) {
            // inexact applies put a floor under the reachable residual; only a
            // stall far above tolerance indicates a genuinely unobservable shift
            if (res > 100 * tol)
                raise(ErrorCode::ObservabilityTooWeak,
                      "leader CG stagnated above tolerance (observability too weak at this shift)");
            return x;
        }
        const Eigen::VectorXd ap = ctx.apply(p) + shift * p;
        const double pap = dot(p, ap);
        if (pap <= 0)
            raise(ErrorCode::ObservabilityTooWeak, "leader Gramian lost positivity");
        const double a = rr / pap;
        x += a * p;
        r -= a * ap;
        const double rr_new = dot(r, r);
        p = r + (rr_new / rr) * p;
        rr = rr_new;
    }
    raise(ErrorCode::MaxIterations, "leader CG did not reach tolerance");
}

} // namespace

LeaderResult minimize_leader(const CoupledSetup& s, double eps, double tol, int max_iterations,
                             PenaltyKind penalty, const Eigen::VectorXd* warm_start) {
    require_implicit_euler(s);
    if (eps <= 0) raise(ErrorCode::InvalidArgument, "eps must be positive");

    LeaderResult out;
    out.eps = eps;

    const double inner_tol = std::min(1e-12, 0.01 * tol);
    GramianContext ctx(s, inner_tol);

    // d0 = z(T) with f = 0: the free drift the control must cancel
    const Field fzero(s.state->op().size(), s.time());
    const auto free_run = solve_nash_contraction(fzero, s, inner_tol, 2000);
    const Eigen::VectorXd d0 = free_run.z.v.col(s.time().nt);
    const double nd0 = norm_x(d0, s.mass());

    Eigen::VectorXd psi = Eigen::VectorXd::Zero(d0.size());
    std::string branch;
    if (penalty == PenaltyKind::quadratic) {
        branch = "quadratic";
        if (nd0 > 0) psi = cg_shifted(ctx, eps, Eigen::VectorXd(-d0), tol, max_iterations,
                                      warm_start, &out.trace);
    } else if (nd0 <= eps * (1.0 + 1e-12)) {
        branch = "zero-minimizer";  // 0 minimizes F_eps; f = 0 already reaches eps
    } else {
        branch = "stationary";
        // secular iteration on sigma = ||psi||: psi(sigma) solves
        // (Lambda0 + eps/sigma) psi = -d0 and g(sigma) := ||psi(sigma)||
        // is increasing with g/sigma decreasing, so the root is unique.
        auto g_of = [&](double sg, const Eigen::VectorXd* warm) {
            psi = cg_shifted(ctx, eps / sg, Eigen::VectorXd(-d0), tol, max_iterations, warm,
                             &out.trace);
            return norm_x(psi, s.mass());
        };
        double lo = 0, hi = 0;
        double sg = nd0 / eps;  // scale guess
        double g = g_of(sg, warm_start);
        if (g > sg) {
            lo = sg;
            hi = sg;
            for (int k = 0; k < 80 && g > hi; ++k) {
                hi *= 4;
                g = g_of(hi, &psi);
            }
            if (g > hi)
                raise(ErrorCode::ObservabilityTooWeak,
                      "secular bracketing failed: control energy escalates without bound");
        } else {
            hi = sg;
            lo = sg;
            for (int k = 0; k < 80 && g < lo; ++k) {
                lo /= 4;
                g = g_of(lo, &psi);
            }
        }
        // bisection in log sigma
        for (int k = 0; k < 200; ++k) {
            sg = std::sqrt(lo * hi);
            g = g_of(sg, &psi);
            if (std::abs(g - sg) <= 1e-9 * sg) break;
            (g > sg ? lo : hi) = sg;
            if (hi / lo < 1.0 + 1e-12) break;
        }
    }

    out.branch = branch;
    out.psiT_min = psi;
    out.iterations = ctx.applies;

    if (branch == "zero-minimizer") {
        out.fhat = Field(s.state->op().size(), s.time());
        out.z = free_run.z;
        out.terminal_norm = nd0;
        out.cost = 0.0;
        return out;
    }
    const auto triple = solve_adjoint_coupled(psi, s, inner_tol, 2000);
    out.fhat = leader_control_from(triple, s);
    const auto nash = solve_nash_contraction(out.fhat, s, inner_tol, 2000);
    out.z = nash.z;
    out.terminal_norm = norm_x(out.z.v.col(s.time().nt), s.mass());
    out.cost = 0.5 * inner_q(out.fhat, out.fhat, s.mass(), &s.regions->leader);
    return out;
}

ObservabilityStats observability_ratio(const CoupledSetup& s, const CarlemanWeightSet& w,
                                       int n_samples, Rng& rng, double coupling_tol) {
    require_implicit_euler(s);
    if (w.flag != s.regions->case_flag)
        raise(ErrorCode::CaseMismatch, "weight set case does not match region case");

    ObservabilityStats stats;
    stats.samples.reserve(n_samples);
    const int nt = s.time().nt;
    const double dt = s.time().dt();
    double sum = 0;

    for (int k = 0; k < n_samples; ++k) {
        Rng sk = rng.fork(1000 + k);
        Eigen::VectorXd psiT = sk.normal_vector(s.state->op().size());
        psiT /= norm_x(psiT, s.mass());
        const auto t = solve_adjoint_coupled(psiT, s, coupling_tol, 2000);

        const double denom = inner_q(t.psi, t.psi, s.mass(), &s.regions->leader);
        double gamma_term = 0;
        if (w.flag == CaseFlag::shared) {
            const Field gbar = t.gamma1 + t.gamma2;
            for (int n = 0; n < nt; ++n)
                for (Eigen::Index j : s.regions->target1.cells) {
                    const double mid = 0.5 * (gbar.v(j, n) + gbar.v(j, n + 1));
                    gamma_term += w.rho_inv2(j, n) * mid * mid * s.mass()[j] * dt;
                }
        } else {
            for (int i = 1; i <= 2; ++i) {
                const Field& gi = t.gamma(i);
                for (int n = 0; n < nt; ++n)
                    for (Eigen::Index j : s.regions->target(i).cells) {
                        const double mid = 0.5 * (gi.v(j, n) + gi.v(j, n + 1));
                        gamma_term += w.rho_inv2(j, n) * mid * mid * s.mass()[j] * dt;
                    }
            }
        }
        const double psi0 = inner_x(t.psi.v.col(0), t.psi.v.col(0), s.mass());
        if (denom < 1e-300) {
            ++stats.infinite;
            stats.samples.push_back(std::numeric_limits<double>::infinity());
            continue;
        }
        const double ratio = (psi0 + gamma_term) / denom;
        stats.samples.push_back(ratio);
        stats.max_ratio = std::max(stats.max_ratio, ratio);
        sum += ratio;
    }
    const int finite = n_samples - stats.infinite;
    stats.mean_ratio = finite > 0 ? sum / finite : 0.0;
    return stats;
}

} // namespace hh
