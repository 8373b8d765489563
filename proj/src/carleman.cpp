#include "hh/carleman.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hh {

namespace {

/// Direction-dependent outer radius: distance from the origin to the domain
/// boundary along the cell's ray. Radial: R. Tensor box: extent/||x_hat||_inf.
double ray_radius(const SpatialGrid& g, Eigen::Index j) {
    if (g.mode == GridMode::radial3d) return g.extent;
    const double r = g.radius[j];
    double m = 0;
    for (int d = 0; d < g.dimension; ++d) m = std::max(m, std::abs(g.centers(j, d)) / r);
    return g.extent / m;
}

/// Monotone cubic Hermite evaluation on [x0,x1] with values (y0,y1) and end
/// slopes (s0,s1); callers keep slopes inside the Fritsch-Carlson box.
double hermite(double x, double x0, double x1, double y0, double y1, double s0, double s1) {
    const double hseg = x1 - x0;
    const double t = (x - x0) / hseg;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * hseg * s0 +
           (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * hseg * s1;
}

void check_fc(double s0, double s1, double sec, const char* where) {
    if (sec == 0.0 || s0 * sec < 0 || s1 * sec < 0 || std::abs(s0) > 3 * std::abs(sec) ||
        std::abs(s1) > 3 * std::abs(sec)) {
        std::ostringstream os;
        os << "weight profile segment '" << where << "' violates the monotone-spline bounds; "
           << "adjust the annulus placement";
        raise(ErrorCode::InvalidArgument, os.str());
    }
}

/// Piecewise profile for |x| >= 1:
///   [1, c]      linear, slope 1 (C^1 match with ln|x| at the unit sphere)
///   [c, peak]   monotone rise to the common supremum S
///   [peak, d]   monotone fall to (V_d, s_d)
///   [d, R(dir)] quadratic fall to zero on the boundary, monotone by the
///               shallow-slope choice s_d = -V_d / (2 (R_max - d))
struct BridgeProfile {
    double c, d, peak, S, V_d, s_d;

    double eval(double r, double ray_r) const {
        if (r <= 1.0) return std::log(r);
        if (r <= c) return r - 1.0;
        if (r <= peak) return hermite(r, c, peak, c - 1.0, S, 1.0, 0.0);
        if (r <= d) return hermite(r, peak, d, S, V_d, 0.0, s_d);
        const double span = ray_r - d;
        const double kappa = -(V_d + s_d * span) / (span * span);
        const double x = r - d;
        return V_d + s_d * x + kappa * x * x;
    }
};

BridgeProfile make_bridge(double c, double d, double peak, double S, double r_max) {
    BridgeProfile p;
    p.c = c;
    p.d = d;
    p.peak = peak;
    p.S = S;
    // keep the outer fall monotone for every direction radius up to r_max
    p.V_d = 0.5 * (S + (c - 1.0));  // strictly between the junction value and the peak
    if (p.V_d >= S) p.V_d = 0.5 * S + 0.25 * (c - 1.0);
    p.s_d = -p.V_d / (2.0 * (r_max - d));
    check_fc(1.0, 0.0, (S - (c - 1.0)) / (peak - c), "rise");
    check_fc(0.0, p.s_d, (p.V_d - S) / (d - peak), "fall");
    return p;
}

struct ProfileGeometry {
    double c, d, r_max;
};

ProfileGeometry shell_geometry(const SpatialGrid& g, double lo, double hi) {
    if (!(lo > 1.0 && hi > lo))
        raise(ErrorCode::InvalidArgument, "weight shell must satisfy 1 < lo < hi");
    double r_max = g.extent;
    if (g.mode == GridMode::tensor) r_max = g.extent * std::sqrt(double(g.dimension));
    if (hi >= g.extent)
        raise(ErrorCode::InvalidArgument, "weight shell must stay inside the inscribed ball");
    return {lo, hi, r_max};
}

PsiField evaluate_profile(const SpatialGrid& g,
                          const BridgeProfile& prof,
                          double crit_lo, double crit_hi) {
    PsiField out;
    out.values.resize(g.cells());
    for (Eigen::Index j = 0; j < g.cells(); ++j)
        out.values[j] = prof.eval(g.radius[j], ray_radius(g, j));
    out.sup = prof.S;

    // discrete gradient diagnostic: the critical shell must carry the only
    // small-gradient cells
    const Eigen::VectorXd g2 = gradient_squared(g, out.values);
    double gmax = 0, gmin_out = 1e300;
    for (Eigen::Index j = 0; j < g.cells(); ++j) {
        const double gn = std::sqrt(g2[j]);
        gmax = std::max(gmax, gn);
        const double r = g.radius[j];
        const bool in_crit = (r > crit_lo && r < crit_hi);
        // skip the outermost layer: the one-sided boundary stencil mixes the
        // Dirichlet ghost into the estimate
        const bool boundary = (ray_radius(g, j) - r) < 1.5 * g.h;
        if (!in_crit && !boundary) gmin_out = std::min(gmin_out, gn);
    }
    out.grad_max = gmax;
    out.grad_min_outside = gmin_out;
    if (gmin_out < 1e-3 * gmax)
        raise(ErrorCode::CriticalPointLeak,
              "discrete |grad Psi| degrades outside the designated shell");
    return out;
}

} // namespace

PsiField build_psi(const SpatialGrid& grid, const PsiSingleSpec& spec) {
    const auto geo = shell_geometry(grid, spec.omega0_lo, spec.omega0_hi);
    const double peak = 0.5 * (geo.c + geo.d);
    const double S = (geo.c - 1.0) + 0.5 * (geo.d - geo.c);
    const auto prof = make_bridge(geo.c, geo.d, peak, S, geo.r_max);
    return evaluate_profile(grid, prof, spec.omega0_lo, spec.omega0_hi);
}

std::pair<PsiField, PsiField> build_psi(const SpatialGrid& grid, const PsiPairSpec& spec) {
    const auto geo = shell_geometry(grid, spec.otilde_lo, spec.otilde_hi);
    auto inside = [&](double lo, double hi) {
        if (!(lo > geo.c && hi < geo.d && hi > lo))
            raise(ErrorCode::InvalidArgument, "critical shells must sit strictly inside Otilde");
    };
    inside(spec.w1_lo, spec.w1_hi);
    inside(spec.w2_lo, spec.w2_hi);

    const double S = (geo.c - 1.0) + 0.5 * (geo.d - geo.c);
    const double p1 = 0.5 * (spec.w1_lo + spec.w1_hi);
    const double p2 = 0.5 * (spec.w2_lo + spec.w2_hi);
    const auto prof1 = make_bridge(geo.c, geo.d, p1, S, geo.r_max);
    auto prof2 = make_bridge(geo.c, geo.d, p2, S, geo.r_max);
    // identical outside Otilde: share the junction data of profile 1
    prof2.V_d = prof1.V_d;
    prof2.s_d = prof1.s_d;
    check_fc(0.0, prof2.s_d, (prof2.V_d - S) / (geo.d - p2), "fall2");

    PsiField f1 = evaluate_profile(grid, prof1, spec.w1_lo, spec.w1_hi);
    PsiField f2 = evaluate_profile(grid, prof2, spec.w2_lo, spec.w2_hi);
    return {std::move(f1), std::move(f2)};
}

CarlemanWeightSet build_weights(const SpatialGrid& grid, const PsiField& psi1,
                                const PsiField* psi2, CaseFlag flag, double s, double lambda0,
                                const TimeGrid& time) {
    if (s <= 0 || lambda0 <= 0)
        raise(ErrorCode::InvalidArgument, "s and lambda must be positive");
    CarlemanWeightSet w;
    w.s = s;
    w.flag = flag;
    w.time = time;
    w.psi1 = psi1.values;
    w.psi2 = psi2 ? psi2->values : psi1.values;
    w.sup_psi = std::max(psi1.sup, psi2 ? psi2->sup : psi1.sup);

    // escalate lambda until e^{2 lambda sup} - |x|^2/2 - e^{lambda Psi} > 0
    // everywhere (time independent, so checked per cell only)
    double lambda = lambda0;
    bool ok = false;
    for (int esc = 0; esc <= 20; ++esc) {
        ok = true;
        const double lead = std::exp(2.0 * lambda * w.sup_psi);
        for (Eigen::Index j = 0; j < grid.cells() && ok; ++j) {
            const double quad = 0.5 * grid.radius[j] * grid.radius[j];
            if (lead - quad - std::exp(lambda * w.psi1[j]) <= 0) ok = false;
            if (lead - quad - std::exp(lambda * w.psi2[j]) <= 0) ok = false;
        }
        if (ok) {
            w.lambda = lambda;
            w.escalations = esc;
            break;
        }
        lambda *= 2.0;
    }
    if (!ok)
        raise(ErrorCode::LambdaEscalationFailure,
              "sigma positivity not reached after 20 lambda doublings");

    const int nt = time.nt;
    w.theta_mid.resize(nt);
    w.sigma1.resize(grid.cells(), nt);
    w.sigma2.resize(grid.cells(), nt);
    const double lead = std::exp(2.0 * w.lambda * w.sup_psi);
    for (int n = 0; n < nt; ++n) {
        // symmetric product form keeps theta(T-t) = theta(t) exact at
        // mirrored midpoints
        const double u = (n + 0.5) * time.dt();
        const double v = (nt - n - 0.5) * time.dt();
        const double th = std::pow(u * v, -3.0);
        w.theta_mid[n] = th;
        for (Eigen::Index j = 0; j < grid.cells(); ++j) {
            const double quad = 0.5 * grid.radius[j] * grid.radius[j];
            w.sigma1(j, n) = s * th * (lead - quad - std::exp(w.lambda * w.psi1[j]));
            w.sigma2(j, n) = s * th * (lead - quad - std::exp(w.lambda * w.psi2[j]));
        }
    }
    return w;
}

std::vector<CarlemanSample> carleman_ratio(const CarlemanWeightSet& w, const Propagator& prop,
                                           const SpatialGrid& grid, const Mask& omega0,
                                           int n_samples, Rng& rng) {
    const double mu = prop.op().mu;
    const double mu_star = hardy_constant(grid.dimension);
    const double s = w.s, lam = w.lambda;
    const int nt = w.time.nt;
    const double dt = w.time.dt();

    std::vector<CarlemanSample> out;
    out.reserve(n_samples);
    for (int k = 0; k < n_samples; ++k) {
        Rng sk = rng.fork(k);
        const Eigen::VectorXd u0 = sk.normal_vector(grid.cells());
        Field g(grid.cells(), w.time);
        for (int n = 0; n <= nt; ++n) g.v.col(n) = sk.normal_vector(grid.cells());
        const Field u = prop.backward(u0, &g);

        CarlemanSample smp;
        for (int n = 0; n < nt; ++n) {
            const double lth = w.log_theta(n);
            const Eigen::VectorXd umid = 0.5 * (u.v.col(n) + u.v.col(n + 1));
            const Eigen::VectorXd gmid = 0.5 * (g.v.col(n) + g.v.col(n + 1));
            const Eigen::VectorXd grad2 = gradient_squared(grid, umid);
            for (Eigen::Index j = 0; j < grid.cells(); ++j) {
                const double sig = w.sigma1(j, n);
                const double vol = grid.volume[j] * dt;
                const double u2 = umid[j] * umid[j];
                const double r = grid.radius[j];
                const double e3 = std::exp(std::max(3.0 * lth - 2.0 * sig, -690.0));
                const double e1 = std::exp(std::max(lth - 2.0 * sig, -690.0));
                const double e0 = std::exp(std::max(-2.0 * sig, -690.0));
                const double phi = std::exp(lam * w.psi1[j]);
                const double phi3 = phi * phi * phi;

                smp.lhs += s * s * s * e3 * r * r * u2 * vol;        // s^3 theta^3 |x|^2 u^2
                smp.lhs += s * e1 * u2 / r * vol;                     // s theta u^2 / |x|
                smp.lhs_mu_term += s * (mu_star - mu) * e1 * u2 / (r * r) * vol;
                if (r > 1.0) {
                    smp.lhs += s * s * s * lam * lam * lam * lam * e3 * phi3 * u2 * vol;
                    smp.lhs += s * lam * lam * e1 * phi * grad2[j] * vol;
                }
                smp.rhs += e0 * gmid[j] * gmid[j] * vol;
                if (omega0.w[j] > 0.5)
                    smp.rhs += s * s * s * lam * lam * lam * lam * e3 * phi3 * u2 * vol;
            }
        }
        smp.lhs += smp.lhs_mu_term;
        if (smp.rhs < 1e-30)
            raise(ErrorCode::DegenerateRHS, "carleman sample has vanishing right-hand side");
        smp.ratio = smp.lhs / smp.rhs;
        out.push_back(smp);
    }
    return out;
}

AdmissibilityReport target_admissibility(const Field& ybar, const Field& y_d,
                                         const CarlemanWeightSet& w, const Mask& region,
                                         const Eigen::VectorXd& volume) {
    check_same_shape(ybar, y_d);
    const int nt = w.time.nt;
    const double dt = w.time.dt();

    // accumulate in log space: terms can reach exp(1e5) near t = T
    double max_log = -1e308;
    std::vector<double> logs;
    logs.reserve(region.cells.size() * nt);
    double mid_max_log = -1e308, last_max_log = -1e308;
    for (int n = 0; n < nt; ++n) {
        for (Eigen::Index j : region.cells) {
            const double diff = 0.5 * (ybar.v(j, n) + ybar.v(j, n + 1)) -
                                0.5 * (y_d.v(j, n) + y_d.v(j, n + 1));
            if (diff == 0.0) continue;
            const double lg = w.log_rho2(j, n) + 2.0 * std::log(std::abs(diff)) +
                              std::log(volume[j] * dt);
            logs.push_back(lg);
            max_log = std::max(max_log, lg);
            if (n == nt / 2) mid_max_log = std::max(mid_max_log, lg);
            if (n == nt - 1) last_max_log = std::max(last_max_log, lg);
        }
    }

    AdmissibilityReport rep;
    if (logs.empty()) {
        rep.value = 0.0;
        rep.log_value = -1e308;
        return rep;
    }
    double acc = 0;
    for (double lg : logs) acc += std::exp(lg - max_log);
    rep.log_value = max_log + std::log(acc);
    rep.value = (rep.log_value < 700.0) ? std::exp(rep.log_value)
                                        : std::numeric_limits<double>::infinity();
    rep.terminal_to_mid_log = last_max_log - mid_max_log;
    rep.warn = rep.terminal_to_mid_log > std::log(1e6);
    return rep;
}

} // namespace hh
