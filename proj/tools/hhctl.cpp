// hhctl: command-line surface of the hierarchical-control laboratory.
// Subcommands run one experiment each against a scenario file, write CSV and
// field artifacts plus a manifest.json, and exit nonzero when any declared
// invariant fails.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "hh/io.hpp"
#include "hh/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hh;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Run {
    fs::path out;
    json manifest;
    std::vector<json> invariants;
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    std::chrono::steady_clock::time_point t_last = t0;

    explicit Run(const fs::path& outdir, const Scenario& s, const std::string& command) {
        out = outdir;
        fs::create_directories(out);
        manifest["tool"] = std::string("hhctl ") + kVersion;
        manifest["command"] = command;
        manifest["scenario"] = s.source_path;
        manifest["scenario_hash"] = hex64(s.hash);
        manifest["seed"] = s.seed;
    }

    void timing(const std::string& op) {
        const auto now = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(now - t_last).count();
        manifest["timings_ms"][op] = ms;
        t_last = now;
    }

    bool check(const std::string& name, bool pass, double value) {
        invariants.push_back({{"name", name}, {"pass", pass}, {"value", value}});
        log_line(pass ? LogLevel::info : LogLevel::error,
                 std::string(pass ? "PASS " : "FAIL ") + name + " = " + std::to_string(value));
        return pass;
    }

    void artifact(const fs::path& name) { outputs.push_back(name.filename().string()); }

    int finish() {
        bool all = true;
        for (const auto& inv : invariants) all = all && inv["pass"].get<bool>();
        manifest["invariants"] = invariants;
        manifest["outputs"] = outputs;
        manifest["total_ms"] =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        manifest["pass"] = all;
        write_text_atomic(out / "manifest.json", manifest.dump(2) + "\n");
        return all ? 0 : 1;
    }
};

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::string acc;
    for (char c : text + ",") {
        if (c == ',') {
            if (!acc.empty()) out.push_back(std::stod(acc));
            acc.clear();
        } else {
            acc += c;
        }
    }
    return out;
}

Field zero_field(const Workspace& ws) { return Field(ws.grid.cells(), ws.scenario.time); }

// ---------------------------------------------------------------------------

int run_nash(const Scenario& sc, const fs::path& outdir) {
    Run run(outdir, sc, "nash");
    auto ws = build_workspace(sc);
    run.timing("workspace");
    const auto cs = ws->coupled();
    const Field f = zero_field(*ws);

    const auto cg = solve_nash_cg(f, cs, sc.tol.nash, 1000);
    run.timing("solve_nash_cg");
    const auto fp = solve_nash_contraction(f, cs, sc.tol.nash, 1000);
    run.timing("solve_nash_contraction");

    const double znorm = norm_q(cg.z, ws->op.mass, nullptr);
    const double agreement =
        znorm > 0 ? norm_q(cg.z - fp.z, ws->op.mass, nullptr) / znorm : 0.0;
    const auto costs = evaluate_costs(cs, f, cg.controls);

    CsvWriter summary({"j1", "j2", "j_leader", "agreement", "cg_r1", "cg_r2", "fp_r1", "fp_r2",
                       "cg_iterations", "fp_iterations"});
    summary.row({costs.j1, costs.j2, costs.j_leader, agreement, cg.r1, cg.r2, fp.r1, fp.r2,
                 double(cg.iterations), double(fp.iterations)});
    summary.save(outdir / "nash_summary.csv");
    run.artifact("nash_summary.csv");

    for (auto [name, trace] : {std::pair<const char*, const NashSolution*>{"cg", &cg},
                               {"contraction", &fp}}) {
        CsvWriter t({"iteration", "residual"});
        for (const auto& [it, res] : trace->trace) t.row({double(it), res});
        t.save(outdir / (std::string("nash_trace_") + name + ".csv"));
        run.artifact(std::string("nash_trace_") + name + ".csv");
    }
    save_field(outdir / "v1.hhf", cg.controls.v1, ws->grid);
    save_field(outdir / "v2.hhf", cg.controls.v2, ws->grid);
    save_field(outdir / "state_z.hhf", cg.z, ws->grid);
    save_masks_csv(outdir / "masks.csv", ws->grid, ws->regions);
    for (const char* a : {"v1.hhf", "v2.hhf", "state_z.hhf", "masks.csv"}) run.artifact(a);
    run.timing("artifacts");

    run.check("stationarity_cg_1", cg.r1 <= 10 * sc.tol.nash, cg.r1);
    run.check("stationarity_cg_2", cg.r2 <= 10 * sc.tol.nash, cg.r2);
    run.check("stationarity_fp_1", fp.r1 <= 10 * sc.tol.nash, fp.r1);
    run.check("stationarity_fp_2", fp.r2 <= 10 * sc.tol.nash, fp.r2);
    run.check("cross_validation", agreement <= 1e-6, agreement);
    return run.finish();
}

int run_leader(const Scenario& sc, const fs::path& outdir, const std::string& eps_arg) {
    Run run(outdir, sc, "leader");
    auto ws = build_workspace(sc);
    run.timing("workspace");
    const auto cs = ws->coupled();

    std::vector<double> eps_list =
        eps_arg.empty() ? std::vector<double>{1e-1, 1e-2, 1e-3, 1e-4} : parse_list(eps_arg);

    CsvWriter sweep({"eps", "terminal_norm", "cost", "gramian_applies"});
    Eigen::VectorXd warm;
    double prev_norm = 1e300, prev_cost = -1;
    bool monotone = true, reached = true;
    LeaderResult last;
    for (double eps : eps_list) {
        last = minimize_leader(cs, eps, sc.tol.leader, 4000, sc.penalty,
                               warm.size() ? &warm : nullptr);
        warm = last.psiT_min;
        sweep.row({eps, last.terminal_norm, last.cost, double(last.iterations)});
        monotone = monotone && last.terminal_norm <= prev_norm * (1 + 1e-9) &&
                   last.cost >= prev_cost - 1e-12;
        if (sc.penalty == PenaltyKind::exact_norm)
            reached = reached && last.terminal_norm <= eps * (1 + 1e-6);
        prev_norm = last.terminal_norm;
        prev_cost = last.cost;
        run.timing("minimize_leader_eps_" + std::to_string(eps));
    }
    sweep.save(outdir / "leader_sweep.csv");
    run.artifact("leader_sweep.csv");
    save_field(outdir / "fhat.hhf", last.fhat, ws->grid);
    save_field(outdir / "state_z.hhf", last.z, ws->grid);
    save_field_csv(outdir / "fhat.csv", last.fhat);
    for (const char* a : {"fhat.hhf", "state_z.hhf", "fhat.csv"}) run.artifact(a);

    // target admissibility diagnostic (or an explicit waiver when the weight
    // shells cannot be built for this scenario)
    try {
        const auto w = ws->weights();
        const auto a1 = target_admissibility(ws->ybar, ws->y1d, w, ws->regions.target1,
                                             ws->op.mass);
        const auto a2 = target_admissibility(ws->ybar, ws->y2d, w, ws->regions.target2,
                                             ws->op.mass);
        run.manifest["admissibility_log_1"] = a1.log_value;
        run.manifest["admissibility_log_2"] = a2.log_value;
        if (a1.warn || a2.warn)
            log_line(LogLevel::warn,
                     "target admissibility: integrand blows up toward t = T "
                     "(targets should approach the trajectory)");
    } catch (const Error& e) {
        run.manifest["admissibility"] = std::string("waived: ") + e.what();
        log_line(LogLevel::warn, std::string("admissibility check waived: ") + e.what());
    }

    run.check("terminal_norm_reached", reached, last.terminal_norm);
    run.check("sweep_monotone", monotone, 1.0);
    return run.finish();
}

int run_observability(const Scenario& sc, const fs::path& outdir, int samples) {
    Run run(outdir, sc, "observability");
    auto ws = build_workspace(sc);
    const auto cs = ws->coupled();
    const auto w = ws->weights();
    run.timing("weights");

    Rng rng(sc.seed);
    Rng rng2(sc.seed);
    const auto base = observability_ratio(cs, w, samples, rng, sc.tol.coupling);
    run.timing("samples_base");
    const auto doubled = observability_ratio(cs, w, 2 * samples, rng2, sc.tol.coupling);
    run.timing("samples_doubled");

    CsvWriter csv({"sample", "ratio"});
    for (size_t k = 0; k < base.samples.size(); ++k) csv.row({double(k), base.samples[k]});
    csv.save(outdir / "observability.csv");
    run.artifact("observability.csv");

    const double drift = std::abs(doubled.max_ratio - base.max_ratio) /
                         std::max(base.max_ratio, 1e-300);
    run.check("all_ratios_finite", base.infinite == 0 && doubled.infinite == 0,
              double(base.infinite + doubled.infinite));
    run.check("max_ratio_stable_under_doubling", drift < 0.5, drift);
    run.manifest["max_ratio"] = base.max_ratio;
    run.manifest["mean_ratio"] = base.mean_ratio;
    return run.finish();
}

int run_carleman(const Scenario& sc, const fs::path& outdir, int samples) {
    Run run(outdir, sc, "carleman");
    auto ws = build_workspace(sc);
    // the inequality diagnostic always uses the single-weight family
    double lo = sc.omega0_lo, hi = sc.omega0_hi;
    PsiSingleSpec ps;
    ps.omega0_lo = lo;
    ps.omega0_hi = hi;
    const auto psi = build_psi(ws->grid, ps);
    const auto w = build_weights(ws->grid, psi, nullptr, CaseFlag::shared, sc.carleman_s,
                                 sc.carleman_lambda0, sc.time);
    const Mask omega0 = ws->omega0_mask();
    run.timing("weights");

    Rng rng(sc.seed);
    const auto base = carleman_ratio(w, *ws->prop, ws->grid, omega0, samples, rng);
    Rng rng2(sc.seed);
    const auto doubled = carleman_ratio(w, *ws->prop, ws->grid, omega0, 2 * samples, rng2);
    run.timing("samples");

    CsvWriter csv({"sample", "lhs", "rhs", "ratio", "mu_term"});
    double max_base = 0, max_doubled = 0, max_mu_term = 0;
    for (size_t k = 0; k < base.size(); ++k) {
        csv.row({double(k), base[k].lhs, base[k].rhs, base[k].ratio, base[k].lhs_mu_term});
        max_base = std::max(max_base, base[k].ratio);
        max_mu_term = std::max(max_mu_term, base[k].lhs_mu_term);
    }
    for (const auto& s : doubled) max_doubled = std::max(max_doubled, s.ratio);
    csv.save(outdir / "carleman.csv");
    run.artifact("carleman.csv");

    // weight fields for plotting: per cell Psi and Phi, per midpoint theta
    CsvWriter wcsv({"cell", "r", "psi", "phi", "sigma_mid"});
    for (Eigen::Index j = 0; j < ws->grid.cells(); ++j)
        wcsv.row({double(j), ws->grid.radius[j], w.psi1[j],
                  std::exp(w.lambda * w.psi1[j]), w.sigma1(j, sc.time.nt / 2)});
    wcsv.save(outdir / "weights.csv");
    CsvWriter tcsv({"midpoint", "t", "theta"});
    for (int n = 0; n < sc.time.nt; ++n)
        tcsv.row({double(n), sc.time.midpoint(n), w.theta_mid[n]});
    tcsv.save(outdir / "theta.csv");
    run.artifact("weights.csv");
    run.artifact("theta.csv");

    const double drift = std::abs(max_doubled - max_base) / std::max(max_base, 1e-300);
    run.check("ratios_finite", std::isfinite(max_base) && max_base > 0, max_base);
    run.check("max_ratio_stable_under_doubling", drift < 0.5, drift);
    const double mu_star = hardy_constant(ws->grid.dimension);
    if (sc.mu == mu_star)
        run.check("critical_mu_term_vanishes", max_mu_term == 0.0, max_mu_term);
    run.manifest["lambda"] = w.lambda;
    run.manifest["escalations"] = w.escalations;
    return run.finish();
}

int run_semilinear(const Scenario& sc, const fs::path& outdir) {
    Run run(outdir, sc, "semilinear");
    auto ws = build_workspace(sc);
    const auto ss = ws->semilinear();
    run.timing("workspace");

    const auto sl = semilinear_leader(ss, sc.epsilon, sc.tol.outer, 60, sc.tol.leader,
                                      sc.penalty);
    run.timing("semilinear_leader");

    const auto qn = solve_quasi_nash(sl.leader.fhat, ss, sc.tol.nash, 300, sc.tol.coupling);
    run.timing("solve_quasi_nash");

    Rng rng(sc.seed);
    const auto probes = equilibrium_probe(qn, sl.leader.fhat, ss, 5, {1e-2, 1e-3}, rng);
    run.timing("equilibrium_probe");

    CsvWriter outer({"iteration", "increment", "f_norm"});
    for (size_t k = 0; k < sl.increments.size(); ++k)
        outer.row({double(k), sl.increments[k], sl.f_norms[k]});
    outer.save(outdir / "semilinear_outer.csv");
    CsvWriter probe({"follower", "eps", "min_diff", "mean_diff"});
    for (const auto& row : probes.rows)
        probe.row({double(row.follower), row.eps, row.min_diff, row.mean_diff});
    probe.save(outdir / "probes.csv");
    save_field(outdir / "fhat.hhf", sl.leader.fhat, ws->grid);
    save_field(outdir / "state_z.hhf", sl.z, ws->grid);
    save_field(outdir / "ybar.hhf", sl.ybar, ws->grid);
    for (const char* a :
         {"semilinear_outer.csv", "probes.csv", "fhat.hhf", "state_z.hhf", "ybar.hhf"})
        run.artifact(a);
    run.timing("artifacts");

    bool monotone = true;
    for (size_t k = 3; k < sl.increments.size(); ++k)
        monotone = monotone && sl.increments[k] < sl.increments[k - 1];
    const double j1 = follower_cost(ss, sl.leader.fhat, qn.controls, 1);
    run.check("terminal_norm_within_2eps", sl.terminal_norm <= 2 * sc.epsilon,
              sl.terminal_norm);
    run.check("outer_increments_monotone", monotone, double(sl.outer_iterations));
    run.check("probes_nonnegative", probes.min_diff >= -1e-8 * std::max(1.0, j1),
              probes.min_diff);
    run.manifest["probe_slope_1"] = probes.slope1;
    run.manifest["probe_slope_2"] = probes.slope2;
    return run.finish();
}

int run_verify(const Scenario& sc, const fs::path& outdir) {
    Run run(outdir, sc, "verify");
    auto ws = build_workspace(sc);
    const auto cs = ws->coupled();
    Rng rng(sc.seed);
    run.timing("workspace");

    // discrete adjoint pairing of the mirrored pair
    double worst_pair = 0;
    for (int rep = 0; rep < 3; ++rep) {
        Field f(ws->grid.cells(), sc.time), g(ws->grid.cells(), sc.time);
        for (int k = 0; k <= sc.time.nt; ++k) {
            f.v.col(k) = rng.normal_vector(ws->grid.cells());
            g.v.col(k) = rng.normal_vector(ws->grid.cells());
        }
        const Field y = ws->prop->forward(Eigen::VectorXd::Zero(ws->grid.cells()), &f);
        const Field u = ws->prop->backward(Eigen::VectorXd::Zero(ws->grid.cells()), &g);
        const double lhs = dual_pair_backward_source(y, g, ws->op.mass, nullptr, sc.theta);
        const double rhs = dual_pair_forward_source(f, u, ws->op.mass, nullptr, sc.theta);
        worst_pair = std::max(worst_pair, std::abs(lhs - rhs) / (1 + std::abs(lhs)));
    }
    run.check("adjoint_pairing", worst_pair <= 1e-12, worst_pair);
    run.timing("adjoint_pairing");

    // duality identity through the coupled systems
    double worst_dual = 0;
    if (sc.theta == 1.0) {
        for (int rep = 0; rep < 5; ++rep) {
            Field f(ws->grid.cells(), sc.time);
            for (int k = 0; k <= sc.time.nt; ++k)
                f.v.col(k) = rng.normal_vector(ws->grid.cells());
            const Eigen::VectorXd psiT = rng.normal_vector(ws->grid.cells());
            worst_dual = std::max(worst_dual, duality_residual(cs, f, psiT));
        }
        run.check("duality_residual", worst_dual <= 1e-10, worst_dual);
    }
    run.timing("duality");

    // coercivity and cross-validation
    const double l1 = operator_norm_L(cs, 1, 40, rng).value;
    const double l2 = operator_norm_L(cs, 2, 40, rng).value;
    const double delta = check_coercivity(sc.alpha1, sc.alpha2, l1, l2);
    run.check("coercivity_margin", delta > 0, delta);
    double min_quot = 1e300;
    for (int rep = 0; rep < 20; ++rep) {
        Field a(ws->grid.cells(), sc.time), b(ws->grid.cells(), sc.time);
        for (int k = 0; k <= sc.time.nt; ++k) {
            a.v.col(k) = rng.normal_vector(ws->grid.cells());
            b.v.col(k) = rng.normal_vector(ws->grid.cells());
        }
        ControlPair v{masked(a, ws->regions.follower1), masked(b, ws->regions.follower2)};
        const auto av = apply_nash_operator(cs, v);
        min_quot = std::min(min_quot, inner_h(av, v, cs) / inner_h(v, v, cs));
    }
    run.check("rayleigh_vs_delta", min_quot >= 0.99 * delta, min_quot / delta);
    run.timing("coercivity");

    {
        Field f(ws->grid.cells(), sc.time);
        for (int k = 0; k <= sc.time.nt; ++k) f.v.col(k) = rng.normal_vector(ws->grid.cells());
        const auto cg = solve_nash_cg(f, cs, 1e-10, 1000);
        const auto fp = solve_nash_contraction(f, cs, 1e-12, 1000);
        const double agree = norm_q(cg.z - fp.z, ws->op.mass, nullptr) /
                             norm_q(cg.z, ws->op.mass, nullptr);
        run.check("nash_cross_validation", agree <= 1e-6, agree);
        run.check("nash_stationarity", std::max({cg.r1, cg.r2, fp.r1, fp.r2}) <= 1e-7,
                  std::max({cg.r1, cg.r2, fp.r1, fp.r2}));
    }
    run.timing("nash");

    // weight family invariants
    {
        const auto w = ws->weights();
        bool theta_sym = true;
        for (int n = 0; n < sc.time.nt; ++n)
            theta_sym = theta_sym && w.theta_mid[n] == w.theta_mid[sc.time.nt - 1 - n];
        run.check("theta_symmetry", theta_sym, 1.0);
        run.check("sigma_positive", w.sigma1.minCoeff() > 0 && w.sigma2.minCoeff() > 0,
                  std::min(w.sigma1.minCoeff(), w.sigma2.minCoeff()));
        const auto w2 = ws->weights();
        run.check("weights_deterministic",
                  (w2.sigma1 - w.sigma1).norm() == 0 && w2.lambda == w.lambda, w.lambda);
    }
    run.timing("weights");

    // operator spectrum sanity
    const auto lam_min = smallest_eigenvalue(ws->op);
    const double mu_star = hardy_constant(ws->grid.dimension);
    if (sc.mu <= 0.96 * mu_star || sc.mu == 0.0)
        run.check("lambda_min_nonnegative", lam_min.value >= -1e-8, lam_min.value);
    else {
        const auto lam_max = largest_eigenvalue(ws->op);
        run.check("lambda_min_above_warning_level",
                  lam_min.value >= -1e-6 * std::abs(lam_max.value), lam_min.value);
    }
    run.timing("spectrum");

    // energy decay on random data
    {
        const Field y = ws->prop->forward(rng.normal_vector(ws->grid.cells()), nullptr);
        bool decay = true;
        for (int n = 0; n < sc.time.nt; ++n)
            decay = decay && norm_x(y.v.col(n + 1), ws->op.mass) <=
                                 norm_x(y.v.col(n), ws->op.mass) * (1 + 1e-8);
        run.check("energy_decay", decay, 1.0);
    }

    // determinism: identical seeds give bit-identical sampled results
    if (sc.theta == 1.0) {
        Rng ra(sc.seed + 7), rb(sc.seed + 7);
        Field fa(ws->grid.cells(), sc.time), fb(ws->grid.cells(), sc.time);
        for (int k = 0; k <= sc.time.nt; ++k) {
            fa.v.col(k) = ra.normal_vector(ws->grid.cells());
            fb.v.col(k) = rb.normal_vector(ws->grid.cells());
        }
        const double d1 = duality_residual(cs, fa, fa.v.col(0));
        const double d2 = duality_residual(cs, fb, fb.v.col(0));
        run.check("determinism", d1 == d2, std::abs(d1 - d2));
    }
    run.timing("determinism");
    return run.finish();
}

int run_sweep(const Scenario& sc, const fs::path& outdir, const std::string& mu_list,
              const std::string& alpha_list, const std::string& eps_list,
              const std::string& cells_list, int workers) {
    Run run(outdir, sc, "sweep");
    const std::vector<double> mus = mu_list.empty() ? std::vector<double>{sc.mu}
                                                    : parse_list(mu_list);
    const std::vector<double> alphas =
        alpha_list.empty() ? std::vector<double>{sc.alpha1} : parse_list(alpha_list);
    const std::vector<double> epss =
        eps_list.empty() ? std::vector<double>{sc.epsilon} : parse_list(eps_list);
    const std::vector<double> cells =
        cells_list.empty() ? std::vector<double>{double(sc.grid.cells_per_axis)}
                           : parse_list(cells_list);

    struct Point {
        double mu, alpha, eps;
        int cells;
        double duality = 0, agreement = 0, contraction = 0, terminal = 0, cost = 0;
        bool ok = false;
        std::string error;
    };
    std::vector<Point> points;
    for (double m : mus)
        for (double a : alphas)
            for (double e : epss)
                for (double c : cells) points.push_back(Point{m, a, e, int(c), 0, 0, 0, 0, 0, false, ""});

    std::atomic<size_t> next{0};
    auto work = [&]() {
        for (;;) {
            const size_t k = next.fetch_add(1);
            if (k >= points.size()) return;
            Point& p = points[k];
            try {
                Scenario s = sc;
                s.mu = p.mu;
                s.alpha1 = s.alpha2 = p.alpha;
                s.epsilon = p.eps;
                s.grid.cells_per_axis = p.cells;
                auto ws = build_workspace(s);
                const auto cs = ws->coupled();
                Rng rng(s.seed + k);
                Field f(ws->grid.cells(), s.time);
                for (int n = 0; n <= s.time.nt; ++n)
                    f.v.col(n) = rng.normal_vector(ws->grid.cells());
                p.duality = duality_residual(cs, f, rng.normal_vector(ws->grid.cells()));
                const auto cg = solve_nash_cg(f, cs, 1e-9, 1000);
                const auto fp = solve_nash_contraction(f, cs, 1e-11, 1000);
                p.agreement = norm_q(cg.z - fp.z, ws->op.mass, nullptr) /
                              norm_q(cg.z, ws->op.mass, nullptr);
                Rng crng(s.seed);  // same pair across points: factors comparable
                p.contraction = contraction_ratio_sample(cs, crng);
                const auto lr = minimize_leader(cs, s.epsilon, s.tol.leader, 4000, s.penalty);
                p.terminal = lr.terminal_norm;
                p.cost = lr.cost;
                p.ok = true;
            } catch (const std::exception& e) {
                p.error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < std::max(1, workers); ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    run.timing("points");

    CsvWriter csv({"mu", "alpha", "eps", "cells", "duality_residual", "nash_agreement",
                   "contraction_factor", "terminal_norm", "leader_cost", "ok"});
    bool all_ok = true, contraction_monotone = true;
    for (const auto& p : points) {
        csv.row({p.mu, p.alpha, p.eps, double(p.cells), p.duality, p.agreement, p.contraction,
                 p.terminal, p.cost, p.ok ? 1.0 : 0.0});
        all_ok = all_ok && p.ok;
        if (!p.error.empty()) log_line(LogLevel::error, "sweep point failed: " + p.error);
    }
    // contraction factors must fall as alpha rises (same mu/eps/cells)
    for (const auto& a : points)
        for (const auto& b : points)
            if (a.ok && b.ok && a.mu == b.mu && a.eps == b.eps && a.cells == b.cells &&
                a.alpha < b.alpha)
                contraction_monotone = contraction_monotone && b.contraction <= a.contraction * (1 + 1e-9);
    csv.save(outdir / "sweep.csv");
    run.artifact("sweep.csv");
    run.check("all_points_completed", all_ok, double(points.size()));
    run.check("contraction_decreases_in_alpha", contraction_monotone, 1.0);
    return run.finish();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stackelberg-Nash control laboratory for the Hardy heat equation"};
    app.require_subcommand(1);
    app.fallthrough();  // allow `hhctl <subcommand> --scenario ...`

    std::string scenario_path, out = "out", eps_arg;
    std::string sweep_mu, sweep_alpha, sweep_eps, sweep_cells;
    int samples = 100, workers = 1;
    std::uint64_t seed_override = 0;
    bool has_seed = false;

    app.add_option("--scenario", scenario_path, "scenario file")->required();
    app.add_option("--out", out, "output directory");
    auto* seed_opt = app.add_option("--seed", seed_override, "override the scenario seed");
    app.add_option("--workers", workers, "parallel workers (sweep)");
    app.add_option("--eps", eps_arg, "comma list of epsilons (leader)");
    app.add_option("--samples", samples, "Monte Carlo samples");
    app.add_option("--sweep-mu", sweep_mu, "comma list of mu values");
    app.add_option("--sweep-alpha", sweep_alpha, "comma list of alpha values");
    app.add_option("--sweep-eps", sweep_eps, "comma list of eps values");
    app.add_option("--sweep-cells", sweep_cells, "comma list of cell counts");

    for (const char* name : {"nash", "leader", "observability", "carleman", "semilinear",
                             "verify", "sweep"})
        app.add_subcommand(name);

    CLI11_PARSE(app, argc, argv);
    has_seed = seed_opt->count() > 0;

    try {
        Scenario sc = load_scenario(scenario_path);
        if (has_seed) sc.seed = seed_override;
        const std::string cmd = app.get_subcommands().front()->get_name();
        const fs::path outdir = fs::path(out) / cmd;
        if (cmd == "nash") return run_nash(sc, outdir);
        if (cmd == "leader") return run_leader(sc, outdir, eps_arg);
        if (cmd == "observability") return run_observability(sc, outdir, samples);
        if (cmd == "carleman") return run_carleman(sc, outdir, samples);
        if (cmd == "semilinear") return run_semilinear(sc, outdir);
        if (cmd == "verify") return run_verify(sc, outdir);
        if (cmd == "sweep")
            return run_sweep(sc, outdir, sweep_mu, sweep_alpha, sweep_eps, sweep_cells, workers);
    } catch (const Error& e) {
        log_line(LogLevel::error, e.what());
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        log_line(LogLevel::error, e.what());
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    }
    return 2;
}
