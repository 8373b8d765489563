#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "hh/leader.hpp"

using namespace hh;
using hh::testing::radial_problem;
using hh::testing::random_field;

TEST_CASE("adjoint coupling: zero data, linearity, alpha->infinity limit") {
    auto p = radial_problem();
    Rng rng(21);

    const auto z = solve_adjoint_coupled(Eigen::VectorXd::Zero(p->grid.cells()), p->setup);
    CHECK(z.psi.v.norm() == 0.0);
    CHECK(z.gamma1.v.norm() == 0.0);

    const Eigen::VectorXd a = rng.normal_vector(p->grid.cells());
    const Eigen::VectorXd b = rng.normal_vector(p->grid.cells());
    const auto ta = solve_adjoint_coupled(a, p->setup, 1e-13, 500);
    const auto tb = solve_adjoint_coupled(b, p->setup, 1e-13, 500);
    const auto tab = solve_adjoint_coupled(0.6 * a - 2.0 * b, p->setup, 1e-13, 500);
    const double lin_err =
        (tab.psi.v - (0.6 * ta.psi.v - 2.0 * tb.psi.v)).norm() / tab.psi.v.norm();
    CHECK(lin_err <= 1e-10);

    // data conditions are exact
    CHECK((ta.psi.v.col(p->time.nt) - a).norm() == 0.0);
    CHECK(ta.gamma1.v.col(0).norm() == 0.0);
    CHECK(ta.gamma2.v.col(0).norm() == 0.0);

    // alpha -> infinity: gamma vanishes, psi matches the uncoupled backward solve
    auto pinf = radial_problem(32, 24, 0.2, 1e8);
    const auto tinf = solve_adjoint_coupled(a, pinf->setup, 1e-13, 500);
    const Field plain = pinf->prop->backward(a, nullptr);
    const double rel = (tinf.psi.v - plain.v).norm() / plain.v.norm();
    CHECK(rel <= 1e-6);
    CHECK(norm_q(tinf.gamma1, pinf->op.mass, nullptr) <= 1e-6);
}

TEST_CASE("duality identity holds to 1e-10 for random data") {
    Rng rng(22);
    SUBCASE("radial, shared case") {
        auto p = radial_problem(32, 24, 0.2, 1e3);
        for (int rep = 0; rep < 5; ++rep) {
            const Field f = random_field(rng, p->grid.cells(), p->time);
            const Eigen::VectorXd psiT = rng.normal_vector(p->grid.cells());
            CHECK(duality_residual(p->setup, f, psiT) <= 1e-10);
        }
    }
    SUBCASE("radial, distinct case") {
        auto p = radial_problem(32, 24, 0.2, 1e3, CaseFlag::distinct);
        for (int rep = 0; rep < 3; ++rep) {
            const Field f = random_field(rng, p->grid.cells(), p->time);
            const Eigen::VectorXd psiT = rng.normal_vector(p->grid.cells());
            CHECK(duality_residual(p->setup, f, psiT) <= 1e-10);
        }
    }
    SUBCASE("zero everything is exactly consistent") {
        auto p = radial_problem();
        p->setup.z0.setZero();
        p->setup.zd1.v.setZero();
        p->setup.zd2.v.setZero();
        const Field f(p->grid.cells(), p->time);
        CHECK(duality_residual(p->setup, f, Eigen::VectorXd::Zero(p->grid.cells())) == 0.0);
    }
    SUBCASE("reduced identity with zero data: iint_O f psi = (z(T), psiT)") {
        auto p = radial_problem(32, 24);
        p->setup.z0.setZero();
        p->setup.zd1.v.setZero();
        p->setup.zd2.v.setZero();
        for (int rep = 0; rep < 3; ++rep) {
            const Field f = random_field(rng, p->grid.cells(), p->time);
            const Eigen::VectorXd psiT = rng.normal_vector(p->grid.cells());
            CHECK(duality_residual(p->setup, f, psiT) <= 1e-10);
        }
    }
}

TEST_CASE("F_eps: values and penalty bookkeeping") {
    auto p = radial_problem(24, 16);
    Rng rng(23);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(p->grid.cells());
    CHECK(eval_F_eps(zero, 1e-2, p->setup, PenaltyKind::exact_norm) == 0.0);
    CHECK(eval_F_eps(zero, 1e-2, p->setup, PenaltyKind::quadratic) == 0.0);

    const Eigen::VectorXd psiT = rng.normal_vector(p->grid.cells());
    const double eps = 3e-2;
    const double fq = eval_F_eps(psiT, eps, p->setup, PenaltyKind::quadratic);
    const double fe = eval_F_eps(psiT, eps, p->setup, PenaltyKind::exact_norm);
    const double nrm = norm_x(psiT, p->op.mass);
    CHECK(fq - fe == doctest::Approx(eps * (0.5 * nrm * nrm - nrm)).epsilon(1e-10));

    // zero data: F_eps = quadratic part + eps P >= 0
    auto pz = radial_problem(24, 16);
    pz->setup.z0.setZero();
    pz->setup.zd1.v.setZero();
    pz->setup.zd2.v.setZero();
    CHECK(eval_F_eps(psiT, eps, pz->setup, PenaltyKind::exact_norm) >= 0.0);
}

TEST_CASE("F_eps convexity along random segments") {
    auto p = radial_problem(24, 16);
    Rng rng(24);
    const double eps = 1e-2;
    for (int rep = 0; rep < 3; ++rep) {
        const Eigen::VectorXd a = rng.normal_vector(p->grid.cells());
        const Eigen::VectorXd b = rng.normal_vector(p->grid.cells());
        const double fa = eval_F_eps(a, eps, p->setup, PenaltyKind::exact_norm);
        const double fb = eval_F_eps(b, eps, p->setup, PenaltyKind::exact_norm);
        for (double lam : {0.25, 0.5, 0.75}) {
            const Eigen::VectorXd c = lam * a + (1 - lam) * b;
            const double fc = eval_F_eps(c, eps, p->setup, PenaltyKind::exact_norm);
            CHECK(fc <= lam * fa + (1 - lam) * fb + 1e-10 * (1 + std::abs(fc)));
        }
    }
}

TEST_CASE("grad_F_eps: finite differences and duality consistency") {
    auto p = radial_problem(24, 16);
    Rng rng(25);
    const double eps = 1e-2;
    const Eigen::VectorXd psiT = rng.normal_vector(p->grid.cells());

    for (PenaltyKind pk : {PenaltyKind::quadratic, PenaltyKind::exact_norm}) {
        const Eigen::VectorXd g = grad_F_eps(psiT, eps, p->setup, pk);
        for (int rep = 0; rep < 10; ++rep) {
            Eigen::VectorXd d = rng.normal_vector(p->grid.cells());
            d /= norm_x(d, p->op.mass);
            const double analytic = inner_x(g, d, p->op.mass);
            const double h = 1e-5;
            const double fp = eval_F_eps(psiT + h * d, eps, p->setup, pk);
            const double fm = eval_F_eps(psiT - h * d, eps, p->setup, pk);
            const double fd = (fp - fm) / (2 * h);
            CHECK(std::abs(fd - analytic) <= 1e-5 * (1.0 + std::abs(analytic)));
        }
    }

    // quadratic penalty at psiT = 0 with zero data: gradient vanishes
    auto pz = radial_problem(24, 16);
    pz->setup.z0.setZero();
    pz->setup.zd1.v.setZero();
    pz->setup.zd2.v.setZero();
    const Eigen::VectorXd g0 = grad_F_eps(Eigen::VectorXd::Zero(pz->grid.cells()), eps,
                                          pz->setup, PenaltyKind::quadratic);
    CHECK(g0.norm() == 0.0);
    CHECK_THROWS_AS(grad_F_eps(Eigen::VectorXd::Zero(pz->grid.cells()), eps, pz->setup,
                               PenaltyKind::exact_norm),
                    Error);

    // duality consistency: <grad_smooth(psiT), psi'T> equals the identity RHS
    const auto t = solve_adjoint_coupled(psiT, p->setup, 1e-13, 2000);
    const Field fpsi = leader_control_from(t, p->setup);
    for (int rep = 0; rep < 3; ++rep) {
        const Eigen::VectorXd d = rng.normal_vector(p->grid.cells());
        const auto td = solve_adjoint_coupled(d, p->setup, 1e-13, 2000);
        const Eigen::VectorXd gsm = grad_F_eps(psiT, eps, p->setup, PenaltyKind::quadratic) -
                                    eps * psiT;  // smooth part alone
        const double lhs = inner_x(gsm, d, p->op.mass);
        double rhs = dual_pair_forward_source(fpsi, td.psi, p->op.mass, &p->regions.leader, 1.0);
        rhs += inner_x(p->setup.z0, td.psi.v.col(0), p->op.mass);
        rhs -= pair_interval_left(p->setup.zd1, td.gamma1, p->op.mass, &p->regions.target1);
        rhs -= pair_interval_left(p->setup.zd2, td.gamma2, p->op.mass, &p->regions.target2);
        CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(rhs)));
    }
}

TEST_CASE("minimize_leader: zero data needs no control") {
    auto p = radial_problem(24, 16);
    p->setup.z0.setZero();
    p->setup.zd1.v.setZero();
    p->setup.zd2.v.setZero();
    for (PenaltyKind pk : {PenaltyKind::exact_norm, PenaltyKind::quadratic}) {
        const auto r = minimize_leader(p->setup, 1e-3, 1e-8, 200, pk);
        CHECK(r.fhat.v.norm() == 0.0);
        CHECK(r.terminal_norm == 0.0);
    }
}

TEST_CASE("minimize_leader: exact-norm penalty hits ||z(T)|| <= eps") {
    auto p = radial_problem(32, 24, 0.2, 1e3);
    const auto r = minimize_leader(p->setup, 1e-2, 1e-9, 600, PenaltyKind::exact_norm);
    CHECK(r.branch == "stationary");
    CHECK(r.terminal_norm <= 1e-2 * (1.0 + 1e-6));
    CHECK(r.cost > 0.0);
    // control vanishes outside O
    for (Eigen::Index j = 0; j < p->grid.cells(); ++j)
        if (p->regions.leader.w[j] == 0.0) CHECK(r.fhat.v.row(j).norm() == 0.0);
}

TEST_CASE("minimize_leader: quadratic penalty first-order condition") {
    auto p = radial_problem(32, 24, 0.2, 1e3);
    const double eps = 1e-2;
    const auto r = minimize_leader(p->setup, eps, 1e-10, 600, PenaltyKind::quadratic);
    // z(T) = -eps psi at the minimizer
    const Eigen::VectorXd zT = r.z.v.col(p->time.nt);
    const double rel = norm_x(zT + eps * r.psiT_min, p->op.mass) / norm_x(zT, p->op.mass);
    CHECK(rel <= 1e-6);
}

TEST_CASE("eps sweep: terminal norm nonincreasing, cost nondecreasing and stable") {
    auto p = hh::testing::radial_problem_controllable(32, 24, 0.2, 1e3);
    double prev_norm = 1e300, prev_cost = -1.0;
    std::vector<double> costs;
    for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
        const auto r = minimize_leader(p->setup, eps, 1e-9, 3000, PenaltyKind::exact_norm);
        CHECK(r.terminal_norm <= eps * (1.0 + 1e-6));
        CHECK(r.terminal_norm <= prev_norm * (1.0 + 1e-9));
        CHECK(r.cost >= prev_cost - 1e-12);
        prev_norm = r.terminal_norm;
        prev_cost = r.cost;
        costs.push_back(r.cost);
    }
    // boundedness: cost stable within 10% across the two smallest eps
    CHECK(std::abs(costs[3] - costs[2]) <= 0.10 * costs[2]);
}

TEST_CASE("observability ratios: finite, stable under sample doubling") {
    Rng rng(26);
    for (CaseFlag flag : {CaseFlag::shared, CaseFlag::distinct}) {
        auto p = radial_problem(24, 16, 0.2, 1e3, flag);
        PsiSingleSpec ps;
        ps.omega0_lo = 1.31;
        ps.omega0_hi = 1.49;
        CarlemanWeightSet w;
        if (flag == CaseFlag::shared) {
            const auto psi = build_psi(p->grid, ps);
            w = build_weights(p->grid, psi, nullptr, flag, 1.0, 1.0, p->time);
        } else {
            PsiPairSpec pp;
            pp.otilde_lo = 1.21;
            pp.otilde_hi = 1.55;
            pp.w1_lo = 1.26;
            pp.w1_hi = 1.34;
            pp.w2_lo = 1.40;
            pp.w2_hi = 1.50;
            const auto [p1, p2] = build_psi(p->grid, pp);
            w = build_weights(p->grid, p1, &p2, flag, 1.0, 1.0, p->time);
        }
        Rng r1(31);
        const auto s100 = observability_ratio(p->setup, w, 100, r1);
        Rng r2(31);
        const auto s200 = observability_ratio(p->setup, w, 200, r2);
        CHECK(s100.infinite == 0);
        CHECK(std::isfinite(s100.max_ratio));
        CHECK(std::abs(s200.max_ratio - s100.max_ratio) < 0.5 * s100.max_ratio);
    }
}

TEST_CASE("shared-case gamma term is label-symmetric") {
    // swapping the follower labels with alpha1 = alpha2 and symmetric regions
    // leaves the ratio unchanged
    auto p = radial_problem(24, 16, 0.2, 1e3, CaseFlag::shared);
    PsiSingleSpec ps;
    ps.omega0_lo = 1.31;
    ps.omega0_hi = 1.49;
    const auto psi = build_psi(p->grid, ps);
    const auto w = build_weights(p->grid, psi, nullptr, CaseFlag::shared, 1.0, 1.0, p->time);

    auto q = radial_problem(24, 16, 0.2, 1e3, CaseFlag::shared);
    std::swap(q->regions.follower1, q->regions.follower2);

    Rng r1(33), r2(33);
    const auto a = observability_ratio(p->setup, w, 10, r1);
    const auto b = observability_ratio(q->setup, w, 10, r2);
    for (int k = 0; k < 10; ++k)
        CHECK(a.samples[k] == doctest::Approx(b.samples[k]).epsilon(1e-9));
}

TEST_CASE("coupling diverges for tiny alpha and reports it") {
    auto p = radial_problem(16, 12, 0.2, 1e-4);
    Rng rng(71);
    const Eigen::VectorXd psiT = rng.normal_vector(p->grid.cells());
    try {
        solve_adjoint_coupled(psiT, p->setup, 1e-10, 100);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::CouplingDivergence);
    }
}

TEST_CASE("coupled machinery rejects the Crank-Nicolson scheme") {
    auto p = radial_problem(16, 12);
    Propagator cn(p->op, p->time, ThetaScheme{0.5});
    CoupledSetup cs = p->setup;
    cs.state = &cn;
    cs.adj = &cn;
    Rng rng(72);
    const Eigen::VectorXd psiT = rng.normal_vector(p->grid.cells());
    try {
        solve_adjoint_coupled(psiT, cs);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidArgument);
    }
}
