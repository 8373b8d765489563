#pragma once

#include <memory>

#include "hh/nash.hpp"

namespace hh::testing {

/// Self-owning desk-scale coupled problem for solver tests.
struct DeskProblem {
    SpatialGrid grid;
    RegionSet regions;
    DiscreteOperator op;
    TimeGrid time;
    std::unique_ptr<Propagator> prop;
    CoupledSetup setup;

    DeskProblem(const DeskProblem&) = delete;
    DeskProblem& operator=(const DeskProblem&) = delete;
    DeskProblem() = default;
};

inline std::unique_ptr<DeskProblem> radial_problem(int cells = 32, int nt = 24,
                                                   double mu = 0.2, double alpha = 1e3,
                                                   CaseFlag flag = CaseFlag::shared,
                                                   double T = 1.0) {
    auto p = std::make_unique<DeskProblem>();
    GridSpec gs;
    gs.mode = GridMode::radial3d;
    gs.extent = 2.0;
    gs.cells_per_axis = cells;
    p->grid = build_grid(gs);

    RegionGeometry geom;
    geom.leader = {Shape::annulus(1.2, 1.5)};
    geom.follower1 = {Shape::annulus(1.0, 1.2)};
    geom.follower2 = {Shape::annulus(1.5, 1.7)};
    if (flag == CaseFlag::shared) {
        geom.target1 = {Shape::annulus(1.3, 1.6)};
        geom.target2 = {Shape::annulus(1.3, 1.6)};
    } else {
        geom.target1 = {Shape::annulus(1.25, 1.45)};
        geom.target2 = {Shape::annulus(1.35, 1.55)};
    }
    geom.case_flag = flag;
    p->regions = build_regions(p->grid, geom);

    p->op = assemble(p->grid, mu);
    p->time = TimeGrid{nt, T};
    p->prop = std::make_unique<Propagator>(p->op, p->time, ThetaScheme{1.0});

    p->setup.state = p->prop.get();
    p->setup.adj = p->prop.get();
    p->setup.regions = &p->regions;
    p->setup.alpha1 = alpha;
    p->setup.alpha2 = alpha;

    // smooth nonzero data: initial offset plus decaying target mismatch
    p->setup.z0.resize(p->grid.cells());
    for (Eigen::Index j = 0; j < p->grid.cells(); ++j) {
        const double r = p->grid.radius[j];
        p->setup.z0[j] = std::sin(M_PI * r / 2.0) / (M_PI * r / 2.0);
    }
    p->setup.zd1 = Field(p->grid.cells(), p->time);
    p->setup.zd2 = Field(p->grid.cells(), p->time);
    for (int n = 0; n <= nt; ++n) {
        const double t = n * p->time.dt();
        // admissibility-friendly: targets vanish to fourth order at both time
        // endpoints, where the weight rho^2 blows up
        const double decay = std::pow(4.0 * t * (T - t) / (T * T), 4);
        for (Eigen::Index j = 0; j < p->grid.cells(); ++j) {
            const double r = p->grid.radius[j];
            const double bump = std::exp(-std::pow((r - 1.45) / 0.15, 2));
            p->setup.zd1.v(j, n) = 0.5 * bump * decay;
            p->setup.zd2.v(j, n) = 0.4 * bump * decay;
        }
    }
    return p;
}

/// Same problem but with the leader region covering the domain interior,
/// which keeps the penalized-duality control cost stable down to small eps
/// (an outer-shell leader cannot cheaply steer interior-supported drift).
inline std::unique_ptr<DeskProblem> radial_problem_controllable(int cells = 32, int nt = 24,
                                                                double mu = 0.2,
                                                                double alpha = 1e3) {
    auto p = radial_problem(cells, nt, mu, alpha);
    RegionGeometry geom;
    geom.leader = {Shape::annulus(0.1, 1.9)};
    geom.follower1 = {Shape::annulus(1.0, 1.2)};
    geom.follower2 = {Shape::annulus(1.5, 1.7)};
    geom.target1 = {Shape::annulus(1.3, 1.6)};
    geom.target2 = {Shape::annulus(1.3, 1.6)};
    p->regions = build_regions(p->grid, geom);
    return p;
}

inline Field random_field(Rng& rng, Eigen::Index cells, const TimeGrid& tg) {
    Field f(cells, tg);
    for (int k = 0; k < f.levels(); ++k) f.v.col(k) = rng.normal_vector(cells);
    return f;
}

} // namespace hh::testing
