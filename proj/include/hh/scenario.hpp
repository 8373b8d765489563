#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "hh/carleman.hpp"
#include "hh/leader.hpp"
#include "hh/semilinear.hpp"

namespace hh {

/// Spatial data specification from the whitelisted expression grammar:
///   zero | constant v | eigenmode amp | gaussian amp width r_center |
///   bump amp r0 r1 | poly c0 [c1 ...] | file path
/// Expressions are radial (functions of |x|), which covers both grid modes.
struct SpatialExpr {
    std::string text;
};

/// Target specification:
///   traj                      y_id = ybar
///   offset p <spatial>        y_id = ybar + (T-t)^p expr
///   window p <spatial>        y_id = ybar + [4t(T-t)/T^2]^p expr
///   fixed <spatial>           y_id = expr, constant in time
///   file path                 space-time field file
struct TargetExpr {
    std::string text;
};

struct Tolerances {
    double nash = 1e-8;
    double coupling = 1e-10;
    double leader = 1e-9;
    double outer = 1e-6;
};

/// Fully parsed problem instance. Everything a run needs is in here; the seed
/// fixes all sampling so runs are bit-reproducible.
struct Scenario {
    GridSpec grid;
    std::string regions_leader, regions_f1, regions_f2, regions_t1, regions_t2;
    CaseFlag case_flag = CaseFlag::shared;
    double mu = 0.0;
    TimeGrid time;
    double theta = 1.0;
    double alpha1 = 1e3, alpha2 = 1e3;
    SpatialExpr y0{"zero"}, ybar0{"zero"};
    TargetExpr y1d{"traj"}, y2d{"traj"};
    std::string nonlinearity = "zero";
    double kappa = 0.0;
    double epsilon = 1e-3;
    PenaltyKind penalty = PenaltyKind::exact_norm;
    double carleman_s = 1.0;
    double carleman_lambda0 = 1.0;
    double omega0_lo = 0, omega0_hi = 0;    // default: from O cap O_1d
    double otilde_lo = 0, otilde_hi = 0;    // pair variant bounds
    double omega1_lo = 0, omega1_hi = 0;
    double omega2_lo = 0, omega2_hi = 0;
    Tolerances tol;
    std::uint64_t seed = 42;

    std::string raw_text;
    std::string source_path;
    std::uint64_t hash = 0;
};

Scenario parse_scenario_text(const std::string& text, const std::string& origin);
Scenario load_scenario(const std::filesystem::path& path);

/// Region shape lists parsed from strings like
/// "annulus 1.2 1.5 | box -0.3 0.3 1.0 1.4" (unions with '|').
std::vector<Shape> parse_shapes(const std::string& text, int dimension);

/// Everything assembled and validated: grids, masks, operators, propagator,
/// reference trajectory and difference-variable data. Non-movable; the
/// propagator and setups point into this object.
struct Workspace {
    Scenario scenario;
    SpatialGrid grid;
    RegionSet regions;
    DiscreteOperator op;
    std::unique_ptr<Propagator> prop;
    Nonlinearity nl;
    Eigen::VectorXd y0, ybar0;
    Field ybar;
    Field y1d, y2d;
    Eigen::VectorXd z0;
    Field zd1, zd2;

    Workspace() = default;
    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;

    CoupledSetup coupled() const;
    SemilinearSetup semilinear() const;

    /// Weight set from the scenario's Carleman parameters (single or pair per
    /// the case flag).
    CarlemanWeightSet weights() const;
    Mask omega0_mask() const;
};

std::unique_ptr<Workspace> build_workspace(const Scenario& s);

/// Per-cell evaluation of a spatial expression on a built workspace grid
/// (exposed for tests; `eigenmode` resolves to the discrete ground mode).
Eigen::VectorXd eval_spatial(const SpatialExpr& e, const SpatialGrid& grid,
                             const DiscreteOperator& op);

} // namespace hh
