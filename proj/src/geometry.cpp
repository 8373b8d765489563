#include "hh/geometry.hpp"

#include <cmath>
#include <sstream>

namespace hh {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::MuOutOfRange: return "MuOutOfRange";
        case ErrorCode::EmptyIntersection: return "EmptyIntersection";
        case ErrorCode::SingularOverlap: return "SingularOverlap";
        case ErrorCode::CaseMismatch: return "CaseMismatch";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::LinearSolveFailure: return "LinearSolveFailure";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::CoercivityFailure: return "CoercivityFailure";
        case ErrorCode::MaxIterations: return "MaxIterations";
        case ErrorCode::ContractionFailure: return "ContractionFailure";
        case ErrorCode::CouplingDivergence: return "CouplingDivergence";
        case ErrorCode::ZeroPointNondifferentiable: return "ZeroPointNondifferentiable";
        case ErrorCode::ObservabilityTooWeak: return "ObservabilityTooWeak";
        case ErrorCode::LambdaEscalationFailure: return "LambdaEscalationFailure";
        case ErrorCode::CriticalPointLeak: return "CriticalPointLeak";
        case ErrorCode::DegenerateRHS: return "DegenerateRHS";
        case ErrorCode::PicardDivergence: return "PicardDivergence";
        case ErrorCode::OuterDivergence: return "OuterDivergence";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ValidationError: return "ValidationError";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "UnknownError";
}

SpatialGrid build_grid(const GridSpec& spec) {
    if (spec.cells_per_axis < 8)
        raise(ErrorCode::InvalidArgument, "cells_per_axis must be >= 8");
    if (spec.extent <= 1.0)
        raise(ErrorCode::InvalidArgument,
              "extent must exceed 1 so the closed unit ball is inside the domain");

    SpatialGrid g;
    g.mode = spec.mode;
    g.cells_per_axis = spec.cells_per_axis;
    g.extent = spec.extent;

    if (spec.mode == GridMode::radial3d) {
        g.dimension = 3;  // radial reduction of an N = 3 ball
        const int m = spec.cells_per_axis;
        g.h = spec.extent / m;
        g.centers.resize(m, 1);
        g.radius.resize(m);
        g.volume.resize(m);
        for (int j = 0; j < m; ++j) {
            const double r = (j + 0.5) * g.h;
            g.centers(j, 0) = r;
            g.radius[j] = r;
            g.volume[j] = r * r * g.h;  // 4*pi dropped consistently everywhere
        }
    } else {
        if (spec.dimension < 2)
            raise(ErrorCode::InvalidArgument, "tensor mode needs dimension >= 2");
        if (spec.cells_per_axis % 2 != 0)
            raise(ErrorCode::InvalidArgument,
                  "tensor mode needs an even cells_per_axis (odd counts place a cell center at the origin)");
        g.dimension = spec.dimension;
        const int m = spec.cells_per_axis;
        const int N = g.dimension;
        g.h = 2.0 * spec.extent / m;
        Eigen::Index total = 1;
        for (int d = 0; d < N; ++d) total *= m;
        g.centers.resize(total, N);
        g.radius.resize(total);
        g.volume.resize(total);
        const double cell_vol = std::pow(g.h, N);
        std::vector<int> idx(N, 0);
        for (Eigen::Index j = 0; j < total; ++j) {
            double r2 = 0;
            for (int d = 0; d < N; ++d) {
                const double x = -spec.extent + (idx[d] + 0.5) * g.h;
                g.centers(j, d) = x;
                r2 += x * x;
            }
            g.radius[j] = std::sqrt(r2);
            g.volume[j] = cell_vol;
            for (int d = 0; d < N; ++d) {
                if (++idx[d] < m) break;
                idx[d] = 0;
            }
        }
    }

    if (g.min_center_norm() < 0.5 * g.h - 1e-14)
        raise(ErrorCode::InvalidArgument, "grid layout placed a node too close to the origin");
    return g;
}

Eigen::Index SpatialGrid::flat_index(const std::vector<int>& idx) const {
    Eigen::Index flat = 0;
    for (int d = dimension - 1; d >= 0; --d) flat = flat * cells_per_axis + idx[d];
    return flat;
}

double hardy_constant(int dimension) {
    if (dimension < 2) raise(ErrorCode::InvalidArgument, "hardy_constant needs N >= 2");
    const double q = dimension - 2;
    return q * q / 4.0;
}

Eigen::VectorXd hardy_potential(const SpatialGrid& grid, double mu) {
    const double mu_star = hardy_constant(grid.dimension);
    if (mu < 0.0 || mu > mu_star) {
        std::ostringstream os;
        os << "mu = " << mu << " outside [0, " << mu_star << "]";
        raise(ErrorCode::MuOutOfRange, os.str());
    }
    return mu * grid.radius.array().square().inverse().matrix();
}

Shape Shape::annulus(double r0, double r1) {
    if (!(r0 >= 0 && r1 > r0))
        raise(ErrorCode::InvalidArgument, "annulus needs 0 <= r0 < r1");
    Shape s;
    s.kind = Kind::annulus;
    s.r0 = r0;
    s.r1 = r1;
    return s;
}

Shape Shape::box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    if (lo.size() != hi.size() || (hi - lo).minCoeff() <= 0)
        raise(ErrorCode::InvalidArgument, "box needs lo < hi per axis");
    Shape s;
    s.kind = Kind::box;
    s.lo = lo;
    s.hi = hi;
    return s;
}

Shape Shape::ball(const Eigen::VectorXd& center, double r) {
    if (r <= 0) raise(ErrorCode::InvalidArgument, "ball needs r > 0");
    Shape s;
    s.kind = Kind::ball;
    s.center = center;
    s.r1 = r;
    return s;
}

bool Shape::contains(const Eigen::VectorXd& x, double r_norm) const {
    switch (kind) {
        case Kind::annulus:
            return r_norm > r0 && r_norm < r1;
        case Kind::box: {
            if (x.size() != lo.size()) raise(ErrorCode::ShapeMismatch, "box dimension mismatch");
            for (Eigen::Index d = 0; d < x.size(); ++d)
                if (x[d] <= lo[d] || x[d] >= hi[d]) return false;
            return true;
        }
        case Kind::ball: {
            if (x.size() != center.size()) raise(ErrorCode::ShapeMismatch, "ball dimension mismatch");
            return (x - center).norm() < r1;
        }
    }
    return false;
}

Mask make_mask(const SpatialGrid& grid, const std::vector<Shape>& shapes) {
    Mask m;
    m.w = Eigen::VectorXd::Zero(grid.cells());
    for (Eigen::Index j = 0; j < grid.cells(); ++j) {
        const Eigen::VectorXd x = grid.centers.row(j).transpose();
        for (const Shape& s : shapes) {
            if (s.contains(x, grid.radius[j])) {
                m.w[j] = 1.0;
                m.cells.push_back(j);
                break;
            }
        }
    }
    return m;
}

namespace {

Mask intersect(const Mask& a, const Mask& b) {
    Mask m;
    m.w = a.w.cwiseProduct(b.w);
    for (Eigen::Index j = 0; j < m.w.size(); ++j)
        if (m.w[j] > 0.5) m.cells.push_back(j);
    return m;
}

} // namespace

RegionSet build_regions(const SpatialGrid& grid, const RegionGeometry& geometry) {
    RegionSet r;
    r.leader = make_mask(grid, geometry.leader);
    r.follower1 = make_mask(grid, geometry.follower1);
    r.follower2 = make_mask(grid, geometry.follower2);
    r.target1 = make_mask(grid, geometry.target1);
    r.target2 = make_mask(grid, geometry.target2);
    r.case_flag = geometry.case_flag;

    if (r.leader.count() == 0 || r.follower1.count() == 0 || r.follower2.count() == 0 ||
        r.target1.count() == 0 || r.target2.count() == 0)
        raise(ErrorCode::EmptyIntersection, "a region resolves to zero cells at this resolution");

    for (int i = 1; i <= 2; ++i) {
        const Mask& t = (i == 1) ? r.target1 : r.target2;
        for (Eigen::Index j : t.cells) {
            if (grid.radius[j] <= 1.0) {
                std::ostringstream os;
                os << "O_" << i << ",d touches the closed unit ball at cell " << j
                   << " (|x| = " << grid.radius[j] << ")";
                raise(ErrorCode::SingularOverlap, os.str());
            }
        }
        if (intersect(r.leader, t).count() == 0) {
            std::ostringstream os;
            os << "O and O_" << i << ",d do not meet (hypothesis O cap O_{i,d} nonempty)";
            raise(ErrorCode::EmptyIntersection, os.str());
        }
    }

    const bool same = (r.target1 == r.target2);
    if (geometry.case_flag == CaseFlag::shared && !same)
        raise(ErrorCode::CaseMismatch, "case_flag=shared but O_{1,d} != O_{2,d} as cell sets");
    if (geometry.case_flag == CaseFlag::distinct) {
        const Mask i1 = intersect(r.leader, r.target1);
        const Mask i2 = intersect(r.leader, r.target2);
        if (i1 == i2)
            raise(ErrorCode::CaseMismatch,
                  "case_flag=distinct but O cap O_{1,d} == O cap O_{2,d} as cell sets");
    }
    return r;
}

} // namespace hh
