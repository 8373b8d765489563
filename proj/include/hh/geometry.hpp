#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "hh/errors.hpp"

namespace hh {

enum class GridMode { radial3d, tensor };
enum class CaseFlag { shared, distinct };

/// How to build a grid. `extent` is the outer radius R (radial3d) or the box
/// half-width L (tensor); both must exceed 1 so the closed unit ball sits
/// strictly inside the domain.
struct GridSpec {
    GridMode mode = GridMode::radial3d;
    int dimension = 3;       // forced to 3 in radial3d mode
    double extent = 2.0;
    int cells_per_axis = 32;
};

/// Cell-centered discretization of the domain. No cell center can coincide
/// with the origin: radial centers sit at (j+1/2)h and tensor grids require an
/// even cell count per axis, so the minimum center norm is h/2 (radial) or
/// sqrt(N)h/2 (tensor).
class SpatialGrid {
public:
    GridMode mode;
    int dimension;
    double extent;
    int cells_per_axis;
    double h;

    Eigen::MatrixXd centers;  // cells x dimension (radial3d: cells x 1, the radius)
    Eigen::VectorXd radius;   // |x_j| per cell
    Eigen::VectorXd volume;   // quadrature weight per cell (radial: r^2 h)

    Eigen::Index cells() const { return radius.size(); }
    double min_center_norm() const { return radius.minCoeff(); }

    /// Tensor-mode flattened index; axis i runs fastest.
    Eigen::Index flat_index(const std::vector<int>& idx) const;
};

SpatialGrid build_grid(const GridSpec& spec);

/// Optimal Hardy constant mu*(N) = (N-2)^2/4.
double hardy_constant(int dimension);

/// Per-cell field mu/|x_j|^2. Finite by the no-origin-node invariant.
Eigen::VectorXd hardy_potential(const SpatialGrid& grid, double mu);

// ---------------------------------------------------------------------------
// Regions
// ---------------------------------------------------------------------------

/// Region primitive. Unions of these make up each control/observation set.
///  - annulus: r0 < |x| < r1 (also the only radial-mode shape)
///  - box: lo_d < x_d < hi_d per axis (tensor mode)
///  - ball: |x - c| < r (tensor mode)
struct Shape {
    enum class Kind { annulus, box, ball };
    Kind kind;
    double r0 = 0, r1 = 0;              // annulus / ball radius in r1
    Eigen::VectorXd lo, hi;             // box
    Eigen::VectorXd center;             // ball

    static Shape annulus(double r0, double r1);
    static Shape box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);
    static Shape ball(const Eigen::VectorXd& center, double r);

    bool contains(const Eigen::VectorXd& x, double r_norm) const;
};

struct RegionGeometry {
    std::vector<Shape> leader;          // O
    std::vector<Shape> follower1;       // O_1
    std::vector<Shape> follower2;       // O_2
    std::vector<Shape> target1;         // O_{1,d}
    std::vector<Shape> target2;         // O_{2,d}
    CaseFlag case_flag = CaseFlag::shared;
};

/// Indicator mask over grid cells, kept both as a 0/1 weight vector (for
/// cwise masking) and as an index list.
struct Mask {
    Eigen::VectorXd w;
    std::vector<Eigen::Index> cells;

    Eigen::Index count() const { return static_cast<Eigen::Index>(cells.size()); }
    bool operator==(const Mask& other) const { return cells == other.cells; }
};

Mask make_mask(const SpatialGrid& grid, const std::vector<Shape>& shapes);

struct RegionSet {
    Mask leader;     // O
    Mask follower1;  // O_1
    Mask follower2;  // O_2
    Mask target1;    // O_{1,d}
    Mask target2;    // O_{2,d}
    CaseFlag case_flag;

    const Mask& follower(int i) const { return i == 1 ? follower1 : follower2; }
    const Mask& target(int i) const { return i == 1 ? target1 : target2; }
};

/// Populates masks and checks every hypothesis: O meets each O_{i,d}, the
/// O_{i,d} stay away from the closed unit ball, and the masks are consistent
/// with the declared case flag.
RegionSet build_regions(const SpatialGrid& grid, const RegionGeometry& geometry);

} // namespace hh
