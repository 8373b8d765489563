#pragma once

#include <Eigen/Core>

#include "hh/errors.hpp"
#include "hh/geometry.hpp"

namespace hh {

/// Uniform time grid on [0, T] with nt steps (nt+1 levels).
struct TimeGrid {
    int nt = 32;
    double T = 1.0;

    double dt() const { return T / nt; }
    /// Trapezoidal level weight: 1/2 at the endpoints, 1 inside.
    double omega(int level) const { return (level == 0 || level == nt) ? 0.5 : 1.0; }
    double midpoint(int n) const { return (n + 0.5) * dt(); }
};

/// Space-time scalar array: one value per cell per time level. Column n of
/// `v` is the spatial slice at t_n. There are no boundary rows: the grids are
/// cell-centered and the homogeneous Dirichlet condition lives in the stencil
/// through ghost values mirrored across the wall at half-cell distance.
struct Field {
    Eigen::MatrixXd v;  // cells x (nt+1)
    TimeGrid time;

    Field() = default;
    Field(Eigen::Index cells, const TimeGrid& tg) : v(Eigen::MatrixXd::Zero(cells, tg.nt + 1)), time(tg) {}

    Eigen::Index cells() const { return v.rows(); }
    int levels() const { return static_cast<int>(v.cols()); }
    int nt() const { return levels() - 1; }

    Eigen::VectorXd slice(int n) const { return v.col(n); }

    static Field zero(Eigen::Index cells, const TimeGrid& tg) { return Field(cells, tg); }

    Field& operator+=(const Field& o) { v += o.v; return *this; }
    Field& operator-=(const Field& o) { v -= o.v; return *this; }
    Field& operator*=(double a) { v *= a; return *this; }
};

inline Field operator+(Field a, const Field& b) { a += b; return a; }
inline Field operator-(Field a, const Field& b) { a -= b; return a; }
inline Field operator*(double a, Field f) { f *= a; return f; }

inline void check_same_shape(const Field& a, const Field& b) {
    if (a.v.rows() != b.v.rows() || a.v.cols() != b.v.cols() ||
        std::abs(a.time.T - b.time.T) > 1e-14 * (1.0 + std::abs(a.time.T)))
        raise(ErrorCode::ShapeMismatch, "fields live on different grids");
}

/// Restrict a field to a region: zero outside the mask.
inline Field masked(const Field& f, const Mask& m) {
    if (m.w.size() != f.v.rows()) raise(ErrorCode::ShapeMismatch, "mask does not match field cells");
    Field out = f;
    out.v = m.w.asDiagonal() * f.v;
    return out;
}

/// Space-time inner product: cell-volume weighted in space, trapezoidal in
/// time, optionally restricted to a region.
double inner_q(const Field& a, const Field& b, const Eigen::VectorXd& volume,
               const Mask* mask = nullptr);

inline double norm_q(const Field& a, const Eigen::VectorXd& volume, const Mask* mask = nullptr) {
    return std::sqrt(std::max(0.0, inner_q(a, a, volume, mask)));
}

/// Spatial L^2 inner product of two per-cell vectors under the quadrature
/// weights (the discrete (u,v) of the problem).
inline double inner_x(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                      const Eigen::VectorXd& volume) {
    return (a.array() * b.array() * volume.array()).sum();
}

inline double norm_x(const Eigen::VectorXd& a, const Eigen::VectorXd& volume) {
    return std::sqrt(std::max(0.0, inner_x(a, a, volume)));
}

} // namespace hh
