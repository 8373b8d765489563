#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "hh/field.hpp"
#include "hh/geometry.hpp"

namespace hh {

/// Discrete elliptic operator -Delta_h - mu/|x|^2 with homogeneous Dirichlet
/// data, stored in mass-weighted symmetric form: the equation advanced in
/// time is  M dy/dt + A y = M g  with A = A^T exactly and M the diagonal cell
/// quadrature weights. In radial3d mode A is the r^2-weighted form of
/// v_rr + (2/r) v_r, which is what makes the stored matrix symmetric.
struct DiscreteOperator {
    Eigen::SparseMatrix<double> A;  // weighted stiffness + Hardy term, symmetric
    Eigen::VectorXd mass;           // M diagonal (= grid cell volumes)
    double mu = 0.0;
    GridMode mode = GridMode::radial3d;

    Eigen::Index size() const { return mass.size(); }

    /// Unweighted entry A_jk / M_jj, i.e. the plain finite-difference stencil.
    double stencil_entry(Eigen::Index row, Eigen::Index col) const {
        return A.coeff(row, col) / mass[row];
    }
};

DiscreteOperator assemble(const SpatialGrid& grid, double mu);

struct EigenEstimate {
    double value = 0.0;
    int iterations = 0;
    double residual = 0.0;  // ||A x - value M x|| / ||x||_M
    Eigen::VectorXd vector;
};

/// Smallest eigenvalue of the pencil (A, M) by shifted inverse iteration with
/// Rayleigh updates. This is the discrete Hardy-coercivity diagnostic.
EigenEstimate smallest_eigenvalue(const DiscreteOperator& op, int max_iterations = 200,
                                  double tol = 1e-10);

/// Largest eigenvalue of the pencil (A, M) by power iteration (used for
/// relative thresholds in warnings).
EigenEstimate largest_eigenvalue(const DiscreteOperator& op, int max_iterations = 500,
                                 double tol = 1e-8);

/// Squared discrete gradient magnitude per cell for a spatial vector, using
/// one-sided/central differences with the Dirichlet ghost convention.
Eigen::VectorXd gradient_squared(const SpatialGrid& grid, const Eigen::VectorXd& u);

} // namespace hh
