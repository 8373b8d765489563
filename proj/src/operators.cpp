#include "hh/operators.hpp"

#include <cmath>
#include <vector>

#include <Eigen/SparseCholesky>

namespace hh {

DiscreteOperator assemble(const SpatialGrid& grid, double mu) {
    const Eigen::VectorXd pot = hardy_potential(grid, mu);  // validates mu range

    DiscreteOperator op;
    op.mu = mu;
    op.mode = grid.mode;
    op.mass = grid.volume;

    std::vector<Eigen::Triplet<double>> trip;
    const Eigen::Index n = grid.cells();

    if (grid.mode == GridMode::radial3d) {
        const double h = grid.h;
        for (Eigen::Index j = 0; j < n; ++j) {
            double diag = 0.0;
            // inner face at r = j h; the r^2 face weight vanishes at r = 0,
            // which encodes the symmetry condition at the origin
            if (j > 0) {
                const double rf = static_cast<double>(j) * h;
                const double c = rf * rf / h;
                trip.emplace_back(j, j - 1, -c);
                diag += c;
            }
            if (j + 1 < n) {
                const double rf = static_cast<double>(j + 1) * h;
                const double c = rf * rf / h;
                trip.emplace_back(j, j + 1, -c);
                diag += c;
            } else {
                // Dirichlet wall at r = R, half-cell distance to the center
                const double R = grid.extent;
                diag += R * R / (0.5 * h);
            }
            diag -= pot[j] * grid.volume[j];
            trip.emplace_back(j, j, diag);
        }
    } else {
        const int N = grid.dimension;
        const int m = grid.cells_per_axis;
        const double h = grid.h;
        const double face = std::pow(h, N - 1);
        std::vector<int> idx(N, 0);
        std::vector<int> nb(N, 0);
        for (Eigen::Index j = 0; j < n; ++j) {
            double diag = 0.0;
            for (int d = 0; d < N; ++d) {
                for (int dir = -1; dir <= 1; dir += 2) {
                    nb = idx;
                    nb[d] += dir;
                    if (nb[d] < 0 || nb[d] >= m) {
                        diag += face / (0.5 * h);  // Dirichlet ghost on the wall
                    } else {
                        const double c = face / h;
                        trip.emplace_back(j, grid.flat_index(nb), -c);
                        diag += c;
                    }
                }
            }
            diag -= pot[j] * grid.volume[j];
            trip.emplace_back(j, j, diag);
            for (int d = 0; d < N; ++d) {
                if (++idx[d] < m) break;
                idx[d] = 0;
            }
        }
    }

    op.A.resize(n, n);
    op.A.setFromTriplets(trip.begin(), trip.end());
    op.A.makeCompressed();
    return op;
}

namespace {

double rayleigh(const DiscreteOperator& op, const Eigen::VectorXd& x) {
    return x.dot(op.A * x) / x.dot(op.mass.cwiseProduct(x));
}

double pencil_residual(const DiscreteOperator& op, const Eigen::VectorXd& x, double lam) {
    const Eigen::VectorXd r = op.A * x - lam * op.mass.cwiseProduct(x);
    return r.norm() / x.norm();
}

/// Gershgorin lower bound for the pencil (A, M): min over rows of
/// (a_jj - sum |offdiag|)/m_jj. Always <= lambda_min.
double gershgorin_lower(const DiscreteOperator& op) {
    const Eigen::Index n = op.size();
    Eigen::VectorXd lo = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < op.A.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(op.A, k); it; ++it) {
            if (it.row() == it.col())
                lo[it.row()] += it.value();
            else
                lo[it.row()] -= std::abs(it.value());
        }
    }
    return (lo.array() / op.mass.array()).minCoeff();
}

} // namespace

EigenEstimate smallest_eigenvalue(const DiscreteOperator& op, int max_iterations, double tol) {
    const Eigen::Index n = op.size();
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;

    // eigenvalue count below sigma by Sylvester inertia of A - sigma M
    auto count_below = [&](double sigma) -> Eigen::Index {
        const Eigen::SparseMatrix<double> shifted =
            op.A - Eigen::SparseMatrix<double>(
                       Eigen::VectorXd(sigma * op.mass).asDiagonal());
        solver.compute(shifted);
        if (solver.info() != Eigen::Success) return -1;  // pivot breakdown near an eigenvalue
        return (solver.vectorD().array() < 0.0).count();
    };

    double lo = gershgorin_lower(op) - 1.0;
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    double hi = rayleigh(op, ones);  // a Rayleigh quotient always sits above lambda_min
    while (count_below(hi) < 1) hi += std::max(1.0, std::abs(hi));

    // bisection brackets lambda_min between a count-0 and a count>=1 shift
    for (int it = 0; it < 80 && (hi - lo) > 1e-12 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const Eigen::Index c = count_below(mid);
        if (c == 0)
            lo = mid;
        else if (c > 0)
            hi = mid;
        else
            lo = mid - 1e-9 * std::max(1.0, std::abs(mid));  // breakdown: nudge
    }

    // inverse-iteration polish from the count-0 side (the shifted matrix is
    // positive definite there, so the factorization is clean)
    const double gap = std::max(1e-9 * std::max(1.0, std::abs(hi)), hi - lo);
    const double sigma = lo - gap;
    const Eigen::SparseMatrix<double> shifted =
        op.A - Eigen::SparseMatrix<double>(Eigen::VectorXd(sigma * op.mass).asDiagonal());
    solver.compute(shifted);
    if (solver.info() != Eigen::Success)
        raise(ErrorCode::LinearSolveFailure, "smallest_eigenvalue polish factorization failed");

    EigenEstimate est;
    Eigen::VectorXd x = ones / ones.norm();
    double lam = hi;
    for (int it = 0; it < max_iterations; ++it) {
        Eigen::VectorXd y = solver.solve(op.mass.cwiseProduct(x));
        y /= y.norm();
        const double lam_new = rayleigh(op, y);
        x = y;
        est.iterations = it + 1;
        est.value = lam_new;
        est.vector = y;
        est.residual = pencil_residual(op, y, lam_new);
        if (est.residual <= tol * std::max(1.0, std::abs(lam_new)) &&
            std::abs(lam_new - lam) <= tol * std::max(1.0, std::abs(lam_new)))
            return est;
        lam = lam_new;
    }
    raise(ErrorCode::NonConvergence, "smallest_eigenvalue failed to settle");
}

EigenEstimate largest_eigenvalue(const DiscreteOperator& op, int max_iterations, double tol) {
    const Eigen::Index n = op.size();
    Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
    for (Eigen::Index j = 0; j < n; ++j) x[j] += 0.3 * std::sin(1.0 + 2.7 * j);
    x /= x.norm();
    EigenEstimate est;
    double lam = 0;
    const Eigen::VectorXd inv_mass = op.mass.cwiseInverse();
    for (int it = 0; it < max_iterations; ++it) {
        Eigen::VectorXd y = inv_mass.cwiseProduct(op.A * x);
        y /= y.norm();
        const double lam_new = rayleigh(op, y);
        x = y;
        est.iterations = it + 1;
        est.value = lam_new;
        est.residual = pencil_residual(op, y, lam_new);
        est.vector = y;
        if (it > 3 && std::abs(lam_new - lam) <= tol * std::max(1.0, std::abs(lam_new)))
            return est;
        lam = lam_new;
    }
    return est;  // power iteration: best effort is acceptable for thresholds
}

Eigen::VectorXd gradient_squared(const SpatialGrid& grid, const Eigen::VectorXd& u) {
    if (u.size() != grid.cells()) raise(ErrorCode::ShapeMismatch, "gradient_squared size");
    const Eigen::Index n = grid.cells();
    Eigen::VectorXd g2 = Eigen::VectorXd::Zero(n);
    const double h = grid.h;

    if (grid.mode == GridMode::radial3d) {
        for (Eigen::Index j = 0; j < n; ++j) {
            double dlo, dhi;
            dlo = (j > 0) ? (u[j] - u[j - 1]) / h : 0.0;  // symmetry at the origin
            dhi = (j + 1 < n) ? (u[j + 1] - u[j]) / h : (0.0 - u[j]) / (0.5 * h);
            const double d = 0.5 * (dlo + dhi);
            g2[j] = d * d;
        }
    } else {
        const int N = grid.dimension;
        const int m = grid.cells_per_axis;
        std::vector<int> idx(N, 0), nb(N, 0);
        for (Eigen::Index j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int d = 0; d < N; ++d) {
                double dlo, dhi;
                nb = idx;
                nb[d] -= 1;
                dlo = (nb[d] >= 0) ? (u[j] - u[grid.flat_index(nb)]) / h
                                   : (u[j] - 0.0) / (0.5 * h);
                nb[d] += 2;
                dhi = (nb[d] < m) ? (u[grid.flat_index(nb)] - u[j]) / h
                                  : (0.0 - u[j]) / (0.5 * h);
                const double dd = 0.5 * (dlo + dhi);
                acc += dd * dd;
            }
            g2[j] = acc;
            for (int d = 0; d < N; ++d) {
                if (++idx[d] < m) break;
                idx[d] = 0;
            }
        }
    }
    return g2;
}

double inner_q(const Field& a, const Field& b, const Eigen::VectorXd& volume, const Mask* mask) {
    check_same_shape(a, b);
    if (volume.size() != a.v.rows()) raise(ErrorCode::ShapeMismatch, "volume vector size");
    Eigen::VectorXd w = volume;
    if (mask) {
        if (mask->w.size() != volume.size()) raise(ErrorCode::ShapeMismatch, "mask size");
        w = w.cwiseProduct(mask->w);
    }
    const int nt = a.nt();
    const double dt = a.time.dt();
    double acc = 0.0;
    for (int k = 0; k <= nt; ++k) {
        const double wk = a.time.omega(k) * dt;
        acc += wk * (a.v.col(k).array() * b.v.col(k).array() * w.array()).sum();
    }
    return acc;
}

} // namespace hh
