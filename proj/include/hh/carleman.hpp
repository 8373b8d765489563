#pragma once

#include <vector>

#include "hh/field.hpp"
#include "hh/operators.hpp"
#include "hh/propagator.hpp"
#include "hh/rng.hpp"

namespace hh {

/// Annular placement of the auxiliary sets for the weight function: all are
/// shells a < |x| < b (tensor domains use the same shells; the outer profile
/// is rescaled per direction so the weight vanishes on the box boundary).
struct PsiSingleSpec {
    double omega0_lo = 0, omega0_hi = 0;  // critical set must land in here
};

struct PsiPairSpec {
    double otilde_lo = 0, otilde_hi = 0;  // profiles may differ only in here
    double w1_lo = 0, w1_hi = 0;          // critical shell of Psi_1
    double w2_lo = 0, w2_hi = 0;          // critical shell of Psi_2
};

struct PsiField {
    Eigen::VectorXd values;
    double sup = 0;
    double grad_min_outside = 0;  // min |grad Psi| over cells outside the critical shell
    double grad_max = 0;
};

/// Weight function of the Carleman machinery: ln|x| inside the unit ball,
/// zero on the boundary, positive outside the ball, single critical shell
/// inside omega0. Raises CriticalPointLeak if the discrete gradient degrades
/// outside the designated shell.
PsiField build_psi(const SpatialGrid& grid, const PsiSingleSpec& spec);

/// Pair variant: Psi_1 = Psi_2 outside the Otilde shell, equal suprema, each
/// with its only critical shell inside omega_i.
std::pair<PsiField, PsiField> build_psi(const SpatialGrid& grid, const PsiPairSpec& spec);

/// s, lambda and the singular weights theta, sigma, rho evaluated at the
/// interval midpoints t_{n+1/2} (the weights blow up at t in {0,T}; midpoints
/// keep every evaluation finite). For the distinct case sigma1 != sigma2 only
/// inside the Otilde shell and rho^{-2} = theta exp(-2 max(sigma1, sigma2)).
struct CarlemanWeightSet {
    double s = 1.0;
    double lambda = 1.0;
    int escalations = 0;
    CaseFlag flag = CaseFlag::shared;
    TimeGrid time;

    Eigen::VectorXd psi1, psi2;
    double sup_psi = 0;
    Eigen::VectorXd theta_mid;        // nt entries, theta(t_{n+1/2})
    Eigen::MatrixXd sigma1, sigma2;   // cells x nt midpoint values

    double log_theta(int n) const { return std::log(theta_mid[n]); }

    /// rho^{-2}(x, t_mid) with underflow floored at exp(-690).
    double rho_inv2(Eigen::Index j, int n) const {
        const double smax = std::max(sigma1(j, n), sigma2(j, n));
        return std::exp(std::max(log_theta(n) - 2.0 * smax, -690.0));
    }

    /// log rho^2 (the admissibility weight grows astronomically near t = T,
    /// so it is only ever handled in log space).
    double log_rho2(Eigen::Index j, int n) const {
        return 2.0 * std::max(sigma1(j, n), sigma2(j, n)) - log_theta(n);
    }
};

/// Builds theta/sigma/rho from Psi. lambda doubles (up to 20 times) until
/// sigma > 0 at every evaluated point; s is taken as given.
CarlemanWeightSet build_weights(const SpatialGrid& grid, const PsiField& psi1,
                                const PsiField* psi2, CaseFlag flag, double s, double lambda0,
                                const TimeGrid& time);

struct CarlemanSample {
    double lhs = 0, rhs = 0, ratio = 0;
    double lhs_mu_term = 0;  // the (mu*(N) - mu)-weighted term alone
};

/// Monte Carlo evaluation of the global Carleman inequality on random
/// backward solutions: samples of the weighted-inequality LHS/RHS quotient.
std::vector<CarlemanSample> carleman_ratio(const CarlemanWeightSet& w, const Propagator& prop,
                                           const SpatialGrid& grid, const Mask& omega0,
                                           int n_samples, Rng& rng);

struct AdmissibilityReport {
    double value = 0;          // +inf if the weighted integral overflows
    double log_value = 0;      // log of the integral, always finite
    bool warn = false;         // terminal integrand >> mid-interval integrand
    double terminal_to_mid_log = 0;
};

/// Discrete weighted distance  integral of rho^2 |ybar - y_d|^2 over
/// O_{i,d} x (0,T); diagnostic only, never asserted finite in the limit.
AdmissibilityReport target_admissibility(const Field& ybar, const Field& y_d,
                                         const CarlemanWeightSet& w, const Mask& region,
                                         const Eigen::VectorXd& volume);

} // namespace hh
