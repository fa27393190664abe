#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "gpctc/controller.hpp"
#include "gpctc/dynamics.hpp"
#include "gpctc/errors.hpp"
#include "gpctc/gp.hpp"
#include "gpctc/region.hpp"

namespace gpctc::bounds {

// All scalars entering the ultimate-boundedness analysis.
struct BoundParams {
    double h1 = 0.0, h2 = 0.0, k_C = 0.0;
    double k_p1 = 0.0, k_p2 = 0.0, k_d1 = 0.0, k_d2 = 0.0;
    double qd_d_bound = 0.0;
    double delta = 0.9;          // probability level
    double eps = 0.0, eps2 = 1.0;
    double delta_bar = 0.0;      // sup of the weighted posterior std over the region
    double V0 = 0.0;
    Eigen::VectorXd rkhs_norms;  // per-output ||tau_j||_k surrogates

    double rho() const { return (1.0 + eps2) * (k_C * qd_d_bound + k_d2) / (2.0 * k_p1); }
};

// Greedy maximization of 0.5 log|I + sigma^-2 K| over (budget)-point subsets
// of the candidate columns. Ties resolve to the lowest candidate index.
inline double information_gain(const gp::Hyperparameters& hyper, const Eigen::MatrixXd& candidates,
                               double sigma, int budget,
                               std::vector<int>* selected_out = nullptr) {
    const Eigen::Index m = candidates.cols();
    if (m == 0) throw std::invalid_argument("information_gain: empty candidate set");
    if (budget < 1 || budget > m)
        throw std::invalid_argument("information_gain: budget must be in [1, |candidates|]");
    const double inv_s2 = 1.0 / (sigma * sigma);

    if (budget == m) {
        // no selection freedom: full-set log-determinant
        Eigen::MatrixXd M = inv_s2 * kernel_gram(candidates, hyper);
        M.diagonal().array() += 1.0;
        Eigen::LLT<Eigen::MatrixXd> llt(M);
        if (selected_out) {
            selected_out->resize(m);
            for (Eigen::Index i = 0; i < m; ++i) (*selected_out)[i] = static_cast<int>(i);
        }
        return Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
    }

    std::vector<int> selected;
    Eigen::MatrixXd L(budget, budget);  // chol factor of I + s^-2 K_S, grown row by row
    std::vector<char> used(m, 0);
    double logdet = 0.0;
    const double kxx = hyper.signal_std * hyper.signal_std;

    for (int step = 0; step < budget; ++step) {
        int best = -1;
        double best_gain = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd best_w;
        for (Eigen::Index c = 0; c < m; ++c) {
            if (used[c]) continue;
            Eigen::VectorXd b(step);
            for (int s = 0; s < step; ++s)
                b[s] = inv_s2 * kernel_eval(candidates.col(selected[s]), candidates.col(c), hyper);
            Eigen::VectorXd w =
                L.topLeftCorner(step, step).triangularView<Eigen::Lower>().solve(b);
            const double schur = 1.0 + inv_s2 * kxx - w.squaredNorm();
            const double gain = 0.5 * std::log(std::max(schur, 1e-300));
            if (gain > best_gain + 1e-15) {
                best_gain = gain;
                best = static_cast<int>(c);
                best_w = w;
            }
        }
        used[best] = 1;
        for (int s = 0; s < step; ++s) L(step, s) = best_w[s];
        L(step, step) = std::sqrt(std::max(1.0 + inv_s2 * kxx - best_w.squaredNorm(), 1e-300));
        logdet += 2.0 * std::log(L(step, step));
        selected.push_back(best);
    }
    if (selected_out) *selected_out = selected;
    return 0.5 * logdet;
}

// beta_j = sqrt(2 ||tau_j||_k^2 + 300 gamma_j ln^3((m+1)/(1 - delta^(1/n))))
inline double beta(double rkhs_norm, double gamma, int m, double delta, int n) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("beta: delta must be in (0,1)");
    if (m < 1) throw std::invalid_argument("beta: m must be >= 1");
    if (gamma < 0.0) throw std::invalid_argument("beta: gamma must be nonnegative");
    const double lg = std::log((m + 1.0) / (1.0 - std::pow(delta, 1.0 / n)));
    return std::sqrt(2.0 * rkhs_norm * rkhs_norm + 300.0 * gamma * lg * lg * lg);
}

// RKHS-norm surrogate of the posterior mean: sqrt(alpha^T K alpha).
inline double rkhs_norm_surrogate(const gp::OutputGpModel& model) {
    const Eigen::MatrixXd K = gp::kernel_gram(model.inputs, model.hyper);
    return std::sqrt(std::max(model.weight_vector.dot(K * model.weight_vector), 0.0));
}

// ||beta (.) posterior std|| at one point.
inline double weighted_std_norm(const gp::MultiOutputGp& gp, const Eigen::VectorXd& beta_vec,
                                const Eigen::VectorXd& p) {
    const Eigen::VectorXd var = gp.predict_variance(p);
    return (beta_vec.array() * var.array().sqrt()).matrix().norm();
}

// Delta_bar: grid maximum of ||beta^T Var^(1/2)|| over the region, with a
// 1.05 grid-gap allowance.
inline double model_error_sup(const gp::MultiOutputGp& gp, const Eigen::VectorXd& beta_vec,
                              const Region& region) {
    region.validate();
    if (region.dim() != gp.input_dim())
        throw std::invalid_argument("model_error_sup: region dimension mismatch");
    const long m = region.total_points();
    double sup = 0.0;
    for (long i = 0; i < m; ++i)
        sup = std::max(sup, weighted_std_norm(gp, beta_vec, region.point(i)));
    return 1.05 * sup;
}

// Feasible interval (0, eps_max) for epsilon:
//   eps < min{ k_p1/h2, h1/h2,
//              2 k_d1 / (2 h2 + 2 k_p1 rho^2/(1+eps2)
//                        + (8/3) k_C sqrt(2 V0/(k_p1 - eps h2))) }
// The V0 term makes the third bound implicit in eps; it is resolved by
// bisection on eps <= t3(eps).
inline double epsilon_range(const BoundParams& p) {
    if (p.h1 <= 0 || p.h2 <= 0 || p.k_p1 <= 0 || p.k_d1 <= 0 || p.k_d2 <= 0 || p.eps2 <= 0)
        throw infeasibility_error("epsilon_range: bound constants must be positive");
    const double t1 = p.k_p1 / p.h2;
    const double t2 = p.h1 / p.h2;
    const double rho = p.rho();
    const double fixed_denom = 2.0 * p.h2 + 2.0 * p.k_p1 * rho * rho / (1.0 + p.eps2);

    if (p.V0 <= 0.0 || p.k_C <= 0.0) {
        const double t3 = 2.0 * p.k_d1 / fixed_denom;
        return std::min({t1, t2, t3});
    }
    auto t3_of = [&](double eps) {
        const double gap = p.k_p1 - eps * p.h2;
        if (gap <= 0.0) return 0.0;
        return 2.0 * p.k_d1 /
               (fixed_denom + (8.0 / 3.0) * p.k_C * std::sqrt(2.0 * p.V0 / gap));
    };
    const double cap = std::min(t1, t2) * (1.0 - 1e-12);
    if (cap <= t3_of(cap)) return std::min(t1, t2);
    // g(eps) = t3(eps) - eps is strictly decreasing; bracket and bisect.
    double lo = 0.0, hi = cap;
    if (t3_of(1e-300) <= 0.0)
        throw infeasibility_error("epsilon_range: implicit V0 term leaves no feasible epsilon");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (t3_of(mid) > mid)
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

namespace detail {

// Adaptive 15-point Gauss-Legendre quadrature to an absolute tolerance.
inline double adaptive_gl(const std::function<double(double)>& f, double a, double b, double tol,
                          int depth = 0) {
    static const double xs[8] = {0.0,
                                 0.2011940939974345,
                                 0.3941513470775634,
                                 0.5709721726085388,
                                 0.7244177313601700,
                                 0.8482065834104272,
                                 0.9372733924007059,
                                 0.9879925180204854};
    static const double ws[8] = {0.2025782419255613, 0.1984314853271116, 0.1861610000155622,
                                 0.1662692058169939, 0.1395706779261543, 0.1071592204671719,
                                 0.0703660474881081, 0.0307532419961173};
    auto gl = [&](double lo, double hi) {
        const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
        double s = ws[0] * f(c);
        for (int i = 1; i < 8; ++i) s += ws[i] * (f(c - h * xs[i]) + f(c + h * xs[i]));
        return s * h;
    };
    const double whole = gl(a, b);
    const double mid = 0.5 * (a + b);
    const double split = gl(a, mid) + gl(mid, b);
    if (std::abs(split - whole) < tol || depth > 30) return split;
    return adaptive_gl(f, a, mid, 0.5 * tol, depth + 1) +
           adaptive_gl(f, mid, b, 0.5 * tol, depth + 1);
}

}  // namespace detail

// V = 0.5 edot^T Hhat edot + int_0^e z^T Kp(Var_p(z + q_d)) dz + eps e^T Hhat edot.
// The integral splits into the exact quadratic part for the constant gain
// block and n independent 1-D integrals for the variance-scheduled diagonal.
inline double lyapunov_value(const Eigen::VectorXd& e, const Eigen::VectorXd& edot,
                             const Eigen::VectorXd& q, const dyn::ElEstimates& est,
                             const ctrl::GainSchedule& gains, const gp::MultiOutputGp* gp,
                             double eps, double quad_tol = 1e-9) {
    const int n = est.n;
    const Eigen::MatrixXd H = est.inertia(q);
    double V = 0.5 * edot.dot(H * edot) + eps * e.dot(H * edot);
    V += 0.5 * e.dot(gains.Kp_base * e);
    if (gains.kind == ctrl::ControllerKind::gpr_variable && gp != nullptr &&
        gains.Kp_scale != 0.0) {
        const Eigen::VectorXd q_d = q - e;
        for (int i = 0; i < n; ++i) {
            if (std::abs(e[i]) < 1e-300) continue;
            const auto* models = gp->marginal_models(ctrl::var_p_spec(n, i));
            const auto& model = (*models)[i];
            auto integrand = [&](double z) {
                Eigen::VectorXd x(1);
                x[0] = z + q_d[i];
                return z * model.predict_variance(x);
            };
            V += gains.Kp_scale * detail::adaptive_gl(integrand, 0.0, e[i], quad_tol);
        }
    }
    return V;
}

struct RadiusResult {
    double r = 0.0, xi = 0.0, varrho = 0.0, v1 = 0.0, v2 = 0.0;
};

// v1 = -eps h2 + k_d1 - (eps rho / 2)(k_C qd_bar + k_d2)
// v2 = k_p1 eps2 / (1 + eps2)
// xi = (2/3) min{eps v2, v1 - (4/3) eps k_C sqrt(2 V0/(k_p1 - eps h2))}
//      / max{eps h2 + k_p2, (1+eps) h2}
// varrho = Delta^2/v1 + eps Delta^2/v2,  r = sqrt(2 varrho / (xi min{...}))
inline RadiusResult ultimate_bound_radius(const BoundParams& p) {
    RadiusResult res;
    const double rho = p.rho();
    res.v1 = -p.eps * p.h2 + p.k_d1 - 0.5 * p.eps * rho * (p.k_C * p.qd_d_bound + p.k_d2);
    res.v2 = p.k_p1 * p.eps2 / (1.0 + p.eps2);
    if (res.v1 <= 0.0) throw infeasibility_error("ultimate_bound_radius: v1 <= 0");
    if (res.v2 <= 0.0) throw infeasibility_error("ultimate_bound_radius: v2 <= 0");
    const double gap_p = p.k_p1 - p.eps * p.h2;
    const double gap_h = p.h1 - p.eps * p.h2;
    if (gap_p <= 0.0 || gap_h <= 0.0)
        throw infeasibility_error("ultimate_bound_radius: k_p1 - eps h2 or h1 - eps h2 <= 0");
    const double v0_term = (p.V0 > 0.0)
                               ? (4.0 / 3.0) * p.eps * p.k_C * std::sqrt(2.0 * p.V0 / gap_p)
                               : 0.0;
    const double num = std::min(p.eps * res.v2, res.v1 - v0_term);
    const double den = std::max(p.eps * p.h2 + p.k_p2, (1.0 + p.eps) * p.h2);
    res.xi = (2.0 / 3.0) * num / den;
    if (res.xi <= 0.0) throw infeasibility_error("ultimate_bound_radius: xi <= 0");
    res.varrho = p.delta_bar * p.delta_bar / res.v1 + p.eps * p.delta_bar * p.delta_bar / res.v2;
    res.r = std::sqrt(2.0 * res.varrho / (res.xi * std::min(gap_p, gap_h)));
    return res;
}

struct SchurResult {
    bool negative_definite = false;
    double min_eig_M = 0.0;
};

// Block criterion for negative definiteness of the Lyapunov-drift matrix
//   M = [ -Kd + eps Hhat           eps/2 (Chat - Kd) ]
//       [ eps/2 (Chat^T - Kd)      -eps Kp           ]
// via the Schur complement of the symmetrized matrix; also reports the
// minimum eigenvalue of sym(M) for cross-validation.
inline SchurResult schur_definiteness_check(const Eigen::MatrixXd& Kp, const Eigen::MatrixXd& Kd,
                                            const Eigen::MatrixXd& Chat,
                                            const Eigen::MatrixXd& Hhat, double eps) {
    const Eigen::Index n = Kp.rows();
    const Eigen::MatrixXd M11 = -Kd + eps * Hhat;
    const Eigen::MatrixXd M12 = 0.5 * eps * (Chat - Kd.transpose());
    const Eigen::MatrixXd M21 = 0.5 * eps * (Chat.transpose() - Kd);
    const Eigen::MatrixXd M22 = -eps * Kp;

    Eigen::MatrixXd M(2 * n, 2 * n);
    M << M11, M12, M21, M22;
    const Eigen::MatrixXd Ms = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Ms);
    SchurResult res;
    res.min_eig_M = eig.eigenvalues().minCoeff();

    const Eigen::MatrixXd A = 0.5 * (M11 + M11.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigA(A);
    if (eigA.eigenvalues().maxCoeff() >= 0.0) {
        res.negative_definite = false;
        return res;
    }
    const Eigen::MatrixXd B = 0.5 * (M12 + M21.transpose());
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) throw numerical_error("schur_definiteness_check: singular M11 block");
    const Eigen::MatrixXd S = 0.5 * (M22 + M22.transpose()) - B.transpose() * lu.solve(B);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigS(0.5 * (S + S.transpose()));
    res.negative_definite = eigS.eigenvalues().maxCoeff() < 0.0;
    return res;
}

// Monte-Carlo validation of the probabilistic model-error bound: the
// fraction of sampled p in Omega with ||Mean - tau|| <= ||beta^T Var^(1/2)||.
inline double empirical_bound_coverage(
    const gp::MultiOutputGp& gp, const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& true_residual,
    const Eigen::VectorXd& beta_vec, const Region& region, int n_samples,
    unsigned long seed = 0) {
    std::mt19937_64 rng(seed);
    int hits = 0;
    for (int s = 0; s < n_samples; ++s) {
        const Eigen::VectorXd p = region.sample(rng);
        const double err = (gp.predict_mean(p) - true_residual(p)).norm();
        if (err <= weighted_std_norm(gp, beta_vec, p)) ++hits;
    }
    return static_cast<double>(hits) / n_samples;
}

}  // namespace gpctc::bounds
