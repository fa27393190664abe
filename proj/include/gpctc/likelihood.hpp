#pragma once

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "gpctc/gp.hpp"
#include "gpctc/kernel.hpp"

namespace gpctc::gp {

struct LikelihoodResult {
    double value = 0.0;
    Eigen::VectorXd gradient;  // w.r.t. log-hyperparameters
};

namespace detail {

// Parameter vector layout in log-space:
//   [log signal_std, log l_1 .. log l_d (or a single log l if tied), log noise_std]
inline Hyperparameters unpack(const Eigen::VectorXd& theta, int input_dim, bool tied) {
    Hyperparameters h;
    h.signal_std = std::exp(theta[0]);
    h.lengthscales.resize(input_dim);
    if (tied)
        h.lengthscales.setConstant(std::exp(theta[1]));
    else
        for (int d = 0; d < input_dim; ++d) h.lengthscales[d] = std::exp(theta[1 + d]);
    h.noise_std = std::exp(theta[theta.size() - 1]);
    return h;
}

inline Eigen::VectorXd pack(const Hyperparameters& h, bool tied) {
    const int d = static_cast<int>(h.lengthscales.size());
    Eigen::VectorXd theta(tied ? 3 : d + 2);
    theta[0] = std::log(h.signal_std);
    if (tied)
        theta[1] = std::log(h.lengthscales[0]);
    else
        for (int i = 0; i < d; ++i) theta[1 + i] = std::log(h.lengthscales[i]);
    theta[theta.size() - 1] = std::log(h.noise_std);
    return theta;
}

}  // namespace detail

// log P(y | X, hyper) for one output dimension, with analytic gradient with
// respect to the log-hyperparameters.
inline LikelihoodResult log_marginal_likelihood(const Eigen::MatrixXd& X,
                                                const Eigen::VectorXd& y,
                                                const Hyperparameters& hyper,
                                                bool tied_lengthscales = false) {
    if (y.size() != X.cols()) throw std::invalid_argument("log_marginal_likelihood: size mismatch");
    if (X.cols() < 1) throw std::invalid_argument("log_marginal_likelihood: empty data");
    hyper.validate();
    const Eigen::Index m = X.cols();
    const int d = static_cast<int>(X.rows());

    Eigen::MatrixXd Kse = kernel_gram(X, hyper);  // noise-free part
    Eigen::MatrixXd Ks = Kse;
    Ks.diagonal().array() += hyper.noise_std * hyper.noise_std;
    auto llt = detail::robust_llt(Ks, Kse.trace());
    const Eigen::MatrixXd L = llt.matrixL();
    const Eigen::VectorXd alpha = llt.solve(y);

    LikelihoodResult res;
    res.value = -0.5 * y.dot(alpha) - L.diagonal().array().log().sum() -
                0.5 * static_cast<double>(m) * std::log(2.0 * M_PI);

    // dL/dtheta = 0.5 * tr((alpha alpha^T - Ks^-1) dK/dtheta)
    Eigen::MatrixXd Kinv = llt.solve(Eigen::MatrixXd::Identity(m, m));
    Eigen::MatrixXd W = alpha * alpha.transpose() - Kinv;

    const int n_len = tied_lengthscales ? 1 : d;
    res.gradient = Eigen::VectorXd::Zero(n_len + 2);
    // signal_std: dK/dlog(sf) = 2 * Kse
    res.gradient[0] = W.cwiseProduct(Kse).sum();
    // lengthscales: dK_ij/dlog(l_k) = Kse_ij * (x_k - x'_k)^2 / l_k^2
    for (int k = 0; k < d; ++k) {
        const double inv_l2 = 1.0 / (hyper.lengthscales[k] * hyper.lengthscales[k]);
        double g = 0.0;
        for (Eigen::Index j = 0; j < m; ++j)
            for (Eigen::Index i = 0; i < m; ++i) {
                const double dx = X(k, i) - X(k, j);
                g += W(i, j) * Kse(i, j) * dx * dx * inv_l2;
            }
        if (tied_lengthscales)
            res.gradient[1] += 0.5 * g;
        else
            res.gradient[1 + k] = 0.5 * g;
    }
    // noise_std: dK/dlog(sn) = 2 sn^2 I
    res.gradient[n_len + 1] = hyper.noise_std * hyper.noise_std * W.trace();
    return res;
}

struct OptimizeOptions {
    int max_iters = 200;
    double tolerance = 1e-6;  // gradient-norm stopping criterion
    int restarts = 0;         // random restarts beyond the supplied init
    unsigned long seed = 0;
    bool tied_lengthscales = false;
};

namespace detail {

struct GslObjectiveData {
    const Eigen::MatrixXd* X;
    const Eigen::VectorXd* y;
    int input_dim;
    bool tied;
    bool failed;
};

inline double gsl_f(const gsl_vector* v, void* params) {
    auto* data = static_cast<GslObjectiveData*>(params);
    Eigen::VectorXd theta(v->size);
    for (size_t i = 0; i < v->size; ++i) theta[static_cast<Eigen::Index>(i)] = gsl_vector_get(v, i);
    try {
        auto r = log_marginal_likelihood(*data->X, *data->y, unpack(theta, data->input_dim, data->tied),
                                         data->tied);
        return -r.value;
    } catch (const numerical_error&) {
        data->failed = true;
        return 1e300;
    }
}

inline void gsl_df(const gsl_vector* v, void* params, gsl_vector* grad) {
    auto* data = static_cast<GslObjectiveData*>(params);
    Eigen::VectorXd theta(v->size);
    for (size_t i = 0; i < v->size; ++i) theta[static_cast<Eigen::Index>(i)] = gsl_vector_get(v, i);
    try {
        auto r = log_marginal_likelihood(*data->X, *data->y, unpack(theta, data->input_dim, data->tied),
                                         data->tied);
        for (size_t i = 0; i < v->size; ++i)
            gsl_vector_set(grad, i, -r.gradient[static_cast<Eigen::Index>(i)]);
    } catch (const numerical_error&) {
        data->failed = true;
        gsl_vector_set_all(grad, 0.0);
    }
}

inline void gsl_fdf(const gsl_vector* v, void* params, double* f, gsl_vector* grad) {
    *f = gsl_f(v, params);
    gsl_df(v, params, grad);
}

// One BFGS run from theta0; returns the best point visited.
inline std::pair<Eigen::VectorXd, double> minimize_from(const Eigen::MatrixXd& X,
                                                        const Eigen::VectorXd& y,
                                                        Eigen::VectorXd theta0, bool tied,
                                                        int max_iters, double tol) {
    GslObjectiveData data{&X, &y, static_cast<int>(X.rows()), tied, false};
    const size_t np = static_cast<size_t>(theta0.size());

    gsl_multimin_function_fdf obj;
    obj.n = np;
    obj.f = &gsl_f;
    obj.df = &gsl_df;
    obj.fdf = &gsl_fdf;
    obj.params = &data;

    gsl_vector* x = gsl_vector_alloc(np);
    for (size_t i = 0; i < np; ++i) gsl_vector_set(x, i, theta0[static_cast<Eigen::Index>(i)]);

    gsl_multimin_fdfminimizer* s =
        gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, np);
    gsl_multimin_fdfminimizer_set(s, &obj, x, 0.1, 0.1);

    Eigen::VectorXd best = theta0;
    double best_f = s->f;
    for (int iter = 0; iter < max_iters; ++iter) {
        int status = gsl_multimin_fdfminimizer_iterate(s);
        if (s->f < best_f && std::isfinite(s->f)) {
            best_f = s->f;
            for (size_t i = 0; i < np; ++i)
                best[static_cast<Eigen::Index>(i)] = gsl_vector_get(s->x, i);
        }
        if (status) break;  // no further progress possible
        if (gsl_multimin_test_gradient(s->gradient, tol) == GSL_SUCCESS) break;
    }
    gsl_multimin_fdfminimizer_free(s);
    gsl_vector_free(x);
    if (data.failed && !std::isfinite(best_f)) throw numerical_error("hyperparameter optimization failed");
    return {best, best_f};
}

}  // namespace detail

// Maximize the log marginal likelihood per output in log-parameter space.
// Never returns hyperparameters worse than the supplied init.
inline std::vector<Hyperparameters> optimize_hyperparameters(
    const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
    const std::vector<Hyperparameters>& init, const OptimizeOptions& opts = {}) {
    if (static_cast<Eigen::Index>(init.size()) != Y.cols())
        throw std::invalid_argument("optimize_hyperparameters: one init per output required");
    gsl_set_error_handler_off();

    std::vector<Hyperparameters> result;
    for (Eigen::Index out = 0; out < Y.cols(); ++out) {
        const Eigen::VectorXd y = Y.col(out);
        const Eigen::VectorXd theta_init = detail::pack(init[out], opts.tied_lengthscales);
        const auto init_lik =
            log_marginal_likelihood(X, y, init[out], opts.tied_lengthscales);

        if (opts.max_iters == 0 || init_lik.gradient.norm() < opts.tolerance) {
            result.push_back(init[out]);
            continue;
        }

        Eigen::VectorXd best_theta = theta_init;
        double best_f = -init_lik.value;
        std::mt19937_64 rng(opts.seed + 0x9e3779b9ull * static_cast<unsigned long>(out));
        std::normal_distribution<double> perturb(0.0, 1.0);
        int failures = 0;
        for (int r = 0; r <= opts.restarts; ++r) {
            Eigen::VectorXd theta0 = theta_init;
            if (r > 0)
                for (Eigen::Index i = 0; i < theta0.size(); ++i) theta0[i] += perturb(rng);
            try {
                auto [theta, f] = detail::minimize_from(X, y, theta0, opts.tied_lengthscales,
                                                        opts.max_iters, opts.tolerance);
                if (f < best_f) {
                    best_f = f;
                    best_theta = theta;
                }
            } catch (const numerical_error&) {
                ++failures;
            }
        }
        if (failures == opts.restarts + 1)
            throw numerical_error("optimize_hyperparameters: all restarts failed conditioning");
        result.push_back(detail::unpack(best_theta, static_cast<int>(X.rows()),
                                        opts.tied_lengthscales));
    }
    return result;
}

}  // namespace gpctc::gp
