#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "gpctc/errors.hpp"

namespace gpctc::gp {

// Squared-exponential kernel with per-dimension (ARD) lengthscales.
struct Hyperparameters {
    double signal_std = 1.0;
    Eigen::VectorXd lengthscales;  // one per input dimension
    double noise_std = 1e-2;

    void validate() const {
        if (!(signal_std > 0.0) || !(noise_std > 0.0))
            throw std::invalid_argument("hyperparameters must be strictly positive");
        if (lengthscales.size() == 0 || (lengthscales.array() <= 0.0).any())
            throw std::invalid_argument("lengthscales must be strictly positive");
    }

    // Hyperparameters for the kernel restricted to a subset of input
    // dimensions: same signal/noise, retained lengthscales only.
    Hyperparameters restrict(const std::vector<int>& dims) const {
        Hyperparameters h;
        h.signal_std = signal_std;
        h.noise_std = noise_std;
        h.lengthscales.resize(static_cast<Eigen::Index>(dims.size()));
        for (size_t i = 0; i < dims.size(); ++i) h.lengthscales[static_cast<Eigen::Index>(i)] = lengthscales[dims[i]];
        return h;
    }
};

inline double kernel_eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                          const Hyperparameters& hyper) {
    if (x.size() != y.size() || x.size() != hyper.lengthscales.size())
        throw std::invalid_argument("kernel_eval: dimension mismatch");
    const double d2 = ((x - y).array() / hyper.lengthscales.array()).square().sum();
    return hyper.signal_std * hyper.signal_std * std::exp(-0.5 * d2);
}

// Gram matrix over the columns of X.
inline Eigen::MatrixXd kernel_gram(const Eigen::MatrixXd& X, const Hyperparameters& hyper) {
    const Eigen::Index m = X.cols();
    Eigen::MatrixXd K(m, m);
    const double s2 = hyper.signal_std * hyper.signal_std;
    for (Eigen::Index j = 0; j < m; ++j) {
        K(j, j) = s2;
        for (Eigen::Index i = j + 1; i < m; ++i) {
            const double d2 =
                ((X.col(i) - X.col(j)).array() / hyper.lengthscales.array()).square().sum();
            K(i, j) = K(j, i) = s2 * std::exp(-0.5 * d2);
        }
    }
    return K;
}

// Cross-covariance vector k(x*, X).
inline Eigen::VectorXd kernel_vector(const Eigen::VectorXd& x, const Eigen::MatrixXd& X,
                                     const Hyperparameters& hyper) {
    Eigen::VectorXd k(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) k[j] = kernel_eval(x, X.col(j), hyper);
    return k;
}

}  // namespace gpctc::gp
