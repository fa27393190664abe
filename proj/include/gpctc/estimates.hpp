#pragma once

#include <Eigen/Eigenvalues>

#include "gpctc/dynamics.hpp"
#include "gpctc/region.hpp"

namespace gpctc::dyn {

// Numerically determine the structural bound constants of an estimated
// model: h1/h2 from the inertia spectrum over a grid on the q-region and
// k_C from ||Chat(q, qd)|| / ||qd|| over sampled (q, qd). A 5% safety
// margin is applied on each side.
inline void compute_bound_constants(ElEstimates& est, const Region& q_region,
                                    const Region& qd_region, unsigned long seed = 1,
                                    int n_qd_samples = 200) {
    double h1 = std::numeric_limits<double>::infinity();
    double h2 = 0.0;
    double k_C = 0.0;
    std::mt19937_64 rng(seed);
    const long mq = q_region.total_points();
    for (long i = 0; i < mq; ++i) {
        const Eigen::VectorXd q = q_region.point(i);
        const Eigen::MatrixXd H = est.inertia(q);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (H + H.transpose()));
        h1 = std::min(h1, eig.eigenvalues().minCoeff());
        h2 = std::max(h2, eig.eigenvalues().maxCoeff());
        for (int s = 0; s < n_qd_samples / static_cast<int>(std::max(mq / 8, 1L)) + 1; ++s) {
            const Eigen::VectorXd qd = qd_region.sample(rng);
            const double qdn = qd.norm();
            if (qdn < 1e-12) continue;
            const Eigen::MatrixXd C = est.coriolis(q, qd);
            k_C = std::max(k_C, C.operatorNorm() / qdn);
        }
    }
    est.h1 = 0.95 * h1;
    est.h2 = 1.05 * h2;
    est.k_C = std::max(1.05 * k_C, 1e-12);
}

// Estimated 2-link model built from estimated masses/lengths.
inline ElEstimates two_link_estimates(double m1_hat, double m2_hat, double l1_hat,
                                      double l2_hat, double grav = 9.81) {
    const ElModel m = two_link_model(m1_hat, m2_hat, l1_hat, l2_hat, grav);
    ElEstimates est;
    est.n = 2;
    est.inertia = m.inertia;
    est.coriolis = m.coriolis;
    est.gravity = m.gravity;
    return est;
}

// The 1-DOF benchmark's parametric estimates: Hhat = Chat = 1, ghat(q) = q.
inline ElEstimates one_dof_estimates() {
    ElEstimates est;
    est.n = 1;
    est.inertia = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Identity(1, 1); };
    est.coriolis = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
        return Eigen::MatrixXd::Identity(1, 1);
    };
    est.gravity = [](const Eigen::VectorXd& q) { return q; };
    est.h1 = 1.0;
    est.h2 = 1.0;
    est.k_C = 1.0;
    return est;
}

}  // namespace gpctc::dyn
