#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "gpctc/errors.hpp"

namespace gpctc::dyn {

// p = [qdd; qd; q]
struct StateTriple {
    Eigen::VectorXd qdd, qd, q;

    Eigen::VectorXd stacked() const {
        Eigen::VectorXd p(qdd.size() + qd.size() + q.size());
        p << qdd, qd, q;
        return p;
    }

    static StateTriple from_stacked(const Eigen::VectorXd& p) {
        const Eigen::Index n = p.size() / 3;
        if (3 * n != p.size()) throw std::invalid_argument("StateTriple: stacked size not 3n");
        return {p.segment(0, n), p.segment(n, n), p.segment(2 * n, n)};
    }
};

using InertiaFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
using CoriolisFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;
using GravityFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using UnknownFn = std::function<Eigen::VectorXd(const StateTriple&)>;

// Fully-actuated Euler-Lagrange system: H(q) qdd + C(q,qd) qd + g(q) - f_u(p) = u.
struct ElModel {
    int n = 0;
    InertiaFn inertia;
    CoriolisFn coriolis;
    GravityFn gravity;
    UnknownFn unknown;  // may be empty (treated as zero)

    Eigen::VectorXd f_u(const StateTriple& p) const {
        return unknown ? unknown(p) : Eigen::VectorXd::Zero(n);
    }
};

// Estimated parametric model plus its structural bound constants.
struct ElEstimates {
    int n = 0;
    InertiaFn inertia;
    CoriolisFn coriolis;
    GravityFn gravity;
    double h1 = 0.0, h2 = 0.0, k_C = 0.0;

    Eigen::VectorXd torque(const StateTriple& p) const {
        return inertia(p.q) * p.qdd + coriolis(p.q, p.qd) * p.qd + gravity(p.q);
    }
};

// Coriolis matrix via Christoffel symbols with central-difference partials of H.
// C_ij = sum_k 0.5 (dH_ij/dq_k + dH_ik/dq_j - dH_jk/dq_i) qd_k
inline Eigen::MatrixXd coriolis_from_inertia(const InertiaFn& inertia, const Eigen::VectorXd& q,
                                             const Eigen::VectorXd& qd, double h = 1e-6) {
    const int n = static_cast<int>(q.size());
    // dH[k](i,j) = dH_ij / dq_k
    std::vector<Eigen::MatrixXd> dH(n);
    for (int k = 0; k < n; ++k) {
        Eigen::VectorXd qp = q, qm = q;
        qp[k] += h;
        qm[k] -= h;
        dH[k] = (inertia(qp) - inertia(qm)) / (2.0 * h);
    }
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                C(i, j) += 0.5 * (dH[k](i, j) + dH[j](i, k) - dH[i](j, k)) * qd[k];
    return C;
}

// Planar 2-link arm under gravity: point masses at the link midpoints, no
// link inertia, frictionless revolute joints, gravity along -y.
// Closed-form H, Christoffel C, and g.
inline ElModel two_link_model(double m1, double m2, double l1, double l2,
                              double grav = 9.81) {
    if (m1 <= 0 || m2 <= 0 || l1 <= 0 || l2 <= 0)
        throw std::invalid_argument("two_link_model: parameters must be positive");
    // point masses at the link tips (Murray et al., two-link example); with a
    // mid-link placement the case-study disturbance term makes the effective
    // inertia indefinite along the nominal trajectory and no bounded closed
    // loop exists
    const double lc1 = l1, lc2 = l2;
    ElModel model;
    model.n = 2;
    model.inertia = [=](const Eigen::VectorXd& q) {
        const double c2 = std::cos(q[1]);
        Eigen::MatrixXd H(2, 2);
        H(0, 0) = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2);
        H(0, 1) = H(1, 0) = m2 * (lc2 * lc2 + l1 * lc2 * c2);
        H(1, 1) = m2 * lc2 * lc2;
        return H;
    };
    model.coriolis = [=](const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
        const double hh = -m2 * l1 * lc2 * std::sin(q[1]);
        Eigen::MatrixXd C(2, 2);
        C(0, 0) = hh * qd[1];
        C(0, 1) = hh * (qd[0] + qd[1]);
        C(1, 0) = -hh * qd[0];
        C(1, 1) = 0.0;
        return C;
    };
    model.gravity = [=](const Eigen::VectorXd& q) {
        Eigen::VectorXd g(2);
        const double c1 = std::cos(q[0]);
        const double c12 = std::cos(q[0] + q[1]);
        g[0] = (m1 * lc1 + m2 * l1) * grav * c1 + m2 * lc2 * grav * c12;
        g[1] = m2 * lc2 * grav * c12;
        return g;
    };
    return model;
}

// Residual torque the 2-link case study injects as its unknown dynamics.
inline UnknownFn two_link_unknown() {
    return [](const StateTriple& p) {
        Eigen::VectorXd f(2);
        f[0] = std::sin(2.0 * p.qd[1]) + std::cos(2.0 * p.q[0]) + p.qdd[0];
        f[1] = std::sin(2.0 * p.qd[1]) + 2.0 * std::sin(p.qd[0]);
        return f;
    };
}

// 1-DOF benchmark family: H = 1, C = 1 (damping), g(q) = q, and an unknown
// term parameterized by c. The cos^-1 in the source expression is the
// reciprocal, so the denominator magnitude never drops below 0.1.
inline ElModel one_dof_model(double c) {
    ElModel model;
    model.n = 1;
    model.inertia = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Identity(1, 1); };
    model.coriolis = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
        return Eigen::MatrixXd::Identity(1, 1);
    };
    model.gravity = [](const Eigen::VectorXd& q) { return q; };
    model.unknown = [c](const StateTriple& p) {
        const double cq = std::cos(p.q[0] - c);
        double denom;
        if (std::abs(cq) < 1e-12) {
            denom = (cq >= 0.0 ? -1.1e12 : 1.1e12);  // 1/cos dominates
        } else {
            denom = cq - 1.1 / cq;
        }
        Eigen::VectorXd f(1);
        f[0] = (p.qd[0] * p.qd[0] * std::sin(p.q[0] - c) - std::sin(c)) / denom;
        return f;
    };
    return model;
}

// (H - Hhat) qdd + (C - Chat) qd + (g - ghat) - f_u(p)
inline Eigen::VectorXd residual_tau(const ElModel& model, const ElEstimates& est,
                                    const StateTriple& p) {
    const Eigen::VectorXd true_torque =
        model.inertia(p.q) * p.qdd + model.coriolis(p.q, p.qd) * p.qd + model.gravity(p.q) -
        model.f_u(p);
    return true_torque - est.torque(p);
}

// Solve H qdd = u - C qd - g + f_u([qdd; qd; q]) for qdd. f_u may depend on
// qdd, so the implicit equation is solved by Newton iteration with a
// finite-difference Jacobian of f_u in qdd (exact in one step when the qdd
// dependence is linear, as in the 2-link case study).
// Explicit acceleration with the unknown-dynamics term evaluated at a held
// acceleration value. Used by the simulator, which feeds the previous step's
// acceleration into f_u — the same convention as the measured-acceleration
// channel of the controller — so no algebraic loop arises.
inline Eigen::VectorXd forward_dynamics_held(const ElModel& model, const Eigen::VectorXd& q,
                                             const Eigen::VectorXd& qd, const Eigen::VectorXd& u,
                                             const Eigen::VectorXd& qdd_held) {
    Eigen::VectorXd rhs = u - model.coriolis(q, qd) * qd - model.gravity(q);
    if (model.unknown) rhs += model.f_u({qdd_held, qd, q});
    return Eigen::LDLT<Eigen::MatrixXd>(model.inertia(q)).solve(rhs);
}

inline Eigen::VectorXd forward_dynamics(const ElModel& model, const Eigen::VectorXd& q,
                                        const Eigen::VectorXd& qd, const Eigen::VectorXd& u,
                                        int max_iters = 100) {
    const int n = model.n;
    const Eigen::MatrixXd H = model.inertia(q);
    const Eigen::VectorXd rhs0 = u - model.coriolis(q, qd) * qd - model.gravity(q);
    Eigen::LDLT<Eigen::MatrixXd> hsolver(H);
    Eigen::VectorXd qdd = hsolver.solve(rhs0);
    if (!model.unknown) return qdd;

    const double scale = 1.0 + rhs0.norm();
    double residual = std::numeric_limits<double>::infinity();
    double best_residual = residual;
    Eigen::VectorXd best_qdd = qdd;
    for (int it = 0; it < max_iters; ++it) {
        const Eigen::VectorXd F = H * qdd - rhs0 - model.f_u({qdd, qd, q});
        residual = F.norm();
        if (residual < best_residual) {
            best_residual = residual;
            best_qdd = qdd;
        }
        if (residual < 1e-12 * scale) return qdd;
        // J = H - df_u/dqdd
        Eigen::MatrixXd J = H;
        for (int k = 0; k < n; ++k) {
            const double h = 1e-7 * (1.0 + std::abs(qdd[k]));
            Eigen::VectorXd qp = qdd, qm = qdd;
            qp[k] += h;
            qm[k] -= h;
            J.col(k) -= (model.f_u({qp, qd, q}) - model.f_u({qm, qd, q})) / (2.0 * h);
        }
        qdd -= J.partialPivLu().solve(F);
    }
    if (best_residual < 1e-9 * scale) return best_qdd;
    throw dynamics_error("forward_dynamics: implicit solve did not converge, last residual " +
                         std::to_string(best_residual));
}

}  // namespace gpctc::dyn
