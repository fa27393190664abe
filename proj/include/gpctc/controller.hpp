#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>

#include "gpctc/dynamics.hpp"
#include "gpctc/gp.hpp"

namespace gpctc::ctrl {

enum class ControllerKind { classic_static, gpr_static, gpr_variable };

inline const char* to_string(ControllerKind k) {
    switch (k) {
        case ControllerKind::classic_static: return "classic_static";
        case ControllerKind::gpr_static: return "gpr_static";
        case ControllerKind::gpr_variable: return "gpr_variable";
    }
    return "?";
}

// Affine-in-variance gain schedule: K = base + scale * diag(Var).
struct GainSchedule {
    ControllerKind kind = ControllerKind::classic_static;
    Eigen::MatrixXd Kp_base, Kd_base;
    double Kp_scale = 0.0, Kd_scale = 0.0;
    // Assumption-style bound constants; filled by finalize_bounds().
    double k_p1 = 0.0, k_p2 = 0.0, k_d1 = 0.0, k_d2 = 0.0;

    Eigen::MatrixXd Kp(const Eigen::VectorXd& var_p) const {
        if (kind == ControllerKind::gpr_variable)
            return Kp_base + Kp_scale * var_p.asDiagonal().toDenseMatrix();
        return Kp_base;
    }
    Eigen::MatrixXd Kd(const Eigen::VectorXd& var_d) const {
        if (kind == ControllerKind::gpr_variable)
            return Kd_base + Kd_scale * var_d.asDiagonal().toDenseMatrix();
        return Kd_base;
    }

    // k1 = lambda_min(base); k2 = lambda_max(base) + scale * max prior variance.
    void finalize_bounds(double max_signal_var) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ep(Kp_base), ed(Kd_base);
        k_p1 = ep.eigenvalues().minCoeff();
        k_d1 = ed.eigenvalues().minCoeff();
        const double scale_p = (kind == ControllerKind::gpr_variable) ? Kp_scale : 0.0;
        const double scale_d = (kind == ControllerKind::gpr_variable) ? Kd_scale : 0.0;
        k_p2 = ep.eigenvalues().maxCoeff() + scale_p * max_signal_var;
        k_d2 = ed.eigenvalues().maxCoeff() + scale_d * max_signal_var;
    }
};

struct DesiredTrajectory {
    std::function<Eigen::VectorXd(double)> q_d, qd_d, qdd_d;
    double q_bound = 0.0, qd_bound = 0.0;
};

// offset_i + amp_i * sin(omega_i t + phase_i) per coordinate.
inline DesiredTrajectory sinusoid_trajectory(const Eigen::VectorXd& amp,
                                             const Eigen::VectorXd& omega,
                                             const Eigen::VectorXd& phase,
                                             const Eigen::VectorXd& offset = Eigen::VectorXd()) {
    DesiredTrajectory tr;
    const Eigen::VectorXd off =
        offset.size() == amp.size() ? offset : Eigen::VectorXd::Zero(amp.size()).eval();
    tr.q_d = [=](double t) {
        return (off.array() + amp.array() * (omega.array() * t + phase.array()).sin())
            .matrix()
            .eval();
    };
    tr.qd_d = [=](double t) {
        return (amp.array() * omega.array() * (omega.array() * t + phase.array()).cos())
            .matrix()
            .eval();
    };
    tr.qdd_d = [=](double t) {
        return (-amp.array() * omega.array().square() *
                (omega.array() * t + phase.array()).sin())
            .matrix()
            .eval();
    };
    tr.q_bound = amp.norm() + off.norm();
    tr.qd_bound = (amp.array() * omega.array()).matrix().norm();
    return tr;
}

struct ControlDiagnostics {
    Eigen::MatrixXd Kp_eval, Kd_eval;
    Eigen::VectorXd mean_comp;  // GP compensation term
    Eigen::VectorXd var_p, var_d;
};

// Subset specs of the GP input p = [qdd; qd; q].
inline gp::SubsetSpec var_d_spec(int n) {
    gp::SubsetSpec s;
    for (int i = n; i < 3 * n; ++i) s.indices.push_back(i);
    return s;
}
inline gp::SubsetSpec var_p_spec(int n, int coord) {
    return gp::SubsetSpec{{2 * n + coord}};
}

// diag entry i of Var_p is var(tau_i | q_i, D): output i conditioned on its
// own scalar coordinate.
inline Eigen::VectorXd eval_var_p(const gp::MultiOutputGp& gp, const Eigen::VectorXd& q) {
    const int n = static_cast<int>(q.size());
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) {
        const auto* models = gp.marginal_models(var_p_spec(n, i));
        v[i] = (*models)[i].predict_variance(q.segment(i, 1));
    }
    return v;
}

inline Eigen::VectorXd eval_var_d(const gp::MultiOutputGp& gp, const Eigen::VectorXd& qd,
                                  const Eigen::VectorXd& q) {
    const int n = static_cast<int>(q.size());
    Eigen::VectorXd x(2 * n);
    x << qd, q;
    return gp.marginal_variance(var_d_spec(n), x);
}

// u = Hhat qdd_d + Chat(q, qd) qd_d + ghat + Mean(tau | p, D)
//     - Kd(Var_d) edot - Kp(Var_p) e
inline Eigen::VectorXd ctc_gpr_control(const dyn::ElEstimates& est,
                                       const gp::MultiOutputGp* gp, const GainSchedule& gains,
                                       const dyn::StateTriple& meas,
                                       const DesiredTrajectory& des, double t,
                                       ControlDiagnostics* diag = nullptr) {
    const int n = est.n;
    const Eigen::VectorXd q_d = des.q_d(t);
    const Eigen::VectorXd qd_d = des.qd_d(t);
    const Eigen::VectorXd qdd_d = des.qdd_d(t);
    const Eigen::VectorXd e = meas.q - q_d;
    const Eigen::VectorXd edot = meas.qd - qd_d;

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd var_p = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd var_d = Eigen::VectorXd::Zero(n);
    if (gains.kind != ControllerKind::classic_static && gp != nullptr) {
        mean = gp->predict_mean(meas.stacked());
        if (gains.kind == ControllerKind::gpr_variable) {
            var_p = eval_var_p(*gp, meas.q);
            var_d = eval_var_d(*gp, meas.qd, meas.q);
        }
    }
    const Eigen::MatrixXd Kp = gains.Kp(var_p);
    const Eigen::MatrixXd Kd = gains.Kd(var_d);
    const Eigen::VectorXd u = est.inertia(meas.q) * qdd_d + est.coriolis(meas.q, meas.qd) * qd_d +
                              est.gravity(meas.q) + mean - Kd * edot - Kp * e;
    if (diag) {
        diag->Kp_eval = Kp;
        diag->Kd_eval = Kd;
        diag->mean_comp = mean;
        diag->var_p = var_p;
        diag->var_d = var_d;
    }
    return u;
}

// Classic CTC: the same structure with zero GP compensation and fixed gains.
inline Eigen::VectorXd classic_ctc_control(const dyn::ElEstimates& est,
                                           const Eigen::MatrixXd& Kp, const Eigen::MatrixXd& Kd,
                                           const dyn::StateTriple& meas,
                                           const DesiredTrajectory& des, double t,
                                           ControlDiagnostics* diag = nullptr) {
    GainSchedule gains;
    gains.kind = ControllerKind::classic_static;
    gains.Kp_base = Kp;
    gains.Kd_base = Kd;
    return ctc_gpr_control(est, nullptr, gains, meas, des, t, diag);
}

}  // namespace gpctc::ctrl
