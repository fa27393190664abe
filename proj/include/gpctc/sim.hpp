#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "gpctc/controller.hpp"
#include "gpctc/dynamics.hpp"
#include "gpctc/estimates.hpp"
#include "gpctc/gp.hpp"
#include "gpctc/likelihood.hpp"
#include "gpctc/region.hpp"

namespace gpctc::sim {

struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> q, qd, qdd, q_des, qd_des, qdd_des, e, edot, u;
    std::vector<double> Kp_norm, Kd_norm, var_trace;
    std::vector<Eigen::VectorXd> noise;  // realized measurement noise per step (3n)
    unsigned long noise_seed = 0;
    double dt = 0.0;

    size_t size() const { return times.size(); }
};

struct TrainingSet {
    Eigen::MatrixXd inputs;   // 3n x m (noisy measurements)
    Eigen::MatrixXd targets;  // m x n
    double noise_std = 0.0;
    Region grid_spec;
};

struct Metrics {
    double l2_error = 0.0;
    double max_e = 0.0;
    double max_edot = 0.0;
    double max_u = 0.0;
    double inv_snr = 0.0;
    double max_combined_error = 0.0;
};

struct SimOptions {
    double horizon = 2.0 * M_PI;
    double dt = 1e-3;
    double noise_std = 0.0;  // same std on every measurement channel
    unsigned long seed = 0;
};

// Closed-loop fixed-step RK4 simulation of the true (noise-free) state.
// The controller only ever sees measurements: per step one noise draw per
// channel is added to the stage states, and the acceleration measurement is
// the previous step's computed true acceleration plus fresh noise. The GP
// terms (mean compensation and variance-scheduled gains) are evaluated once
// per step on the step's measurement and held across the RK4 stages; the
// parametric feed-forward and PD feedback are evaluated at every stage.
inline Trajectory simulate(const dyn::ElModel& model, const dyn::ElEstimates& est,
                           const ctrl::GainSchedule& gains, const gp::MultiOutputGp* gp,
                           const ctrl::DesiredTrajectory& des, const Eigen::VectorXd& q0,
                           const Eigen::VectorXd& qd0, const SimOptions& opts) {
    const int n = model.n;
    const int steps = static_cast<int>(std::round(opts.horizon / opts.dt));
    if (opts.dt <= 0.0 || steps < 1) throw std::invalid_argument("simulate: horizon/dt invalid");

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto draw_noise = [&](int count) {
        Eigen::VectorXd eta(count);
        for (int i = 0; i < count; ++i) eta[i] = opts.noise_std * gauss(rng);
        return eta;
    };

    Trajectory traj;
    traj.noise_seed = opts.seed;
    traj.dt = opts.dt;
    Eigen::VectorXd q = q0, qd = qd0;

    // bootstrap acceleration for the first measurement and the first f_u hold
    Eigen::VectorXd qdd_prev;
    {
        dyn::StateTriple meas0{Eigen::VectorXd::Zero(n), qd, q};
        const Eigen::VectorXd u0 = ctrl::ctc_gpr_control(est, gp, gains, meas0, des, 0.0);
        qdd_prev = dyn::forward_dynamics_held(model, q, qd, u0, Eigen::VectorXd::Zero(n));
    }

    for (int k = 0; k < steps; ++k) {
        const double t = k * opts.dt;
        const Eigen::VectorXd eta = draw_noise(3 * n);  // [qdd; qd; q] channels
        const Eigen::VectorXd eta_qdd = eta.segment(0, n);
        const Eigen::VectorXd eta_qd = eta.segment(n, n);
        const Eigen::VectorXd eta_q = eta.segment(2 * n, n);
        const Eigen::VectorXd qdd_meas = qdd_prev + eta_qdd;

        // per-step GP evaluation on the step measurement
        dyn::StateTriple meas{qdd_meas, qd + eta_qd, q + eta_q};
        ctrl::ControlDiagnostics diag;
        const Eigen::VectorXd u_step = ctrl::ctc_gpr_control(est, gp, gains, meas, des, t, &diag);

        // stage law: parametric part live, GP part held
        auto stage_u = [&](const Eigen::VectorXd& qs, const Eigen::VectorXd& qds, double ts) {
            const Eigen::VectorXd qm = qs + eta_q;
            const Eigen::VectorXd qdm = qds + eta_qd;
            return (est.inertia(qm) * des.qdd_d(ts) + est.coriolis(qm, qdm) * des.qd_d(ts) +
                    est.gravity(qm) + diag.mean_comp - diag.Kd_eval * (qdm - des.qd_d(ts)) -
                    diag.Kp_eval * (qm - des.q_d(ts)))
                .eval();
        };
        // f_u sees the previous step's acceleration: this mirrors the measured
        // acceleration channel and keeps the plant solve explicit
        auto deriv = [&](const Eigen::VectorXd& qs, const Eigen::VectorXd& qds, double ts) {
            return dyn::forward_dynamics_held(model, qs, qds, stage_u(qs, qds, ts), qdd_prev);
        };

        const Eigen::VectorXd qdd_true = deriv(q, qd, t);

        // record step
        traj.times.push_back(t);
        traj.q.push_back(q);
        traj.qd.push_back(qd);
        traj.qdd.push_back(qdd_true);
        traj.q_des.push_back(des.q_d(t));
        traj.qd_des.push_back(des.qd_d(t));
        traj.qdd_des.push_back(des.qdd_d(t));
        traj.e.push_back(q - des.q_d(t));
        traj.edot.push_back(qd - des.qd_d(t));
        traj.u.push_back(u_step);
        traj.Kp_norm.push_back(diag.Kp_eval.operatorNorm());
        traj.Kd_norm.push_back(diag.Kd_eval.operatorNorm());
        traj.var_trace.push_back(diag.var_p.sum() + diag.var_d.sum());
        traj.noise.push_back(eta);

        // RK4 on (q, qd)
        const double h = opts.dt;
        const Eigen::VectorXd k1q = qd, k1v = qdd_true;
        const Eigen::VectorXd k2q = qd + 0.5 * h * k1v,
                              k2v = deriv(q + 0.5 * h * k1q, qd + 0.5 * h * k1v, t + 0.5 * h);
        const Eigen::VectorXd k3q = qd + 0.5 * h * k2v,
                              k3v = deriv(q + 0.5 * h * k2q, qd + 0.5 * h * k2v, t + 0.5 * h);
        const Eigen::VectorXd k4q = qd + h * k3v,
                              k4v = deriv(q + h * k3q, qd + h * k3v, t + h);
        q += (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        qd += (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        qdd_prev = qdd_true;
    }
    return traj;
}

// Training pairs on a point set. Data collection measures the state triple
// with iid Gaussian noise on every channel while the applied torque is known
// exactly, so the regression input is the noisy measurement and the target is
// the applied torque minus the parametric estimate evaluated at that same
// measurement: u(p) - u_hat(p_meas) = residual(p) + (u_hat(p) - u_hat(p_meas)).
inline TrainingSet training_set_from_points(const dyn::ElModel& model,
                                            const dyn::ElEstimates& est,
                                            const Eigen::MatrixXd& points, double noise_std,
                                            unsigned long seed, const Region& grid_spec,
                                            bool state_noise = false) {
    const int n = model.n;
    const Eigen::Index m = points.cols();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    TrainingSet ts;
    ts.inputs.resize(3 * n, m);
    ts.targets.resize(m, n);
    ts.noise_std = noise_std;
    ts.grid_spec = grid_spec;
    for (Eigen::Index j = 0; j < m; ++j) {
        const dyn::StateTriple p = dyn::StateTriple::from_stacked(points.col(j));
        if (state_noise) {
            // Noisy state measurements with exactly known torque: the target is
            // the applied torque minus the parametric estimate at the measured
            // state, u(p) - u_hat(p_meas) = residual(p) + (u_hat(p) - u_hat(p_meas)).
            Eigen::VectorXd meas = points.col(j);
            for (Eigen::Index i = 0; i < meas.size(); ++i) meas[i] += noise_std * gauss(rng);
            const dyn::StateTriple pm = dyn::StateTriple::from_stacked(meas);
            ts.inputs.col(j) = meas;
            ts.targets.row(j) =
                (dyn::residual_tau(model, est, p) + est.torque(p) - est.torque(pm)).transpose();
        } else {
            // Exact states with noisy torque measurements: iid Gaussian output
            // noise, the observation model the GP likelihood assumes.
            ts.inputs.col(j) = points.col(j);
            Eigen::VectorXd tau = dyn::residual_tau(model, est, p);
            for (Eigen::Index i = 0; i < tau.size(); ++i) tau[i] += noise_std * gauss(rng);
            ts.targets.row(j) = tau.transpose();
        }
    }
    return ts;
}

inline TrainingSet generate_training_grid(const dyn::ElModel& model, const dyn::ElEstimates& est,
                                          const Region& grid_spec, double noise_std,
                                          unsigned long seed, bool state_noise = false) {
    return training_set_from_points(model, est, grid_spec.grid(), noise_std, seed, grid_spec,
                                    state_noise);
}

// Low-discrepancy point set: Halton sequence with a seeded random shift,
// mapped into the box. Used where no uniform integer grid matches the
// requested count.
inline Eigen::MatrixXd halton_lattice(const Region& box, long count, unsigned long seed) {
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    const int d = box.dim();
    if (d > 12) throw std::invalid_argument("halton_lattice: dimension too large");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::VectorXd shift(d);
    for (int k = 0; k < d; ++k) shift[k] = unif(rng);

    auto radical_inverse = [](long i, int base) {
        double f = 1.0, r = 0.0;
        for (long v = i; v > 0; v /= base) {
            f /= base;
            r += f * (v % base);
        }
        return r;
    };
    Eigen::MatrixXd X(d, count);
    for (long i = 0; i < count; ++i)
        for (int k = 0; k < d; ++k) {
            double x = radical_inverse(i + 1, primes[k]) + shift[k];
            x -= std::floor(x);
            X(k, i) = box.lower[k] + (box.upper[k] - box.lower[k]) * x;
        }
    return X;
}

inline TrainingSet generate_training_lattice(const dyn::ElModel& model,
                                             const dyn::ElEstimates& est, const Region& box,
                                             long count, double noise_std, unsigned long seed,
                                             bool state_noise = false) {
    // independent streams for point placement and measurement noise
    return training_set_from_points(model, est, halton_lattice(box, count, seed ^ 0x5851f42dull),
                                    noise_std, seed, box, state_noise);
}

inline Metrics compute_metrics(const Trajectory& traj) {
    if (traj.size() == 0) throw std::invalid_argument("compute_metrics: empty trajectory");
    Metrics m;
    double sum_sq = 0.0, state_sq = 0.0, noise_sq = 0.0;
    for (size_t k = 0; k < traj.size(); ++k) {
        const double e2 = traj.e[k].squaredNorm();
        const double ed2 = traj.edot[k].squaredNorm();
        sum_sq += (e2 + ed2) * traj.dt;
        m.max_e = std::max(m.max_e, std::sqrt(e2));
        m.max_edot = std::max(m.max_edot, std::sqrt(ed2));
        m.max_combined_error = std::max(m.max_combined_error, std::sqrt(e2 + ed2));
        m.max_u = std::max(m.max_u, traj.u[k].norm());
        state_sq += traj.q[k].squaredNorm() + traj.qd[k].squaredNorm();
        noise_sq += traj.noise[k].squaredNorm();
    }
    m.l2_error = std::sqrt(sum_sq);
    m.inv_snr = (state_sq > 0.0) ? noise_sq / state_sq : 0.0;
    return m;
}

}  // namespace gpctc::sim
