#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "gpctc/bounds.hpp"
#include "gpctc/sim.hpp"

namespace gpctc::sim {

// Data-driven initial hyperparameters: signal/noise from the target spread,
// lengthscales from the per-dimension input spread.
inline std::vector<gp::Hyperparameters> default_init_hyper(const Eigen::MatrixXd& X,
                                                           const Eigen::MatrixXd& Y,
                                                           bool tied = false) {
    const int d = static_cast<int>(X.rows());
    Eigen::VectorXd ls(d);
    double tied_ls = 0.0;
    for (int k = 0; k < d; ++k) {
        const double lo = X.row(k).minCoeff(), hi = X.row(k).maxCoeff();
        // no spread means the likelihood carries no information about this
        // dimension; a long lengthscale makes the model ignore it instead of
        // treating every off-slice query as far from the data
        ls[k] = (hi - lo < 1e-9) ? 1e3 : std::max(0.5 * (hi - lo), 0.3);
        if (hi - lo >= 1e-9) tied_ls = std::max(tied_ls, ls[k]);
    }
    if (tied)
        for (int k = 0; k < d; ++k)
            if (ls[k] < 1e3) ls[k] = std::max(tied_ls, 0.3);

    std::vector<gp::Hyperparameters> hyper;
    for (Eigen::Index i = 0; i < Y.cols(); ++i) {
        const double sd = std::sqrt((Y.col(i).array() - Y.col(i).mean()).square().mean());
        gp::Hyperparameters h;
        h.signal_std = std::max(sd, 1e-2);
        h.lengthscales = ls;
        h.noise_std = std::max(0.1 * sd, 1e-3);
        hyper.push_back(h);
    }
    return hyper;
}

struct OnedofStudyConfig {
    int n_systems = 30;
    unsigned long seed = 0;
    double dt = 1e-3;
    double horizon = 2.0 * M_PI;
    double noise_std = 0.04;
    double ctc_kp = 100.0, ctc_kd = 100.0;
    double gpr_base = 10.0, gpr_scale = 100.0;
    int grid_res = 21;  // per axis of the (qd, q) training slice
    int n_threads = 1;  // systems run in parallel, per-run RNG streams
    gp::OptimizeOptions opt;
};

// Per-system CTC-GPR / CTC ratios of the Fig.-3 quantities.
struct OnedofRecord {
    double c = 0.0;
    bool failed = false;
    std::string error;
    double kp_ratio = 0.0, kd_ratio = 0.0;
    double max_err_ratio = 0.0, inv_snr_ratio = 0.0, max_u_ratio = 0.0;
};

struct QuartileSummary {
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

inline QuartileSummary quartiles(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    auto at = [&](double p) {
        const double idx = p * (v.size() - 1);
        const size_t lo = static_cast<size_t>(std::floor(idx));
        const size_t hi = static_cast<size_t>(std::ceil(idx));
        return v[lo] + (v[hi] - v[lo]) * (idx - lo);
    };
    return {v.front(), at(0.25), at(0.5), at(0.75), v.back()};
}

struct OnedofStudyResult {
    std::vector<OnedofRecord> records;
    QuartileSummary kp, kd, max_err, inv_snr, max_u;
    int failures = 0;
};

inline OnedofRecord run_one_system(double c, unsigned long run_seed,
                                   const OnedofStudyConfig& cfg) {
    OnedofRecord rec;
    rec.c = c;
    const dyn::ElModel model = dyn::one_dof_model(c);
    const dyn::ElEstimates est = dyn::one_dof_estimates();

    Region grid;
    grid.lower = Eigen::Vector3d(0.0, -1.0, -1.0);
    grid.upper = Eigen::Vector3d(0.0, 1.0, 1.0);
    grid.resolution = {1, cfg.grid_res, cfg.grid_res};
    const TrainingSet ts =
        generate_training_grid(model, est, grid, cfg.noise_std, run_seed ^ 0xbead5eedull);

    auto init = default_init_hyper(ts.inputs, ts.targets, cfg.opt.tied_lengthscales);
    gp::OptimizeOptions opt = cfg.opt;
    opt.seed = run_seed;
    const auto hyper = gp::optimize_hyperparameters(ts.inputs, ts.targets, init, opt);
    const gp::MultiOutputGp gp = gp::MultiOutputGp::fit(ts.inputs, ts.targets, hyper);

    ctrl::DesiredTrajectory des = ctrl::sinusoid_trajectory(
        Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1));
    const Eigen::VectorXd q0 = Eigen::VectorXd::Zero(1);
    const Eigen::VectorXd qd0 = Eigen::VectorXd::Ones(1);

    SimOptions so;
    so.dt = cfg.dt;
    so.horizon = cfg.horizon;
    so.noise_std = cfg.noise_std;
    so.seed = run_seed;  // same realization for both controllers

    ctrl::GainSchedule ctc;
    ctc.kind = ctrl::ControllerKind::classic_static;
    ctc.Kp_base = Eigen::MatrixXd::Constant(1, 1, cfg.ctc_kp);
    ctc.Kd_base = Eigen::MatrixXd::Constant(1, 1, cfg.ctc_kd);

    ctrl::GainSchedule gpr;
    gpr.kind = ctrl::ControllerKind::gpr_variable;
    gpr.Kp_base = Eigen::MatrixXd::Constant(1, 1, cfg.gpr_base);
    gpr.Kd_base = Eigen::MatrixXd::Constant(1, 1, cfg.gpr_base);
    gpr.Kp_scale = cfg.gpr_scale;
    gpr.Kd_scale = cfg.gpr_scale;

    const Trajectory t_ctc = simulate(model, est, ctc, nullptr, des, q0, qd0, so);
    const Trajectory t_gpr = simulate(model, est, gpr, &gp, des, q0, qd0, so);
    const Metrics m_ctc = compute_metrics(t_ctc);
    const Metrics m_gpr = compute_metrics(t_gpr);

    // 1/SNR of the system trajectory: energy of the noise-induced state
    // jitter (noisy run minus a noise-free run of the same loop) over the
    // clean state energy. The raw measurement-noise energy is the same
    // realization for both controllers and would cancel in the ratio.
    SimOptions clean = so;
    clean.noise_std = 0.0;
    const Trajectory r_ctc = simulate(model, est, ctc, nullptr, des, q0, qd0, clean);
    const Trajectory r_gpr = simulate(model, est, gpr, &gp, des, q0, qd0, clean);
    auto inv_snr = [](const Trajectory& noisy, const Trajectory& ref) {
        double jitter = 0.0, signal = 0.0;
        for (size_t k = 0; k < noisy.q.size(); ++k) {
            jitter += (noisy.q[k] - ref.q[k]).squaredNorm() +
                      (noisy.qd[k] - ref.qd[k]).squaredNorm();
            signal += ref.q[k].squaredNorm() + ref.qd[k].squaredNorm();
        }
        return (signal > 0.0) ? jitter / signal : 0.0;
    };

    const double kp_max = *std::max_element(t_gpr.Kp_norm.begin(), t_gpr.Kp_norm.end());
    const double kd_max = *std::max_element(t_gpr.Kd_norm.begin(), t_gpr.Kd_norm.end());
    rec.kp_ratio = kp_max / cfg.ctc_kp;
    rec.kd_ratio = kd_max / cfg.ctc_kd;
    rec.max_err_ratio = m_gpr.max_combined_error / m_ctc.max_combined_error;
    rec.inv_snr_ratio = inv_snr(t_gpr, r_gpr) / inv_snr(t_ctc, r_ctc);
    rec.max_u_ratio = m_gpr.max_u / m_ctc.max_u;
    return rec;
}

inline OnedofStudyResult randomized_onedof_study(const OnedofStudyConfig& cfg) {
    std::mt19937_64 master(cfg.seed);
    std::uniform_real_distribution<double> unif_c(0.0, 2.0 * M_PI);
    std::vector<double> cs(cfg.n_systems);
    for (auto& c : cs) c = unif_c(master);

    OnedofStudyResult result;
    result.records.resize(cfg.n_systems);
    auto run_index = [&](int i) {
        const unsigned long run_seed = cfg.seed + 0x9e3779b97f4a7c15ull * (i + 1);
        OnedofRecord rec;
        try {
            rec = run_one_system(cs[i], run_seed, cfg);
        } catch (const std::exception& ex) {
            rec.c = cs[i];
            rec.failed = true;
            rec.error = ex.what();
        }
        result.records[i] = rec;
    };
    const int n_threads = std::max(1, std::min(cfg.n_threads, cfg.n_systems));
    if (n_threads == 1) {
        for (int i = 0; i < cfg.n_systems; ++i) run_index(i);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t)
            pool.emplace_back([&, t]() {
                for (int i = t; i < cfg.n_systems; i += n_threads) run_index(i);
            });
        for (auto& th : pool) th.join();
    }

    std::vector<double> kp, kd, err, snr, mu;
    for (const auto& rec : result.records) {
        if (rec.failed) {
            ++result.failures;
            continue;
        }
        kp.push_back(rec.kp_ratio);
        kd.push_back(rec.kd_ratio);
        err.push_back(rec.max_err_ratio);
        snr.push_back(rec.inv_snr_ratio);
        mu.push_back(rec.max_u_ratio);
    }
    if (!err.empty()) {
        result.kp = quartiles(kp);
        result.kd = quartiles(kd);
        result.max_err = quartiles(err);
        result.inv_snr = quartiles(snr);
        result.max_u = quartiles(mu);
    }
    return result;
}

}  // namespace gpctc::sim
