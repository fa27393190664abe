#pragma once

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gpctc/gp.hpp"
#include "gpctc/sim.hpp"

namespace gpctc::io {

// Shortest round-trippable decimal representation; keeps CSV output
// byte-stable across runs.
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Training set CSV: header p_1..p_{3n},tau_1..tau_n, one row per sample.
inline std::string training_set_csv(const sim::TrainingSet& ts) {
    const Eigen::Index d = ts.inputs.rows(), n = ts.targets.cols(), m = ts.inputs.cols();
    std::ostringstream out;
    for (Eigen::Index k = 0; k < d; ++k) out << "p_" << (k + 1) << ",";
    for (Eigen::Index k = 0; k < n; ++k) out << "tau_" << (k + 1) << (k + 1 < n ? "," : "\n");
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index k = 0; k < d; ++k) out << fmt(ts.inputs(k, j)) << ",";
        for (Eigen::Index k = 0; k < n; ++k)
            out << fmt(ts.targets(j, k)) << (k + 1 < n ? "," : "\n");
    }
    return out.str();
}

inline void parse_training_csv(const std::string& content, Eigen::MatrixXd& X,
                               Eigen::MatrixXd& Y) {
    std::istringstream in(content);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("training CSV: missing header");
    int d = 0, n = 0;
    {
        std::istringstream hs(line);
        std::string col;
        while (std::getline(hs, col, ',')) {
            if (col.rfind("p_", 0) == 0) ++d;
            else if (col.rfind("tau_", 0) == 0) ++n;
            else throw std::runtime_error("training CSV: unexpected column " + col);
        }
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        if (static_cast<int>(row.size()) != d + n)
            throw std::runtime_error("training CSV: bad row width");
        rows.push_back(std::move(row));
    }
    X.resize(d, rows.size());
    Y.resize(rows.size(), n);
    for (size_t j = 0; j < rows.size(); ++j) {
        for (int k = 0; k < d; ++k) X(k, j) = rows[j][k];
        for (int k = 0; k < n; ++k) Y(j, k) = rows[j][d + k];
    }
}

// Hyperparameter file: one block per output,
//   output <i>
//   signal_std = ...
//   lengthscale_1 = ...
//   ...
//   noise_std = ...
inline std::string hyperparameters_text(const std::vector<gp::Hyperparameters>& hyper) {
    std::ostringstream out;
    for (size_t i = 0; i < hyper.size(); ++i) {
        out << "output " << (i + 1) << "\n";
        out << "signal_std = " << fmt(hyper[i].signal_std) << "\n";
        for (Eigen::Index k = 0; k < hyper[i].lengthscales.size(); ++k)
            out << "lengthscale_" << (k + 1) << " = " << fmt(hyper[i].lengthscales[k]) << "\n";
        out << "noise_std = " << fmt(hyper[i].noise_std) << "\n";
    }
    return out.str();
}

inline std::vector<gp::Hyperparameters> parse_hyperparameters(const std::string& content) {
    std::vector<gp::Hyperparameters> hyper;
    std::istringstream in(content);
    std::string line;
    std::vector<double> ls;
    auto flush_ls = [&]() {
        if (hyper.empty()) return;
        hyper.back().lengthscales =
            Eigen::Map<Eigen::VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size()));
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("output", 0) == 0) {
            flush_ls();
            ls.clear();
            hyper.emplace_back();
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("hyper file: bad line: " + line);
        std::string key = line.substr(0, eq);
        key.erase(key.find_last_not_of(" \t") + 1);
        const double value = std::stod(line.substr(eq + 1));
        if (hyper.empty()) throw std::runtime_error("hyper file: value before output block");
        if (key == "signal_std") hyper.back().signal_std = value;
        else if (key == "noise_std") hyper.back().noise_std = value;
        else if (key.rfind("lengthscale_", 0) == 0) ls.push_back(value);
        else throw std::runtime_error("hyper file: unknown key " + key);
    }
    flush_ls();
    return hyper;
}

// Trajectory CSV: one row per step.
inline std::string trajectory_csv(const sim::Trajectory& traj) {
    if (traj.size() == 0) return "t\n";
    const Eigen::Index n = traj.q[0].size();
    std::ostringstream out;
    out << "t";
    auto head = [&](const char* name) {
        for (Eigen::Index i = 0; i < n; ++i) out << "," << name << "_" << (i + 1);
    };
    head("q");
    head("qd");
    head("qdd");
    head("q_des");
    head("qd_des");
    head("qdd_des");
    head("e");
    head("edot");
    head("u");
    out << ",kp_norm,kd_norm,var_trace\n";
    for (size_t k = 0; k < traj.size(); ++k) {
        out << fmt(traj.times[k]);
        auto row = [&](const Eigen::VectorXd& v) {
            for (Eigen::Index i = 0; i < n; ++i) out << "," << fmt(v[i]);
        };
        row(traj.q[k]);
        row(traj.qd[k]);
        row(traj.qdd[k]);
        row(traj.q_des[k]);
        row(traj.qd_des[k]);
        row(traj.qdd_des[k]);
        row(traj.e[k]);
        row(traj.edot[k]);
        row(traj.u[k]);
        out << "," << fmt(traj.Kp_norm[k]) << "," << fmt(traj.Kd_norm[k]) << ","
            << fmt(traj.var_trace[k]) << "\n";
    }
    return out.str();
}

inline std::string metrics_csv(const sim::Metrics& m) {
    std::ostringstream out;
    out << "l2_error,max_e,max_edot,max_u,inv_snr,max_combined_error\n";
    out << fmt(m.l2_error) << "," << fmt(m.max_e) << "," << fmt(m.max_edot) << ","
        << fmt(m.max_u) << "," << fmt(m.inv_snr) << "," << fmt(m.max_combined_error) << "\n";
    return out.str();
}

}  // namespace gpctc::io
