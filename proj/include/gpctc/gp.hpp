#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <vector>

#include "gpctc/errors.hpp"
#include "gpctc/kernel.hpp"

namespace gpctc::gp {

namespace detail {

// Cholesky of K + sigma^2 I with escalating diagonal jitter.
// Jitter starts at 1e-10*trace(K)/m and grows by x10 up to 1e-4*trace(K)/m.
inline Eigen::LLT<Eigen::MatrixXd> robust_llt(const Eigen::MatrixXd& K_sigma,
                                              double trace_scale) {
    const Eigen::Index m = K_sigma.rows();
    const double base = trace_scale / static_cast<double>(m);
    Eigen::LLT<Eigen::MatrixXd> llt(K_sigma);
    if (llt.info() == Eigen::Success) return llt;
    std::ostringstream tried;
    for (double jitter = 1e-10 * base; jitter <= 1e-4 * base * (1.0 + 1e-12); jitter *= 10.0) {
        llt.compute(K_sigma + jitter * Eigen::MatrixXd::Identity(m, m));
        if (llt.info() == Eigen::Success) return llt;
        tried << jitter << " ";
    }
    throw numerical_error("Cholesky failed after jitter escalation; tried jitter levels: " +
                          tried.str());
}

}  // namespace detail

// One output dimension of the multi-output model: exact GP on (X, y).
struct OutputGpModel {
    Eigen::MatrixXd inputs;         // d x m
    Eigen::VectorXd targets;        // m
    Hyperparameters hyper;
    Eigen::MatrixXd chol_factor;    // lower factor of K + sigma^2 I (+ jitter)
    Eigen::VectorXd weight_vector;  // alpha = (K + sigma^2 I)^-1 y

    static OutputGpModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const Hyperparameters& hyper) {
        if (X.cols() < 1) throw std::invalid_argument("fit: need at least one training point");
        if (y.size() != X.cols()) throw std::invalid_argument("fit: target count mismatch");
        if (hyper.lengthscales.size() != X.rows())
            throw std::invalid_argument("fit: lengthscale count != input dimension");
        hyper.validate();
        OutputGpModel m;
        m.inputs = X;
        m.targets = y;
        m.hyper = hyper;
        Eigen::MatrixXd K = kernel_gram(X, hyper);
        const double trace = K.trace();
        K.diagonal().array() += hyper.noise_std * hyper.noise_std;
        auto llt = detail::robust_llt(K, trace);
        m.chol_factor = llt.matrixL();
        m.weight_vector = llt.solve(y);
        return m;
    }

    double predict_mean(const Eigen::VectorXd& x) const {
        if (x.size() != inputs.rows()) throw std::invalid_argument("predict_mean: dimension mismatch");
        return kernel_vector(x, inputs, hyper).dot(weight_vector);
    }

    double predict_variance(const Eigen::VectorXd& x) const {
        if (x.size() != inputs.rows())
            throw std::invalid_argument("predict_variance: dimension mismatch");
        const Eigen::VectorXd k = kernel_vector(x, inputs, hyper);
        const Eigen::VectorXd v =
            chol_factor.triangularView<Eigen::Lower>().solve(k);
        const double var = hyper.signal_std * hyper.signal_std - v.squaredNorm();
        return std::max(var, 0.0);
    }
};

// Ordered list of retained input-dimension indices for marginalization.
struct SubsetSpec {
    std::vector<int> indices;

    void validate(int input_dim) const {
        if (indices.empty()) throw std::invalid_argument("SubsetSpec: empty index set");
        int prev = -1;
        for (int i : indices) {
            if (i <= prev || i < 0 || i >= input_dim)
                throw std::invalid_argument("SubsetSpec: indices must be strictly increasing in [0, dim)");
            prev = i;
        }
    }

    bool operator<(const SubsetSpec& o) const { return indices < o.indices; }
};

// n independent per-output GPs sharing the same training inputs.
class MultiOutputGp {
public:
    MultiOutputGp() = default;

    // X: (input_dim x m), Y: (m x n), one Hyperparameters per output.
    static MultiOutputGp fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                             const std::vector<Hyperparameters>& hyper) {
        if (X.cols() < 1) throw std::invalid_argument("fit: empty training set");
        if (Y.rows() != X.cols()) throw std::invalid_argument("fit: X/Y sample count mismatch");
        if (static_cast<Eigen::Index>(hyper.size()) != Y.cols())
            throw std::invalid_argument("fit: need one hyperparameter set per output");
        MultiOutputGp gp;
        gp.inputs_ = X;
        for (Eigen::Index i = 0; i < Y.cols(); ++i)
            gp.outputs_.push_back(OutputGpModel::fit(X, Y.col(i), hyper[i]));
        return gp;
    }

    int n_outputs() const { return static_cast<int>(outputs_.size()); }
    int input_dim() const { return static_cast<int>(inputs_.rows()); }
    int n_samples() const { return static_cast<int>(inputs_.cols()); }
    const Eigen::MatrixXd& inputs() const { return inputs_; }
    const std::vector<OutputGpModel>& outputs() const { return outputs_; }

    Eigen::VectorXd predict_mean(const Eigen::VectorXd& x) const {
        Eigen::VectorXd mu(n_outputs());
        for (int i = 0; i < n_outputs(); ++i) mu[i] = outputs_[i].predict_mean(x);
        return mu;
    }

    // Diagonal of the predictive variance matrix.
    Eigen::VectorXd predict_variance(const Eigen::VectorXd& x) const {
        Eigen::VectorXd v(n_outputs());
        for (int i = 0; i < n_outputs(); ++i) v[i] = outputs_[i].predict_variance(x);
        return v;
    }

    // Marginal variance over the retained dimensions: each output's model is
    // refit on the projected inputs with the retained lengthscales (signal
    // and noise reused), then queried at x1. Refits are cached per spec.
    Eigen::VectorXd marginal_variance(const SubsetSpec& spec, const Eigen::VectorXd& x1) const {
        spec.validate(input_dim());
        if (x1.size() != static_cast<Eigen::Index>(spec.indices.size()))
            throw std::invalid_argument("marginal_variance: query dimension mismatch");
        const std::vector<OutputGpModel>* models = marginal_models(spec);
        Eigen::VectorXd v(n_outputs());
        for (int i = 0; i < n_outputs(); ++i) v[i] = (*models)[i].predict_variance(x1);
        return v;
    }

    // The marginal models themselves (one per output, fitted on projected
    // inputs). Needed by the gain schedules and the Lyapunov integral.
    const std::vector<OutputGpModel>* marginal_models(const SubsetSpec& spec) const {
        spec.validate(input_dim());
        std::lock_guard<std::mutex> lock(cache_mutex_);
        auto it = marginal_cache_.find(spec);
        if (it != marginal_cache_.end()) return it->second.get();
        Eigen::MatrixXd Xs(spec.indices.size(), inputs_.cols());
        for (size_t r = 0; r < spec.indices.size(); ++r)
            Xs.row(static_cast<Eigen::Index>(r)) = inputs_.row(spec.indices[r]);
        auto models = std::make_unique<std::vector<OutputGpModel>>();
        for (const auto& out : outputs_)
            models->push_back(OutputGpModel::fit(Xs, out.targets, out.hyper.restrict(spec.indices)));
        auto* ptr = models.get();
        marginal_cache_.emplace(spec, std::move(models));
        return ptr;
    }

private:
    Eigen::MatrixXd inputs_;
    std::vector<OutputGpModel> outputs_;
    mutable std::mutex cache_mutex_;
    mutable std::map<SubsetSpec, std::unique_ptr<std::vector<OutputGpModel>>> marginal_cache_;

public:
    MultiOutputGp(const MultiOutputGp& o) : inputs_(o.inputs_), outputs_(o.outputs_) {}
    MultiOutputGp& operator=(const MultiOutputGp& o) {
        inputs_ = o.inputs_;
        outputs_ = o.outputs_;
        marginal_cache_.clear();
        return *this;
    }
    MultiOutputGp(MultiOutputGp&& o) noexcept
        : inputs_(std::move(o.inputs_)), outputs_(std::move(o.outputs_)) {}
    MultiOutputGp& operator=(MultiOutputGp&& o) noexcept {
        inputs_ = std::move(o.inputs_);
        outputs_ = std::move(o.outputs_);
        marginal_cache_.clear();
        return *this;
    }
};

}  // namespace gpctc::gp
