#pragma once

#include <Eigen/Dense>
#include <random>
#include <stdexcept>
#include <vector>

namespace gpctc {

// Axis-aligned compact box with a per-dimension grid resolution.
struct Region {
    Eigen::VectorXd lower, upper;
    std::vector<int> resolution;

    int dim() const { return static_cast<int>(lower.size()); }

    void validate() const {
        if (lower.size() != upper.size() ||
            static_cast<Eigen::Index>(resolution.size()) != lower.size())
            throw std::invalid_argument("Region: inconsistent sizes");
        for (int d = 0; d < dim(); ++d) {
            if (!(lower[d] < upper[d]) && resolution[d] > 1)
                throw std::invalid_argument("Region: lower must be < upper");
            if (resolution[d] < 1) throw std::invalid_argument("Region: resolution must be >= 1");
        }
    }

    long total_points() const {
        long t = 1;
        for (int r : resolution) t *= r;
        return t;
    }

    Eigen::VectorXd point(long flat_index) const {
        Eigen::VectorXd x(dim());
        for (int d = 0; d < dim(); ++d) {
            const int r = resolution[d];
            const long i = flat_index % r;
            flat_index /= r;
            x[d] = (r == 1) ? 0.5 * (lower[d] + upper[d])
                            : lower[d] + (upper[d] - lower[d]) * static_cast<double>(i) /
                                             static_cast<double>(r - 1);
        }
        return x;
    }

    // All grid points as columns.
    Eigen::MatrixXd grid() const {
        validate();
        const long m = total_points();
        Eigen::MatrixXd X(dim(), m);
        for (long i = 0; i < m; ++i) X.col(i) = point(i);
        return X;
    }

    Eigen::VectorXd sample(std::mt19937_64& rng) const {
        Eigen::VectorXd x(dim());
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (int d = 0; d < dim(); ++d) x[d] = lower[d] + (upper[d] - lower[d]) * unif(rng);
        return x;
    }

    bool contains(const Eigen::VectorXd& x, double slack = 0.0) const {
        for (int d = 0; d < dim(); ++d)
            if (x[d] < lower[d] - slack || x[d] > upper[d] + slack) return false;
        return true;
    }

    Region refined(int factor) const {
        Region r = *this;
        for (auto& res : r.resolution)
            if (res > 1) res = (res - 1) * factor + 1;
        return r;
    }
};

}  // namespace gpctc
