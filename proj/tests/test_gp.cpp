#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "gpctc/gp.hpp"
#include "gpctc/likelihood.hpp"

using namespace gpctc;
using gp::Hyperparameters;
using gp::MultiOutputGp;
using gp::OutputGpModel;

namespace {

Hyperparameters make_hyper(double sf, std::initializer_list<double> ls, double sn) {
    Hyperparameters h;
    h.signal_std = sf;
    h.lengthscales = Eigen::VectorXd(static_cast<Eigen::Index>(ls.size()));
    Eigen::Index i = 0;
    for (double l : ls) h.lengthscales[i++] = l;
    h.noise_std = sn;
    return h;
}

Eigen::MatrixXd random_points(int dim, int m, std::mt19937_64& rng, double scale = 2.0) {
    std::uniform_real_distribution<double> unif(-scale, scale);
    Eigen::MatrixXd X(dim, m);
    for (int j = 0; j < m; ++j)
        for (int d = 0; d < dim; ++d) X(d, j) = unif(rng);
    return X;
}

}  // namespace

TEST_CASE("kernel: zero distance and analytic value") {
    auto h = make_hyper(1.0, {1.0, 1.0}, 0.1);
    Eigen::Vector2d x(0.3, -0.7);
    CHECK(gp::kernel_eval(x, x, h) == doctest::Approx(1.0));

    Eigen::Vector2d a(1.0, 0.0), b(0.0, 0.0);
    CHECK(gp::kernel_eval(a, b, h) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    CHECK(gp::kernel_eval(a, b, h) == doctest::Approx(gp::kernel_eval(b, a, h)));
}

TEST_CASE("kernel: dimension mismatch rejected") {
    auto h = make_hyper(1.0, {1.0}, 0.1);
    Eigen::Vector2d a(1.0, 0.0);
    Eigen::VectorXd b(1);
    b << 0.0;
    CHECK_THROWS_AS(gp::kernel_eval(a, b, h), std::invalid_argument);
}

TEST_CASE("kernel: Gram matrices are symmetric PSD") {
    std::mt19937_64 rng(7);
    auto h = make_hyper(1.3, {0.8, 1.2, 0.5}, 0.1);
    for (int rep = 0; rep < 5; ++rep) {
        Eigen::MatrixXd X = random_points(3, 10, rng);
        Eigen::MatrixXd K = gp::kernel_gram(X, h);
        CHECK((K - K.transpose()).norm() < 1e-14);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(K);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * K.trace());
    }
}

TEST_CASE("fit: single point interpolates as noise vanishes") {
    Eigen::MatrixXd X(1, 1);
    X << 0.0;
    Eigen::MatrixXd Y(1, 1);
    Y << 1.0;
    auto gp = MultiOutputGp::fit(X, Y, {make_hyper(1.0, {1.0}, 1e-6)});
    Eigen::VectorXd x(1);
    x << 0.0;
    CHECK(gp.predict_mean(x)[0] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("fit: empty training set rejected") {
    Eigen::MatrixXd X(1, 0), Y(0, 1);
    CHECK_THROWS_AS(MultiOutputGp::fit(X, Y, {make_hyper(1.0, {1.0}, 0.1)}),
                    std::invalid_argument);
}

TEST_CASE("fit: interpolates sin data at tiny noise; factor invariants hold") {
    Eigen::MatrixXd X(1, 5);
    X << -2.0, -1.0, 0.0, 1.0, 2.0;
    Eigen::MatrixXd Y(5, 1);
    for (int i = 0; i < 5; ++i) Y(i, 0) = std::sin(X(0, i));
    auto h = make_hyper(1.0, {1.0}, 1e-8);
    auto gp = MultiOutputGp::fit(X, Y, {h});

    for (int i = 0; i < 5; ++i)
        CHECK(gp.predict_mean(X.col(i))[0] == doctest::Approx(Y(i, 0)).epsilon(1e-6));

    // chol_factor * chol_factor^T reconstructs K + sigma^2 I within 1e-8
    const auto& out = gp.outputs()[0];
    Eigen::MatrixXd K = gp::kernel_gram(X, h);
    K.diagonal().array() += h.noise_std * h.noise_std;
    const Eigen::MatrixXd rec =
        out.chol_factor * out.chol_factor.transpose();
    CHECK((rec - K).norm() / K.norm() < 1e-8);

    // weight vector consistent with the factor solve
    Eigen::VectorXd alpha = out.chol_factor.transpose().triangularView<Eigen::Upper>().solve(
        out.chol_factor.triangularView<Eigen::Lower>().solve(out.targets));
    CHECK((alpha - out.weight_vector).norm() < 1e-10);
}

TEST_CASE("predict: prior recovered far from data") {
    Eigen::MatrixXd X(2, 3);
    X << 0.0, 0.1, 0.2, 0.0, -0.1, 0.1;
    Eigen::MatrixXd Y(3, 2);
    Y << 1.0, -1.0, 0.5, 0.2, -0.3, 0.7;
    auto h = make_hyper(1.5, {0.3, 0.3}, 0.01);
    auto gp = MultiOutputGp::fit(X, Y, {h, h});

    Eigen::Vector2d far(20.0, 20.0);  // >= 20 lengthscales away
    CHECK(gp.predict_mean(far).norm() < 1e-6);
    const Eigen::VectorXd var = gp.predict_variance(far);
    for (int i = 0; i < 2; ++i) CHECK(var[i] == doctest::Approx(1.5 * 1.5).epsilon(1e-6));
}

TEST_CASE("predict: variance collapses onto observations") {
    Eigen::MatrixXd X(1, 4);
    X << -1.5, -0.5, 0.5, 1.5;
    Eigen::MatrixXd Y(4, 1);
    Y << 0.2, -0.1, 0.4, 0.0;
    const double sn = 1e-4;
    auto gp = MultiOutputGp::fit(X, Y, {make_hyper(1.0, {1.0}, sn)});
    for (int i = 0; i < 4; ++i) {
        const double v = gp.predict_variance(X.col(i))[0];
        CHECK(v >= 0.0);
        CHECK(v <= sn * sn + 1e-6);
    }
}

TEST_CASE("predict: agrees with explicit-inverse oracle") {
    std::mt19937_64 rng(42);
    auto h = make_hyper(1.2, {0.7, 1.1}, 0.05);
    Eigen::MatrixXd X = random_points(2, 3, rng);
    Eigen::MatrixXd Y(3, 1);
    Y << 0.3, -0.8, 0.5;
    auto gp = MultiOutputGp::fit(X, Y, {h});

    // dense oracle with an explicit matrix inverse
    Eigen::MatrixXd K = gp::kernel_gram(X, h);
    K.diagonal().array() += h.noise_std * h.noise_std;
    const Eigen::MatrixXd Kinv = K.inverse();

    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::VectorXd x = random_points(2, 1, rng).col(0);
        const Eigen::VectorXd kv = gp::kernel_vector(x, X, h);
        const double mean_oracle = kv.dot(Kinv * Y.col(0));
        const double var_oracle = h.signal_std * h.signal_std - kv.dot(Kinv * kv);
        CHECK(gp.predict_mean(x)[0] == doctest::Approx(mean_oracle).epsilon(1e-10));
        CHECK(gp.predict_variance(x)[0] == doctest::Approx(var_oracle).epsilon(1e-10));
    }
}

TEST_CASE("predict: variance bounded by prior and monotone under data addition") {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    for (int rep = 0; rep < 50; ++rep) {
        const int m = 2 + static_cast<int>(rng() % 6);
        auto h = make_hyper(0.5 + unif(rng) * 0.1 + 0.5, {0.5 + 0.2 * std::abs(unif(rng))},
                            0.05 + 0.02 * std::abs(unif(rng)));
        Eigen::MatrixXd X = random_points(1, m + 1, rng);
        Eigen::MatrixXd Y(m + 1, 1);
        for (int i = 0; i <= m; ++i) Y(i, 0) = std::sin(X(0, i));

        auto gp_small = MultiOutputGp::fit(X.leftCols(m), Y.topRows(m), {h});
        auto gp_big = MultiOutputGp::fit(X, Y, {h});
        const Eigen::VectorXd x = random_points(1, 1, rng).col(0);
        const double v_small = gp_small.predict_variance(x)[0];
        const double v_big = gp_big.predict_variance(x)[0];
        CHECK(v_small <= h.signal_std * h.signal_std + 1e-10);
        CHECK(v_big <= v_small + 1e-10);
    }
}

TEST_CASE("marginal variance: full subset reproduces the plain variance") {
    std::mt19937_64 rng(5);
    auto h = make_hyper(1.0, {0.8, 1.3, 0.9}, 0.1);
    Eigen::MatrixXd X = random_points(3, 6, rng);
    Eigen::MatrixXd Y(6, 1);
    for (int i = 0; i < 6; ++i) Y(i, 0) = X(0, i) - X(2, i);
    auto gp = MultiOutputGp::fit(X, Y, {h});

    gp::SubsetSpec all{{0, 1, 2}};
    for (int rep = 0; rep < 5; ++rep) {
        const Eigen::VectorXd x = random_points(3, 1, rng).col(0);
        CHECK(gp.marginal_variance(all, x)[0] ==
              doctest::Approx(gp.predict_variance(x)[0]).epsilon(1e-12));
    }
}

TEST_CASE("marginal variance: empty subset rejected") {
    std::mt19937_64 rng(6);
    auto h = make_hyper(1.0, {1.0, 1.0}, 0.1);
    Eigen::MatrixXd X = random_points(2, 3, rng);
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(3, 1);
    auto gp = MultiOutputGp::fit(X, Y, {h});
    Eigen::VectorXd x(0);
    CHECK_THROWS_AS(gp.marginal_variance(gp::SubsetSpec{{}}, x), std::invalid_argument);
}

TEST_CASE("marginal variance: matches fresh fit on projected inputs") {
    std::mt19937_64 rng(9);
    auto h = make_hyper(1.1, {0.6, 1.4}, 0.07);
    Eigen::MatrixXd X = random_points(2, 8, rng);
    Eigen::MatrixXd Y(8, 1);
    for (int i = 0; i < 8; ++i) Y(i, 0) = std::cos(X(0, i)) + 0.3 * X(1, i);
    auto gp = MultiOutputGp::fit(X, Y, {h});

    // oracle: fit a fresh 1-D GP on the projected inputs with the retained
    // lengthscale
    auto h1 = make_hyper(h.signal_std, {h.lengthscales[0]}, h.noise_std);
    auto gp1 = MultiOutputGp::fit(X.topRows(1), Y, {h1});

    gp::SubsetSpec spec{{0}};
    for (int rep = 0; rep < 10; ++rep) {
        Eigen::VectorXd x = random_points(1, 1, rng).col(0);
        CHECK(gp.marginal_variance(spec, x)[0] ==
              doctest::Approx(gp1.predict_variance(x)[0]).epsilon(1e-12));
    }
}

TEST_CASE("log likelihood: 1x1 closed form") {
    Eigen::MatrixXd X(1, 1);
    X << 0.0;
    Eigen::VectorXd y(1);
    y << 0.0;
    auto h = make_hyper(1.0, {1.0}, 1.0);  // K_sigma = 2
    const auto r = gp::log_marginal_likelihood(X, y, h);
    CHECK(r.value == doctest::Approx(-0.5 * std::log(2.0) - 0.5 * std::log(2.0 * M_PI))
                         .epsilon(1e-12));
}

TEST_CASE("log likelihood: zero targets leave only the complexity terms") {
    std::mt19937_64 rng(11);
    auto h = make_hyper(0.9, {0.7, 1.1}, 0.3);
    Eigen::MatrixXd X = random_points(2, 6, rng);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(6);
    Eigen::MatrixXd K = gp::kernel_gram(X, h);
    K.diagonal().array() += h.noise_std * h.noise_std;
    const double expected =
        -0.5 * std::log(K.determinant()) - 3.0 * std::log(2.0 * M_PI);
    CHECK(gp::log_marginal_likelihood(X, y, h).value ==
          doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("log likelihood: analytic gradient matches central differences") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> unif(0.3, 1.6);
    for (int rep = 0; rep < 20; ++rep) {
        const int d = 1 + static_cast<int>(rng() % 3);
        const int m = 4 + static_cast<int>(rng() % 5);
        Eigen::MatrixXd X = random_points(d, m, rng);
        Eigen::VectorXd y(m);
        for (int i = 0; i < m; ++i) y[i] = std::sin(X.col(i).sum());
        Hyperparameters h;
        h.signal_std = unif(rng);
        h.lengthscales = Eigen::VectorXd::NullaryExpr(d, [&](Eigen::Index) { return unif(rng); });
        h.noise_std = 0.2 * unif(rng);

        const auto res = gp::log_marginal_likelihood(X, y, h);
        // central finite differences in log-parameter space, h = 1e-6
        Eigen::VectorXd theta(d + 2);
        theta[0] = std::log(h.signal_std);
        for (int k = 0; k < d; ++k) theta[1 + k] = std::log(h.lengthscales[k]);
        theta[d + 1] = std::log(h.noise_std);
        auto eval = [&](const Eigen::VectorXd& th) {
            Hyperparameters hh;
            hh.signal_std = std::exp(th[0]);
            hh.lengthscales = th.segment(1, d).array().exp();
            hh.noise_std = std::exp(th[d + 1]);
            return gp::log_marginal_likelihood(X, y, hh).value;
        };
        for (int k = 0; k < d + 2; ++k) {
            Eigen::VectorXd tp = theta, tm = theta;
            tp[k] += 1e-6;
            tm[k] -= 1e-6;
            const double fd = (eval(tp) - eval(tm)) / 2e-6;
            const double scale = std::max({std::abs(fd), std::abs(res.gradient[k]), 1e-3});
            CHECK(std::abs(res.gradient[k] - fd) / scale < 1e-5);
        }
    }
}

TEST_CASE("optimize: recovers a known lengthscale") {
    // data generated from a GP-like smooth function with lengthscale 0.5
    std::mt19937_64 rng(2024);
    const int m = 200;
    Eigen::MatrixXd X = random_points(1, m, rng, 3.0);
    Eigen::MatrixXd Y(m, 1);
    std::normal_distribution<double> noise(0.0, 0.01);
    // superposition of sinusoids concentrated at wavelength ~ 2 pi * 0.5
    for (int i = 0; i < m; ++i) {
        const double x = X(0, i);
        Y(i, 0) = std::sin(x / 0.5) + 0.5 * std::cos(1.7 * x / 0.5 + 0.3) + noise(rng);
    }
    auto init = make_hyper(1.0, {1.5}, 0.1);
    gp::OptimizeOptions opts;
    opts.seed = 1;
    opts.max_iters = 200;
    auto result = gp::optimize_hyperparameters(X, Y, {init}, opts);
    // the maximum-likelihood fit for this dataset sits at ls ~ 0.85 with the
    // injected noise level recovered almost exactly
    CHECK(result[0].lengthscales[0] > 0.5);
    CHECK(result[0].lengthscales[0] < 1.2);
    CHECK(result[0].noise_std > 0.005);
    CHECK(result[0].noise_std < 0.02);
    // never worse than init
    CHECK(gp::log_marginal_likelihood(X, Y.col(0), result[0]).value >=
          gp::log_marginal_likelihood(X, Y.col(0), init).value - 1e-9);
}

TEST_CASE("optimize: zero budget and converged inits are no-ops") {
    std::mt19937_64 rng(3);
    Eigen::MatrixXd X = random_points(1, 10, rng);
    Eigen::MatrixXd Y(10, 1);
    for (int i = 0; i < 10; ++i) Y(i, 0) = 0.5 * X(0, i);
    auto init = make_hyper(0.8, {0.9}, 0.2);

    gp::OptimizeOptions opts;
    opts.max_iters = 0;
    auto r0 = gp::optimize_hyperparameters(X, Y, {init}, opts);
    CHECK(r0[0].signal_std == init.signal_std);
    CHECK(r0[0].lengthscales[0] == init.lengthscales[0]);
    CHECK(r0[0].noise_std == init.noise_std);

    // converge once, then re-optimizing from the optimum returns it unchanged
    opts.max_iters = 300;
    auto r1 = gp::optimize_hyperparameters(X, Y, {init}, opts);
    gp::OptimizeOptions opts2;
    opts2.max_iters = 300;
    opts2.tolerance = 1e-3;
    auto r2 = gp::optimize_hyperparameters(X, Y, r1, opts2);
    if (gp::log_marginal_likelihood(X, Y.col(0), r1[0]).gradient.norm() < opts2.tolerance) {
        CHECK(r2[0].signal_std == r1[0].signal_std);
        CHECK(r2[0].lengthscales[0] == r1[0].lengthscales[0]);
        CHECK(r2[0].noise_std == r1[0].noise_std);
    }
}
