#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "smcl/errors.hpp"
#include "smcl/kalman.hpp"

using namespace smcl;
using baselines::HmmParams;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

HmmParams random_params(Eigen::Index d, Eigen::Index du, Rng& rng) {
    HmmParams p;
    MatrixXd g(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) g(i, j) = rng.normal();
    const double radius = Eigen::EigenSolver<MatrixXd>(g).eigenvalues().cwiseAbs().maxCoeff();
    p.A = 0.85 * g / radius;
    p.B = MatrixXd(d, du);
    for (Eigen::Index i = 0; i < p.B.size(); ++i) p.B(i) = 0.5 * rng.normal();
    MatrixXd l(d, d);
    for (Eigen::Index i = 0; i < l.size(); ++i) l(i) = 0.3 * rng.normal();
    p.Q = l * l.transpose() + 0.05 * MatrixXd::Identity(d, d);
    p.C = Eigen::RowVectorXd(d);
    for (Eigen::Index i = 0; i < d; ++i) p.C(i) = rng.normal();
    p.R = 0.2 + rng.uniform();
    p.mu0 = VectorXd(d);
    for (Eigen::Index i = 0; i < d; ++i) p.mu0(i) = rng.normal();
    p.P0 = p.Q + 0.5 * MatrixXd::Identity(d, d);
    return p;
}

// Joint Gaussian of the stacked states x_{0:T} and observations y_{0:T}
// built from the model equations without any recursion over filtered laws.
struct Dense {
    VectorXd mx, my;
    MatrixXd sxx, sxy, syy;
};

Dense dense_joint(const HmmParams& p, const RowMatrix& inputs, std::size_t steps) {
    const Eigen::Index d = p.A.rows();
    const auto n = static_cast<Eigen::Index>(steps);
    std::vector<VectorXd> mean(steps);
    std::vector<MatrixXd> var(steps);
    mean[0] = p.mu0;
    var[0] = p.P0;
    for (std::size_t k = 1; k < steps; ++k) {
        VectorXd u(p.B.cols());
        for (Eigen::Index j = 0; j < p.B.cols(); ++j) u(j) = inputs(k, static_cast<std::size_t>(j));
        mean[k] = p.A * mean[k - 1] + p.B * u;
        var[k] = p.A * var[k - 1] * p.A.transpose() + p.Q;
    }
    Dense out;
    out.mx = VectorXd(n * d);
    out.sxx = MatrixXd(n * d, n * d);
    for (Eigen::Index k = 0; k < n; ++k) {
        out.mx.segment(k * d, d) = mean[static_cast<std::size_t>(k)];
        MatrixXd ak = MatrixXd::Identity(d, d);
        for (Eigen::Index l = k; l < n; ++l) {
            // Cov(x_l, x_k) = A^{l-k} Var(x_k)
            const MatrixXd c = ak * var[static_cast<std::size_t>(k)];
            out.sxx.block(l * d, k * d, d, d) = c;
            out.sxx.block(k * d, l * d, d, d) = c.transpose();
            ak = p.A * ak;
        }
    }
    MatrixXd cbig = MatrixXd::Zero(n, n * d);
    for (Eigen::Index k = 0; k < n; ++k) cbig.block(k, k * d, 1, d) = p.C;
    out.my = cbig * out.mx;
    out.sxy = out.sxx * cbig.transpose();
    out.syy = cbig * out.sxx * cbig.transpose() + p.R * MatrixXd::Identity(n, n);
    return out;
}

double dense_loglik(const Dense& dn, const std::vector<double>& y) {
    const VectorXd r = Eigen::Map<const VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())) - dn.my;
    Eigen::LLT<MatrixXd> llt(dn.syy);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return -0.5 * (static_cast<double>(y.size()) * std::log(2.0 * M_PI) + logdet + r.dot(llt.solve(r)));
}

}  // namespace

TEST_CASE("Kalman log-likelihood equals the dense joint-Gaussian value") {
    Rng rng(1);
    for (Eigen::Index d : {1, 2, 3}) {
        for (Eigen::Index du : {0, 2}) {
            const auto p = random_params(d, du, rng);
            for (std::size_t t : {1u, 10u, 50u}) {
                const auto data = testing::simulate_lgssm(p, t, rng);
                const double kf = baselines::kalman_filter(p, data.inputs, data.y).loglik;
                const double dn = dense_loglik(dense_joint(p, data.inputs, t), data.y);
                CHECK(std::abs(kf - dn) <= 1e-8 * std::max(1.0, std::abs(dn)));
            }
        }
    }
}

TEST_CASE("RTS smoother matches the dense Gaussian conditional") {
    Rng rng(2);
    for (Eigen::Index d : {1, 2}) {
        const auto p = random_params(d, 1, rng);
        const std::size_t t = 25;
        const auto data = testing::simulate_lgssm(p, t, rng);
        const auto f = baselines::kalman_filter(p, data.inputs, data.y);
        const auto s = baselines::kalman_smoother(p, data.inputs, f);
        const auto dn = dense_joint(p, data.inputs, t);
        const VectorXd r = Eigen::Map<const VectorXd>(data.y.data(), static_cast<Eigen::Index>(t)) - dn.my;
        Eigen::LLT<MatrixXd> llt(dn.syy);
        const VectorXd cm = dn.mx + dn.sxy * llt.solve(r);
        const MatrixXd cv = dn.sxx - dn.sxy * llt.solve(dn.sxy.transpose());
        for (std::size_t k = 0; k < t; ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            CHECK((s.mean[k] - cm.segment(kk * d, d)).norm() <= 1e-8);
            CHECK((s.cov[k] - cv.block(kk * d, kk * d, d, d)).norm() <= 1e-8);
            if (k > 0) CHECK((s.lag_cov[k] - cv.block(kk * d, (kk - 1) * d, d, d)).norm() <= 1e-8);
        }
        // filtered mean at the last step equals the smoothed one
        CHECK((f.mean.back() - s.mean.back()).norm() <= 1e-12);
    }
}

TEST_CASE("EM: null run, monotone iterations, no decrease from the truth") {
    Rng rng(3);
    const auto truth = random_params(2, 1, rng);
    const auto data = testing::simulate_lgssm(truth, 200, rng);
    baselines::EmOptions opts;
    opts.state_dim = 2;
    opts.max_iters = 0;
    const auto init = baselines::em_initialize(2, 1, data.y, 7);
    const auto r0 = baselines::em_fit_from(init, data.inputs, data.y, opts);
    CHECK(r0.params.A == init.A);
    CHECK(r0.params.C == init.C);
    CHECK(r0.loglik_trace.size() == 1);

    opts.max_iters = 50;
    opts.tol = 0.0;
    const auto r = baselines::em_fit_from(init, data.inputs, data.y, opts);
    CHECK(r.loglik_trace.size() == 51);
    for (std::size_t i = 1; i < r.loglik_trace.size(); ++i)
        CHECK(r.loglik_trace[i] >= r.loglik_trace[i - 1] - 1e-8);
    CHECK(r.loglik_trace.back() > r.loglik_trace.front());

    const double before = baselines::kalman_filter(truth, data.inputs, data.y).loglik;
    const auto next = baselines::em_step(truth, data.inputs, data.y);
    CHECK(baselines::kalman_filter(next, data.inputs, data.y).loglik >= before - 1e-8);
    CHECK(next.Q.ldlt().isPositive());
    CHECK(next.R > 0.0);
}

TEST_CASE("em_fit without inputs ignores the covariates") {
    Rng rng(4);
    const auto truth = random_params(1, 0, rng);
    auto data = testing::simulate_lgssm(truth, 120, rng);
    baselines::EmOptions opts;
    opts.state_dim = 2;
    opts.use_inputs = false;
    opts.max_iters = 5;
    const auto r = baselines::em_fit(testing::random_matrix(120, 3, rng), data.y, opts);
    CHECK(r.params.input_dim() == 0);
    CHECK(r.params.state_dim() == 2);
    const auto r2 = baselines::em_fit(testing::random_matrix(120, 3, rng), data.y, opts);
    CHECK(r.params.A == r2.params.A);
}

TEST_CASE("initialization is reproducible and spectrally capped") {
    const std::vector<double> y = {0.1, 0.5, 0.3, 0.9, 0.2, 0.4};
    const auto a = baselines::em_initialize(4, 2, y, 11);
    const auto b = baselines::em_initialize(4, 2, y, 11);
    CHECK(a.A == b.A);
    const double radius = Eigen::EigenSolver<MatrixXd>(a.A).eigenvalues().cwiseAbs().maxCoeff();
    CHECK(radius == doctest::Approx(0.9));
    CHECK(a.B.isZero());
    CHECK(a.mu0.isZero());
}

TEST_CASE("forecast rollouts match the closed-form predictive moments") {
    Rng rng(5);
    const auto p = random_params(2, 1, rng);
    VectorXd m(2);
    m << 0.3, -0.2;
    MatrixXd c(2, 2);
    c << 0.2, 0.05, 0.05, 0.1;
    const RowMatrix future = testing::random_matrix(6, 1, rng);
    std::vector<double> ym, yv;
    baselines::hmm_predictive_moments(p, m, c, future, ym, yv);
    const std::size_t n = 40000;
    const auto out = baselines::hmm_forecast(p, m, c, future, n, rng);
    for (std::size_t k = 0; k < 6; ++k) {
        double s = 0.0, s2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += out(i, k), s2 += out(i, k) * out(i, k);
        const double mean = s / n, var = s2 / n - mean * mean;
        CHECK(std::abs(mean - ym[k]) <= 5.0 * std::sqrt(yv[k] / n));
        CHECK(std::abs(var - yv[k]) <= 5.0 * yv[k] * std::sqrt(2.0 / n));
    }
}

TEST_CASE("standard normal quantiles") {
    CHECK(baselines::gaussian_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(baselines::gaussian_quantile(0.5) == doctest::Approx(0.0));
}
