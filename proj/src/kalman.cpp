#include "smcl/kalman.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "smcl/errors.hpp"

namespace smcl::baselines {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kCovFloor = 1e-8;

VectorXd input_row(const RowMatrix& inputs, std::size_t k, std::size_t du) {
    VectorXd u(static_cast<Eigen::Index>(du));
    for (std::size_t j = 0; j < du; ++j) u(static_cast<Eigen::Index>(j)) = inputs(k, j);
    return u;
}

void check_inputs(const HmmParams& p, const RowMatrix& inputs, std::size_t t) {
    if (p.input_dim() == 0) return;
    if (inputs.rows() != t || inputs.cols() != p.input_dim())
        throw std::invalid_argument("HMM inputs must be " + std::to_string(t) + " x " + std::to_string(p.input_dim()));
}

MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// Symmetric part with eigenvalues floored at kCovFloor; reports when it had to act.
MatrixXd floor_spd(const MatrixXd& m, bool& floored) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m));
    VectorXd ev = es.eigenvalues();
    floored = false;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (!(ev(i) >= kCovFloor)) {
            ev(i) = kCovFloor;
            floored = true;
        }
    if (!floored) return symmetrize(m);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// Symmetric square root for sampling; tolerates PSD input.
MatrixXd sqrt_psd(const MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m));
    VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal();
}

}  // namespace

KalmanFilterOutput kalman_filter(const HmmParams& p, const RowMatrix& inputs, std::span<const double> y) {
    const std::size_t t = y.size();
    check_inputs(p, inputs, t);
    const auto d = static_cast<Eigen::Index>(p.state_dim());
    const MatrixXd eye = MatrixXd::Identity(d, d);
    KalmanFilterOutput out;
    out.pred_mean.reserve(t);
    out.mean.reserve(t);
    VectorXd m = p.mu0;
    MatrixXd P = p.P0;
    for (std::size_t k = 0; k < t; ++k) {
        if (k > 0) {
            m = p.A * out.mean.back();
            if (p.input_dim()) m += p.B * input_row(inputs, k, p.input_dim());
            P = symmetrize(p.A * out.cov.back() * p.A.transpose() + p.Q);
        }
        out.pred_mean.push_back(m);
        out.pred_cov.push_back(P);
        const double s = (p.C * P * p.C.transpose())(0, 0) + p.R;
        if (!(s > 0.0) || !std::isfinite(s))
            throw NumericalError("Kalman filter: innovation variance not positive at step " + std::to_string(k));
        const double e = y[k] - (p.C * m)(0, 0);
        const VectorXd K = P * p.C.transpose() / s;
        const double ll = -0.5 * (std::log(2.0 * std::numbers::pi * s) + e * e / s);
        out.step_loglik.push_back(ll);
        out.loglik += ll;
        m = m + K * e;
        const MatrixXd ikc = eye - K * p.C;
        P = symmetrize(ikc * P * ikc.transpose() + K * p.R * K.transpose());
        out.mean.push_back(m);
        out.cov.push_back(P);
    }
    return out;
}

KalmanSmootherOutput kalman_smoother(const HmmParams& p, const RowMatrix&, const KalmanFilterOutput& f) {
    const std::size_t t = f.mean.size();
    KalmanSmootherOutput s;
    s.mean = f.mean;
    s.cov = f.cov;
    s.lag_cov.assign(t, MatrixXd::Zero(p.A.rows(), p.A.rows()));
    for (std::size_t k = t - 1; k-- > 0;) {
        const MatrixXd J = f.pred_cov[k + 1].ldlt().solve(p.A * f.cov[k]).transpose();
        s.mean[k] = f.mean[k] + J * (s.mean[k + 1] - f.pred_mean[k + 1]);
        s.cov[k] = symmetrize(f.cov[k] + J * (s.cov[k + 1] - f.pred_cov[k + 1]) * J.transpose());
        s.lag_cov[k + 1] = s.cov[k + 1] * J.transpose();
    }
    return s;
}

HmmParams em_initialize(std::size_t state_dim, std::size_t input_dim, std::span<const double> y, std::uint64_t seed) {
    const auto d = static_cast<Eigen::Index>(state_dim);
    Rng rng(stream_seed(seed, {0xe3u}));
    MatrixXd g(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) g(i, j) = rng.normal();
    Eigen::HouseholderQR<MatrixXd> qr(g);
    MatrixXd orth = qr.householderQ() * MatrixXd::Identity(d, d);

    double mean = 0.0, var = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    for (double v : y) var += (v - mean) * (v - mean);
    var = std::max(var / static_cast<double>(y.size()), 1e-6);

    HmmParams p;
    p.A = 0.9 * orth;
    p.B = MatrixXd::Zero(d, static_cast<Eigen::Index>(input_dim));
    p.C = Eigen::RowVectorXd(d);
    for (Eigen::Index i = 0; i < d; ++i) p.C(i) = rng.normal() / std::sqrt(static_cast<double>(d));
    p.Q = 0.1 * var * MatrixXd::Identity(d, d);
    p.R = 0.1 * var;
    p.mu0 = VectorXd::Zero(d);
    p.P0 = p.Q;
    return p;
}

HmmParams em_step(const HmmParams& p, const RowMatrix& inputs, std::span<const double> y,
                  std::vector<std::string>* warnings) {
    const std::size_t t = y.size();
    if (t < 2) throw std::invalid_argument("EM needs at least two observations");
    const auto f = kalman_filter(p, inputs, y);
    const auto s = kalman_smoother(p, inputs, f);
    const auto d = static_cast<Eigen::Index>(p.state_dim());
    const auto du = static_cast<Eigen::Index>(p.input_dim());

    // Transition regression of x_k on z_k = [x_{k-1}; u_k].
    MatrixXd szz = MatrixXd::Zero(d + du, d + du);
    MatrixXd sxz = MatrixXd::Zero(d, d + du);
    MatrixXd s11 = MatrixXd::Zero(d, d);
    for (std::size_t k = 1; k < t; ++k) {
        const MatrixXd exx_prev = s.cov[k - 1] + s.mean[k - 1] * s.mean[k - 1].transpose();
        const MatrixXd exx = s.cov[k] + s.mean[k] * s.mean[k].transpose();
        const MatrixXd ex_cross = s.lag_cov[k] + s.mean[k] * s.mean[k - 1].transpose();
        szz.topLeftCorner(d, d) += exx_prev;
        sxz.leftCols(d) += ex_cross;
        s11 += exx;
        if (du) {
            const VectorXd u = input_row(inputs, k, static_cast<std::size_t>(du));
            szz.topRightCorner(d, du) += s.mean[k - 1] * u.transpose();
            szz.bottomLeftCorner(du, d) += u * s.mean[k - 1].transpose();
            szz.bottomRightCorner(du, du) += u * u.transpose();
            sxz.rightCols(du) += s.mean[k] * u.transpose();
        }
    }
    const MatrixXd phi = szz.ldlt().solve(sxz.transpose()).transpose();

    HmmParams q = p;
    q.A = phi.leftCols(d);
    q.B = phi.rightCols(du);
    bool floored = false;
    q.Q = floor_spd((s11 - phi * sxz.transpose()) / static_cast<double>(t - 1), floored);
    if (floored && warnings) warnings->push_back("state noise covariance floored at 1e-8");

    MatrixXd sxx = MatrixXd::Zero(d, d);
    Eigen::RowVectorXd syx = Eigen::RowVectorXd::Zero(d);
    for (std::size_t k = 0; k < t; ++k) {
        sxx += s.cov[k] + s.mean[k] * s.mean[k].transpose();
        syx += y[k] * s.mean[k].transpose();
    }
    q.C = sxx.ldlt().solve(syx.transpose()).transpose();
    double r = 0.0;
    for (std::size_t k = 0; k < t; ++k) r += y[k] * y[k] - (q.C * s.mean[k])(0, 0) * y[k];
    q.R = r / static_cast<double>(t);
    if (!(q.R >= kCovFloor)) {
        q.R = kCovFloor;
        if (warnings) warnings->push_back("observation noise variance floored at 1e-8");
    }
    q.mu0 = s.mean[0];
    q.P0 = floor_spd(s.cov[0], floored);
    if (floored && warnings) warnings->push_back("initial covariance floored at 1e-8");
    return q;
}

EmResult em_fit_from(const HmmParams& init, const RowMatrix& inputs, std::span<const double> y, const EmOptions& opts) {
    if (y.size() <= init.state_dim())
        throw std::invalid_argument("EM needs more observations than state dimensions");
    EmResult res;
    res.params = init;
    res.loglik_trace.push_back(kalman_filter(init, inputs, y).loglik);
    for (std::size_t it = 0; it < opts.max_iters; ++it) {
        HmmParams next = em_step(res.params, inputs, y, &res.warnings);
        const double ll = kalman_filter(next, inputs, y).loglik;
        const double prev = res.loglik_trace.back();
        res.params = std::move(next);
        res.loglik_trace.push_back(ll);
        if (std::abs(ll - prev) < opts.tol * std::max(1.0, std::abs(prev))) break;
    }
    return res;
}

EmResult em_fit(const RowMatrix& inputs, std::span<const double> y, const EmOptions& opts) {
    const std::size_t du = opts.use_inputs ? inputs.cols() : 0;
    const RowMatrix none;
    return em_fit_from(em_initialize(opts.state_dim, du, y, opts.seed), du ? inputs : none, y, opts);
}

RowMatrix hmm_forecast(const HmmParams& p, const VectorXd& mean, const MatrixXd& cov, const RowMatrix& future,
                       std::size_t count, Rng& rng) {
    const std::size_t h = future.rows();
    const auto d = static_cast<Eigen::Index>(p.state_dim());
    const MatrixXd l0 = sqrt_psd(cov);
    const MatrixXd lq = sqrt_psd(p.Q);
    const double sr = std::sqrt(p.R);
    RowMatrix out(count, h);
    VectorXd z(d);
    for (std::size_t n = 0; n < count; ++n) {
        for (Eigen::Index i = 0; i < d; ++i) z(i) = rng.normal();
        VectorXd x = mean + l0 * z;
        for (std::size_t k = 0; k < h; ++k) {
            for (Eigen::Index i = 0; i < d; ++i) z(i) = rng.normal();
            x = p.A * x + lq * z;
            if (p.input_dim()) x += p.B * input_row(future, k, p.input_dim());
            out(n, k) = (p.C * x)(0, 0) + sr * rng.normal();
        }
    }
    return out;
}

void hmm_predictive_moments(const HmmParams& p, const VectorXd& mean, const MatrixXd& cov, const RowMatrix& future,
                            std::vector<double>& y_mean, std::vector<double>& y_var) {
    VectorXd m = mean;
    MatrixXd P = cov;
    y_mean.clear();
    y_var.clear();
    for (std::size_t k = 0; k < future.rows(); ++k) {
        m = p.A * m;
        if (p.input_dim()) m += p.B * input_row(future, k, p.input_dim());
        P = p.A * P * p.A.transpose() + p.Q;
        y_mean.push_back((p.C * m)(0, 0));
        y_var.push_back((p.C * P * p.C.transpose())(0, 0) + p.R);
    }
}

double gaussian_quantile(double prob) { return boost::math::quantile(boost::math::normal(), prob); }

}  // namespace smcl::baselines
