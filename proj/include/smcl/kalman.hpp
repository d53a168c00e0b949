#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smcl/matrix.hpp"
#include "smcl/rng.hpp"

namespace smcl::baselines {

/// Linear-Gaussian state-space model with scalar observations:
///   x_0 ~ N(mu0, P0)
///   x_k = A x_{k-1} + B u_k + w_k,  w_k ~ N(0, Q)     (k >= 1)
///   y_k = C x_k + v_k,              v_k ~ N(0, R)     (k >= 0)
/// B may have zero columns (no exogenous inputs).
struct HmmParams {
    Eigen::MatrixXd A, B, Q, P0;
    Eigen::RowVectorXd C;
    Eigen::VectorXd mu0;
    double R = 1.0;

    std::size_t state_dim() const { return static_cast<std::size_t>(A.rows()); }
    std::size_t input_dim() const { return static_cast<std::size_t>(B.cols()); }
};

struct KalmanFilterOutput {
    std::vector<Eigen::VectorXd> pred_mean, mean;  // x_k | y_{0:k-1} and x_k | y_{0:k}
    std::vector<Eigen::MatrixXd> pred_cov, cov;
    std::vector<double> step_loglik;
    double loglik = 0.0;
};

struct KalmanSmootherOutput {
    std::vector<Eigen::VectorXd> mean;
    std::vector<Eigen::MatrixXd> cov;
    std::vector<Eigen::MatrixXd> lag_cov;  // lag_cov[k] = Cov(x_k, x_{k-1} | y_{0:T}), k >= 1; [0] unused
};

/// Row k of `inputs` drives the transition into x_k (row 0 unused); `inputs`
/// may be empty when B has no columns. Throws NumericalError naming the step
/// if an innovation variance is not positive.
KalmanFilterOutput kalman_filter(const HmmParams& p, const RowMatrix& inputs, std::span<const double> y);

/// Rauch-Tung-Striebel backward pass, with lag-one covariances for EM.
KalmanSmootherOutput kalman_smoother(const HmmParams& p, const RowMatrix& inputs, const KalmanFilterOutput& f);

struct EmOptions {
    std::size_t state_dim = 4;
    std::size_t max_iters = 200;
    double tol = 1e-6;  // stop when relative loglik improvement falls below
    bool use_inputs = true;
    std::uint64_t seed = 0;
};

struct EmResult {
    HmmParams params;
    std::vector<double> loglik_trace;  // loglik of each iterate, starting with the initialization
    std::vector<std::string> warnings;
};

/// Deterministic initialization: A = 0.9 * random orthogonal, B = 0,
/// C ~ N(0,1)/sqrt(d), Q = R = 0.1 * var(y), mu0 = 0, P0 = Q.
HmmParams em_initialize(std::size_t state_dim, std::size_t input_dim, std::span<const double> y, std::uint64_t seed);

/// One exact EM iteration (E-step by smoothing, closed-form M-step).
HmmParams em_step(const HmmParams& p, const RowMatrix& inputs, std::span<const double> y,
                  std::vector<std::string>* warnings = nullptr);

EmResult em_fit(const RowMatrix& inputs, std::span<const double> y, const EmOptions& opts);

/// Same as em_fit but starting from `init`.
EmResult em_fit_from(const HmmParams& init, const RowMatrix& inputs, std::span<const double> y, const EmOptions& opts);

/// `count` rollouts of y over future_inputs.rows() steps starting from the
/// filtered law N(mean, cov) of the last observed state.
RowMatrix hmm_forecast(const HmmParams& p, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                       const RowMatrix& future_inputs, std::size_t count, Rng& rng);

/// Closed-form predictive mean and variance of y over the horizon.
void hmm_predictive_moments(const HmmParams& p, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                            const RowMatrix& future_inputs, std::vector<double>& y_mean, std::vector<double>& y_var);

double gaussian_quantile(double p);

}  // namespace smcl::baselines
