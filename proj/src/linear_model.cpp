#include "smcl/linear_model.hpp"

#include <cmath>

namespace smcl::ssm {

LinearGaussianModel::LinearGaussianModel(std::size_t state_dim, std::size_t feature_dim)
    : dx_(state_dim), du_(feature_dim), values_(o_rhoy() + 1, 0.0) {}

void LinearGaussianModel::transition_mean(std::span<const double> x_prev, std::span<const double> u,
                                          std::span<double> out) const {
    for (std::size_t i = 0; i < dx_; ++i) {
        double a = 0.0;
        for (std::size_t j = 0; j < dx_; ++j) a += values_[o_a() + i * dx_ + j] * x_prev[j];
        for (std::size_t j = 0; j < du_; ++j) a += values_[o_b() + i * du_ + j] * u[j];
        out[i] = a;
    }
}

double LinearGaussianModel::obs_mean(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < dx_; ++i) s += values_[o_c() + i] * x[i];
    return s;
}

void LinearGaussianModel::grad_init(std::span<const double> x0, double y0, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const auto rho = log_std_x();
    for (std::size_t i = 0; i < dx_; ++i) out[o_rhox() + i] = -1.0 + x0[i] * x0[i] * std::exp(-2.0 * rho[i]);
    const double iv = std::exp(-2.0 * log_std_y());
    const double r = y0 - obs_mean(x0);
    for (std::size_t i = 0; i < dx_; ++i) out[o_c() + i] = r * iv * x0[i];
    out[o_rhoy()] = -1.0 + r * r * iv;
}

void LinearGaussianModel::grad_step(std::span<const double> x_prev, std::span<const double> u,
                                    std::span<const double> x, double y, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> mean(dx_);
    transition_mean(x_prev, u, mean);
    const auto rho = log_std_x();
    for (std::size_t i = 0; i < dx_; ++i) {
        const double iv = std::exp(-2.0 * rho[i]);
        const double r = x[i] - mean[i];
        for (std::size_t j = 0; j < dx_; ++j) out[o_a() + i * dx_ + j] = r * iv * x_prev[j];
        for (std::size_t j = 0; j < du_; ++j) out[o_b() + i * du_ + j] = r * iv * u[j];
        out[o_rhox() + i] = -1.0 + r * r * iv;
    }
    const double iv = std::exp(-2.0 * log_std_y());
    const double r = y - obs_mean(x);
    for (std::size_t i = 0; i < dx_; ++i) out[o_c() + i] = r * iv * x[i];
    out[o_rhoy()] = -1.0 + r * r * iv;
}

std::vector<std::string> LinearGaussianModel::param_names() const {
    std::vector<std::string> n;
    for (std::size_t i = 0; i < dx_; ++i)
        for (std::size_t j = 0; j < dx_; ++j) n.push_back("A[" + std::to_string(i) + "," + std::to_string(j) + "]");
    for (std::size_t i = 0; i < dx_; ++i)
        for (std::size_t j = 0; j < du_; ++j) n.push_back("B[" + std::to_string(i) + "," + std::to_string(j) + "]");
    for (std::size_t i = 0; i < dx_; ++i) n.push_back("C[" + std::to_string(i) + "]");
    for (std::size_t i = 0; i < dx_; ++i) n.push_back("rho_x[" + std::to_string(i) + "]");
    n.push_back("rho_y");
    return n;
}

baselines::HmmParams LinearGaussianModel::to_hmm() const {
    const auto d = static_cast<Eigen::Index>(dx_);
    const auto du = static_cast<Eigen::Index>(du_);
    baselines::HmmParams p;
    p.A.resize(d, d);
    p.B.resize(d, du);
    p.C.resize(d);
    p.Q = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) p.A(i, j) = values_[o_a() + static_cast<std::size_t>(i * d + j)];
        for (Eigen::Index j = 0; j < du; ++j) p.B(i, j) = values_[o_b() + static_cast<std::size_t>(i * du + j)];
        p.C(i) = values_[o_c() + static_cast<std::size_t>(i)];
        p.Q(i, i) = std::exp(2.0 * values_[o_rhox() + static_cast<std::size_t>(i)]);
    }
    p.R = std::exp(2.0 * log_std_y());
    p.mu0 = Eigen::VectorXd::Zero(d);
    p.P0 = p.Q;
    return p;
}

}  // namespace smcl::ssm
