#pragma once

#include <vector>

#include "smcl/kalman.hpp"
#include "smcl/ssm.hpp"

namespace smcl::ssm {

/// Linear-Gaussian model behind the engine interface, used to check the
/// particle machinery against exact Kalman recursions. Flat parameters:
///   A (dx x dx), B (dx x du), C (dx), rho_x (dx), rho_y
/// x_k = A x_{k-1} + B u_k + N(0, diag(exp(2 rho_x))), y_k = C x_k + N(0, exp(2 rho_y)),
/// x_0 ~ N(0, diag(exp(2 rho_x))).
class LinearGaussianModel final : public Model {
public:
    LinearGaussianModel(std::size_t state_dim, std::size_t feature_dim);

    std::size_t o_a() const { return 0; }
    std::size_t o_b() const { return dx_ * dx_; }
    std::size_t o_c() const { return o_b() + dx_ * du_; }
    std::size_t o_rhox() const { return o_c() + dx_; }
    std::size_t o_rhoy() const { return o_rhox() + dx_; }

    std::size_t state_dim() const override { return dx_; }
    std::size_t feature_dim() const override { return du_; }
    std::span<const double> params() const override { return values_; }
    std::span<double> params() override { return values_; }
    void transition_mean(std::span<const double> x_prev, std::span<const double> u,
                         std::span<double> out) const override;
    std::span<const double> log_std_x() const override { return {values_.data() + o_rhox(), dx_}; }
    double obs_mean(std::span<const double> x) const override;
    double log_std_y() const override { return values_[o_rhoy()]; }
    void grad_init(std::span<const double> x0, double y0, std::span<double> out) const override;
    void grad_step(std::span<const double> x_prev, std::span<const double> u, std::span<const double> x, double y,
                   std::span<double> out) const override;
    std::vector<std::string> param_names() const override;

    /// The same model as Kalman parameters (mu0 = 0, P0 = Q).
    baselines::HmmParams to_hmm() const;

private:
    std::size_t dx_, du_;
    std::vector<double> values_;
};

}  // namespace smcl::ssm
