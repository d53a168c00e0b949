#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace smcl::ssm {

/// Interface the particle engine runs against. The transition is Gaussian
/// with diagonal covariance diag(exp(2 log_std_x)) around transition_mean(),
/// the initial law is N(0, same covariance), and the scalar observation is
/// Gaussian with std exp(log_std_y) around obs_mean(). Gradients are with
/// respect to the flat parameter vector params().
class Model {
public:
    virtual ~Model() = default;

    virtual std::size_t state_dim() const = 0;
    virtual std::size_t feature_dim() const = 0;
    virtual std::span<const double> params() const = 0;
    virtual std::span<double> params() = 0;
    std::size_t param_dim() const { return params().size(); }

    virtual void transition_mean(std::span<const double> x_prev, std::span<const double> u,
                                 std::span<double> out) const = 0;
    virtual std::span<const double> log_std_x() const = 0;
    virtual double obs_mean(std::span<const double> x) const = 0;
    virtual double log_std_y() const = 0;

    /// out = grad[log rho_0(x0) + log r(x0, y0)]
    virtual void grad_init(std::span<const double> x0, double y0, std::span<double> out) const = 0;
    /// out = grad[log m(x_prev, u; x) + log r(x, y)]
    virtual void grad_step(std::span<const double> x_prev, std::span<const double> u, std::span<const double> x,
                           double y, std::span<double> out) const = 0;

    /// Parameter names, one per entry of params(), e.g. "W_gx[1,0]".
    virtual std::vector<std::string> param_names() const = 0;

    double obs_loglik(std::span<const double> x, double y) const;
    double init_logpdf(std::span<const double> x) const;
    double transition_logpdf(std::span<const double> x_prev, std::span<const double> u,
                             std::span<const double> x) const;
};

/// log N(x; mean, diag(var)). Throws std::invalid_argument on var <= 0.
double gaussian_logpdf(std::span<const double> x, std::span<const double> mean, std::span<const double> var);

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// Last-layer parameters theta, stored flat in the order
///   W_gx (dx x dx), b_gx (dx), W_gu (dx x du), b_gu (dx), W_f (dx), b_f,
///   rho_x (dx), rho_y
/// with Sigma_x = diag(exp(2 rho_x)) and Sigma_y = exp(2 rho_y).
struct SsmParams {
    std::size_t dx = 0;
    std::size_t du = 0;
    std::vector<double> values;

    static SsmParams create(std::size_t state_dim, std::size_t feature_dim);
    /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0, Sigma_x = 0.1^2 I, Sigma_y = 0.05^2.
    static SsmParams random(std::size_t state_dim, std::size_t feature_dim, std::uint64_t seed);

    std::size_t o_wgx() const { return 0; }
    std::size_t o_bgx() const { return dx * dx; }
    std::size_t o_wgu() const { return o_bgx() + dx; }
    std::size_t o_bgu() const { return o_wgu() + dx * du; }
    std::size_t o_wf() const { return o_bgu() + dx; }
    std::size_t o_bf() const { return o_wf() + dx; }
    std::size_t o_rhox() const { return o_bf() + 1; }
    std::size_t o_rhoy() const { return o_rhox() + dx; }
    std::size_t size() const { return o_rhoy() + 1; }

    double wgx(std::size_t i, std::size_t j) const { return values[o_wgx() + i * dx + j]; }
    double wgu(std::size_t i, std::size_t j) const { return values[o_wgu() + i * du + j]; }
    std::span<const double> rho_x() const { return {values.data() + o_rhox(), dx}; }
    double rho_y() const { return values[o_rhoy()]; }

    struct Block {
        std::string name;
        std::size_t offset, rows, cols;
    };
    std::vector<Block> blocks() const;
};

/// g_theta(x_prev, u) = tanh(W_gx x_prev + b_gx + W_gu u + b_gu)
void g_apply(const SsmParams& p, std::span<const double> x_prev, std::span<const double> u, std::span<double> out);

/// f_theta(x) = sigmoid(W_f x + b_f)
double f_apply(const SsmParams& p, std::span<const double> x);

double log_rho0(const SsmParams& p, std::span<const double> x);
double log_m(const SsmParams& p, std::span<const double> x_prev, std::span<const double> u, std::span<const double> x);
double log_r(const SsmParams& p, std::span<const double> x, double y);

/// out = grad_theta[log m(x_prev, u; x) + log r(x, y)]. Throws NumericalError
/// naming the parameter if a component is not finite.
void grad_log_term(const SsmParams& p, std::span<const double> x_prev, std::span<const double> u,
                   std::span<const double> x, double y, std::span<double> out);

/// out = grad_theta[log rho_0(x0) + log r(x0, y0)]; the rho_0 part only
/// touches rho_x.
void grad_log_init(const SsmParams& p, std::span<const double> x0, double y0, std::span<double> out);

/// The nonlinear last layer as an engine Model.
class NonlinearModel final : public Model {
public:
    explicit NonlinearModel(SsmParams p) : p_(std::move(p)) {}

    const SsmParams& ssm() const { return p_; }
    SsmParams& ssm() { return p_; }

    std::size_t state_dim() const override { return p_.dx; }
    std::size_t feature_dim() const override { return p_.du; }
    std::span<const double> params() const override { return p_.values; }
    std::span<double> params() override { return p_.values; }
    void transition_mean(std::span<const double> x_prev, std::span<const double> u,
                         std::span<double> out) const override {
        g_apply(p_, x_prev, u, out);
    }
    std::span<const double> log_std_x() const override { return p_.rho_x(); }
    double obs_mean(std::span<const double> x) const override { return f_apply(p_, x); }
    double log_std_y() const override { return p_.rho_y(); }
    void grad_init(std::span<const double> x0, double y0, std::span<double> out) const override {
        grad_log_init(p_, x0, y0, out);
    }
    void grad_step(std::span<const double> x_prev, std::span<const double> u, std::span<const double> x, double y,
                   std::span<double> out) const override {
        grad_log_term(p_, x_prev, u, x, y, out);
    }
    std::vector<std::string> param_names() const override;

private:
    SsmParams p_;
};

}  // namespace smcl::ssm
