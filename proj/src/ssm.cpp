#include "smcl/ssm.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "smcl/errors.hpp"
#include "smcl/rng.hpp"

namespace smcl::ssm {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

// Gaussian log density with log-std parameterization, one coordinate.
inline double logpdf1(double x, double mean, double log_std) {
    const double r = (x - mean) * std::exp(-log_std);
    return -kHalfLog2Pi - log_std - 0.5 * r * r;
}

void require_finite(const SsmParams& p, std::span<const double> g) {
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!std::isfinite(g[i])) {
            for (const auto& b : p.blocks())
                if (i >= b.offset && i < b.offset + b.rows * b.cols)
                    throw NumericalError("non-finite gradient for SSM parameter " + b.name + " (entry " +
                                         std::to_string(i - b.offset) + ")");
            throw NumericalError("non-finite SSM gradient");
        }
}

// Observation part of the gradient, added into out.
void add_obs_grad(const SsmParams& p, std::span<const double> x, double y, std::span<double> out) {
    const std::size_t dx = p.dx;
    double s = p.values[p.o_bf()];
    for (std::size_t k = 0; k < dx; ++k) s += p.values[p.o_wf() + k] * x[k];
    const double f = sigmoid(s);
    const double inv_var = std::exp(-2.0 * p.rho_y());
    const double resid = y - f;
    const double ds = resid * inv_var * f * (1.0 - f);
    for (std::size_t k = 0; k < dx; ++k) out[p.o_wf() + k] += ds * x[k];
    out[p.o_bf()] += ds;
    out[p.o_rhoy()] += -1.0 + resid * resid * inv_var;
}

}  // namespace

double gaussian_logpdf(std::span<const double> x, std::span<const double> mean, std::span<const double> var) {
    if (x.size() != mean.size() || x.size() != var.size()) throw std::invalid_argument("gaussian_logpdf: size mismatch");
    double lp = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(var[i] > 0.0)) throw std::invalid_argument("gaussian_logpdf: nonpositive variance");
        const double r = x[i] - mean[i];
        lp += -kHalfLog2Pi - 0.5 * std::log(var[i]) - 0.5 * r * r / var[i];
    }
    return lp;
}

double Model::obs_loglik(std::span<const double> x, double y) const { return logpdf1(y, obs_mean(x), log_std_y()); }

double Model::init_logpdf(std::span<const double> x) const {
    const auto rho = log_std_x();
    double lp = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) lp += logpdf1(x[d], 0.0, rho[d]);
    return lp;
}

double Model::transition_logpdf(std::span<const double> x_prev, std::span<const double> u,
                                std::span<const double> x) const {
    std::vector<double> mean(state_dim());
    transition_mean(x_prev, u, mean);
    const auto rho = log_std_x();
    double lp = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) lp += logpdf1(x[d], mean[d], rho[d]);
    return lp;
}

SsmParams SsmParams::create(std::size_t state_dim, std::size_t feature_dim) {
    if (state_dim == 0) throw std::invalid_argument("state dimension must be positive");
    SsmParams p;
    p.dx = state_dim;
    p.du = feature_dim;
    p.values.assign(p.size(), 0.0);
    return p;
}

SsmParams SsmParams::random(std::size_t state_dim, std::size_t feature_dim, std::uint64_t seed) {
    SsmParams p = create(state_dim, feature_dim);
    Rng rng(stream_seed(seed, {0x55e1u}));
    auto fill = [&](std::size_t off, std::size_t n, double fan_in) {
        const double a = 1.0 / std::sqrt(fan_in);
        for (std::size_t i = 0; i < n; ++i) p.values[off + i] = a * (2.0 * rng.uniform() - 1.0);
    };
    fill(p.o_wgx(), state_dim * state_dim, static_cast<double>(state_dim));
    if (feature_dim) fill(p.o_wgu(), state_dim * feature_dim, static_cast<double>(feature_dim));
    fill(p.o_wf(), state_dim, static_cast<double>(state_dim));
    for (std::size_t d = 0; d < state_dim; ++d) p.values[p.o_rhox() + d] = std::log(0.1);
    p.values[p.o_rhoy()] = std::log(0.05);
    return p;
}

std::vector<SsmParams::Block> SsmParams::blocks() const {
    return {{"W_gx", o_wgx(), dx, dx}, {"b_gx", o_bgx(), dx, 1},  {"W_gu", o_wgu(), dx, du},
            {"b_gu", o_bgu(), dx, 1},  {"W_f", o_wf(), 1, dx},    {"b_f", o_bf(), 1, 1},
            {"rho_x", o_rhox(), dx, 1}, {"rho_y", o_rhoy(), 1, 1}};
}

void g_apply(const SsmParams& p, std::span<const double> x_prev, std::span<const double> u, std::span<double> out) {
    const std::size_t dx = p.dx, du = p.du;
    for (std::size_t i = 0; i < dx; ++i) {
        double a = p.values[p.o_bgx() + i] + p.values[p.o_bgu() + i];
        const double* wx = p.values.data() + p.o_wgx() + i * dx;
        for (std::size_t j = 0; j < dx; ++j) a += wx[j] * x_prev[j];
        const double* wu = p.values.data() + p.o_wgu() + i * du;
        for (std::size_t j = 0; j < du; ++j) a += wu[j] * u[j];
        out[i] = std::tanh(a);
    }
}

double f_apply(const SsmParams& p, std::span<const double> x) {
    double s = p.values[p.o_bf()];
    for (std::size_t k = 0; k < p.dx; ++k) s += p.values[p.o_wf() + k] * x[k];
    return sigmoid(s);
}

double log_rho0(const SsmParams& p, std::span<const double> x) {
    double lp = 0.0;
    for (std::size_t d = 0; d < p.dx; ++d) lp += logpdf1(x[d], 0.0, p.rho_x()[d]);
    return lp;
}

double log_m(const SsmParams& p, std::span<const double> x_prev, std::span<const double> u, std::span<const double> x) {
    std::vector<double> g(p.dx);
    g_apply(p, x_prev, u, g);
    double lp = 0.0;
    for (std::size_t d = 0; d < p.dx; ++d) lp += logpdf1(x[d], g[d], p.rho_x()[d]);
    return lp;
}

double log_r(const SsmParams& p, std::span<const double> x, double y) { return logpdf1(y, f_apply(p, x), p.rho_y()); }

void grad_log_term(const SsmParams& p, std::span<const double> x_prev, std::span<const double> u,
                   std::span<const double> x, double y, std::span<double> out) {
    const std::size_t dx = p.dx, du = p.du;
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> g(dx);
    g_apply(p, x_prev, u, g);
    for (std::size_t i = 0; i < dx; ++i) {
        const double inv_var = std::exp(-2.0 * p.rho_x()[i]);
        const double resid = x[i] - g[i];
        const double delta = resid * inv_var * (1.0 - g[i] * g[i]);
        for (std::size_t j = 0; j < dx; ++j) out[p.o_wgx() + i * dx + j] = delta * x_prev[j];
        out[p.o_bgx() + i] = delta;
        for (std::size_t j = 0; j < du; ++j) out[p.o_wgu() + i * du + j] = delta * u[j];
        out[p.o_bgu() + i] = delta;
        out[p.o_rhox() + i] = -1.0 + resid * resid * inv_var;
    }
    add_obs_grad(p, x, y, out);
    require_finite(p, out);
}

void grad_log_init(const SsmParams& p, std::span<const double> x0, double y0, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < p.dx; ++i) out[p.o_rhox() + i] = -1.0 + x0[i] * x0[i] * std::exp(-2.0 * p.rho_x()[i]);
    add_obs_grad(p, x0, y0, out);
    require_finite(p, out);
}

std::vector<std::string> NonlinearModel::param_names() const {
    std::vector<std::string> names(p_.size());
    for (const auto& b : p_.blocks())
        for (std::size_t r = 0; r < b.rows; ++r)
            for (std::size_t c = 0; c < b.cols; ++c)
                names[b.offset + r * b.cols + c] =
                    b.name + "[" + std::to_string(r) + (b.cols > 1 ? "," + std::to_string(c) : std::string{}) + "]";
    return names;
}

}  // namespace smcl::ssm
