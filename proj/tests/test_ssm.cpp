#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "smcl/errors.hpp"
#include "smcl/linear_model.hpp"
#include "smcl/ssm.hpp"

using namespace smcl;

namespace {

const double kLog2Pi = std::log(2.0 * M_PI);

struct Instance {
    ssm::SsmParams p;
    std::vector<double> xp, u, x;
    double y;
};

Instance random_instance(std::size_t dx, std::size_t du, Rng& rng) {
    Instance in{ssm::SsmParams::create(dx, du), {}, {}, {}, 0.0};
    for (double& v : in.p.values) v = 0.5 * rng.normal();
    for (std::size_t d = 0; d < dx; ++d) {
        in.xp.push_back(rng.normal());
        in.x.push_back(0.5 * rng.normal());
    }
    for (std::size_t d = 0; d < du; ++d) in.u.push_back(rng.normal());
    in.y = rng.uniform();
    return in;
}

// log m + log r written out from the model definition with explicit loops.
double oracle_term(const ssm::SsmParams& p, const std::vector<double>& xp, const std::vector<double>& u,
                   const std::vector<double>& x, double y) {
    const std::size_t dx = p.dx, du = p.du;
    double lm = 0.0;
    for (std::size_t i = 0; i < dx; ++i) {
        double a = p.values[p.o_bgx() + i] + p.values[p.o_bgu() + i];
        for (std::size_t j = 0; j < dx; ++j) a += p.values[p.o_wgx() + i * dx + j] * xp[j];
        for (std::size_t j = 0; j < du; ++j) a += p.values[p.o_wgu() + i * du + j] * u[j];
        const double sd = std::exp(p.values[p.o_rhox() + i]);
        const double r = (x[i] - std::tanh(a)) / sd;
        lm += -0.5 * kLog2Pi - std::log(sd) - 0.5 * r * r;
    }
    double b = p.values[p.o_bf()];
    for (std::size_t j = 0; j < dx; ++j) b += p.values[p.o_wf() + j] * x[j];
    const double f = 1.0 / (1.0 + std::exp(-b));
    const double sy = std::exp(p.values[p.o_rhoy()]);
    return lm - 0.5 * kLog2Pi - std::log(sy) - 0.5 * (y - f) * (y - f) / (sy * sy);
}

}  // namespace

TEST_CASE("gaussian_logpdf matches the closed form and rejects bad variances") {
    const std::vector<double> x = {0.3, -1.0}, m = {0.0, 1.0}, v = {0.25, 4.0};
    const double expected = -kLog2Pi - 0.5 * std::log(0.25 * 4.0) - 0.5 * (0.09 / 0.25 + 4.0 / 4.0);
    CHECK(ssm::gaussian_logpdf(x, m, v) == doctest::Approx(expected).epsilon(1e-14));
    CHECK_THROWS_AS(ssm::gaussian_logpdf(x, m, std::vector<double>{0.0, 1.0}), std::invalid_argument);
}

TEST_CASE("densities agree with a direct evaluation") {
    Rng rng(1);
    for (int rep = 0; rep < 20; ++rep) {
        auto in = random_instance(1 + rep % 4, 1 + rep % 3, rng);
        const double term = ssm::log_m(in.p, in.xp, in.u, in.x) + ssm::log_r(in.p, in.x, in.y);
        CHECK(std::abs(term - oracle_term(in.p, in.xp, in.u, in.x, in.y)) <= 1e-12);
        const ssm::NonlinearModel model(in.p);
        CHECK(model.transition_logpdf(in.xp, in.u, in.x) == doctest::Approx(ssm::log_m(in.p, in.xp, in.u, in.x)));
        CHECK(model.obs_loglik(in.x, in.y) == doctest::Approx(ssm::log_r(in.p, in.x, in.y)));
        double l0 = 0.0;
        for (std::size_t d = 0; d < in.p.dx; ++d) {
            const double sd = std::exp(in.p.rho_x()[d]);
            l0 += -0.5 * kLog2Pi - std::log(sd) - 0.5 * in.x[d] * in.x[d] / (sd * sd);
        }
        CHECK(ssm::log_rho0(in.p, in.x) == doctest::Approx(l0).epsilon(1e-13));
    }
}

TEST_CASE("g and f with zero weights reduce to their biases") {
    auto p = ssm::SsmParams::create(2, 3);
    p.values[p.o_bgx()] = 0.2;
    p.values[p.o_bgu()] = 0.1;
    p.values[p.o_bf()] = -0.4;
    std::vector<double> out(2);
    ssm::g_apply(p, std::vector<double>{5.0, 5.0}, std::vector<double>{1.0, 2.0, 3.0}, out);
    CHECK(out[0] == doctest::Approx(std::tanh(0.3)));
    CHECK(out[1] == 0.0);
    CHECK(ssm::f_apply(p, std::vector<double>{9.0, 9.0}) == doctest::Approx(1.0 / (1.0 + std::exp(0.4))));
}

TEST_CASE("random init has the documented scales") {
    const auto p = ssm::SsmParams::random(6, 6, 3);
    for (double r : p.rho_x()) CHECK(std::exp(r) == doctest::Approx(0.1));
    CHECK(std::exp(p.rho_y()) == doctest::Approx(0.05));
    const double bound = 1.0 / std::sqrt(6.0);
    for (std::size_t i = 0; i < 36; ++i) CHECK(std::abs(p.values[p.o_wgx() + i]) <= bound);
    CHECK(p.values[p.o_bgx()] == 0.0);
    CHECK(ssm::SsmParams::random(6, 6, 3).values == p.values);
    CHECK(ssm::SsmParams::random(6, 6, 4).values != p.values);
}

TEST_CASE("grad_log_term and grad_log_init match central differences") {
    Rng rng(2);
    for (int rep = 0; rep < 30; ++rep) {
        auto in = random_instance(1 + rep % 3, 1 + rep % 4, rng);
        std::vector<double> g(in.p.size());
        ssm::grad_log_term(in.p, in.xp, in.u, in.x, in.y, g);
        const auto fd = testing::central_difference(
            [&](const std::vector<double>& v) {
                ssm::SsmParams q = in.p;
                q.values = v;
                return ssm::log_m(q, in.xp, in.u, in.x) + ssm::log_r(q, in.x, in.y);
            },
            in.p.values, 1e-6);
        for (std::size_t i = 0; i < g.size(); ++i) CHECK(testing::close(g[i], fd[i], 1e-5, 1e-8));

        ssm::grad_log_init(in.p, in.x, in.y, g);
        const auto fd0 = testing::central_difference(
            [&](const std::vector<double>& v) {
                ssm::SsmParams q = in.p;
                q.values = v;
                return ssm::log_rho0(q, in.x) + ssm::log_r(q, in.x, in.y);
            },
            in.p.values, 1e-6);
        for (std::size_t i = 0; i < g.size(); ++i) CHECK(testing::close(g[i], fd0[i], 1e-5, 1e-8));
    }
}

TEST_CASE("non-finite gradient components name their block") {
    Rng rng(3);
    auto in = random_instance(2, 2, rng);
    in.x[0] = std::nan("");
    std::vector<double> g(in.p.size());
    CHECK_THROWS_AS(ssm::grad_log_term(in.p, in.xp, in.u, in.x, in.y, g), NumericalError);
}

TEST_CASE("parameter names cover the flat layout") {
    const ssm::NonlinearModel m(ssm::SsmParams::create(2, 3));
    const auto names = m.param_names();
    CHECK(names.size() == m.param_dim());
    CHECK(names.front().rfind("W_gx", 0) == 0);
    CHECK(names.back() == "rho_y[0]");
}

TEST_CASE("linear-Gaussian test model: densities and gradients") {
    Rng rng(4);
    for (std::size_t dx : {1u, 2u}) {
        ssm::LinearGaussianModel m(dx, 1);
        for (double& v : m.params()) v = 0.4 * rng.normal();
        std::vector<double> xp(dx), x(dx), u = {rng.normal()};
        for (std::size_t d = 0; d < dx; ++d) xp[d] = rng.normal(), x[d] = rng.normal();
        const double y = rng.normal();
        const auto names = m.param_names();
        CHECK(names.size() == m.param_dim());

        std::vector<double> g(m.param_dim());
        m.grad_step(xp, u, x, y, g);
        const std::vector<double> theta(m.params().begin(), m.params().end());
        const auto fd = testing::central_difference(
            [&](const std::vector<double>& v) {
                ssm::LinearGaussianModel q(dx, 1);
                std::copy(v.begin(), v.end(), q.params().begin());
                return q.transition_logpdf(xp, u, x) + q.obs_loglik(x, y);
            },
            theta, 1e-6);
        for (std::size_t i = 0; i < g.size(); ++i) CHECK(testing::close(g[i], fd[i], 1e-5, 1e-8));

        m.grad_init(x, y, g);
        const auto fd0 = testing::central_difference(
            [&](const std::vector<double>& v) {
                ssm::LinearGaussianModel q(dx, 1);
                std::copy(v.begin(), v.end(), q.params().begin());
                return q.init_logpdf(x) + q.obs_loglik(x, y);
            },
            theta, 1e-6);
        for (std::size_t i = 0; i < g.size(); ++i) CHECK(testing::close(g[i], fd0[i], 1e-5, 1e-8));

        const auto h = m.to_hmm();
        CHECK(h.state_dim() == dx);
        CHECK(h.R == doctest::Approx(std::exp(2.0 * m.log_std_y())));
        CHECK(h.P0.isApprox(h.Q));
        CHECK(h.mu0.isZero());
    }
}
