#include <doctest.h>

#include <cmath>
#include <limits>

#include "smcl/adam.hpp"

using namespace smcl;

TEST_CASE("zero gradient leaves parameters unchanged and decays moments") {
    optim::AdamState s(2);
    s.m = {0.5, -0.5};
    s.v = {0.25, 0.04};
    s.t = 3;
    std::vector<double> p = {1.0, 2.0};
    const std::vector<double> g = {0.0, 0.0};
    optim::AdamState before = s;
    CHECK(optim::adam_step(s, p, g, 0.0));
    CHECK(p == std::vector<double>{1.0, 2.0});
    CHECK(s.m[0] == doctest::Approx(0.9 * 0.5));
    CHECK(s.v[1] == doctest::Approx(0.999 * 0.04));
    CHECK(s.t == before.t + 1);
}

TEST_CASE("first step has magnitude lr in every coordinate") {
    optim::AdamState s(3);
    std::vector<double> p = {0.0, 0.0, 0.0};
    const std::vector<double> g = {1e-3, -5.0, 1e4};
    optim::adam_step(s, p, g, 0.1);
    // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(p[i] == doctest::Approx(-0.1 * g[i] / (std::abs(g[i]) + 1e-8)).epsilon(1e-12));
}

TEST_CASE("constant gradient drives the update magnitude to lr") {
    optim::AdamState s(1);
    std::vector<double> p = {0.0};
    const std::vector<double> g = {3.7};
    const double lr = 1e-3;
    double last = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double before = p[0];
        optim::adam_step(s, p, g, lr);
        last = std::abs(p[0] - before);
    }
    CHECK(std::abs(last - lr) <= 0.01 * lr);
}

TEST_CASE("adam step is a pure function of its inputs") {
    optim::AdamState a(2), b(2);
    a.m = b.m = {0.1, 0.2};
    a.v = b.v = {0.3, 0.4};
    a.t = b.t = 7;
    std::vector<double> p = {1.0, -1.0}, q = p;
    const std::vector<double> g = {0.5, -2.0};
    optim::adam_step(a, p, g, 0.01);
    optim::adam_step(b, q, g, 0.01);
    CHECK(p == q);
    CHECK(a.m == b.m);
    CHECK(a.v == b.v);
}

TEST_CASE("non-finite gradients are skipped and counted") {
    optim::AdamState s(2);
    std::vector<double> p = {1.0, 2.0};
    const std::vector<double> g = {std::numeric_limits<double>::quiet_NaN(), 1.0};
    CHECK_FALSE(optim::adam_step(s, p, g, 0.1));
    CHECK(p == std::vector<double>{1.0, 2.0});
    CHECK(s.skipped == 1);
    CHECK(s.t == 0);
    const std::vector<double> h = {1.0, std::numeric_limits<double>::infinity()};
    CHECK_FALSE(optim::adam_step(s, p, h, 0.1));
    CHECK(s.skipped == 2);
}
