#pragma once

#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <unistd.h>
#include <vector>

#include "smcl/matrix.hpp"
#include "smcl/rng.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("smcl_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Hourly ETT-style CSV with a daily cycle, load-driven target and noise.
inline std::string synthetic_ett_csv(std::size_t rows, std::uint64_t seed) {
    smcl::Rng rng(seed);
    std::string out = "date,HUFL,HULL,MUFL,MULL,LUFL,LULL,OT\n";
    double ot = 20.0;
    std::tm base{};
    base.tm_year = 116;
    base.tm_mon = 6;
    base.tm_mday = 1;
    const std::time_t t0 = timegm(&base);
    char buf[64];
    for (std::size_t k = 0; k < rows; ++k) {
        const std::time_t t = t0 + static_cast<std::time_t>(k) * 3600;
        std::tm tm{};
        gmtime_r(&t, &tm);
        std::strftime(buf, sizeof(buf), "%Y-%m-%d %H:%M:%S", &tm);
        out += buf;
        const double day = std::sin(2.0 * M_PI * static_cast<double>(k) / 24.0);
        double first = 0.0;
        for (int c = 0; c < 6; ++c) {
            const double v = 5.0 + 2.0 * day + 0.3 * rng.normal() + 0.5 * c;
            if (c == 0) first = v;
            std::snprintf(buf, sizeof(buf), ",%.4f", v);
            out += buf;
        }
        ot = 0.9 * ot + 0.1 * (20.0 + 5.0 * day + 0.3 * first) + 0.3 * rng.normal();
        std::snprintf(buf, sizeof(buf), ",%.4f\n", ot);
        out += buf;
    }
    return out;
}

/// Central differences of f at x, one coordinate at a time.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double fp = f(x);
        x[i] = x0 - h;
        const double fm = f(x);
        x[i] = x0;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline bool close(double a, double b, double rtol, double atol) {
    return std::abs(a - b) <= atol + rtol * std::max(std::abs(a), std::abs(b));
}

inline smcl::RowMatrix random_matrix(std::size_t r, std::size_t c, smcl::Rng& rng, double scale = 1.0) {
    smcl::RowMatrix m(r, c);
    for (double& v : m.values()) v = scale * rng.normal();
    return m;
}

}  // namespace testing

#include "smcl/kalman.hpp"

namespace testing {

struct LgssmData {
    smcl::RowMatrix inputs;  // (T + 1) x du, row 0 unused
    std::vector<double> y;   // T + 1 observations
};

/// Draws y_{0:T} from the linear-Gaussian model p.
inline LgssmData simulate_lgssm(const smcl::baselines::HmmParams& p, std::size_t steps, smcl::Rng& rng,
                                double input_scale = 1.0) {
    const auto d = p.A.rows();
    LgssmData out;
    out.inputs = smcl::RowMatrix(steps, p.B.cols());
    for (double& v : out.inputs.values()) v = input_scale * rng.normal();
    Eigen::LLT<Eigen::MatrixXd> lq(p.Q), l0(p.P0);
    Eigen::VectorXd z(d), x(d);
    for (Eigen::Index i = 0; i < d; ++i) z(i) = rng.normal();
    x = p.mu0 + Eigen::MatrixXd(l0.matrixL()) * z;
    for (std::size_t k = 0; k < steps; ++k) {
        if (k > 0) {
            for (Eigen::Index i = 0; i < d; ++i) z(i) = rng.normal();
            Eigen::VectorXd u(p.B.cols());
            for (Eigen::Index j = 0; j < p.B.cols(); ++j) u(j) = out.inputs(k, static_cast<std::size_t>(j));
            x = p.A * x + p.B * u + Eigen::MatrixXd(lq.matrixL()) * z;
        }
        out.y.push_back((p.C * x)(0, 0) + std::sqrt(p.R) * rng.normal());
    }
    return out;
}

}  // namespace testing

#include "smcl/data.hpp"
#include "smcl/ssm.hpp"

namespace testing {

/// y_{0:T} drawn from the nonlinear model with the given features
/// (row k drives the transition into time k).
inline std::vector<double> simulate_ssm(const smcl::ssm::Model& m, const smcl::RowMatrix& features, smcl::Rng& rng) {
    const std::size_t dx = m.state_dim();
    std::vector<double> x(dx), mean(dx), y;
    const auto rho = m.log_std_x();
    for (std::size_t d = 0; d < dx; ++d) x[d] = std::exp(rho[d]) * rng.normal();
    for (std::size_t k = 0; k < features.rows(); ++k) {
        if (k > 0) {
            m.transition_mean(x, features.row(k), mean);
            for (std::size_t d = 0; d < dx; ++d) x[d] = mean[d] + std::exp(rho[d]) * rng.normal();
        }
        y.push_back(m.obs_mean(x) + std::exp(m.log_std_y()) * rng.normal());
    }
    return y;
}

/// Windows of independent synthetic sequences with uniform(-1, 1) features.
inline std::vector<smcl::data::WindowSample> synthetic_windows(const smcl::ssm::Model& m, std::size_t count,
                                                               std::size_t length, smcl::Rng& rng) {
    std::vector<smcl::data::WindowSample> out(count);
    for (auto& w : out) {
        w.inputs = smcl::RowMatrix(length, m.feature_dim());
        for (double& v : w.inputs.values()) v = 2.0 * rng.uniform() - 1.0;
        w.targets = simulate_ssm(m, w.inputs, rng);
    }
    return out;
}

}  // namespace testing
