#include "smcl/smc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "smcl/errors.hpp"
#include "smcl/io.hpp"
#include "smcl/simd.hpp"

namespace smcl::smc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Normalizes cloud.log_weights into cloud.weights and sets log_increment.
void finish_weights(ParticleCloud& c) {
    const std::size_t n = c.log_weights.size();
    c.weights.assign(n, 0.0);
    const double lse = simd::normalize_log_weights(c.log_weights, c.weights);
    if (!std::isfinite(lse))
        throw NumericalError("weight collapse at time " + std::to_string(c.time) +
                             ": no particle has a finite positive observation likelihood");
    c.log_increment = lse - std::log(static_cast<double>(n));
}

// Transition means of every particle of `prev` under feature u, N x dx.
RowMatrix transition_means(const ssm::Model& model, const ParticleCloud& prev, std::span<const double> u) {
    RowMatrix m(prev.size(), model.state_dim());
    for (std::size_t j = 0; j < prev.size(); ++j) model.transition_mean(prev.particles.row(j), u, m.row(j));
    return m;
}

ParticleCloud propagate_from_means(const ssm::Model& model, const ParticleCloud& prev, const RowMatrix& means,
                                   std::span<const std::size_t> ancestors, double y, Rng& rng, bool noise) {
    const std::size_t n = ancestors.size();
    const std::size_t dx = model.state_dim();
    const auto rho = model.log_std_x();
    ParticleCloud c;
    c.time = prev.time + 1;
    c.particles = RowMatrix(n, dx);
    c.ancestors.assign(ancestors.begin(), ancestors.end());
    c.log_weights.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t a = ancestors[j];
        if (a >= prev.size()) throw std::out_of_range("ancestor index out of range");
        auto x = c.particles.row(j);
        for (std::size_t d = 0; d < dx; ++d) {
            const double eta = std::exp(rho[d]) * rng.normal();
            x[d] = means(a, d) + (noise ? eta : 0.0);
        }
        c.log_weights[j] = model.obs_loglik(x, y);
    }
    finish_weights(c);
    return c;
}

void paris_from_means(const ssm::Model& model, const ParticleCloud& prev, const RowMatrix& means, ParticleCloud& next,
                      std::span<const double> u, double y, std::size_t k, Rng& rng) {
    if (k < 1) throw std::invalid_argument("PaRIS needs at least one backward draw");
    if (prev.tau.rows() != prev.size()) throw std::invalid_argument("previous cloud carries no PaRIS statistics");
    const std::size_t n_prev = prev.size();
    const std::size_t n = next.size();
    const std::size_t dx = model.state_dim();
    const std::size_t dim = model.param_dim();
    const auto rho = model.log_std_x();

    std::vector<double> soa(dx * n_prev);
    for (std::size_t j = 0; j < n_prev; ++j)
        for (std::size_t d = 0; d < dx; ++d) soa[d * n_prev + j] = means(j, d);
    std::vector<double> inv_var(dx);
    for (std::size_t d = 0; d < dx; ++d) inv_var[d] = std::exp(-2.0 * rho[d]);
    std::vector<double> log_w(n_prev);
    for (std::size_t j = 0; j < n_prev; ++j) log_w[j] = prev.weights[j] > 0.0 ? std::log(prev.weights[j]) : kNegInf;

    const auto& kt = simd::active();
    next.tau = RowMatrix(n, dim);
    std::vector<double> lw(n_prev), cdf(n_prev), h(dim);
    const double inv_k = 1.0 / static_cast<double>(k);
    for (std::size_t i = 0; i < n; ++i) {
        const auto xi = next.particles.row(i);
        kt.gaussian_logkernel(log_w.data(), soa.data(), n_prev, n_prev, dx, xi.data(), inv_var.data(), lw.data());
        const double mx = kt.max_value(lw.data(), n_prev);
        if (!std::isfinite(mx)) throw NumericalError("backward kernel collapsed at time " + std::to_string(next.time));
        double total = kt.exp_shift_sum(lw.data(), mx, cdf.data(), n_prev);
        for (std::size_t j = 1; j < n_prev; ++j) cdf[j] += cdf[j - 1];
        total = cdf.back();
        auto tau_i = next.tau.row(i);
        for (std::size_t draw = 0; draw < k; ++draw) {
            const double target = rng.uniform() * total;
            std::size_t jsel = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), target) - cdf.begin());
            jsel = std::min(jsel, n_prev - 1);
            model.grad_step(prev.particles.row(jsel), u, xi, y, h);
            kt.axpy(inv_k, prev.tau.row(jsel).data(), tau_i.data(), dim);
            kt.axpy(inv_k, h.data(), tau_i.data(), dim);
        }
    }
}

}  // namespace

std::vector<std::size_t> multinomial_resample(std::span<const double> w, std::size_t n, Rng& rng) {
    if (w.empty()) throw std::invalid_argument("resampling from an empty weight vector");
    std::vector<double> cdf(w.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        acc += w[i];
        cdf[i] = acc;
    }
    std::vector<std::size_t> idx(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double u = rng.uniform() * acc;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        idx[j] = std::min(static_cast<std::size_t>(it - cdf.begin()), w.size() - 1);
        // never land on a zero-weight particle through rounding at the end
        while (w[idx[j]] <= 0.0 && idx[j] > 0) --idx[j];
    }
    return idx;
}

double ess(std::span<const double> w) {
    double s = 0.0;
    for (double v : w) s += v * v;
    return 1.0 / s;
}

ParticleCloud init_cloud(const ssm::Model& model, double y0, std::size_t n, Streams& streams, const FilterOptions& opts) {
    if (n < 2) throw std::invalid_argument("particle filter needs at least 2 particles");
    const std::size_t dx = model.state_dim();
    const auto rho = model.log_std_x();
    ParticleCloud c;
    c.particles = RowMatrix(n, dx);
    c.log_weights.resize(n);
    c.ancestors.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        auto x = c.particles.row(j);
        for (std::size_t d = 0; d < dx; ++d) {
            const double eta = std::exp(rho[d]) * streams.propagate.normal();
            x[d] = opts.propagate_noise ? eta : 0.0;
        }
        c.log_weights[j] = model.obs_loglik(x, y0);
        c.ancestors[j] = j;
    }
    finish_weights(c);
    if (opts.smoothing == Smoothing::paris) {
        c.tau = RowMatrix(n, model.param_dim());
        for (std::size_t j = 0; j < n; ++j) model.grad_init(c.particles.row(j), y0, c.tau.row(j));
    }
    return c;
}

ParticleCloud propagate(const ssm::Model& model, const ParticleCloud& prev, std::span<const std::size_t> ancestors,
                        std::span<const double> u, double y, Rng& rng, bool noise) {
    return propagate_from_means(model, prev, transition_means(model, prev, u), ancestors, y, rng, noise);
}

void paris_update(const ssm::Model& model, const ParticleCloud& prev, ParticleCloud& next, std::span<const double> u,
                  double y, std::size_t k, Rng& rng) {
    paris_from_means(model, prev, transition_means(model, prev, u), next, u, y, k, rng);
}

ParticleCloud filter_step(const ssm::Model& model, const ParticleCloud& prev, std::span<const double> u, double y,
                          Streams& streams, const FilterOptions& opts) {
    const RowMatrix means = transition_means(model, prev, u);
    const auto idx = multinomial_resample(prev.weights, prev.size(), streams.resample);
    ParticleCloud next = propagate_from_means(model, prev, means, idx, y, streams.propagate, opts.propagate_noise);
    if (opts.smoothing == Smoothing::paris) paris_from_means(model, prev, means, next, u, y, opts.paris_k, streams.backward);
    return next;
}

FilterTrace run_filter(const ssm::Model& model, const RowMatrix& features, std::span<const double> y, std::size_t n,
                       Streams& streams, const FilterOptions& opts) {
    if (y.empty()) throw std::invalid_argument("run_filter: no observations");
    if (features.rows() != y.size())
        throw std::invalid_argument("run_filter: " + std::to_string(features.rows()) + " feature rows for " +
                                    std::to_string(y.size()) + " observations");
    if (features.cols() != model.feature_dim())
        throw std::invalid_argument("run_filter: feature dimension " + std::to_string(features.cols()) +
                                    ", model expects " + std::to_string(model.feature_dim()));
    FilterTrace tr;
    tr.smoothing = opts.smoothing;
    tr.features = features;
    tr.observations.assign(y.begin(), y.end());
    const bool keep = opts.store_history || opts.smoothing == Smoothing::path_space;

    ParticleCloud cur = init_cloud(model, y[0], n, streams, opts);
    auto record = [&](const ParticleCloud& c) {
        tr.log_increments.push_back(c.log_increment);
        tr.ess.push_back(ess(c.weights));
        std::vector<std::size_t> a = c.ancestors;
        std::sort(a.begin(), a.end());
        tr.distinct_parents.push_back(static_cast<std::size_t>(std::unique(a.begin(), a.end()) - a.begin()));
    };
    record(cur);
    for (std::size_t k = 1; k < y.size(); ++k) {
        ParticleCloud next = filter_step(model, cur, features.row(k), y[k], streams, opts);
        record(next);
        if (keep) tr.clouds.push_back(std::move(cur));
        cur = std::move(next);
    }
    tr.clouds.push_back(std::move(cur));
    return tr;
}

std::vector<double> pathspace_score(const ssm::Model& model, const FilterTrace& tr) {
    const std::size_t steps = tr.steps();
    if (tr.clouds.size() != steps) throw std::invalid_argument("path-space score needs the full particle history");
    const std::size_t dim = model.param_dim();
    std::vector<double> score(dim, 0.0), h(dim);
    std::vector<double> mass = tr.final_cloud().weights;
    const auto& kt = simd::active();
    for (std::size_t k = steps - 1; k >= 1; --k) {
        const auto& cur = tr.clouds[k];
        const auto& prev = tr.clouds[k - 1];
        std::vector<double> parent_mass(prev.size(), 0.0);
        for (std::size_t j = 0; j < cur.size(); ++j) {
            if (mass[j] == 0.0) continue;
            const std::size_t a = cur.ancestors[j];
            model.grad_step(prev.particles.row(a), tr.features.row(k), cur.particles.row(j), tr.observations[k], h);
            kt.axpy(mass[j], h.data(), score.data(), dim);
            parent_mass[a] += mass[j];
        }
        mass = std::move(parent_mass);
    }
    const auto& first = tr.clouds.front();
    for (std::size_t j = 0; j < first.size(); ++j) {
        if (mass[j] == 0.0) continue;
        model.grad_init(first.particles.row(j), tr.observations[0], h);
        kt.axpy(mass[j], h.data(), score.data(), dim);
    }
    return score;
}

std::vector<double> paris_score(const FilterTrace& tr) {
    const auto& c = tr.final_cloud();
    if (c.tau.rows() != c.size()) throw std::invalid_argument("trace carries no PaRIS statistics");
    std::vector<double> s(c.tau.cols(), 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) simd::axpy(c.weights[i], c.tau.row(i), s);
    return s;
}

std::vector<double> score(const ssm::Model& model, const FilterTrace& tr) {
    return tr.smoothing == Smoothing::paris ? paris_score(tr) : pathspace_score(model, tr);
}

double loglik_estimate(const FilterTrace& tr) {
    double s = 0.0;
    for (double v : tr.log_increments) s += v;
    return s;
}

std::size_t unique_ancestors(const FilterTrace& tr, std::size_t s) {
    const std::size_t steps = tr.steps();
    if (tr.clouds.size() != steps) throw std::invalid_argument("unique_ancestors needs the full particle history");
    if (s >= steps) throw std::out_of_range("unique_ancestors: time out of range");
    std::vector<char> alive(tr.final_cloud().size(), 1);
    for (std::size_t k = steps - 1; k > s; --k) {
        const auto& cur = tr.clouds[k];
        std::vector<char> parent(tr.clouds[k - 1].size(), 0);
        for (std::size_t j = 0; j < cur.size(); ++j)
            if (alive[j]) parent[cur.ancestors[j]] = 1;
        alive = std::move(parent);
    }
    return static_cast<std::size_t>(std::count(alive.begin(), alive.end(), 1));
}

RowMatrix predict_samples(const ssm::Model& model, const ParticleCloud& cloud, const RowMatrix& future,
                          std::size_t count, Rng& rng, bool noise) {
    const std::size_t horizon = future.rows();
    if (horizon == 0) throw std::invalid_argument("predict_samples: horizon must be at least 1");
    const std::size_t dx = model.state_dim();
    const auto rho = model.log_std_x();
    const double sy = std::exp(model.log_std_y());
    const auto idx = multinomial_resample(cloud.weights, count, rng);
    RowMatrix out(count, horizon);
    std::vector<double> x(dx), mean(dx);
    for (std::size_t t = 0; t < count; ++t) {
        const auto p = cloud.particles.row(idx[t]);
        std::copy(p.begin(), p.end(), x.begin());
        for (std::size_t h = 0; h < horizon; ++h) {
            model.transition_mean(x, future.row(h), mean);
            for (std::size_t d = 0; d < dx; ++d) {
                const double eta = std::exp(rho[d]) * rng.normal();
                x[d] = mean[d] + (noise ? eta : 0.0);
            }
            const double eps = sy * rng.normal();
            out(t, h) = model.obs_mean(x) + (noise ? eps : 0.0);
        }
    }
    return out;
}

void write_trace_csv(const std::filesystem::path& path, const FilterTrace& tr) {
    std::ostringstream os;
    os.precision(17);
    os << "step,ess,log_increment,distinct_parents\n";
    for (std::size_t k = 0; k < tr.steps(); ++k)
        os << k << ',' << tr.ess[k] << ',' << tr.log_increments[k] << ',' << tr.distinct_parents[k] << '\n';
    io::atomic_write(path, os.str());
}

}  // namespace smcl::smc
