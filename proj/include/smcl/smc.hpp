#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "smcl/matrix.hpp"
#include "smcl/rng.hpp"
#include "smcl/ssm.hpp"

namespace smcl::smc {

enum class Smoothing { path_space, paris };

/// Independent random streams consumed by the filter. Normals for
/// propagation are drawn particle by particle, coordinate by coordinate
/// (the N x dx initial draws first, then N x dx per step), so a fixed
/// `propagate` stream pins the noise of particle j at step k regardless of
/// which ancestor it was resampled from.
struct Streams {
    Rng resample;
    Rng propagate;
    Rng backward;

    explicit Streams(std::uint64_t seed)
        : resample(stream_seed(seed, {1})), propagate(stream_seed(seed, {2})), backward(stream_seed(seed, {3})) {}
    Streams(Rng r, Rng p, Rng b) : resample(r), propagate(p), backward(b) {}
};

struct FilterOptions {
    Smoothing smoothing = Smoothing::path_space;
    std::size_t paris_k = 2;
    /// Test hook: propagate through transition means without noise.
    bool propagate_noise = true;
    /// Keep every cloud (always on in path-space mode).
    bool store_history = true;
};

struct ParticleCloud {
    std::size_t time = 0;
    RowMatrix particles;                 // N x dx
    std::vector<double> log_weights;     // unnormalized: observation log-likelihoods
    std::vector<double> weights;         // normalized
    std::vector<std::size_t> ancestors;  // index into the previous cloud; identity at time 0
    RowMatrix tau;                       // N x dim(theta), PaRIS statistics (empty in path-space mode)
    double log_increment = 0.0;          // log( (1/N) sum_j exp(log_weights_j) )

    std::size_t size() const { return weights.size(); }
};

/// Clouds for times 0..T (or just the final one when history is off),
/// plus per-step diagnostics.
struct FilterTrace {
    Smoothing smoothing = Smoothing::path_space;
    std::vector<ParticleCloud> clouds;
    std::vector<double> log_increments;
    std::vector<double> ess;
    std::vector<std::size_t> distinct_parents;  // distinct resampled ancestors per step (N at time 0)
    RowMatrix features;
    std::vector<double> observations;

    const ParticleCloud& final_cloud() const { return clouds.back(); }
    std::size_t steps() const { return log_increments.size(); }  // T + 1
};

/// N i.i.d. categorical draws from `weights` (inverse CDF + binary search).
std::vector<std::size_t> multinomial_resample(std::span<const double> weights, std::size_t n, Rng& rng);

/// 1 / sum w^2 for normalized weights.
double ess(std::span<const double> weights);

/// xi_0 ~ N(0, Sigma_x) i.i.d., weights proportional to r(xi_0, y0). In PaRIS
/// mode tau_0 = grad[log rho_0 + log r]. Throws std::invalid_argument for n < 2.
ParticleCloud init_cloud(const ssm::Model& model, double y0, std::size_t n, Streams& streams,
                         const FilterOptions& opts = {});

/// Mutation and weighting for given ancestor indices (no resampling, no tau).
ParticleCloud propagate(const ssm::Model& model, const ParticleCloud& prev, std::span<const std::size_t> ancestors,
                        std::span<const double> u, double y, Rng& rng, bool noise = true);

/// PaRIS statistics for `next`: for each i, K draws J from the backward
/// kernel P(J = j) proportional to w_prev[j] m(xi_prev[j], u; xi_next[i]);
/// tau_next[i] = mean over draws of tau_prev[J] + h(xi_prev[J], xi_next[i]).
void paris_update(const ssm::Model& model, const ParticleCloud& prev, ParticleCloud& next, std::span<const double> u,
                  double y, std::size_t k, Rng& rng);

/// Resample, propagate, weight, and (in PaRIS mode) update tau.
ParticleCloud filter_step(const ssm::Model& model, const ParticleCloud& prev, std::span<const double> u, double y,
                          Streams& streams, const FilterOptions& opts = {});

/// Runs the filter over y[0..T]. Row k of `features` drives the transition
/// into time k (row 0 is unused), so features.rows() == y.size().
FilterTrace run_filter(const ssm::Model& model, const RowMatrix& features, std::span<const double> y, std::size_t n,
                       Streams& streams, const FilterOptions& opts = {});

/// sum_l w_T^l grad log p(xi^l_{0:T}, y_{0:T}) over ancestral lines. Lines
/// that coalesce are evaluated once, with their summed terminal weight.
std::vector<double> pathspace_score(const ssm::Model& model, const FilterTrace& trace);

/// sum_i w_T^i tau_T^i
std::vector<double> paris_score(const FilterTrace& trace);

/// Dispatches on trace.smoothing.
std::vector<double> score(const ssm::Model& model, const FilterTrace& trace);

double loglik_estimate(const FilterTrace& trace);

/// Number of distinct time-`s` ancestors among the final particles
/// (needs the full history).
std::size_t unique_ancestors(const FilterTrace& trace, std::size_t s);

/// `count` trajectories of length H: one ancestor draw from the final
/// weights, then unweighted propagation and emission with no resampling.
/// Returns count x H observations.
RowMatrix predict_samples(const ssm::Model& model, const ParticleCloud& cloud, const RowMatrix& future_features,
                          std::size_t count, Rng& rng, bool noise = true);

/// Columns: step, ess, log_increment, distinct_parents
void write_trace_csv(const std::filesystem::path& path, const FilterTrace& trace);

}  // namespace smcl::smc
