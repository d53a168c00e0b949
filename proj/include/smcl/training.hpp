#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "smcl/data.hpp"
#include "smcl/smc.hpp"
#include "smcl/ssm.hpp"

namespace smcl::training {

struct TrainConfig {
    std::size_t particles = 100;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 50;
    double learning_rate = 1e-2;
    std::size_t patience = 5;
    smc::Smoothing smoothing = smc::Smoothing::path_space;
    std::size_t paris_k = 2;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    double max_skip_fraction = 0.2;

    /// Throws ConfigError listing every violated invariant.
    void validate() const;
};

struct BatchRecord {
    std::size_t epoch = 0, batch = 0;
    double score_norm = 0.0;  // norm of the batch-averaged score
    double ess_mean = 0.0, ess_min = 0.0;
    bool skipped = false;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double mean_score_norm = 0.0;
    double val_loglik = 0.0;  // mean per-window log-likelihood estimate
    double ess_mean = 0.0, ess_min = 0.0;
    std::size_t batches = 0, skipped = 0;
};

struct TrainResult {
    ssm::SsmParams params;  // best-validation parameters
    std::vector<EpochRecord> epochs;
    std::vector<BatchRecord> batches;
    std::vector<std::string> warnings;
    std::size_t best_epoch = 0;
    double best_val_loglik = 0.0;
    double initial_val_loglik = 0.0;
};

/// Mean over windows of the filter log-likelihood estimate; window i uses
/// the stream seeded by (seed, i), so repeated calls are comparable.
double validation_loglik(const ssm::SsmParams& params, std::span<const data::WindowSample> windows,
                         std::size_t particles, std::uint64_t seed, std::size_t threads = 1);

/// Stage 2: per batch, filter every window (inputs hold the frozen
/// features), average the score estimates, take one Adam step on the
/// negated average. Keeps the parameters of the best validation epoch.
TrainResult train_smcl(std::span<const data::WindowSample> train, std::span<const data::WindowSample> val,
                       const ssm::SsmParams& init, const TrainConfig& config);

/// Columns: epoch, batch, train_score_norm, val_loglik, ess_mean, ess_min, skipped
void write_train_log(const std::filesystem::path& path, const TrainResult& result);

/// gamma_k = gamma0 * k^(-alpha), k >= 1
struct StepSchedule {
    double gamma0 = 0.1;
    double alpha = 0.7;

    double operator()(std::size_t k) const { return gamma0 * std::pow(static_cast<double>(k), -alpha); }
    void validate() const;
};

struct RecursiveConfig {
    std::size_t particles = 100;
    std::size_t paris_k = 2;
    std::uint64_t seed = 0;
    /// Indices of parameters that are updated; empty means all.
    std::vector<std::size_t> free_params;
    /// Keep theta every `record_every` observations (and the last one).
    std::size_t record_every = 1;
};

struct RecursiveResult {
    std::vector<std::size_t> steps;
    std::vector<std::vector<double>> thetas;
    std::size_t skipped = 0;
};

/// Online estimation: after each new observation y_k the filter (PaRIS
/// mode) yields sum_i w_k^i tau_k^i - sum_i w_{k-1}^i tau_{k-1}^i as the
/// predictive score, and theta moves by gamma_k times it. Filtering then
/// continues under the updated parameters. `model` holds theta_0 on entry
/// and the final estimate on exit.
RecursiveResult recursive_mle(ssm::Model& model, const RowMatrix& features, std::span<const double> y,
                              const StepSchedule& schedule, const RecursiveConfig& config);

}  // namespace smcl::training
