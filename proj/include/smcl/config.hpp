#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "smcl/smc.hpp"

namespace smcl::config {

/// Flat INI configuration. Every key has a default; a file only overrides.
///
///   [data]        path, split_train, split_val, split_test, train_stride, eval_stride
///   [input_model] layers, feature_dim, head_hidden, learning_rates, epochs, batch_size, patience
///   [ssm]         state_dim, particles, paris_k, smoothing (path_space | paris)
///   [training]    epochs, batch_size, learning_rate, patience
///   [recursive]   gamma0, alpha, particles, paris_k, record_every
///   [eval]        particles, split (val | test), timing, forecast_windows
///   [hmm]         state_dim, max_iters, tol, inputs (none | raw | features)
///   [run]         seed, threads, out
struct RunConfig {
    std::filesystem::path data_path;
    std::array<double, 3> split = {0.6, 0.2, 0.2};
    std::size_t train_stride = 1;
    std::size_t eval_stride = 24;

    std::size_t gru_layers = 3;
    std::size_t feature_dim = 6;
    std::size_t head_hidden = 6;
    std::vector<double> input_learning_rates = {1e-2, 3e-3, 1e-3, 3e-4};
    std::size_t input_epochs = 50;
    std::size_t input_batch_size = 32;
    std::size_t input_patience = 5;

    std::size_t state_dim = 6;
    std::size_t particles = 100;
    std::size_t paris_k = 2;
    smc::Smoothing smoothing = smc::Smoothing::path_space;

    std::size_t smcl_epochs = 50;
    std::size_t smcl_batch_size = 32;
    double smcl_learning_rate = 1e-2;
    std::size_t smcl_patience = 5;

    double gamma0 = 0.1;
    double alpha = 0.7;
    std::size_t recursive_particles = 100;
    std::size_t recursive_paris_k = 2;
    std::size_t record_every = 24;

    std::size_t eval_particles = 100;
    std::string eval_split = "test";
    bool timing = false;
    std::size_t forecast_windows = 4;

    std::size_t hmm_state_dim = 4;
    std::size_t hmm_max_iters = 200;
    double hmm_tol = 1e-6;
    std::string hmm_inputs = "raw";

    std::uint64_t seed = 0;
    std::size_t threads = 0;  // 0: hardware concurrency
    std::filesystem::path out = "out";

    /// Collects every violated invariant; throws ConfigError listing all of them.
    void validate() const;
    nlohmann::ordered_json to_json() const;
};

/// Parses INI text. Unknown sections or keys and malformed values are
/// reported together in a single ConfigError. Relative data paths resolve
/// against `base_dir`.
RunConfig parse(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load(const std::filesystem::path& path);

std::string smoothing_name(smc::Smoothing s);

}  // namespace smcl::config
