#pragma once

#include <filesystem>

#include "smcl/config.hpp"

namespace smcl::commands {

/// Artifact names inside RunConfig::out. Each command reads only the
/// artifacts of earlier stages plus the data file.
namespace files {
inline constexpr const char* kInputModel = "input_model.ckpt";
inline constexpr const char* kInputLog = "input_train_log.csv";
inline constexpr const char* kFeatures = "features.bin";
inline constexpr const char* kSsm = "ssm.ckpt";
inline constexpr const char* kSmclLog = "smcl_train_log.csv";
inline constexpr const char* kRecursive = "recursive_trace.csv";
inline constexpr const char* kForecastBounds = "forecast_bounds.csv";
inline constexpr const char* kForecastSamples = "forecast_samples.csv";
inline constexpr const char* kSmclWindows = "eval_smcl_windows.csv";
inline constexpr const char* kSmclSummary = "eval_smcl_summary.json";
inline constexpr const char* kHmm = "hmm.ckpt";
inline constexpr const char* kHmmLog = "hmm_em_log.csv";
inline constexpr const char* kHmmWindows = "eval_hmm_windows.csv";
inline constexpr const char* kHmmSummary = "eval_hmm_summary.json";
}  // namespace files

void train_input(const config::RunConfig& cfg);
void extract_features(const config::RunConfig& cfg);
void train_smcl(const config::RunConfig& cfg);
void recursive_mle(const config::RunConfig& cfg);
void forecast(const config::RunConfig& cfg);
void evaluate(const config::RunConfig& cfg);
void baseline_hmm(const config::RunConfig& cfg);

}  // namespace smcl::commands
