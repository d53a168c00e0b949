#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smcl/data.hpp"
#include "smcl/kalman.hpp"
#include "smcl/matrix.hpp"
#include "smcl/ssm.hpp"

namespace smcl::eval {

struct ForecastBundle {
    std::size_t window_id = 0;
    RowMatrix trajectories;  // N x H
    std::vector<double> mean, lower, upper, observed;
    double rmse = 0.0;
    double rmse_degc = 0.0;
    double picp = 0.0;
    std::size_t covered = 0;
    double wallclock_ms = 0.0;
};

/// Linear interpolation between order statistics at h = (n - 1) p.
double quantile(std::vector<double> values, double p);

/// sqrt(mean_k (obs_k - forecast_k)^2)
double rmse(std::span<const double> forecast, std::span<const double> observed);

/// Fraction of observations inside the closed intervals [lower, upper].
double picp(std::span<const double> lower, std::span<const double> upper, std::span<const double> observed);

inline constexpr double kLowerQuantile = 0.025;
inline constexpr double kUpperQuantile = 0.975;

/// Mean, empirical 2.5%/97.5% bounds and scores from sampled trajectories.
ForecastBundle summarize(std::size_t window_id, RowMatrix trajectories, std::span<const double> observed,
                         const data::NormStats* stats = nullptr);

/// Filters over the lookback (first 24 rows of w) and samples `n`
/// trajectories over the horizon. `w.inputs` holds extracted features.
ForecastBundle evaluate_window(const ssm::Model& model, const data::WindowSample& w, std::size_t n,
                               std::uint64_t seed, const data::NormStats* stats = nullptr, bool noise = true);

/// Same protocol for the linear-Gaussian baseline: Kalman filter from
/// (mu0, P0) over the lookback, then `n` Gaussian rollouts. `w.inputs`
/// holds the exogenous inputs (or has zero columns).
ForecastBundle evaluate_window_hmm(const baselines::HmmParams& params, const data::WindowSample& w, std::size_t n,
                                   std::uint64_t seed, const data::NormStats* stats = nullptr);

struct Summary {
    std::string model;
    std::vector<ForecastBundle> windows;  // trajectories dropped to save memory
    double rmse_mean = 0.0, rmse_std = 0.0;
    double rmse_degc_mean = 0.0, rmse_degc_std = 0.0;
    double picp_mean = 0.0, picp_std = 0.0;
    double wallclock_ms_mean = 0.0, wallclock_ms_std = 0.0;
};

using WindowForecaster = std::function<ForecastBundle(const data::WindowSample&, std::size_t window_id, std::uint64_t seed)>;

/// Evaluates every window (window i uses the stream seeded by (seed, i))
/// and aggregates in window order.
Summary evaluate_suite(const std::string& model_name, std::span<const data::WindowSample> windows,
                       const WindowForecaster& forecaster, std::uint64_t seed, std::size_t threads = 1);

/// `window_id,rmse_norm,rmse_degC,picp,wallclock_ms`. With timing off the
/// wallclock column is written as 0 so reruns are byte-identical.
void write_windows_csv(const std::filesystem::path& path, const Summary& s, bool timing);

/// Table-style summary (mean and std per metric). Timing is only included
/// when `timing` is set.
void write_summary_json(const std::filesystem::path& path, const Summary& s, bool timing);

/// `window_id,step,observed,mean,lower,upper` followed by the trajectories
/// as `window_id,step,sample,value` in a second file.
void write_forecast_csv(const std::filesystem::path& bounds_path, const std::filesystem::path& samples_path,
                        std::span<const ForecastBundle> bundles);

}  // namespace smcl::eval
