#include "smcl/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "smcl/io.hpp"
#include "smcl/parallel.hpp"
#include "smcl/smc.hpp"

namespace smcl::eval {
namespace {

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    sd = 0.0;
    if (v.empty()) return;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    for (double x : v) sd += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(sd / static_cast<double>(v.size() - 1)) : 0.0;
}

}  // namespace

double quantile(std::vector<double> v, double p) {
    if (v.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double rmse(std::span<const double> forecast, std::span<const double> observed) {
    if (forecast.size() != observed.size() || forecast.empty()) throw std::invalid_argument("rmse: length mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < forecast.size(); ++k) s += (observed[k] - forecast[k]) * (observed[k] - forecast[k]);
    return std::sqrt(s / static_cast<double>(forecast.size()));
}

double picp(std::span<const double> lower, std::span<const double> upper, std::span<const double> observed) {
    if (lower.size() != observed.size() || upper.size() != observed.size() || observed.empty())
        throw std::invalid_argument("picp: length mismatch");
    std::size_t in = 0;
    for (std::size_t k = 0; k < observed.size(); ++k) in += (observed[k] >= lower[k] && observed[k] <= upper[k]) ? 1 : 0;
    return static_cast<double>(in) / static_cast<double>(observed.size());
}

ForecastBundle summarize(std::size_t window_id, RowMatrix traj, std::span<const double> observed,
                         const data::NormStats* stats) {
    const std::size_t n = traj.rows(), h = traj.cols();
    if (observed.size() != h) throw std::invalid_argument("summarize: horizon mismatch");
    ForecastBundle b;
    b.window_id = window_id;
    b.observed.assign(observed.begin(), observed.end());
    b.mean.assign(h, 0.0);
    b.lower.resize(h);
    b.upper.resize(h);
    std::vector<double> col(n);
    for (std::size_t k = 0; k < h; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            col[i] = traj(i, k);
            b.mean[k] += col[i];
        }
        b.mean[k] /= static_cast<double>(n);
        b.lower[k] = quantile(col, kLowerQuantile);
        b.upper[k] = quantile(col, kUpperQuantile);
    }
    b.rmse = rmse(b.mean, b.observed);
    b.picp = picp(b.lower, b.upper, b.observed);
    b.covered = static_cast<std::size_t>(std::lround(b.picp * static_cast<double>(h)));
    b.rmse_degc = stats ? rmse(data::inverse_target(b.mean, *stats), data::inverse_target(b.observed, *stats))
                        : std::nan("");
    b.trajectories = std::move(traj);
    return b;
}

ForecastBundle evaluate_window(const ssm::Model& model, const data::WindowSample& w, std::size_t n,
                               std::uint64_t seed, const data::NormStats* stats, bool noise) {
    const std::size_t look = data::kLookback;
    if (w.length() <= look) throw std::invalid_argument("window shorter than the lookback");
    const auto t0 = std::chrono::steady_clock::now();
    smc::Streams streams(seed);
    smc::FilterOptions opts;
    opts.propagate_noise = noise;
    const RowMatrix look_feat = w.inputs.slice_rows(0, look);
    const std::span<const double> look_y(w.targets.data(), look);
    const auto tr = smc::run_filter(model, look_feat, look_y, n, streams, opts);
    Rng rng(stream_seed(seed, {0xf0eu}));
    RowMatrix traj = smc::predict_samples(model, tr.final_cloud(), w.inputs.slice_rows(look, w.length() - look), n, rng, noise);
    ForecastBundle b = summarize(0, std::move(traj), std::span(w.targets).subspan(look), stats);
    b.wallclock_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return b;
}

ForecastBundle evaluate_window_hmm(const baselines::HmmParams& p, const data::WindowSample& w, std::size_t n,
                                   std::uint64_t seed, const data::NormStats* stats) {
    const std::size_t look = data::kLookback;
    const auto t0 = std::chrono::steady_clock::now();
    const RowMatrix look_in = p.input_dim() ? w.inputs.slice_rows(0, look) : RowMatrix();
    const auto f = baselines::kalman_filter(p, look_in, std::span(w.targets).subspan(0, look));
    const RowMatrix future = p.input_dim() ? w.inputs.slice_rows(look, w.length() - look) : RowMatrix(w.length() - look, 0);
    Rng rng(stream_seed(seed, {0xf0eu}));
    RowMatrix traj = baselines::hmm_forecast(p, f.mean.back(), f.cov.back(), future, n, rng);
    ForecastBundle b = summarize(0, std::move(traj), std::span(w.targets).subspan(look), stats);
    b.wallclock_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return b;
}

Summary evaluate_suite(const std::string& name, std::span<const data::WindowSample> windows,
                       const WindowForecaster& forecaster, std::uint64_t seed, std::size_t threads) {
    Summary s;
    s.model = name;
    s.windows.resize(windows.size());
    parallel_for(windows.size(), threads, [&](std::size_t i) {
        ForecastBundle b = forecaster(windows[i], i, stream_seed(seed, {0xe7a1u, i}));
        b.window_id = i;
        b.trajectories = RowMatrix();
        s.windows[i] = std::move(b);
    });
    std::vector<double> r, rc, p, t;
    for (const auto& b : s.windows) {
        r.push_back(b.rmse);
        rc.push_back(b.rmse_degc);
        p.push_back(b.picp);
        t.push_back(b.wallclock_ms);
    }
    mean_std(r, s.rmse_mean, s.rmse_std);
    mean_std(rc, s.rmse_degc_mean, s.rmse_degc_std);
    mean_std(p, s.picp_mean, s.picp_std);
    mean_std(t, s.wallclock_ms_mean, s.wallclock_ms_std);
    return s;
}

void write_windows_csv(const std::filesystem::path& path, const Summary& s, bool timing) {
    std::ostringstream os;
    os.precision(17);
    os << "window_id,rmse_norm,rmse_degC,picp,wallclock_ms\n";
    for (const auto& b : s.windows)
        os << b.window_id << ',' << b.rmse << ',' << b.rmse_degc << ',' << b.picp << ','
           << (timing ? b.wallclock_ms : 0.0) << '\n';
    io::atomic_write(path, os.str());
}

void write_summary_json(const std::filesystem::path& path, const Summary& s, bool timing) {
    nlohmann::ordered_json j;
    j["model"] = s.model;
    j["windows"] = s.windows.size();
    j["rmse_norm"] = {{"mean", s.rmse_mean}, {"std", s.rmse_std}};
    j["rmse_degC"] = {{"mean", s.rmse_degc_mean}, {"std", s.rmse_degc_std}};
    j["picp"] = {{"mean", s.picp_mean}, {"std", s.picp_std}, {"nominal", kUpperQuantile - kLowerQuantile}};
    if (timing) j["wallclock_ms"] = {{"mean", s.wallclock_ms_mean}, {"std", s.wallclock_ms_std}};
    io::atomic_write(path, j.dump(2) + "\n");
}

void write_forecast_csv(const std::filesystem::path& bounds_path, const std::filesystem::path& samples_path,
                        std::span<const ForecastBundle> bundles) {
    std::ostringstream b, s;
    b.precision(17);
    s.precision(17);
    b << "window_id,step,observed,mean,lower,upper\n";
    s << "window_id,step,sample,value\n";
    for (const auto& f : bundles) {
        for (std::size_t k = 0; k < f.mean.size(); ++k)
            b << f.window_id << ',' << k << ',' << f.observed[k] << ',' << f.mean[k] << ',' << f.lower[k] << ','
              << f.upper[k] << '\n';
        for (std::size_t i = 0; i < f.trajectories.rows(); ++i)
            for (std::size_t k = 0; k < f.trajectories.cols(); ++k)
                s << f.window_id << ',' << k << ',' << i << ',' << f.trajectories(i, k) << '\n';
    }
    io::atomic_write(bounds_path, b.str());
    io::atomic_write(samples_path, s.str());
}

}  // namespace smcl::eval
