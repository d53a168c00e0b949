#include "smcl/commands.hpp"

#include <sstream>

#include "smcl/container.hpp"
#include "smcl/data.hpp"
#include "smcl/errors.hpp"
#include "smcl/eval.hpp"
#include "smcl/input_model.hpp"
#include "smcl/io.hpp"
#include "smcl/kalman.hpp"
#include "smcl/parallel.hpp"
#include "smcl/training.hpp"

namespace smcl::commands {
namespace {

using config::RunConfig;

std::size_t threads_of(const RunConfig& cfg) { return cfg.threads ? cfg.threads : default_threads(); }

std::filesystem::path out_path(const RunConfig& cfg, const char* name) { return cfg.out / name; }

/// The whole series normalized with statistics fitted on the training split.
struct Prepared {
    data::TimeSeriesDataset series;
    data::NormStats stats;
    std::size_t val_begin = 0, test_begin = 0;

    data::TimeSeriesDataset segment(const data::TimeSeriesDataset& ds, const std::string& which) const {
        if (which == "train") return ds.slice(0, val_begin);
        if (which == "val") return ds.slice(val_begin, test_begin - val_begin);
        return ds.slice(test_begin, ds.size() - test_begin);
    }
};

Prepared prepare(const RunConfig& cfg) {
    if (cfg.data_path.empty()) throw ConfigError("invalid configuration:\n  data.path is required");
    const auto raw = data::load_ett_csv(cfg.data_path);
    const auto split = data::chronological_split(raw, cfg.split, data::kWindowLength);
    Prepared p;
    p.stats = data::fit_normalizer(split.train);
    p.series = data::apply_normalizer(raw, p.stats);
    p.val_begin = split.val_begin;
    p.test_begin = split.test_begin;
    return p;
}

/// Same timestamps and normalized target, features as inputs.
data::TimeSeriesDataset with_inputs(const data::TimeSeriesDataset& ds, RowMatrix inputs) {
    if (inputs.rows() != ds.size())
        throw DataError("feature rows (" + std::to_string(inputs.rows()) + ") do not match the series length (" +
                        std::to_string(ds.size()) + ")");
    data::TimeSeriesDataset out = ds;
    out.inputs = std::move(inputs);
    return out;
}

struct Stage1 {
    input_model::InputModel model;
    data::NormStats stats;
    std::uint64_t hash = 0;
};

Stage1 load_stage1(const RunConfig& cfg) {
    const auto ck = container::load(out_path(cfg, files::kInputModel));
    Stage1 s;
    s.model = container::unpack_input_model(ck);
    s.stats = container::norm_stats_from_json(ck.meta.at("norm"));
    s.hash = s.model.gru.hash();
    return s;
}

data::TimeSeriesDataset feature_series(const RunConfig& cfg, const Prepared& prep, const Stage1& s1) {
    const auto f = data::load_features(out_path(cfg, files::kFeatures), s1.hash);
    return with_inputs(prep.series, f.values);
}

ssm::SsmParams load_ssm(const RunConfig& cfg, std::size_t feature_dim) {
    const auto p = container::unpack_ssm(container::load(out_path(cfg, files::kSsm)));
    if (p.du != feature_dim)
        throw DataError("SSM checkpoint expects " + std::to_string(p.du) + " features, the feature file has " +
                        std::to_string(feature_dim));
    return p;
}

nlohmann::ordered_json provenance(const RunConfig& cfg) {
    auto j = cfg.to_json();
    j["data"]["path"] = cfg.data_path.filename().string();
    return j;
}

void write_input_log(const std::filesystem::path& path, const input_model::TrainResult& r) {
    std::ostringstream os;
    os.precision(17);
    os << "epoch,learning_rate,train_mse,val_mse\n";
    for (const auto& e : r.log) os << e.epoch << ',' << r.learning_rate << ',' << e.train_mse << ',' << e.val_mse << '\n';
    io::atomic_write(path, os.str());
}

eval::Summary evaluate_smcl(const RunConfig& cfg, const ssm::SsmParams& params,
                            std::span<const data::WindowSample> windows, const data::NormStats& stats) {
    const ssm::NonlinearModel model(params);
    const std::size_t n = cfg.eval_particles;
    return eval::evaluate_suite(
        "smcl", windows,
        [&](const data::WindowSample& w, std::size_t, std::uint64_t seed) {
            return eval::evaluate_window(model, w, n, seed, &stats);
        },
        cfg.seed, threads_of(cfg));
}

}  // namespace

void train_input(const RunConfig& cfg) {
    cfg.validate();
    const auto prep = prepare(cfg);
    const auto train = data::make_windows(prep.segment(prep.series, "train"), cfg.train_stride);
    const auto val = data::make_windows(prep.segment(prep.series, "val"), cfg.eval_stride);
    const auto init = input_model::InputModel::create(prep.series.inputs.cols(), cfg.feature_dim, cfg.gru_layers,
                                                      cfg.head_hidden, stream_seed(cfg.seed, {0x11}));
    input_model::TrainConfig tc;
    tc.max_epochs = cfg.input_epochs;
    tc.batch_size = cfg.input_batch_size;
    tc.patience = cfg.input_patience;
    tc.seed = stream_seed(cfg.seed, {0x12});
    tc.threads = threads_of(cfg);
    const auto res = input_model::train_with_grid(init, train, val, tc, cfg.input_learning_rates);
    if (res.diverged && res.log.empty()) throw NumericalError("input model diverged in every grid run");
    auto ck = container::pack(res.model);
    ck.meta["norm"] = container::to_json(prep.stats);
    ck.meta["learning_rate"] = res.learning_rate;
    ck.meta["best_epoch"] = res.best_epoch;
    ck.meta["best_val_mse"] = res.best_val_mse;
    ck.meta["config"] = provenance(cfg);
    container::save(out_path(cfg, files::kInputModel), ck);
    write_input_log(out_path(cfg, files::kInputLog), res);
}

void extract_features(const RunConfig& cfg) {
    cfg.validate();
    const auto prep = prepare(cfg);
    const auto s1 = load_stage1(cfg);
    if (s1.model.gru.input_dim() != prep.series.inputs.cols())
        throw DataError("input model expects " + std::to_string(s1.model.gru.input_dim()) + " covariates");
    const auto features = input_model::extract_features(s1.model.gru, prep.series);
    data::save_features(out_path(cfg, files::kFeatures), features);
}

void train_smcl(const RunConfig& cfg) {
    cfg.validate();
    const auto prep = prepare(cfg);
    const auto s1 = load_stage1(cfg);
    const auto fs = feature_series(cfg, prep, s1);
    const auto train = data::make_windows(prep.segment(fs, "train"), cfg.train_stride);
    const auto val = data::make_windows(prep.segment(fs, "val"), cfg.eval_stride);

    training::TrainConfig tc;
    tc.particles = cfg.particles;
    tc.batch_size = cfg.smcl_batch_size;
    tc.max_epochs = cfg.smcl_epochs;
    tc.learning_rate = cfg.smcl_learning_rate;
    tc.patience = cfg.smcl_patience;
    tc.smoothing = cfg.smoothing;
    tc.paris_k = cfg.paris_k;
    tc.seed = stream_seed(cfg.seed, {0x21});
    tc.threads = threads_of(cfg);
    const auto init = ssm::SsmParams::random(cfg.state_dim, fs.inputs.cols(), stream_seed(cfg.seed, {0x22}));
    const auto res = training::train_smcl(train, val, init, tc);
    if (load_stage1(cfg).hash != s1.hash) throw DataError("input model checkpoint changed during training");

    auto ck = container::pack(res.params);
    ck.meta["input_model_hash"] = io::hex64(s1.hash);
    ck.meta["best_epoch"] = res.best_epoch;
    ck.meta["best_val_loglik"] = res.best_val_loglik;
    ck.meta["warnings"] = res.warnings;
    ck.meta["config"] = provenance(cfg);
    container::save(out_path(cfg, files::kSsm), ck);
    training::write_train_log(out_path(cfg, files::kSmclLog), res);
}

void recursive_mle(const RunConfig& cfg) {
    cfg.validate();
    const auto prep = prepare(cfg);
    const auto s1 = load_stage1(cfg);
    const auto fs = prep.segment(feature_series(cfg, prep, s1), "train");
    ssm::SsmParams init = std::filesystem::exists(out_path(cfg, files::kSsm))
                              ? load_ssm(cfg, fs.inputs.cols())
                              : ssm::SsmParams::random(cfg.state_dim, fs.inputs.cols(), stream_seed(cfg.seed, {0x22}));
    ssm::NonlinearModel model(init);
    training::RecursiveConfig rc;
    rc.particles = cfg.recursive_particles;
    rc.paris_k = cfg.recursive_paris_k;
    rc.seed = stream_seed(cfg.seed, {0x31});
    rc.record_every = cfg.record_every;
    const training::StepSchedule sched{cfg.gamma0, cfg.alpha};
    sched.validate();
    const auto res = training::recursive_mle(model, fs.inputs, fs.target, sched, rc);

    std::ostringstream os;
    os.precision(17);
    os << "step";
    for (const auto& name : model.param_names()) os << ',' << name;
    os << '\n';
    for (std::size_t i = 0; i < res.steps.size(); ++i) {
        os << res.steps[i];
        for (double v : res.thetas[i]) os << ',' << v;
        os << '\n';
    }
    io::atomic_write(out_path(cfg, files::kRecursive), os.str());
}

void forecast(const RunConfig& cfg) {
    cfg.validate();
    const auto prep = prepare(cfg);
    const auto s1 = load_stage1(cfg);
    const auto fs = feature_series(cfg, prep, s1);
    const auto params = load_ssm(cfg, fs.inputs.cols());
    auto windows = data::make_windows(prep.segment(fs, cfg.eval_split), cfg.eval_stride);
    if (windows.size() > cfg.forecast_windows) windows.resize(cfg.forecast_windows);
    const ssm::NonlinearModel model(params);
    std::vector<eval::ForecastBundle> bundles(windows.size());
    parallel_for(windows.size(), threads_of(cfg), [&](std::size_t i) {
        bundles[i] = eval::evaluate_window(model, windows[i], cfg.eval_particles, stream_seed(cfg.seed, {0xe7a1u, i}),
                                           &prep.stats);
        bundles[i].window_id = i;
    });
    eval::write_forecast_csv(out_path(cfg, files::kForecastBounds), out_path(cfg, files::kForecastSamples), bundles);
}

void evaluate(const RunConfig& cfg) {
    cfg.validate();
    const auto prep = prepare(cfg);
    const auto s1 = load_stage1(cfg);
    const auto fs = feature_series(cfg, prep, s1);
    const auto params = load_ssm(cfg, fs.inputs.cols());
    const auto windows = data::make_windows(prep.segment(fs, cfg.eval_split), cfg.eval_stride);
    const auto s = evaluate_smcl(cfg, params, windows, prep.stats);
    eval::write_windows_csv(out_path(cfg, files::kSmclWindows), s, cfg.timing);
    eval::write_summary_json(out_path(cfg, files::kSmclSummary), s, cfg.timing);
}

void baseline_hmm(const RunConfig& cfg) {
    cfg.validate();
    const auto prep = prepare(cfg);
    data::TimeSeriesDataset series = prep.series;
    if (cfg.hmm_inputs == "features") series = feature_series(cfg, prep, load_stage1(cfg));
    if (cfg.hmm_inputs == "none") series.inputs = RowMatrix(series.size(), 0);

    const auto train = prep.segment(series, "train");
    baselines::EmOptions opts;
    opts.state_dim = cfg.hmm_state_dim;
    opts.max_iters = cfg.hmm_max_iters;
    opts.tol = cfg.hmm_tol;
    opts.use_inputs = cfg.hmm_inputs != "none";
    opts.seed = stream_seed(cfg.seed, {0x41});
    const auto fit = baselines::em_fit(train.inputs, train.target, opts);

    auto ck = container::pack(fit.params);
    ck.meta["inputs"] = cfg.hmm_inputs;
    ck.meta["iterations"] = fit.loglik_trace.empty() ? 0 : fit.loglik_trace.size() - 1;
    ck.meta["warnings"] = fit.warnings;
    ck.meta["config"] = provenance(cfg);
    container::save(out_path(cfg, files::kHmm), ck);

    std::ostringstream os;
    os.precision(17);
    os << "iteration,loglik\n";
    for (std::size_t i = 0; i < fit.loglik_trace.size(); ++i) os << i << ',' << fit.loglik_trace[i] << '\n';
    io::atomic_write(out_path(cfg, files::kHmmLog), os.str());

    const auto windows = data::make_windows(prep.segment(series, cfg.eval_split), cfg.eval_stride);
    const auto s = eval::evaluate_suite(
        "hmm", windows,
        [&](const data::WindowSample& w, std::size_t, std::uint64_t seed) {
            return eval::evaluate_window_hmm(fit.params, w, cfg.eval_particles, seed, &prep.stats);
        },
        cfg.seed, threads_of(cfg));
    eval::write_windows_csv(out_path(cfg, files::kHmmWindows), s, cfg.timing);
    eval::write_summary_json(out_path(cfg, files::kHmmSummary), s, cfg.timing);
}

}  // namespace smcl::commands
