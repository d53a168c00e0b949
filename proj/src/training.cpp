#include "smcl/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "smcl/adam.hpp"
#include "smcl/errors.hpp"
#include "smcl/io.hpp"
#include "smcl/parallel.hpp"

namespace smcl::training {
namespace {

struct WindowOutcome {
    std::vector<double> score;
    double loglik = 0.0;
    double ess_mean = 0.0, ess_min = 0.0;
    bool ok = false;
};

WindowOutcome run_window(const ssm::NonlinearModel& model, const data::WindowSample& w, std::size_t particles,
                         std::uint64_t seed, const smc::FilterOptions& opts, bool want_score) {
    WindowOutcome out;
    try {
        smc::Streams streams(seed);
        const auto tr = smc::run_filter(model, w.inputs, w.targets, particles, streams, opts);
        out.loglik = smc::loglik_estimate(tr);
        out.ess_mean = std::accumulate(tr.ess.begin(), tr.ess.end(), 0.0) / static_cast<double>(tr.ess.size());
        out.ess_min = *std::min_element(tr.ess.begin(), tr.ess.end());
        if (want_score) {
            out.score = smc::score(model, tr);
            for (double v : out.score)
                if (!std::isfinite(v)) return out;
        }
        out.ok = std::isfinite(out.loglik);
    } catch (const NumericalError&) {
        out.ok = false;
    }
    return out;
}

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

void TrainConfig::validate() const {
    std::vector<std::string> errs;
    if (particles < 2) errs.push_back("particles must be >= 2");
    if (batch_size == 0) errs.push_back("batch_size must be positive");
    if (max_epochs == 0) errs.push_back("max_epochs must be positive");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) errs.push_back("learning_rate must be >= 0");
    if (patience == 0) errs.push_back("patience must be positive");
    if (smoothing == smc::Smoothing::paris && paris_k < 1) errs.push_back("paris_k must be >= 1");
    if (!(max_skip_fraction >= 0.0 && max_skip_fraction <= 1.0)) errs.push_back("max_skip_fraction must be in [0,1]");
    if (!errs.empty()) {
        std::string msg = "invalid SMCL training config:";
        for (const auto& e : errs) msg += "\n  " + e;
        throw ConfigError(msg);
    }
}

double validation_loglik(const ssm::SsmParams& params, std::span<const data::WindowSample> windows,
                         std::size_t particles, std::uint64_t seed, std::size_t threads) {
    if (windows.empty()) return 0.0;
    const ssm::NonlinearModel model(params);
    smc::FilterOptions opts;
    std::vector<double> ll(windows.size());
    parallel_for(windows.size(), threads, [&](std::size_t i) {
        const auto o = run_window(model, windows[i], particles, stream_seed(seed, {0x7a1u, i}), opts, false);
        ll[i] = o.ok ? o.loglik : -std::numeric_limits<double>::infinity();
    });
    return std::accumulate(ll.begin(), ll.end(), 0.0) / static_cast<double>(ll.size());
}

TrainResult train_smcl(std::span<const data::WindowSample> train, std::span<const data::WindowSample> val,
                       const ssm::SsmParams& init, const TrainConfig& cfg) {
    cfg.validate();
    if (train.empty()) throw DataError("no training windows for the SMC layer");
    TrainResult res;
    res.params = init;
    ssm::NonlinearModel model(init);
    optim::AdamState adam(init.size());
    smc::FilterOptions opts;
    opts.smoothing = cfg.smoothing;
    opts.paris_k = cfg.paris_k;
    opts.store_history = cfg.smoothing == smc::Smoothing::path_space;

    const auto& vset = val.empty() ? train : val;
    res.initial_val_loglik = validation_loglik(init, vset, cfg.particles, cfg.seed, cfg.threads);
    res.best_val_loglik = res.initial_val_loglik;

    std::vector<std::size_t> order(train.size());
    std::size_t since_best = 0;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle(stream_seed(cfg.seed, {0x5ba1u, epoch}));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

        EpochRecord er;
        er.epoch = epoch;
        er.ess_min = std::numeric_limits<double>::infinity();
        double ess_sum = 0.0;
        std::size_t ess_count = 0;
        for (std::size_t b = 0, batch_id = 0; b < order.size(); b += cfg.batch_size, ++batch_id) {
            const std::size_t hi = std::min(order.size(), b + cfg.batch_size);
            std::vector<WindowOutcome> outs(hi - b);
            parallel_for(outs.size(), cfg.threads, [&](std::size_t i) {
                const std::size_t w = order[b + i];
                outs[i] = run_window(model, train[w], cfg.particles, stream_seed(cfg.seed, {epoch, w}), opts, true);
            });
            BatchRecord br;
            br.epoch = epoch;
            br.batch = batch_id;
            br.ess_min = std::numeric_limits<double>::infinity();
            std::vector<double> avg(init.size(), 0.0);
            for (const auto& o : outs) {
                if (!o.ok) {
                    br.skipped = true;
                    break;
                }
                for (std::size_t j = 0; j < avg.size(); ++j) avg[j] += o.score[j];
                br.ess_mean += o.ess_mean;
                br.ess_min = std::min(br.ess_min, o.ess_min);
            }
            ++er.batches;
            if (br.skipped) {
                ++er.skipped;
                res.warnings.push_back("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_id) +
                                       ": weight collapse or non-finite score, batch skipped");
                res.batches.push_back(br);
                continue;
            }
            const double inv = 1.0 / static_cast<double>(outs.size());
            for (double& v : avg) v *= -inv;  // Adam descends the negated score
            br.score_norm = norm2(avg);
            br.ess_mean *= inv;
            ess_sum += br.ess_mean;
            ++ess_count;
            er.ess_min = std::min(er.ess_min, br.ess_min);
            er.mean_score_norm += br.score_norm;
            if (!optim::adam_step(adam, model.ssm().values, avg, cfg.learning_rate)) {
                br.skipped = true;
                ++er.skipped;
            }
            res.batches.push_back(br);
        }
        const std::size_t good = er.batches - er.skipped;
        if (good) {
            er.mean_score_norm /= static_cast<double>(good);
            er.ess_mean = ess_sum / static_cast<double>(std::max<std::size_t>(1, ess_count));
        }
        if (static_cast<double>(er.skipped) > cfg.max_skip_fraction * static_cast<double>(er.batches))
            throw NumericalError("epoch " + std::to_string(epoch) + ": " + std::to_string(er.skipped) + " of " +
                                 std::to_string(er.batches) + " batches skipped (weight collapse or non-finite score)");
        er.val_loglik = validation_loglik(model.ssm(), vset, cfg.particles, cfg.seed, cfg.threads);
        res.epochs.push_back(er);
        if (er.val_loglik > res.best_val_loglik) {
            res.best_val_loglik = er.val_loglik;
            res.best_epoch = epoch;
            res.params = model.ssm();
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    return res;
}

void write_train_log(const std::filesystem::path& path, const TrainResult& r) {
    std::ostringstream os;
    os.precision(17);
    os << "epoch,batch,train_score_norm,val_loglik,ess_mean,ess_min,skipped\n";
    for (const auto& b : r.batches)
        os << b.epoch << ',' << b.batch << ',' << b.score_norm << ",," << b.ess_mean << ',' << b.ess_min << ','
           << (b.skipped ? 1 : 0) << '\n';
    for (const auto& e : r.epochs)
        os << e.epoch << ",," << e.mean_score_norm << ',' << e.val_loglik << ',' << e.ess_mean << ',' << e.ess_min
           << ',' << e.skipped << '\n';
    io::atomic_write(path, os.str());
}

void StepSchedule::validate() const {
    std::vector<std::string> errs;
    if (!(gamma0 >= 0.0) || !std::isfinite(gamma0)) errs.push_back("gamma0 must be >= 0");
    if (!(alpha > 0.5 && alpha <= 1.0)) errs.push_back("alpha must lie in (0.5, 1]");
    if (!errs.empty()) {
        std::string msg = "invalid step schedule:";
        for (const auto& e : errs) msg += "\n  " + e;
        throw ConfigError(msg);
    }
}

RecursiveResult recursive_mle(ssm::Model& model, const RowMatrix& features, std::span<const double> y,
                              const StepSchedule& schedule, const RecursiveConfig& cfg) {
    schedule.validate();
    if (y.empty()) throw DataError("recursive MLE needs at least one observation");
    if (features.rows() != y.size()) throw std::invalid_argument("recursive_mle: features/observations length mismatch");
    const std::size_t dim = model.param_dim();
    std::vector<std::size_t> free = cfg.free_params;
    if (free.empty()) {
        free.resize(dim);
        std::iota(free.begin(), free.end(), 0);
    }
    for (std::size_t i : free)
        if (i >= dim) throw ConfigError("free parameter index out of range");

    smc::FilterOptions opts;
    opts.smoothing = smc::Smoothing::paris;
    opts.paris_k = cfg.paris_k;
    opts.store_history = false;
    smc::Streams streams(cfg.seed);

    RecursiveResult res;
    auto record = [&](std::size_t k) {
        res.steps.push_back(k);
        res.thetas.emplace_back(model.params().begin(), model.params().end());
    };
    smc::ParticleCloud cloud = smc::init_cloud(model, y[0], cfg.particles, streams, opts);
    auto weighted_tau = [](const smc::ParticleCloud& c) {
        std::vector<double> s(c.tau.cols(), 0.0);
        for (std::size_t i = 0; i < c.size(); ++i)
            for (std::size_t j = 0; j < s.size(); ++j) s[j] += c.weights[i] * c.tau(i, j);
        return s;
    };
    std::vector<double> prev_stat = weighted_tau(cloud);
    record(0);
    auto params = model.params();
    for (std::size_t k = 1; k < y.size(); ++k) {
        cloud = smc::filter_step(model, cloud, features.row(k), y[k], streams, opts);
        const std::vector<double> stat = weighted_tau(cloud);
        bool finite = true;
        for (std::size_t i : free) finite = finite && std::isfinite(stat[i] - prev_stat[i]);
        if (finite) {
            const double g = schedule(k);
            for (std::size_t i : free) params[i] += g * (stat[i] - prev_stat[i]);
        } else {
            ++res.skipped;
        }
        prev_stat = stat;
        if (k % cfg.record_every == 0 || k + 1 == y.size()) record(k);
    }
    return res;
}

}  // namespace smcl::training
