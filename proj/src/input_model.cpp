#include "smcl/input_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "smcl/adam.hpp"
#include "smcl/errors.hpp"
#include "smcl/parallel.hpp"

namespace smcl::input_model {

AuxHeadParams AuxHeadParams::create(std::size_t feature_dim, std::size_t hidden_dim) {
    AuxHeadParams h;
    h.cell = {feature_dim + 1, hidden_dim};
    h.values.assign(h.cell.size() + hidden_dim + 2, 0.0);
    return h;
}

InputModel InputModel::create(std::size_t input_dim, std::size_t feature_dim, std::size_t layers,
                              std::size_t head_hidden, std::uint64_t seed) {
    InputModel m{nn::GruParams::create(input_dim, feature_dim, layers), AuxHeadParams::create(feature_dim, head_hidden)};
    Rng rng(stream_seed(seed, {0x1a7u}));
    for (std::size_t l = 0; l < m.gru.layers.size(); ++l) nn::init_cell(m.gru.layers[l], m.gru.layer(l), rng);
    nn::init_cell(m.head.cell, std::span(m.head.values).subspan(0, m.head.cell.size()), rng);
    const double a = 1.0 / std::sqrt(static_cast<double>(head_hidden));
    for (std::size_t i = 0; i < head_hidden; ++i) m.head.values[m.head.readout_w() + i] = a * (2.0 * rng.uniform() - 1.0);
    return m;
}

namespace {

// One window: loss and (optionally) gradients accumulated into g_gru/g_head.
double window_pass(const InputModel& m, const data::WindowSample& w, std::vector<double>* g_gru,
                   std::vector<double>* g_head) {
    const std::size_t t = w.length();
    const bool grad = g_gru != nullptr;
    std::vector<std::vector<nn::CellCache>> caches;
    const RowMatrix feats = nn::gru_forward(m.gru, w.inputs, grad ? &caches : nullptr);

    const auto& hs = m.head.cell;
    const auto hp = m.head.cell_params();
    const double* wout = m.head.values.data() + m.head.readout_w();
    const double bout = m.head.values[m.head.readout_b()];
    const double y0 = m.head.values[m.head.y0()];

    std::vector<nn::CellCache> hc(grad ? t : 0);
    std::vector<double> h(hs.hidden, 0.0), hn(hs.hidden), x(hs.input);
    RowMatrix hidden(t, hs.hidden);
    std::vector<double> err(t);
    double loss = 0.0;
    for (std::size_t k = 0; k < t; ++k) {
        x[0] = k == 0 ? y0 : w.targets[k - 1];
        std::copy(feats.row(k).begin(), feats.row(k).end(), x.begin() + 1);
        nn::cell_forward(hs, hp, x, h, hn, grad ? &hc[k] : nullptr);
        h = hn;
        std::copy(h.begin(), h.end(), hidden.row(k).begin());
        double pred = bout;
        for (std::size_t i = 0; i < hs.hidden; ++i) pred += wout[i] * h[i];
        err[k] = pred - w.targets[k];
        loss += err[k] * err[k];
    }
    if (!grad) return loss;

    auto& gh = *g_head;
    RowMatrix d_feat(t, feats.cols());
    std::vector<double> dh(hs.hidden, 0.0), dh_prev(hs.hidden), dx(hs.input);
    for (std::size_t k = t; k-- > 0;) {
        const double dpred = 2.0 * err[k];
        for (std::size_t i = 0; i < hs.hidden; ++i) {
            gh[m.head.readout_w() + i] += dpred * hidden(k, i);
            dh[i] += dpred * wout[i];
        }
        gh[m.head.readout_b()] += dpred;
        std::fill(dx.begin(), dx.end(), 0.0);
        nn::cell_backward(hs, hp, hc[k], dh, std::span(gh).subspan(0, hs.size()), dx, dh_prev);
        if (k == 0) gh[m.head.y0()] += dx[0];
        std::copy(dx.begin() + 1, dx.end(), d_feat.row(k).begin());
        dh = dh_prev;
    }
    nn::gru_backward(m.gru, caches, d_feat, *g_gru);
    return loss;
}

void check_finite(std::span<const double> g, const std::vector<nn::GruParams::Block>& blocks, const char* what) {
    for (const auto& b : blocks)
        for (std::size_t i = 0; i < b.rows * b.cols; ++i)
            if (!std::isfinite(g[b.offset + i]))
                throw NumericalError(std::string("non-finite gradient in ") + what + " block " + b.name);
}

}  // namespace

std::vector<double> aux_forward(const AuxHeadParams& head, const RowMatrix& features, std::span<const double> targets) {
    if (features.rows() != targets.size()) throw std::invalid_argument("aux_forward: length mismatch");
    if (features.cols() + 1 != head.cell.input) throw std::invalid_argument("aux_forward: feature dimension mismatch");
    const std::size_t t = targets.size();
    std::vector<double> out(t), h(head.cell.hidden, 0.0), hn(head.cell.hidden), x(head.cell.input);
    for (std::size_t k = 0; k < t; ++k) {
        x[0] = k == 0 ? head.values[head.y0()] : targets[k - 1];
        std::copy(features.row(k).begin(), features.row(k).end(), x.begin() + 1);
        nn::cell_forward(head.cell, head.cell_params(), x, h, hn, nullptr);
        h = hn;
        double pred = head.values[head.readout_b()];
        for (std::size_t i = 0; i < h.size(); ++i) pred += head.values[head.readout_w() + i] * h[i];
        out[k] = pred;
    }
    return out;
}

double input_loss(const InputModel& model, std::span<const data::WindowSample> batch) {
    double total = 0.0;
    for (const auto& w : batch) total += window_pass(model, w, nullptr, nullptr);
    return total;
}

InputGradient input_gradients(const InputModel& model, std::span<const data::WindowSample> batch, std::size_t threads) {
    if (batch.empty()) throw std::invalid_argument("input_gradients: empty batch");
    std::vector<std::vector<double>> gg(batch.size()), gh(batch.size());
    std::vector<double> losses(batch.size());
    parallel_for(batch.size(), threads, [&](std::size_t i) {
        gg[i].assign(model.gru.values.size(), 0.0);
        gh[i].assign(model.head.values.size(), 0.0);
        losses[i] = window_pass(model, batch[i], &gg[i], &gh[i]);
    });
    InputGradient out{std::vector<double>(model.gru.values.size(), 0.0),
                      std::vector<double>(model.head.values.size(), 0.0), 0.0};
    for (std::size_t i = 0; i < batch.size(); ++i) {
        for (std::size_t j = 0; j < out.gru.size(); ++j) out.gru[j] += gg[i][j];
        for (std::size_t j = 0; j < out.head.size(); ++j) out.head[j] += gh[i][j];
        out.loss += losses[i];
    }
    check_finite(out.gru, model.gru.blocks(), "input model");
    const auto& hc = model.head.cell;
    check_finite(out.head,
                 {{"aux.cell", 0, hc.size(), 1},
                  {"aux.readout_w", model.head.readout_w(), hc.hidden, 1},
                  {"aux.readout_b", model.head.readout_b(), 1, 1},
                  {"aux.y0", model.head.y0(), 1, 1}},
                 "auxiliary head");
    return out;
}

double mean_squared_error(const InputModel& model, std::span<const data::WindowSample> windows, std::size_t threads) {
    if (windows.empty()) return 0.0;
    std::vector<double> losses(windows.size());
    parallel_for(windows.size(), threads, [&](std::size_t i) { losses[i] = window_pass(model, windows[i], nullptr, nullptr); });
    std::size_t steps = 0;
    for (const auto& w : windows) steps += w.length();
    return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(steps);
}

TrainResult train_input_model(InputModel model, std::span<const data::WindowSample> train,
                              std::span<const data::WindowSample> val, const TrainConfig& cfg) {
    if (train.empty()) throw DataError("no training windows for the input model");
    if (cfg.batch_size == 0) throw ConfigError("batch size must be positive");
    TrainResult res;
    res.learning_rate = cfg.learning_rate;
    res.model = model;
    res.best_val_mse = std::numeric_limits<double>::infinity();
    optim::AdamState sg(model.gru.values.size()), sh(model.head.values.size());

    std::vector<std::size_t> order(train.size());
    std::vector<data::WindowSample> batch;
    std::size_t since_best = 0;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(stream_seed(cfg.seed, {0x5ba1u, epoch}));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        double train_sse = 0.0;
        std::size_t train_steps = 0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            batch.clear();
            for (std::size_t i = b; i < std::min(order.size(), b + cfg.batch_size); ++i) batch.push_back(train[order[i]]);
            InputGradient g;
            try {
                g = input_gradients(model, batch, cfg.threads);
            } catch (const NumericalError&) {
                res.diverged = true;
                return res;
            }
            if (!std::isfinite(g.loss)) {
                res.diverged = true;
                return res;
            }
            train_sse += g.loss;
            for (const auto& w : batch) train_steps += w.length();
            optim::adam_step(sg, model.gru.values, g.gru, cfg.learning_rate);
            optim::adam_step(sh, model.head.values, g.head, cfg.learning_rate);
        }
        EpochRecord rec{epoch, train_sse / static_cast<double>(train_steps),
                        val.empty() ? train_sse / static_cast<double>(train_steps)
                                    : mean_squared_error(model, val, cfg.threads)};
        res.log.push_back(rec);
        if (!std::isfinite(rec.val_mse)) {
            res.diverged = true;
            return res;
        }
        if (rec.val_mse < res.best_val_mse) {
            res.best_val_mse = rec.val_mse;
            res.best_epoch = epoch;
            res.model = model;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    return res;
}

TrainResult train_with_grid(const InputModel& init, std::span<const data::WindowSample> train,
                            std::span<const data::WindowSample> val, TrainConfig cfg,
                            std::span<const double> learning_rates) {
    if (learning_rates.empty()) throw ConfigError("learning-rate grid is empty");
    TrainResult best;
    bool have = false;
    for (double lr : learning_rates) {
        cfg.learning_rate = lr;
        TrainResult r = train_input_model(init, train, val, cfg);
        if (r.diverged && r.best_epoch == 0) continue;
        if (!have || r.best_val_mse < best.best_val_mse) {
            best = std::move(r);
            have = true;
        }
    }
    if (!have) throw NumericalError("input model diverged for every learning rate in the grid");
    return best;
}

data::FeatureSequence extract_features(const nn::GruParams& gru, const data::TimeSeriesDataset& ds) {
    return {nn::gru_forward(gru, ds.inputs), gru.hash()};
}

}  // namespace smcl::input_model
