#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smcl/data.hpp"
#include "smcl/gru.hpp"

namespace smcl::input_model {

/// Auxiliary regression head used only while training the GRU:
/// a GRU cell over (y_{k-1}, feature_k) followed by an affine readout.
/// The y_{k-1} fed at the first step of a window is the learned scalar y0.
struct AuxHeadParams {
    nn::CellShape cell;
    std::vector<double> values;  // cell params, readout w (hidden), readout b, y0

    static AuxHeadParams create(std::size_t feature_dim, std::size_t hidden_dim);

    std::span<const double> cell_params() const { return {values.data(), cell.size()}; }
    std::size_t readout_w() const { return cell.size(); }
    std::size_t readout_b() const { return cell.size() + cell.hidden; }
    std::size_t y0() const { return readout_b() + 1; }
};

struct InputModel {
    nn::GruParams gru;
    AuxHeadParams head;

    static InputModel create(std::size_t input_dim, std::size_t feature_dim, std::size_t layers,
                             std::size_t head_hidden, std::uint64_t seed);
};

/// Teacher-forced head predictions; `targets` supplies y_{k-1} for k >= 1.
std::vector<double> aux_forward(const AuxHeadParams& head, const RowMatrix& features, std::span<const double> targets);

/// sum over windows and steps of (prediction - target)^2.
double input_loss(const InputModel& model, std::span<const data::WindowSample> batch);

struct InputGradient {
    std::vector<double> gru;
    std::vector<double> head;
    double loss = 0.0;
};

/// Exact reverse-mode gradient of input_loss. Throws NumericalError naming
/// the parameter block if any entry is non-finite. `threads` > 1 splits the
/// batch; the reduction order is fixed.
InputGradient input_gradients(const InputModel& model, std::span<const data::WindowSample> batch,
                              std::size_t threads = 1);

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t max_epochs = 50;
    std::size_t batch_size = 32;
    std::size_t patience = 5;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_mse = 0.0;  // per step, averaged over the epoch
    double val_mse = 0.0;
};

struct TrainResult {
    InputModel model;  // parameters of the best validation epoch
    std::vector<EpochRecord> log;
    std::size_t best_epoch = 0;
    double best_val_mse = 0.0;
    bool diverged = false;
    double learning_rate = 0.0;
};

double mean_squared_error(const InputModel& model, std::span<const data::WindowSample> windows,
                          std::size_t threads = 1);

TrainResult train_input_model(InputModel init, std::span<const data::WindowSample> train,
                              std::span<const data::WindowSample> val, const TrainConfig& config);

/// Runs train_input_model once per learning rate and keeps the run with the
/// lowest best-validation MSE (ties: earlier grid entry).
TrainResult train_with_grid(const InputModel& init, std::span<const data::WindowSample> train,
                            std::span<const data::WindowSample> val, TrainConfig config,
                            std::span<const double> learning_rates);

/// GRU features of a whole series; the auxiliary head is not used.
data::FeatureSequence extract_features(const nn::GruParams& gru, const data::TimeSeriesDataset& ds);

}  // namespace smcl::input_model
