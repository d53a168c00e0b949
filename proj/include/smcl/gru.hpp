#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "smcl/matrix.hpp"
#include "smcl/rng.hpp"

namespace smcl::nn {

/// Parameter layout of one GRU cell, PyTorch ordering: gates stacked r, z, n.
///   W_i : 3h x in     W_h : 3h x h     b_i : 3h     b_h : 3h
struct CellShape {
    std::size_t input = 0;
    std::size_t hidden = 0;

    std::size_t w_i() const { return 0; }
    std::size_t w_h() const { return 3 * hidden * input; }
    std::size_t b_i() const { return w_h() + 3 * hidden * hidden; }
    std::size_t b_h() const { return b_i() + 3 * hidden; }
    std::size_t size() const { return b_h() + 3 * hidden; }
};

/// Per-step activations retained for the backward pass.
struct CellCache {
    std::vector<double> x, h_prev, r, z, n, hn;
};

/// h_out = GRU(x, h_prev). `cache` may be null when no gradient is needed.
void cell_forward(const CellShape& s, std::span<const double> p, std::span<const double> x,
                  std::span<const double> h_prev, std::span<double> h_out, CellCache* cache);

/// Backpropagates dh_out through one step. Accumulates into `grad` (same
/// layout as p) and `dx`; overwrites `dh_prev`.
void cell_backward(const CellShape& s, std::span<const double> p, const CellCache& c,
                   std::span<const double> dh_out, std::span<double> grad, std::span<double> dx,
                   std::span<double> dh_prev);

/// Uniform(-1/sqrt(h), 1/sqrt(h)) initialization.
void init_cell(const CellShape& s, std::span<double> p, Rng& rng);

/// Stacked GRU: layer l consumes layer l-1 outputs; initial states are zero.
struct GruParams {
    std::vector<CellShape> layers;
    std::vector<double> values;  // layers concatenated

    static GruParams create(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_layers);

    std::size_t offset(std::size_t layer) const;
    std::span<const double> layer(std::size_t l) const { return {values.data() + offset(l), layers[l].size()}; }
    std::span<double> layer(std::size_t l) { return {values.data() + offset(l), layers[l].size()}; }
    std::size_t input_dim() const { return layers.front().input; }
    std::size_t output_dim() const { return layers.back().hidden; }

    /// Named blocks (e.g. "layer1.W_hz") for checkpoints.
    struct Block {
        std::string name;
        std::size_t offset, rows, cols;
    };
    std::vector<Block> blocks() const;

    /// Content hash of shapes and weights; chains features to this model.
    std::uint64_t hash() const;
};

/// Forward pass over a whole sequence (T x input_dim) from zero state.
/// `caches`, when given, receives layers.size() x T step caches.
RowMatrix gru_forward(const GruParams& params, const RowMatrix& inputs,
                      std::vector<std::vector<CellCache>>* caches = nullptr);

/// Backpropagation through time. `d_out` is dLoss/d(output) (T x output_dim).
/// Accumulates into `grad` (same layout as params.values).
void gru_backward(const GruParams& params, const std::vector<std::vector<CellCache>>& caches,
                  const RowMatrix& d_out, std::span<double> grad);

}  // namespace smcl::nn
