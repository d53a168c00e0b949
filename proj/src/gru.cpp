#include "smcl/gru.hpp"

#include <cmath>
#include <stdexcept>

#include "smcl/io.hpp"

namespace smcl::nn {
namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// out[i] += sum_j W[(row0 + i) * cols + j] * v[j]
void matvec_add(std::span<const double> w, std::size_t row0, std::size_t rows, std::size_t cols,
                std::span<const double> v, double* out) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* wr = w.data() + (row0 + i) * cols;
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += wr[j] * v[j];
        out[i] += s;
    }
}

}  // namespace

void cell_forward(const CellShape& s, std::span<const double> p, std::span<const double> x,
                  std::span<const double> h_prev, std::span<double> h_out, CellCache* cache) {
    const std::size_t h = s.hidden;
    if (x.size() != s.input || h_prev.size() != h || h_out.size() != h)
        throw std::invalid_argument("GRU cell dimension mismatch");
    const auto wi = p.subspan(s.w_i(), 3 * h * s.input);
    const auto wh = p.subspan(s.w_h(), 3 * h * h);
    const double* bi = p.data() + s.b_i();
    const double* bh = p.data() + s.b_h();

    std::vector<double> gi(3 * h), gh(3 * h);
    for (std::size_t k = 0; k < 3 * h; ++k) {
        gi[k] = bi[k];
        gh[k] = bh[k];
    }
    matvec_add(wi, 0, 3 * h, s.input, x, gi.data());
    matvec_add(wh, 0, 3 * h, h, h_prev, gh.data());

    std::vector<double> r(h), z(h), n(h), hn(h);
    for (std::size_t k = 0; k < h; ++k) {
        r[k] = sigmoid(gi[k] + gh[k]);
        z[k] = sigmoid(gi[h + k] + gh[h + k]);
        hn[k] = gh[2 * h + k];
        n[k] = std::tanh(gi[2 * h + k] + r[k] * hn[k]);
    }
    // h_out may alias nothing in the cache, so compute before moving.
    for (std::size_t k = 0; k < h; ++k) h_out[k] = (1.0 - z[k]) * n[k] + z[k] * h_prev[k];
    if (cache) {
        cache->x.assign(x.begin(), x.end());
        cache->h_prev.assign(h_prev.begin(), h_prev.end());
        cache->r = std::move(r);
        cache->z = std::move(z);
        cache->n = std::move(n);
        cache->hn = std::move(hn);
    }
}

void cell_backward(const CellShape& s, std::span<const double> p, const CellCache& c,
                   std::span<const double> dh_out, std::span<double> grad, std::span<double> dx,
                   std::span<double> dh_prev) {
    const std::size_t h = s.hidden;
    const std::size_t in = s.input;
    // pre-activation gradients, gate order r, z, n
    std::vector<double> da_i(3 * h), da_h(3 * h);
    for (std::size_t k = 0; k < h; ++k) {
        const double dn = dh_out[k] * (1.0 - c.z[k]);
        const double dz = dh_out[k] * (c.h_prev[k] - c.n[k]);
        const double dan = dn * (1.0 - c.n[k] * c.n[k]);
        const double dr = dan * c.hn[k];
        const double dar = dr * c.r[k] * (1.0 - c.r[k]);
        const double daz = dz * c.z[k] * (1.0 - c.z[k]);
        da_i[k] = dar;
        da_i[h + k] = daz;
        da_i[2 * h + k] = dan;
        da_h[k] = dar;
        da_h[h + k] = daz;
        da_h[2 * h + k] = dan * c.r[k];
        dh_prev[k] = dh_out[k] * c.z[k];
    }
    double* gwi = grad.data() + s.w_i();
    double* gwh = grad.data() + s.w_h();
    double* gbi = grad.data() + s.b_i();
    double* gbh = grad.data() + s.b_h();
    const double* wi = p.data() + s.w_i();
    const double* wh = p.data() + s.w_h();
    for (std::size_t g = 0; g < 3 * h; ++g) {
        const double ai = da_i[g];
        const double ah = da_h[g];
        gbi[g] += ai;
        gbh[g] += ah;
        for (std::size_t j = 0; j < in; ++j) {
            gwi[g * in + j] += ai * c.x[j];
            dx[j] += wi[g * in + j] * ai;
        }
        for (std::size_t j = 0; j < h; ++j) {
            gwh[g * h + j] += ah * c.h_prev[j];
            dh_prev[j] += wh[g * h + j] * ah;
        }
    }
}

void init_cell(const CellShape& s, std::span<double> p, Rng& rng) {
    const double a = 1.0 / std::sqrt(static_cast<double>(s.hidden));
    for (double& v : p.subspan(0, s.size())) v = a * (2.0 * rng.uniform() - 1.0);
}

GruParams GruParams::create(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_layers) {
    if (num_layers == 0 || input_dim == 0 || hidden_dim == 0) throw std::invalid_argument("empty GRU shape");
    GruParams g;
    std::size_t total = 0;
    for (std::size_t l = 0; l < num_layers; ++l) {
        g.layers.push_back({l == 0 ? input_dim : hidden_dim, hidden_dim});
        total += g.layers.back().size();
    }
    g.values.assign(total, 0.0);
    return g;
}

std::size_t GruParams::offset(std::size_t layer) const {
    std::size_t o = 0;
    for (std::size_t l = 0; l < layer; ++l) o += layers[l].size();
    return o;
}

std::vector<GruParams::Block> GruParams::blocks() const {
    std::vector<Block> out;
    static const char* gates[] = {"r", "z", "n"};
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& s = layers[l];
        const std::size_t base = offset(l);
        const std::string pre = "layer" + std::to_string(l + 1) + ".";
        for (int g = 0; g < 3; ++g)
            out.push_back({pre + "W_i" + gates[g], base + s.w_i() + g * s.hidden * s.input, s.hidden, s.input});
        for (int g = 0; g < 3; ++g)
            out.push_back({pre + "W_h" + gates[g], base + s.w_h() + g * s.hidden * s.hidden, s.hidden, s.hidden});
        for (int g = 0; g < 3; ++g) out.push_back({pre + "b_i" + gates[g], base + s.b_i() + g * s.hidden, s.hidden, 1});
        for (int g = 0; g < 3; ++g) out.push_back({pre + "b_h" + gates[g], base + s.b_h() + g * s.hidden, s.hidden, 1});
    }
    return out;
}

std::uint64_t GruParams::hash() const {
    std::string bytes;
    for (const auto& s : layers) {
        bytes.append(reinterpret_cast<const char*>(&s.input), sizeof(s.input));
        bytes.append(reinterpret_cast<const char*>(&s.hidden), sizeof(s.hidden));
    }
    bytes.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
    return io::fnv1a(bytes);
}

RowMatrix gru_forward(const GruParams& params, const RowMatrix& inputs,
                      std::vector<std::vector<CellCache>>* caches) {
    if (inputs.cols() != params.input_dim())
        throw std::invalid_argument("GRU expects " + std::to_string(params.input_dim()) + " input columns, got " +
                                    std::to_string(inputs.cols()));
    const std::size_t t = inputs.rows();
    RowMatrix cur = inputs;
    if (caches) caches->assign(params.layers.size(), std::vector<CellCache>(t));
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& s = params.layers[l];
        const auto p = params.layer(l);
        RowMatrix out(t, s.hidden);
        std::vector<double> h(s.hidden, 0.0);
        for (std::size_t k = 0; k < t; ++k) {
            cell_forward(s, p, cur.row(k), h, out.row(k), caches ? &(*caches)[l][k] : nullptr);
            std::copy(out.row(k).begin(), out.row(k).end(), h.begin());
        }
        cur = std::move(out);
    }
    return cur;
}

void gru_backward(const GruParams& params, const std::vector<std::vector<CellCache>>& caches,
                  const RowMatrix& d_out, std::span<double> grad) {
    const std::size_t t = d_out.rows();
    RowMatrix upstream = d_out;
    for (std::size_t l = params.layers.size(); l-- > 0;) {
        const auto& s = params.layers[l];
        const auto p = params.layer(l);
        auto g = grad.subspan(params.offset(l), s.size());
        RowMatrix d_in(t, s.input);
        std::vector<double> dh_carry(s.hidden, 0.0), dh(s.hidden), dh_prev(s.hidden);
        for (std::size_t k = t; k-- > 0;) {
            for (std::size_t i = 0; i < s.hidden; ++i) dh[i] = upstream(k, i) + dh_carry[i];
            cell_backward(s, p, caches[l][k], dh, g, d_in.row(k), dh_prev);
            dh_carry = dh_prev;
        }
        upstream = std::move(d_in);
    }
}

}  // namespace smcl::nn
