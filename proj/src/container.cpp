#include "smcl/container.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

#include "smcl/errors.hpp"
#include "smcl/io.hpp"

namespace smcl {
namespace io {

void atomic_write(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw DataError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

}  // namespace io

namespace container {
namespace {

constexpr char kMagic[8] = {'S', 'M', 'C', 'L', 'C', 'K', 'P', 'T'};

template <class T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

struct Reader {
    const std::string& s;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (s.size() - pos < n) throw DataError("checkpoint truncated at byte " + std::to_string(pos));
    }
    template <class T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, s.data() + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string out = s.substr(pos, n);
        pos += n;
        return out;
    }
};

Eigen::MatrixXd to_matrix(const Block& b) {
    Eigen::MatrixXd m(b.rows, b.cols);
    for (std::size_t r = 0; r < b.rows; ++r)
        for (std::size_t c = 0; c < b.cols; ++c) m(r, c) = b.data[r * b.cols + c];
    return m;
}

void add_matrix(Checkpoint& c, std::string name, const Eigen::MatrixXd& m) {
    std::vector<double> v(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index k = 0; k < m.cols(); ++k) v[static_cast<std::size_t>(r * m.cols() + k)] = m(r, k);
    c.add(std::move(name), static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()), v);
}

void require_kind(const Checkpoint& c, const std::string& kind) {
    if (c.kind() != kind) throw DataError("checkpoint holds '" + c.kind() + "', expected '" + kind + "'");
}

std::size_t meta_size(const Checkpoint& c, const char* key) {
    if (!c.meta.contains(key) || !c.meta[key].is_number_unsigned())
        throw DataError(std::string("checkpoint metadata lacks '") + key + "'");
    return c.meta[key].get<std::size_t>();
}

}  // namespace

void Checkpoint::add(std::string name, std::size_t rows, std::size_t cols, std::span<const double> data) {
    if (data.size() != rows * cols) throw std::invalid_argument("block " + name + ": size mismatch");
    blocks.push_back({std::move(name), rows, cols, {data.begin(), data.end()}});
}

const Block& Checkpoint::get(const std::string& name) const {
    for (const auto& b : blocks)
        if (b.name == name) return b;
    throw DataError("checkpoint has no block '" + name + "'");
}

const Block& Checkpoint::get(const std::string& name, std::size_t rows, std::size_t cols) const {
    const Block& b = get(name);
    if (b.rows != rows || b.cols != cols)
        throw DataError("block '" + name + "' is " + std::to_string(b.rows) + "x" + std::to_string(b.cols) +
                        ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
    return b;
}

std::string Checkpoint::kind() const { return meta.value("kind", std::string()); }

std::string serialize(const Checkpoint& c) {
    std::string out(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(c.blocks.size()));
    const std::string meta = c.meta.dump();
    put<std::uint64_t>(out, meta.size());
    out += meta;
    for (const auto& b : c.blocks) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(b.name.size()));
        out += b.name;
        put<std::uint64_t>(out, b.rows);
        put<std::uint64_t>(out, b.cols);
        out.append(reinterpret_cast<const char*>(b.data.data()), b.data.size() * sizeof(double));
    }
    return out;
}

Checkpoint deserialize(const std::string& bytes) {
    Reader r{bytes};
    if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) throw DataError("not a checkpoint file");
    const auto version = r.get<std::uint32_t>();
    if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
    const auto count = r.get<std::uint32_t>();
    Checkpoint c;
    const auto meta_len = r.get<std::uint64_t>();
    try {
        c.meta = nlohmann::ordered_json::parse(r.bytes(meta_len));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint metadata: ") + e.what());
    }
    for (std::uint32_t i = 0; i < count; ++i) {
        Block b;
        b.name = r.bytes(r.get<std::uint32_t>());
        b.rows = r.get<std::uint64_t>();
        b.cols = r.get<std::uint64_t>();
        if (b.cols && b.rows > (bytes.size() / sizeof(double)) / b.cols) throw DataError("checkpoint truncated");
        const std::string raw = r.bytes(b.rows * b.cols * sizeof(double));
        b.data.resize(b.rows * b.cols);
        std::memcpy(b.data.data(), raw.data(), raw.size());
        c.blocks.push_back(std::move(b));
    }
    if (r.pos != bytes.size()) throw DataError("trailing bytes after checkpoint blocks");
    return c;
}

void save(const std::filesystem::path& path, const Checkpoint& c) { io::atomic_write(path, serialize(c)); }

Checkpoint load(const std::filesystem::path& path) {
    try {
        return deserialize(io::read_file(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

Checkpoint pack(const input_model::InputModel& m) {
    Checkpoint c;
    c.meta["kind"] = "input_model";
    c.meta["input_dim"] = m.gru.input_dim();
    c.meta["hidden_dim"] = m.gru.output_dim();
    c.meta["layers"] = m.gru.layers.size();
    c.meta["head_hidden"] = m.head.cell.hidden;
    c.meta["model_hash"] = io::hex64(m.gru.hash());
    for (const auto& b : m.gru.blocks())
        c.add(b.name, b.rows, b.cols, std::span(m.gru.values).subspan(b.offset, b.rows * b.cols));
    c.add("head.values", 1, m.head.values.size(), m.head.values);
    return c;
}

input_model::InputModel unpack_input_model(const Checkpoint& c) {
    require_kind(c, "input_model");
    input_model::InputModel m;
    m.gru = nn::GruParams::create(meta_size(c, "input_dim"), meta_size(c, "hidden_dim"), meta_size(c, "layers"));
    for (const auto& b : m.gru.blocks()) {
        const Block& s = c.get(b.name, b.rows, b.cols);
        std::copy(s.data.begin(), s.data.end(), m.gru.values.begin() + static_cast<std::ptrdiff_t>(b.offset));
    }
    m.head = input_model::AuxHeadParams::create(m.gru.output_dim(), meta_size(c, "head_hidden"));
    m.head.values = c.get("head.values", 1, m.head.values.size()).data;
    return m;
}

Checkpoint pack(const ssm::SsmParams& p) {
    Checkpoint c;
    c.meta["kind"] = "ssm";
    c.meta["state_dim"] = p.dx;
    c.meta["feature_dim"] = p.du;
    for (const auto& b : p.blocks()) c.add(b.name, b.rows, b.cols, std::span(p.values).subspan(b.offset, b.rows * b.cols));
    return c;
}

ssm::SsmParams unpack_ssm(const Checkpoint& c) {
    require_kind(c, "ssm");
    auto p = ssm::SsmParams::create(meta_size(c, "state_dim"), meta_size(c, "feature_dim"));
    for (const auto& b : p.blocks()) {
        const Block& s = c.get(b.name, b.rows, b.cols);
        std::copy(s.data.begin(), s.data.end(), p.values.begin() + static_cast<std::ptrdiff_t>(b.offset));
    }
    return p;
}

Checkpoint pack(const baselines::HmmParams& p) {
    Checkpoint c;
    c.meta["kind"] = "hmm";
    c.meta["state_dim"] = p.state_dim();
    c.meta["input_dim"] = p.input_dim();
    add_matrix(c, "A", p.A);
    add_matrix(c, "B", p.B);
    add_matrix(c, "Q", p.Q);
    add_matrix(c, "C", p.C);
    add_matrix(c, "R", Eigen::MatrixXd::Constant(1, 1, p.R));
    add_matrix(c, "mu0", p.mu0);
    add_matrix(c, "P0", p.P0);
    return c;
}

baselines::HmmParams unpack_hmm(const Checkpoint& c) {
    require_kind(c, "hmm");
    const std::size_t n = meta_size(c, "state_dim"), m = meta_size(c, "input_dim");
    baselines::HmmParams p;
    p.A = to_matrix(c.get("A", n, n));
    p.B = to_matrix(c.get("B", n, m));
    p.Q = to_matrix(c.get("Q", n, n));
    p.C = to_matrix(c.get("C", 1, n)).row(0);
    p.R = c.get("R", 1, 1).data[0];
    p.mu0 = to_matrix(c.get("mu0", n, 1)).col(0);
    p.P0 = to_matrix(c.get("P0", n, n));
    return p;
}

nlohmann::ordered_json to_json(const data::NormStats& s) {
    nlohmann::ordered_json j;
    j["input_mean"] = s.input_mean;
    j["input_std"] = s.input_std;
    j["target_min"] = s.target_min;
    j["target_max"] = s.target_max;
    return j;
}

data::NormStats norm_stats_from_json(const nlohmann::ordered_json& j) {
    try {
        data::NormStats s;
        s.input_mean = j.at("input_mean").get<std::vector<double>>();
        s.input_std = j.at("input_std").get<std::vector<double>>();
        s.target_min = j.at("target_min").get<double>();
        s.target_max = j.at("target_max").get<double>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("normalization statistics: ") + e.what());
    }
}

}  // namespace container
}  // namespace smcl
