#include "smcl/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "smcl/errors.hpp"
#include "smcl/io.hpp"

namespace smcl::data {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        // strip whitespace and a trailing CR
        const auto b = cell.find_first_not_of(" \t\r\"");
        const auto e = cell.find_last_not_of(" \t\r\"");
        out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (cell.empty() || ec != std::errc{} || ptr != last || !std::isfinite(v))
        throw DataError("parse error at data row " + std::to_string(row) + ", column '" + column + "': '" + cell + "'");
    return v;
}

}  // namespace

TimeSeriesDataset TimeSeriesDataset::slice(std::size_t first, std::size_t count) const {
    TimeSeriesDataset out;
    out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(first),
                          timestamps.begin() + static_cast<std::ptrdiff_t>(first + count));
    out.inputs = inputs.slice_rows(first, count);
    out.target.assign(target.begin() + static_cast<std::ptrdiff_t>(first),
                      target.begin() + static_cast<std::ptrdiff_t>(first + count));
    return out;
}

std::int64_t parse_timestamp(const std::string& text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char sep = ' ';
    const int n = std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &s);
    if (n < 6 || (sep != ' ' && sep != 'T')) throw DataError("bad timestamp '" + text + "'");
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60)
        throw DataError("bad timestamp '" + text + "'");
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + s;
}

TimeSeriesDataset load_ett_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty file " + path.string());
    const auto header = split_csv_line(line);

    auto find_col = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError("schema error: missing column '" + name + "' in " + path.string());
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t date_col = find_col(kDateColumn);
    std::array<std::size_t, kCovariateColumns.size()> cov_cols{};
    for (std::size_t c = 0; c < kCovariateColumns.size(); ++c) cov_cols[c] = find_col(kCovariateColumns[c]);
    const std::size_t target_col = find_col(kTargetColumn);

    TimeSeriesDataset ds;
    std::vector<double> flat;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++row;
        const auto cells = split_csv_line(line);
        if (cells.size() < header.size())
            throw DataError("parse error at data row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
        std::int64_t ts = 0;
        try {
            ts = parse_timestamp(cells[date_col]);
        } catch (const DataError& e) {
            throw DataError("parse error at data row " + std::to_string(row) + ": " + e.what());
        }
        if (!ds.timestamps.empty() && ts - ds.timestamps.back() != 3600)
            throw DataError("timestamps not hourly at data row " + std::to_string(row) + " ('" + cells[date_col] +
                            "'); missing or duplicated records are not imputed");
        ds.timestamps.push_back(ts);
        for (std::size_t c = 0; c < cov_cols.size(); ++c)
            flat.push_back(parse_number(cells[cov_cols[c]], row, kCovariateColumns[c]));
        ds.target.push_back(parse_number(cells[target_col], row, kTargetColumn));
    }
    ds.inputs = RowMatrix(ds.target.size(), cov_cols.size());
    ds.inputs.values() = std::move(flat);
    return ds;
}

NormStats fit_normalizer(const TimeSeriesDataset& train) {
    const std::size_t t = train.size();
    if (t == 0) throw DataError("cannot fit normalizer on an empty dataset");
    const std::size_t d = train.inputs.cols();
    NormStats st;
    st.input_mean.assign(d, 0.0);
    st.input_std.assign(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) {
        double m = 0.0;
        for (std::size_t r = 0; r < t; ++r) m += train.inputs(r, c);
        m /= static_cast<double>(t);
        double v = 0.0;
        for (std::size_t r = 0; r < t; ++r) v += (train.inputs(r, c) - m) * (train.inputs(r, c) - m);
        v /= static_cast<double>(t);
        if (!(v > 0.0)) {
            const std::string name = c < kCovariateColumns.size() ? kCovariateColumns[c] : "column " + std::to_string(c);
            throw DataError("constant input column '" + name + "' cannot be standardized");
        }
        st.input_mean[c] = m;
        st.input_std[c] = std::sqrt(v);
    }
    const auto [mn, mx] = std::minmax_element(train.target.begin(), train.target.end());
    if (!(*mn < *mx)) throw DataError(std::string("constant target column '") + kTargetColumn + "' cannot be scaled");
    st.target_min = *mn;
    st.target_max = *mx;
    return st;
}

std::vector<double> forward_target(std::span<const double> values, const NormStats& st) {
    const double scale = (NormStats::kHigh - NormStats::kLow) / (st.target_max - st.target_min);
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = NormStats::kLow + (values[i] - st.target_min) * scale;
    return out;
}

std::vector<double> inverse_target(std::span<const double> values, const NormStats& st) {
    const double scale = (st.target_max - st.target_min) / (NormStats::kHigh - NormStats::kLow);
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = st.target_min + (values[i] - NormStats::kLow) * scale;
    return out;
}

TimeSeriesDataset apply_normalizer(const TimeSeriesDataset& ds, const NormStats& st) {
    if (ds.inputs.cols() != st.input_mean.size())
        throw DataError("normalizer fitted on " + std::to_string(st.input_mean.size()) + " columns, dataset has " +
                        std::to_string(ds.inputs.cols()));
    TimeSeriesDataset out = ds;
    for (std::size_t r = 0; r < ds.size(); ++r)
        for (std::size_t c = 0; c < ds.inputs.cols(); ++c)
            out.inputs(r, c) = (ds.inputs(r, c) - st.input_mean[c]) / st.input_std[c];
    out.target = forward_target(ds.target, st);
    return out;
}

Split chronological_split(const TimeSeriesDataset& ds, const std::array<double, 3>& f, std::size_t min_segment) {
    for (double x : f)
        if (!(x > 0.0)) throw ConfigError("split fractions must be positive");
    if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
    const std::size_t t = ds.size();
    if (t < kWindowLength)
        throw DataError("series has " + std::to_string(t) + " rows; at least " + std::to_string(kWindowLength) +
                        " are needed for one window");
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(t) * f[0] + 1e-9));
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(t) * f[1] + 1e-9));
    const std::size_t n_test = t - std::min(t, n_train + n_val);
    const char* names[] = {"train", "val", "test"};
    const std::size_t lens[] = {n_train, n_val, n_test};
    for (int i = 0; i < 3; ++i)
        if (lens[i] < std::max<std::size_t>(min_segment, 1))
            throw DataError(std::string(names[i]) + " segment has " + std::to_string(lens[i]) + " rows; at least " +
                            std::to_string(std::max<std::size_t>(min_segment, 1)) + " are needed");
    Split s;
    s.val_begin = n_train;
    s.test_begin = n_train + n_val;
    s.train = ds.slice(0, n_train);
    s.val = ds.slice(n_train, n_val);
    s.test = ds.slice(s.test_begin, n_test);
    return s;
}

std::vector<WindowSample> make_windows(const TimeSeriesDataset& ds, std::size_t stride, std::size_t length) {
    if (stride == 0) throw ConfigError("window stride must be positive");
    std::vector<WindowSample> out;
    if (ds.size() < length) return out;
    for (std::size_t s = 0; s + length <= ds.size(); s += stride) {
        WindowSample w;
        w.start = s;
        w.inputs = ds.inputs.slice_rows(s, length);
        w.targets.assign(ds.target.begin() + static_cast<std::ptrdiff_t>(s),
                         ds.target.begin() + static_cast<std::ptrdiff_t>(s + length));
        out.push_back(std::move(w));
    }
    return out;
}

namespace {
constexpr char kFeatureMagic[8] = {'S', 'M', 'C', 'L', 'F', 'E', 'A', 'T'};
constexpr std::uint32_t kFeatureVersion = 1;

template <class T>
void put(std::string& buf, T v) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    buf.append(bytes, sizeof(T));
}

template <class T>
T get(const std::string& buf, std::size_t& pos) {
    if (pos + sizeof(T) > buf.size()) throw DataError("truncated feature file");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}
}  // namespace

static_assert(std::endian::native == std::endian::little, "feature files are little endian");

void save_features(const std::filesystem::path& path, const FeatureSequence& f) {
    std::string buf(kFeatureMagic, sizeof(kFeatureMagic));
    put<std::uint32_t>(buf, kFeatureVersion);
    put<std::uint32_t>(buf, 0);
    put<std::uint64_t>(buf, f.values.rows());
    put<std::uint64_t>(buf, f.values.cols());
    put<std::uint64_t>(buf, f.model_hash);
    for (double v : f.values.values()) put<double>(buf, v);
    io::atomic_write(path, buf);
}

FeatureSequence load_features(const std::filesystem::path& path, std::optional<std::uint64_t> expected_hash) {
    const std::string buf = io::read_file(path);
    if (buf.size() < 40 || std::memcmp(buf.data(), kFeatureMagic, 8) != 0)
        throw DataError("not a feature file: " + path.string());
    std::size_t pos = 8;
    const auto version = get<std::uint32_t>(buf, pos);
    if (version != kFeatureVersion) throw DataError("unsupported feature file version " + std::to_string(version));
    get<std::uint32_t>(buf, pos);
    const auto rows = get<std::uint64_t>(buf, pos);
    const auto cols = get<std::uint64_t>(buf, pos);
    FeatureSequence f;
    f.model_hash = get<std::uint64_t>(buf, pos);
    if (expected_hash && *expected_hash != f.model_hash)
        throw StaleFeatureError("stale features in " + path.string() + ": produced by model " + io::hex64(f.model_hash) +
                                ", expected " + io::hex64(*expected_hash));
    if (buf.size() != 40 + rows * cols * sizeof(double)) throw DataError("feature file size mismatch: " + path.string());
    f.values = RowMatrix(rows, cols);
    std::memcpy(f.values.values().data(), buf.data() + 40, rows * cols * sizeof(double));
    return f;
}

}  // namespace smcl::data
