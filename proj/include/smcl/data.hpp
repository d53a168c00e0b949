#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smcl/matrix.hpp"

namespace smcl::data {

inline constexpr std::array<const char*, 6> kCovariateColumns = {"HUFL", "HULL", "MUFL", "MULL", "LUFL", "LULL"};
inline constexpr const char* kTargetColumn = "OT";
inline constexpr const char* kDateColumn = "date";

inline constexpr std::size_t kLookback = 24;
inline constexpr std::size_t kHorizon = 24;
inline constexpr std::size_t kWindowLength = kLookback + kHorizon;

/// Hourly multivariate series. `inputs` is T x d (d = 6 for raw ETT
/// covariates; extracted features reuse the same container).
struct TimeSeriesDataset {
    std::vector<std::int64_t> timestamps;  // seconds since epoch, UTC
    RowMatrix inputs;
    std::vector<double> target;

    std::size_t size() const { return target.size(); }

    /// Rows [first, first + count).
    TimeSeriesDataset slice(std::size_t first, std::size_t count) const;
};

struct NormStats {
    std::vector<double> input_mean;
    std::vector<double> input_std;
    double target_min = 0.0;
    double target_max = 1.0;

    static constexpr double kLow = 0.05;
    static constexpr double kHigh = 0.95;
};

/// 48-hour sample: lookback is the first 24 rows, forecast the last 24.
struct WindowSample {
    std::size_t start = 0;  // row offset inside the source dataset
    RowMatrix inputs;       // 48 x d
    std::vector<double> targets;

    std::size_t length() const { return targets.size(); }
};

/// Parses an ETT-style CSV (`date,HUFL,HULL,MUFL,MULL,LUFL,LULL,OT`). Column
/// order in the file is free; extra columns are ignored. Throws DataError on
/// schema problems, unparsable cells (with 1-based data row index) and
/// timestamps that are not strictly hourly.
TimeSeriesDataset load_ett_csv(const std::filesystem::path& path);

/// Parses "YYYY-MM-DD HH:MM[:SS]" (a 'T' separator is accepted) as UTC seconds.
std::int64_t parse_timestamp(const std::string& text);

NormStats fit_normalizer(const TimeSeriesDataset& train);
TimeSeriesDataset apply_normalizer(const TimeSeriesDataset& ds, const NormStats& stats);
std::vector<double> forward_target(std::span<const double> values, const NormStats& stats);
std::vector<double> inverse_target(std::span<const double> values, const NormStats& stats);

struct Split {
    TimeSeriesDataset train, val, test;
    std::size_t val_begin = 0;
    std::size_t test_begin = 0;
};

/// Contiguous train/val/test segments. train = floor(T f0), val = floor(T f1),
/// test takes the remainder. The series must hold one 48-hour window and
/// every segment at least `min_segment` rows (the pipeline passes 48).
Split chronological_split(const TimeSeriesDataset& ds, const std::array<double, 3>& fractions,
                          std::size_t min_segment = 1);

/// floor((T - 48) / stride) + 1 contiguous windows.
std::vector<WindowSample> make_windows(const TimeSeriesDataset& ds, std::size_t stride,
                                       std::size_t length = kWindowLength);

/// T x d feature matrix plus the hash of the input model that produced it.
struct FeatureSequence {
    RowMatrix values;
    std::uint64_t model_hash = 0;
};

/// Binary layout (little endian):
///   bytes 0..7   magic "SMCLFEAT"
///   bytes 8..11  uint32 format version (1)
///   bytes 12..15 uint32 reserved (0)
///   bytes 16..23 uint64 T
///   bytes 24..31 uint64 d
///   bytes 32..39 uint64 producing-model hash
///   then T*d float64, row-major
void save_features(const std::filesystem::path& path, const FeatureSequence& features);

/// Throws StaleFeatureError when `expected_hash` is given and differs.
FeatureSequence load_features(const std::filesystem::path& path, std::optional<std::uint64_t> expected_hash = {});

}  // namespace smcl::data
