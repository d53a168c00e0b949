#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "smcl/data.hpp"
#include "smcl/input_model.hpp"
#include "smcl/kalman.hpp"
#include "smcl/ssm.hpp"

namespace smcl::container {

/// Binary layout (little endian):
///   bytes 0..7   magic "SMCLCKPT"
///   bytes 8..11  uint32 format version (1)
///   bytes 12..15 uint32 block count
///   uint64 metadata length, then UTF-8 JSON metadata (kind, dims, config)
///   per block: uint32 name length, name bytes, uint64 rows, uint64 cols,
///              rows*cols float64 row-major
inline constexpr std::uint32_t kVersion = 1;

struct Block {
    std::string name;
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;
};

struct Checkpoint {
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();
    std::vector<Block> blocks;

    void add(std::string name, std::size_t rows, std::size_t cols, std::span<const double> data);
    /// Throws DataError when the block is missing or has other dimensions.
    const Block& get(const std::string& name, std::size_t rows, std::size_t cols) const;
    const Block& get(const std::string& name) const;
    std::string kind() const;
};

std::string serialize(const Checkpoint& c);
Checkpoint deserialize(const std::string& bytes);

void save(const std::filesystem::path& path, const Checkpoint& c);
/// Throws DataError on bad magic, unknown version or truncation.
Checkpoint load(const std::filesystem::path& path);

Checkpoint pack(const input_model::InputModel& m);
input_model::InputModel unpack_input_model(const Checkpoint& c);

Checkpoint pack(const ssm::SsmParams& p);
ssm::SsmParams unpack_ssm(const Checkpoint& c);

Checkpoint pack(const baselines::HmmParams& p);
baselines::HmmParams unpack_hmm(const Checkpoint& c);

nlohmann::ordered_json to_json(const data::NormStats& s);
data::NormStats norm_stats_from_json(const nlohmann::ordered_json& j);

}  // namespace smcl::container
