#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cxr/datamodel.hpp"

namespace cxr {

/// On-disk layout (all integers little-endian):
///
///   offset  size  field
///        0     8  magic "FVSTORE1"
///        8     4  u32 version (1)
///       12     4  u32 count
///       16     4  u32 dim
///       20     1  u8  config tag (FeatureConfig value)
///       21     3  zero padding
///       24     8  u64 byte length of the id table
///       32        count*dim IEEE-754 binary32, row-major
///                 id table: one id per row, each terminated by '\n'
inline constexpr std::string_view kStoreMagic = "FVSTORE1";
inline constexpr std::uint32_t kStoreVersion = 1;
inline constexpr std::size_t kStoreHeaderBytes = 32;

/// Dense in-memory image of a store file.
class VectorStore {
public:
    VectorStore() = default;
    VectorStore(FeatureConfig config, std::size_t dim, std::vector<std::string> ids, std::vector<float> data);

    /// All vectors must share dim and config. Throws ShapeError otherwise.
    static VectorStore from_vectors(const std::vector<FeatureVector>& vectors);

    FeatureConfig config() const { return config_; }
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    std::span<const float> data() const { return data_; }
    std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

    /// Row index of an id, or size() when absent. Linear scan.
    std::size_t find(std::string_view id) const;

    std::vector<FeatureVector> to_vectors(std::string_view extractor_id = {}) const;

    /// Columns [first, first + count) of every row, tagged with `config`.
    VectorStore slice_columns(std::size_t first, std::size_t count, FeatureConfig config) const;

    friend bool operator==(const VectorStore&, const VectorStore&) = default;

private:
    FeatureConfig config_ = FeatureConfig::C1;
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<float> data_;
};

std::vector<std::uint8_t> encode_store(const VectorStore& store);
/// Throws FormatError on bad magic/version/config tag, truncation, trailing
/// bytes, or an id table that does not hold exactly `count` ids.
VectorStore decode_store(std::span<const std::uint8_t> bytes);

void save_store(const std::filesystem::path& path, const VectorStore& store);
VectorStore load_store(const std::filesystem::path& path);

/// Convenience wrappers over FeatureVector lists. The store has no field for
/// the extractor id, so read_store stamps every vector with `extractor_id`.
void write_store(const std::vector<FeatureVector>& vectors, const std::filesystem::path& path);
std::vector<FeatureVector> read_store(const std::filesystem::path& path, std::string_view extractor_id = {});

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace cxr
