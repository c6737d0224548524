#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cxr {

enum class Label : std::uint8_t { Negative = 0, Positive = 1 };

enum class Source : std::uint8_t { MimicCxr = 0, CheXpert = 1, ChestXray14 = 2, Synthetic = 3 };
inline constexpr std::size_t kSourceCount = 4;

/// Which records a manifest may hold.
///
/// SemiAutomated: pneumothorax vs. normal ("no finding") only.
/// FullyAutomated: pneumothorax vs. everything else.
enum class DatasetMode : std::uint8_t { SemiAutomated, FullyAutomated };

/// Feature layout of a vector: whole image (C1), left + flipped right (C2),
/// left + flipped right + whole (C3), or the 256-value encoder output.
enum class FeatureConfig : std::uint8_t { C1 = 1, C2 = 2, C3 = 3, Encoded = 4 };

inline constexpr int kMaxFolds = 10;
inline constexpr std::size_t kEncodedDim = 256;

/// Finding tag of a negative with no abnormality.
inline constexpr std::string_view kNoFinding = "no_finding";
/// Finding tag implied for every positive record.
inline constexpr std::string_view kPneumothoraxFinding = "pneumothorax";

std::string_view to_string(Label);
std::string_view to_string(Source);
std::string_view to_string(DatasetMode);
std::string_view to_string(FeatureConfig);
Label parse_label(std::string_view);
Source parse_source(std::string_view);
DatasetMode parse_dataset_mode(std::string_view);
FeatureConfig parse_feature_config(std::string_view);

/// Number of extractor-width blocks in a layout (1, 2 or 3); 0 for Encoded.
std::size_t block_count(FeatureConfig);

struct ImageRecord {
    std::string id;
    std::string path;
    Label label = Label::Negative;
    Source source = Source::Synthetic;
    std::optional<int> fold;
    /// Diagnostic tag. Positives always carry "pneumothorax"; a negative is
    /// "no_finding" when normal, otherwise the name of its other finding.
    std::string finding = std::string(kNoFinding);

    bool is_normal() const { return label == Label::Negative && finding == kNoFinding; }
    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct ManifestCounts {
    std::size_t positive = 0;
    std::size_t negative = 0;
    /// [source][label]
    std::array<std::array<std::size_t, 2>, kSourceCount> by_source{};

    std::size_t total() const { return positive + negative; }
    friend bool operator==(const ManifestCounts&, const ManifestCounts&) = default;
};

ManifestCounts tally(const std::vector<ImageRecord>& records);

/// Validated, immutable set of labeled image records.
class DatasetManifest {
public:
    DatasetManifest() = default;

    /// Throws ValidationError on duplicate ids, fold outside [0, 9], a
    /// positive without the pneumothorax finding, or (SemiAutomated) any
    /// abnormal negative.
    DatasetManifest(std::vector<ImageRecord> records, DatasetMode mode);

    const std::vector<ImageRecord>& records() const { return records_; }
    DatasetMode mode() const { return mode_; }
    const ManifestCounts& counts() const { return counts_; }
    std::size_t size() const { return records_.size(); }

    /// Record by id, nullptr when absent.
    const ImageRecord* find(std::string_view id) const;

    bool folds_assigned() const;

private:
    std::vector<ImageRecord> records_;
    DatasetMode mode_ = DatasetMode::FullyAutomated;
    ManifestCounts counts_;
    std::vector<std::size_t> by_id_;  // record indices sorted by id
};

/// CSV manifest: header `id,path,label,source,fold[,finding]`.
DatasetManifest parse_manifest(std::istream& in, DatasetMode mode = DatasetMode::FullyAutomated);
DatasetManifest load_manifest(const std::filesystem::path& path,
                              DatasetMode mode = DatasetMode::FullyAutomated);
void write_manifest(std::ostream& out, const DatasetManifest& manifest);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Deterministic balanced fold assignment; see datamodel.cpp for the scheme.
/// Throws ValidationError when folds < 2, folds > kMaxFolds, folds exceeds the
/// record count, or any record already has a fold and !allow_reassign.
DatasetManifest assign_folds(const DatasetManifest& manifest, int folds, std::uint64_t seed,
                             bool allow_reassign = false);

/// Keeps positives and normal negatives; the Dataset-1 style population.
DatasetManifest restrict_to_semi_automated(const DatasetManifest& manifest);

/// Embedding of one image.
struct FeatureVector {
    std::string record_id;
    std::vector<float> values;
    FeatureConfig config = FeatureConfig::C1;
    std::string extractor_id;

    std::size_t dim() const { return values.size(); }
    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Throws ValidationError when the vector is empty, has non-finite values, or
/// its dim does not fit its config (k * base_dim for Ck, 256 for Encoded).
void validate_feature_vector(const FeatureVector& v, std::size_t base_dim);

}  // namespace cxr
