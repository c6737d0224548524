#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cxr/datamodel.hpp"
#include "cxr/encoder.hpp"
#include "cxr/eval.hpp"
#include "cxr/vector_store.hpp"

namespace cxr {

enum class Reduction : std::uint8_t { None, Autoencoder, Pca };

/// A searchable representation: raw C1/C2/C3 features, optionally reduced.
struct Method {
    FeatureConfig features = FeatureConfig::C3;
    Reduction reduction = Reduction::None;

    /// "C1", "C2", "C3", "AUTOTHORAX" (C3 + autoencoder), "PCA" (C3 + PCA).
    static Method parse(std::string_view name);
    std::string name() const;
    std::string display_name() const;

    friend bool operator==(const Method&, const Method&) = default;
};

struct FoldSplit;
std::vector<FoldSplit> partition_folds(const DatasetManifest& manifest, const VectorStore& features, int folds);

/// Archive side of one fold. Only partition_folds() can create one, and it
/// never contains a validation record of the same fold.
class ArchiveSet {
public:
    int fold() const { return fold_; }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<Label>& labels() const { return labels_; }
    const FeatureMatrix& features() const { return features_; }
    /// id_set_fingerprint(ids()).
    std::string fingerprint() const;

private:
    friend struct FoldSplit;
    friend std::vector<FoldSplit> partition_folds(const DatasetManifest&, const VectorStore&, int);
    ArchiveSet() = default;
    int fold_ = 0;
    std::vector<std::string> ids_;
    std::vector<Label> labels_;
    FeatureMatrix features_;
};

/// Query side of one fold.
class ValidationSet {
public:
    int fold() const { return fold_; }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<Label>& labels() const { return labels_; }
    const FeatureMatrix& features() const { return features_; }

private:
    friend struct FoldSplit;
    friend std::vector<FoldSplit> partition_folds(const DatasetManifest&, const VectorStore&, int);
    ValidationSet() = default;
    int fold_ = 0;
    std::vector<std::string> ids_;
    std::vector<Label> labels_;
    FeatureMatrix features_;
};

struct FoldSplit {
    int fold = 0;
    ArchiveSet archive;
    ValidationSet validation;
};

/// Splits manifest records (rows looked up in `features`) by their assigned
/// fold. Rows inside each set are ordered by id. Throws when folds are
/// unassigned or out of range, or a record has no feature row.
std::vector<FoldSplit> partition_folds(const DatasetManifest& manifest, const VectorStore& features, int folds);

/// Maps feature rows to the searched representation.
using Reducer = std::function<FeatureMatrix(const FeatureMatrix&)>;
/// Builds a reducer for one fold. Receives archive data only.
using ReducerFactory = std::function<Reducer(const ArchiveSet&)>;

/// Trains the two-step encoder pipeline on the archive with a per-fold seed.
Encoder train_fold_encoder(const ArchiveSet& archive, const EncoderPipelineConfig& cfg, std::uint64_t seed);
/// Seed used for fold `fold` by the default encoder factory.
std::uint64_t fold_encoder_seed(std::uint64_t seed, int fold);
/// Seed of the PCA subsample for fold `fold`.
std::uint64_t fold_pca_seed(std::uint64_t seed, int fold);

struct CvOptions {
    Method method;
    std::vector<std::size_t> k_list = {11, 51, 101, 251, 501, 1001};
    int folds = 10;
    std::uint64_t seed = 0;
    /// Folds evaluated concurrently. Never changes the report.
    unsigned threads = 1;
    bool normalize = false;
    EncoderPipelineConfig encoder = EncoderPipelineConfig::for_input(3072);
    std::size_t pca_components = kEncodedDim;
    /// Overrides the default per-fold encoder/PCA training (e.g. to load
    /// checkpoints). Ignored for Reduction::None.
    ReducerFactory reducer_factory;
};

struct FoldReport {
    int fold = 0;
    std::size_t k = 0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double auc = 0.0;
    double threshold = 0.0;
    Confusion counts;
    std::size_t archive_count = 0;
    std::size_t validation_count = 0;
};

struct KSummary {
    std::size_t k = 0;
    double mean_sensitivity = 0.0, mean_specificity = 0.0, mean_auc = 0.0;
    double std_sensitivity = 0.0, std_specificity = 0.0, std_auc = 0.0;  ///< sample (n-1) deviation
    /// Single ROC over all validation likelihoods of all folds.
    double pooled_auc = 0.0, pooled_sensitivity = 0.0, pooled_specificity = 0.0, pooled_threshold = 0.0;
};

/// Published figure kept for side-by-side display. Percentages.
struct ReferenceRow {
    std::string method;
    std::optional<std::size_t> k;
    int sensitivity = 0;  ///< -1 when not reported
    int specificity = 0;
    int auc = 0;
};

struct FoldCurve {
    int fold = 0;
    std::size_t k = 0;
    RocCurve curve;
};

struct ExperimentReport {
    DatasetMode mode = DatasetMode::FullyAutomated;
    Method method;
    int folds = 0;
    std::uint64_t seed = 0;
    std::vector<std::size_t> k_list;
    std::size_t records = 0, positives = 0, negatives = 0;
    std::vector<FoldReport> fold_reports;  ///< fold-major, then k_list order
    std::vector<KSummary> summary;         ///< k_list order
    std::vector<ReferenceRow> references;
    std::vector<FoldCurve> curves;         ///< not serialised to JSON
    nlohmann::ordered_json config;         ///< resolved inputs; never includes thread counts

    /// Recomputes the per-k means from fold_reports.
    std::vector<KSummary> recompute_summary() const;
};

/// Full 10-fold style experiment: per fold, build the archive, (optionally)
/// fit the reducer on the archive, query each validation vector, score it
/// by vote likelihood for every k, choose the Youden threshold on that
/// fold's ROC and record sensitivity/specificity/AUC.
///
/// Assigns folds with assign_folds(seed) when the manifest has none.
/// Throws ValidationError when a class has fewer than `folds` records or a
/// validation fold lacks one of the classes.
ExperimentReport run_cv(const DatasetManifest& manifest, const VectorStore& features, const CvOptions& opts);

/// Table rows for a mode/method pair plus the classifier baseline row.
std::vector<ReferenceRow> reference_rows(DatasetMode mode, const Method& method);

nlohmann::ordered_json to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::ordered_json& j);
/// Aligned text table: Method, Sensitivity, Specificity, AUC (integer %).
std::string format_table(const ExperimentReport& report);
/// fold,k,fpr,tpr,threshold
void write_roc_csv(std::ostream& out, const ExperimentReport& report);

/// Drops columns of a C3 (or matching) store to serve a C1/C2/C3 method.
VectorStore select_features(const VectorStore& store, FeatureConfig wanted);

}  // namespace cxr
