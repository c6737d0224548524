#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cxr/datamodel.hpp"
#include "cxr/vector_store.hpp"

namespace cxr {

/// Immutable archive for exhaustive Euclidean search. Rows are kept in
/// ascending id order, so row order doubles as the id tie-break.
class SearchIndex {
public:
    SearchIndex() = default;
    /// Rows are reordered by id. Throws on duplicate ids or shape mismatch.
    SearchIndex(FeatureConfig config, std::size_t dim, std::vector<std::string> ids, std::vector<Label> labels,
                std::vector<float> data, bool normalize = false);

    FeatureConfig config() const { return config_; }
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    bool normalized() const { return normalize_; }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<Label>& labels() const { return labels_; }
    std::span<const float> data() const { return data_; }
    std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

    /// Row of an id (binary search), or size() when absent.
    std::size_t find(std::string_view id) const;

    friend bool operator==(const SearchIndex&, const SearchIndex&) = default;

private:
    FeatureConfig config_ = FeatureConfig::C1;
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<Label> labels_;
    std::vector<float> data_;
    bool normalize_ = false;
};

/// Labels come from the manifest; throws LookupError naming the first store
/// id the manifest lacks.
SearchIndex build_index(const VectorStore& store, const DatasetManifest& manifest, bool normalize = false);

/// Scales a vector to unit L2 norm (zero vectors are left alone).
void l2_normalize(std::span<float> v);

struct Hit {
    std::string id;
    double distance = 0.0;
    Label label = Label::Negative;

    friend bool operator==(const Hit&, const Hit&) = default;
};

struct NeighborSet {
    std::string query_id;
    std::size_t k = 0;     ///< requested neighbours
    std::vector<Hit> hits; ///< (distance, id) ascending, min(k, archive) entries
    std::size_t vote_m = 0;
    double likelihood = 0.0;
    bool truncated = false;  ///< archive held fewer than k candidates

    /// The first `k` hits as an independent result (k <= this->k).
    NeighborSet prefix(std::size_t k) const;

    friend bool operator==(const NeighborSet&, const NeighborSet&) = default;
};

struct KnnOptions {
    /// Workers scanning the archive for one query. Results do not depend on it.
    unsigned threads = 1;
    std::size_t block_rows = 2048;
    /// Drop the archive row whose id equals the query id.
    bool exclude_self = true;
};

/// Exact top-k by Euclidean distance, ties broken by ascending id.
/// Squared distances are accumulated in double, sequentially over dims.
NeighborSet knn(const SearchIndex& index, std::span<const float> query, std::size_t k,
                std::string_view query_id = {}, const KnnOptions& opts = {});

/// One result per query row; parallel over queries.
std::vector<NeighborSet> knn_batch(const SearchIndex& index, const VectorStore& queries, std::size_t k,
                                   unsigned threads = 1, bool exclude_self = true);

/// m / k for the requested k, or m / |hits| when the archive was smaller.
double vote(const NeighborSet& neighbors);

/// Positive iff likelihood >= threshold.
Label classify(double likelihood, double threshold);

/// Squared Euclidean distance, double accumulation in index order.
double squared_distance(std::span<const float> a, std::span<const float> b);

nlohmann::ordered_json to_json(const NeighborSet& ns);

}  // namespace cxr
