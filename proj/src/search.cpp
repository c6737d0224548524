#include "cxr/search.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "cxr/error.hpp"

namespace cxr {

void l2_normalize(std::span<float> v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    if (s <= 0.0) return;
    const double inv = 1.0 / std::sqrt(s);
    for (float& x : v) x = static_cast<float>(x * inv);
}

SearchIndex::SearchIndex(FeatureConfig config, std::size_t dim, std::vector<std::string> ids,
                         std::vector<Label> labels, std::vector<float> data, bool normalize)
    : config_(config), dim_(dim), normalize_(normalize) {
    if (labels.size() != ids.size() || data.size() != ids.size() * dim)
        throw ShapeError("search index: ids, labels and rows are not aligned");
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ids[a] < ids[b]; });
    ids_.reserve(ids.size());
    labels_.reserve(ids.size());
    data_.resize(data.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
        const std::size_t src = order[r];
        if (r > 0 && ids[src] == ids_.back()) throw ValidationError("search index: duplicate id '" + ids[src] + "'");
        ids_.push_back(std::move(ids[src]));
        labels_.push_back(labels[src]);
        std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(src * dim), dim,
                    data_.begin() + static_cast<std::ptrdiff_t>(r * dim));
        if (normalize_) l2_normalize(std::span(data_).subspan(r * dim, dim));
    }
    for (float x : data_)
        if (!std::isfinite(x)) throw ValidationError("search index: non-finite feature value");
}

std::size_t SearchIndex::find(std::string_view id) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    return it != ids_.end() && *it == id ? static_cast<std::size_t>(it - ids_.begin()) : size();
}

SearchIndex build_index(const VectorStore& store, const DatasetManifest& manifest, bool normalize) {
    std::vector<Label> labels;
    labels.reserve(store.size());
    for (const auto& id : store.ids()) {
        const auto* rec = manifest.find(id);
        if (!rec) throw LookupError("no manifest record (label) for store id '" + id + "'");
        labels.push_back(rec->label);
    }
    return SearchIndex(store.config(), store.dim(), store.ids(), std::move(labels),
                       std::vector<float>(store.data().begin(), store.data().end()), normalize);
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d * d;
    }
    return s;
}

namespace {

struct Candidate {
    double d2;
    std::size_t row;
    bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && row < o.row); }
};

// Four rows at a time: each row keeps its own sequential accumulation, the
// interleaving only hides the add latency.
void scan_block(const SearchIndex& index, std::span<const float> q, std::size_t begin, std::size_t end,
                std::size_t skip_row, std::size_t k, std::vector<Candidate>& out) {
    const std::size_t dim = index.dim();
    const float* base = index.data().data();
    std::vector<Candidate> local;
    local.reserve(end - begin);
    std::size_t r = begin;
    for (; r + 4 <= end; r += 4) {
        const float* p0 = base + r * dim;
        const float* p1 = p0 + dim;
        const float* p2 = p1 + dim;
        const float* p3 = p2 + dim;
        double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double qi = q[i];
            const double d0 = qi - p0[i], d1 = qi - p1[i], d2 = qi - p2[i], d3 = qi - p3[i];
            s0 += d0 * d0;
            s1 += d1 * d1;
            s2 += d2 * d2;
            s3 += d3 * d3;
        }
        const double s[4] = {s0, s1, s2, s3};
        for (std::size_t j = 0; j < 4; ++j)
            if (r + j != skip_row) local.push_back({s[j], r + j});
    }
    for (; r < end; ++r)
        if (r != skip_row) local.push_back({squared_distance(q, index.row(r)), r});
    const std::size_t keep = std::min(k, local.size());
    std::partial_sort(local.begin(), local.begin() + static_cast<std::ptrdiff_t>(keep), local.end());
    local.resize(keep);
    out = std::move(local);
}

}  // namespace

NeighborSet NeighborSet::prefix(std::size_t k2) const {
    if (k2 == 0 || k2 > k) throw ValidationError("prefix: k must be in [1, " + std::to_string(k) + "]");
    NeighborSet out;
    out.query_id = query_id;
    out.k = k2;
    out.hits.assign(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(std::min(k2, hits.size())));
    out.vote_m = static_cast<std::size_t>(
        std::count_if(out.hits.begin(), out.hits.end(), [](const Hit& h) { return h.label == Label::Positive; }));
    out.truncated = out.hits.size() < k2;
    out.likelihood = vote(out);
    return out;
}

NeighborSet knn(const SearchIndex& index, std::span<const float> query, std::size_t k, std::string_view query_id,
                const KnnOptions& opts) {
    if (index.size() == 0) throw ValidationError("knn: empty index");
    if (query.size() != index.dim())
        throw ShapeError("knn: query dim " + std::to_string(query.size()) + " != index dim " +
                         std::to_string(index.dim()));
    if (k == 0) throw ValidationError("knn: k must be at least 1");

    std::vector<float> normalized;
    if (index.normalized()) {
        normalized.assign(query.begin(), query.end());
        l2_normalize(normalized);
        query = normalized;
    }
    const std::size_t skip = opts.exclude_self && !query_id.empty() ? index.find(query_id) : index.size();

    const std::size_t block = std::max<std::size_t>(opts.block_rows, 1);
    const std::size_t nblocks = (index.size() + block - 1) / block;
    std::vector<std::vector<Candidate>> partial(nblocks);
    auto run = [&](std::size_t first, std::size_t stride) {
        for (std::size_t b = first; b < nblocks; b += stride)
            scan_block(index, query, b * block, std::min(index.size(), (b + 1) * block), skip, k, partial[b]);
    };
    const std::size_t workers = std::min<std::size_t>(std::max(opts.threads, 1u), nblocks);
    if (workers <= 1) {
        run(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
    }

    std::vector<Candidate> merged;
    for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
    const std::size_t keep = std::min(k, merged.size());
    std::partial_sort(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(keep), merged.end());

    NeighborSet ns;
    ns.query_id = std::string(query_id);
    ns.k = k;
    ns.hits.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
        const auto& c = merged[i];
        ns.hits.push_back({index.ids()[c.row], std::sqrt(c.d2), index.labels()[c.row]});
        if (index.labels()[c.row] == Label::Positive) ++ns.vote_m;
    }
    ns.truncated = keep < k;
    ns.likelihood = ns.hits.empty() ? 0.0 : vote(ns);
    return ns;
}

std::vector<NeighborSet> knn_batch(const SearchIndex& index, const VectorStore& queries, std::size_t k,
                                   unsigned threads, bool exclude_self) {
    std::vector<NeighborSet> out(queries.size());
    KnnOptions opts;
    opts.exclude_self = exclude_self;
    auto run = [&](std::size_t first, std::size_t stride) {
        for (std::size_t q = first; q < queries.size(); q += stride)
            out[q] = knn(index, queries.row(q), k, queries.ids()[q], opts);
    };
    const std::size_t workers = std::min<std::size_t>(std::max(threads, 1u), std::max<std::size_t>(queries.size(), 1));
    if (workers <= 1) {
        run(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
    }
    return out;
}

double vote(const NeighborSet& ns) {
    if (ns.hits.empty()) throw ValidationError("vote: empty neighbour set");
    const std::size_t m = static_cast<std::size_t>(
        std::count_if(ns.hits.begin(), ns.hits.end(), [](const Hit& h) { return h.label == Label::Positive; }));
    const std::size_t denom = ns.hits.size() < ns.k ? ns.hits.size() : ns.k;
    return static_cast<double>(m) / static_cast<double>(denom);
}

Label classify(double likelihood, double threshold) {
    return likelihood >= threshold ? Label::Positive : Label::Negative;
}

nlohmann::ordered_json to_json(const NeighborSet& ns) {
    auto hits = nlohmann::ordered_json::array();
    for (const auto& h : ns.hits)
        hits.push_back({{"id", h.id}, {"distance", h.distance}, {"label", to_string(h.label)}});
    nlohmann::ordered_json j{{"query_id", ns.query_id}, {"k", ns.k}, {"hits", std::move(hits)},
                             {"likelihood", ns.likelihood}};
    if (ns.truncated) j["truncated"] = true;
    return j;
}

}  // namespace cxr
