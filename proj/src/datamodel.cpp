#include "cxr/datamodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cxr/error.hpp"
#include "cxr/random.hpp"

namespace cxr {

std::string_view to_string(Label l) { return l == Label::Positive ? "pneumothorax" : "negative"; }

std::string_view to_string(Source s) {
    switch (s) {
        case Source::MimicCxr: return "mimic_cxr";
        case Source::CheXpert: return "chexpert";
        case Source::ChestXray14: return "chestxray14";
        case Source::Synthetic: return "synthetic";
    }
    return "?";
}

std::string_view to_string(DatasetMode m) {
    return m == DatasetMode::SemiAutomated ? "dataset1" : "dataset2";
}

std::string_view to_string(FeatureConfig c) {
    switch (c) {
        case FeatureConfig::C1: return "C1";
        case FeatureConfig::C2: return "C2";
        case FeatureConfig::C3: return "C3";
        case FeatureConfig::Encoded: return "ENCODED";
    }
    return "?";
}

Label parse_label(std::string_view s) {
    if (s == "pneumothorax") return Label::Positive;
    if (s == "negative") return Label::Negative;
    throw ValidationError("unknown label '" + std::string(s) + "' (expected pneumothorax|negative)");
}

Source parse_source(std::string_view s) {
    for (auto src : {Source::MimicCxr, Source::CheXpert, Source::ChestXray14, Source::Synthetic})
        if (to_string(src) == s) return src;
    throw ValidationError("unknown source '" + std::string(s) + "'");
}

DatasetMode parse_dataset_mode(std::string_view s) {
    if (s == "dataset1" || s == "semi" || s == "semi_automated") return DatasetMode::SemiAutomated;
    if (s == "dataset2" || s == "full" || s == "fully_automated") return DatasetMode::FullyAutomated;
    throw ValidationError("unknown dataset mode '" + std::string(s) + "'");
}

FeatureConfig parse_feature_config(std::string_view s) {
    for (auto c : {FeatureConfig::C1, FeatureConfig::C2, FeatureConfig::C3, FeatureConfig::Encoded})
        if (to_string(c) == s) return c;
    throw ValidationError("unknown feature config '" + std::string(s) + "'");
}

std::size_t block_count(FeatureConfig c) {
    switch (c) {
        case FeatureConfig::C1: return 1;
        case FeatureConfig::C2: return 2;
        case FeatureConfig::C3: return 3;
        case FeatureConfig::Encoded: return 0;
    }
    return 0;
}

ManifestCounts tally(const std::vector<ImageRecord>& records) {
    ManifestCounts c;
    for (const auto& r : records) {
        const auto l = static_cast<std::size_t>(r.label);
        (r.label == Label::Positive ? c.positive : c.negative)++;
        c.by_source[static_cast<std::size_t>(r.source)][l]++;
    }
    return c;
}

DatasetManifest::DatasetManifest(std::vector<ImageRecord> records, DatasetMode mode)
    : records_(std::move(records)), mode_(mode) {
    for (const auto& r : records_) {
        if (r.id.empty()) throw ValidationError("record with empty id");
        if (r.fold && (*r.fold < 0 || *r.fold >= kMaxFolds))
            throw ValidationError("record '" + r.id + "': fold " + std::to_string(*r.fold) +
                                  " outside [0, " + std::to_string(kMaxFolds - 1) + "]");
        if (r.label == Label::Positive && r.finding != kPneumothoraxFinding)
            throw ValidationError("record '" + r.id + "': positive record must carry the " +
                                  std::string(kPneumothoraxFinding) + " finding");
        if (r.label == Label::Negative && r.finding == kPneumothoraxFinding)
            throw ValidationError("record '" + r.id + "': negative record tagged pneumothorax");
        if (mode_ == DatasetMode::SemiAutomated && r.label == Label::Negative && !r.is_normal())
            throw ValidationError("record '" + r.id + "': finding '" + r.finding +
                                  "' not admitted in dataset1 (semi-automated) mode");
    }
    by_id_.resize(records_.size());
    for (std::size_t i = 0; i < by_id_.size(); ++i) by_id_[i] = i;
    std::sort(by_id_.begin(), by_id_.end(),
              [&](std::size_t a, std::size_t b) { return records_[a].id < records_[b].id; });
    for (std::size_t i = 1; i < by_id_.size(); ++i)
        if (records_[by_id_[i]].id == records_[by_id_[i - 1]].id)
            throw ValidationError("duplicate record id '" + records_[by_id_[i]].id + "'");
    counts_ = tally(records_);
}

const ImageRecord* DatasetManifest::find(std::string_view id) const {
    auto it = std::lower_bound(by_id_.begin(), by_id_.end(), id,
                               [&](std::size_t i, std::string_view key) { return records_[i].id < key; });
    if (it == by_id_.end() || records_[*it].id != id) return nullptr;
    return &records_[*it];
}

bool DatasetManifest::folds_assigned() const {
    return !records_.empty() &&
           std::all_of(records_.begin(), records_.end(), [](const auto& r) { return r.fold.has_value(); });
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

DatasetManifest parse_manifest(std::istream& in, DatasetMode mode) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError("empty manifest", 1);
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    bool has_finding;
    if (line == "id,path,label,source,fold")
        has_finding = false;
    else if (line == "id,path,label,source,fold,finding")
        has_finding = true;
    else
        throw ParseError("bad header '" + line + "', expected id,path,label,source,fold[,finding]", lineno);
    const std::size_t ncols = has_finding ? 6 : 5;

    std::vector<ImageRecord> records;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cols = split_csv(line);
        if (cols.size() != ncols)
            throw ParseError("expected " + std::to_string(ncols) + " columns, got " +
                                 std::to_string(cols.size()),
                             lineno);
        ImageRecord r;
        try {
            r.id = std::string(cols[0]);
            r.path = std::string(cols[1]);
            r.label = parse_label(cols[2]);
            r.source = parse_source(cols[3]);
            if (!cols[4].empty()) {
                int fold = 0;
                auto [ptr, ec] = std::from_chars(cols[4].data(), cols[4].data() + cols[4].size(), fold);
                if (ec != std::errc() || ptr != cols[4].data() + cols[4].size())
                    throw ValidationError("fold '" + std::string(cols[4]) + "' is not an integer");
                r.fold = fold;
            }
            if (has_finding && !cols[5].empty())
                r.finding = std::string(cols[5]);
            else
                r.finding = std::string(r.label == Label::Positive ? kPneumothoraxFinding : kNoFinding);
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), lineno);
        }
        if (r.id.empty()) throw ParseError("empty id", lineno);
        records.push_back(std::move(r));
    }
    return DatasetManifest(std::move(records), mode);
}

DatasetManifest load_manifest(const std::filesystem::path& path, DatasetMode mode) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest " + path.string());
    return parse_manifest(in, mode);
}

void write_manifest(std::ostream& out, const DatasetManifest& manifest) {
    out << "id,path,label,source,fold,finding\n";
    for (const auto& r : manifest.records()) {
        out << r.id << ',' << r.path << ',' << to_string(r.label) << ',' << to_string(r.source) << ',';
        if (r.fold) out << *r.fold;
        out << ',' << r.finding << '\n';
    }
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write manifest " + path.string());
    write_manifest(out, manifest);
    if (!out) throw IoError("write failed: " + path.string());
}

// Each id is hashed together with the seed, records are ordered by
// (hash, id) and dealt round-robin. The ordering depends only on the id set,
// so shuffling the input never moves a record to another fold, and fold sizes
// differ by at most one.
DatasetManifest assign_folds(const DatasetManifest& manifest, int folds, std::uint64_t seed,
                             bool allow_reassign) {
    if (folds < 2 || folds > kMaxFolds)
        throw ValidationError("folds must be in [2, " + std::to_string(kMaxFolds) + "], got " +
                              std::to_string(folds));
    if (static_cast<std::size_t>(folds) > manifest.size())
        throw ValidationError("cannot split " + std::to_string(manifest.size()) + " records into " +
                              std::to_string(folds) + " folds");
    if (!allow_reassign)
        for (const auto& r : manifest.records())
            if (r.fold) throw ValidationError("record '" + r.id + "' already has a fold assigned");

    const std::uint64_t seed_mix = mix64(seed);
    std::vector<std::pair<std::uint64_t, std::size_t>> order;
    order.reserve(manifest.size());
    const auto& recs = manifest.records();
    for (std::size_t i = 0; i < recs.size(); ++i) order.emplace_back(mix64(fnv1a64(recs[i].id) ^ seed_mix), i);
    std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return recs[a.second].id < recs[b.second].id;
    });

    std::vector<ImageRecord> out = recs;
    for (std::size_t pos = 0; pos < order.size(); ++pos)
        out[order[pos].second].fold = static_cast<int>(pos % static_cast<std::size_t>(folds));
    return DatasetManifest(std::move(out), manifest.mode());
}

DatasetManifest restrict_to_semi_automated(const DatasetManifest& manifest) {
    std::vector<ImageRecord> kept;
    for (const auto& r : manifest.records())
        if (r.label == Label::Positive || r.is_normal()) kept.push_back(r);
    return DatasetManifest(std::move(kept), DatasetMode::SemiAutomated);
}

void validate_feature_vector(const FeatureVector& v, std::size_t base_dim) {
    if (v.values.empty()) throw ValidationError("feature vector '" + v.record_id + "' is empty");
    const std::size_t expected =
        v.config == FeatureConfig::Encoded ? kEncodedDim : block_count(v.config) * base_dim;
    if (v.values.size() != expected)
        throw ValidationError("feature vector '" + v.record_id + "': dim " + std::to_string(v.values.size()) +
                              " does not match " + std::string(to_string(v.config)) + " (expected " +
                              std::to_string(expected) + ")");
    for (float x : v.values)
        if (!std::isfinite(x))
            throw ValidationError("feature vector '" + v.record_id + "' has a non-finite value");
}

}  // namespace cxr
