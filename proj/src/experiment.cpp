#include "cxr/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "cxr/error.hpp"
#include "cxr/random.hpp"
#include "cxr/search.hpp"

namespace cxr {

Method Method::parse(std::string_view name) {
    if (name == "C1") return {FeatureConfig::C1, Reduction::None};
    if (name == "C2") return {FeatureConfig::C2, Reduction::None};
    if (name == "C3") return {FeatureConfig::C3, Reduction::None};
    if (name == "AUTOTHORAX") return {FeatureConfig::C3, Reduction::Autoencoder};
    if (name == "PCA") return {FeatureConfig::C3, Reduction::Pca};
    throw ValidationError("unknown method '" + std::string(name) + "' (expected C1, C2, C3, AUTOTHORAX or PCA)");
}

std::string Method::name() const {
    switch (reduction) {
        case Reduction::Autoencoder:
            return features == FeatureConfig::C3 ? "AUTOTHORAX" : "AE-" + std::string(to_string(features));
        case Reduction::Pca:
            return features == FeatureConfig::C3 ? "PCA" : "PCA-" + std::string(to_string(features));
        case Reduction::None: break;
    }
    return std::string(to_string(features));
}

std::string Method::display_name() const {
    if (reduction == Reduction::Autoencoder) return "Search via AutoThorax-Net features";
    if (reduction == Reduction::Pca) return "Search via PCA-reduced features";
    switch (features) {
        case FeatureConfig::C1: return "Search via Configuration 1";
        case FeatureConfig::C2: return "Search via Configuration 2";
        case FeatureConfig::C3: return "Search via Configuration 3";
        case FeatureConfig::Encoded: break;
    }
    return "Search via encoded features";
}

std::string ArchiveSet::fingerprint() const { return id_set_fingerprint(ids_); }

VectorStore select_features(const VectorStore& store, FeatureConfig wanted) {
    if (store.config() == wanted) return store;
    if (store.config() == FeatureConfig::C3 && (wanted == FeatureConfig::C1 || wanted == FeatureConfig::C2)) {
        const std::size_t n = store.dim() / 3;
        return wanted == FeatureConfig::C1 ? store.slice_columns(2 * n, n, wanted) : store.slice_columns(0, 2 * n, wanted);
    }
    throw ValidationError("feature store holds " + std::string(to_string(store.config())) + " vectors; cannot serve " +
                          std::string(to_string(wanted)));
}

std::vector<FoldSplit> partition_folds(const DatasetManifest& manifest, const VectorStore& features, int folds) {
    if (!manifest.folds_assigned()) throw ValidationError("partition: manifest has records without a fold");
    std::vector<std::size_t> store_order(features.size());
    for (std::size_t i = 0; i < store_order.size(); ++i) store_order[i] = i;
    std::sort(store_order.begin(), store_order.end(),
              [&](auto a, auto b) { return features.ids()[a] < features.ids()[b]; });
    auto store_row = [&](const std::string& id) {
        auto it = std::lower_bound(store_order.begin(), store_order.end(), id,
                                   [&](std::size_t r, const std::string& key) { return features.ids()[r] < key; });
        if (it == store_order.end() || features.ids()[*it] != id)
            throw LookupError("feature store has no vector for record '" + id + "'");
        return *it;
    };

    std::vector<const ImageRecord*> recs;
    for (const auto& r : manifest.records()) {
        if (*r.fold >= folds)
            throw ValidationError("record '" + r.id + "' is in fold " + std::to_string(*r.fold) + " but only " +
                                  std::to_string(folds) + " folds are requested");
        recs.push_back(&r);
    }
    std::sort(recs.begin(), recs.end(), [](auto* a, auto* b) { return a->id < b->id; });
    std::vector<std::size_t> rows;
    rows.reserve(recs.size());
    for (auto* r : recs) rows.push_back(store_row(r->id));

    std::vector<FoldSplit> out(static_cast<std::size_t>(folds));
    for (int f = 0; f < folds; ++f) {
        auto& split = out[static_cast<std::size_t>(f)];
        split.fold = f;
        split.archive.fold_ = f;
        split.validation.fold_ = f;
        std::vector<std::size_t> arch_rows, val_rows;
        for (std::size_t i = 0; i < recs.size(); ++i) {
            if (*recs[i]->fold == f) {
                split.validation.ids_.push_back(recs[i]->id);
                split.validation.labels_.push_back(recs[i]->label);
                val_rows.push_back(rows[i]);
            } else {
                split.archive.ids_.push_back(recs[i]->id);
                split.archive.labels_.push_back(recs[i]->label);
                arch_rows.push_back(rows[i]);
            }
        }
        split.archive.features_ = to_matrix(features, arch_rows);
        split.validation.features_ = to_matrix(features, val_rows);
    }
    return out;
}

std::uint64_t fold_encoder_seed(std::uint64_t seed, int fold) {
    return derive_seed(seed, 0xae00 + static_cast<std::uint64_t>(fold));
}

std::uint64_t fold_pca_seed(std::uint64_t seed, int fold) {
    return derive_seed(seed, 0x9ca0 + static_cast<std::uint64_t>(fold));
}

Encoder train_fold_encoder(const ArchiveSet& archive, const EncoderPipelineConfig& cfg, std::uint64_t seed) {
    return train_encoder_pipeline(cfg, archive.features(), archive.labels(), seed);
}

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

struct FoldOutcome {
    std::vector<FoldReport> reports;
    std::vector<FoldCurve> curves;
    std::vector<std::vector<double>> scores;  // per k, validation order
    std::vector<Label> labels;
};

FoldOutcome run_fold(const FoldSplit& split, const CvOptions& opts, FeatureConfig index_config) {
    FeatureMatrix archive = split.archive.features();
    FeatureMatrix queries = split.validation.features();
    if (opts.method.reduction != Reduction::None) {
        Reducer reduce;
        if (opts.reducer_factory) {
            reduce = opts.reducer_factory(split.archive);
        } else if (opts.method.reduction == Reduction::Autoencoder) {
            auto enc = std::make_shared<Encoder>(
                train_fold_encoder(split.archive, opts.encoder, fold_encoder_seed(opts.seed, split.fold)));
            reduce = [enc](const FeatureMatrix& x) { return enc->encode(x); };
        } else {
            PcaOptions po;
            po.seed = fold_pca_seed(opts.seed, split.fold);
            auto pca = std::make_shared<PcaModel>(pca_fit(split.archive.features(), opts.pca_components, po));
            reduce = [pca](const FeatureMatrix& x) { return pca->project(x); };
        }
        archive = reduce(archive);
        queries = reduce(queries);
        if (archive.cols() != queries.cols()) throw ShapeError("reducer produced inconsistent widths");
    }

    const auto dim = static_cast<std::size_t>(archive.cols());
    SearchIndex index(index_config, dim, split.archive.ids(), split.archive.labels(),
                      std::vector<float>(archive.data(), archive.data() + archive.size()), opts.normalize);
    const std::size_t kmax = *std::max_element(opts.k_list.begin(), opts.k_list.end());

    FoldOutcome out;
    const std::size_t nq = split.validation.ids().size();
    out.labels = split.validation.labels();
    out.scores.assign(opts.k_list.size(), std::vector<double>(nq));
    for (std::size_t q = 0; q < nq; ++q) {
        const std::span<const float> row(queries.data() + q * dim, dim);
        const auto ns = knn(index, row, kmax, split.validation.ids()[q]);
        for (std::size_t ki = 0; ki < opts.k_list.size(); ++ki)
            out.scores[ki][q] = ns.prefix(opts.k_list[ki]).likelihood;
    }

    for (std::size_t ki = 0; ki < opts.k_list.size(); ++ki) {
        RocCurve curve;
        try {
            curve = roc(out.scores[ki], out.labels);
        } catch (const ValidationError& e) {
            throw ValidationError("fold " + std::to_string(split.fold) + ": " + e.what());
        }
        const auto y = youden(curve);
        FoldReport r;
        r.fold = split.fold;
        r.k = opts.k_list[ki];
        r.threshold = y.threshold;
        r.counts = confusion(out.scores[ki], out.labels, y.threshold);
        r.sensitivity = r.counts.sensitivity();
        r.specificity = r.counts.specificity();
        r.auc = curve.auc;
        r.archive_count = split.archive.ids().size();
        r.validation_count = nq;
        out.reports.push_back(r);
        out.curves.push_back({split.fold, r.k, std::move(curve)});
    }
    return out;
}

nlohmann::ordered_json resolved_config(const DatasetManifest& manifest, const CvOptions& opts) {
    nlohmann::ordered_json j{{"dataset_mode", to_string(manifest.mode())},
                             {"method", opts.method.name()},
                             {"features", to_string(opts.method.features)},
                             {"k_list", opts.k_list},
                             {"folds", opts.folds},
                             {"seed", opts.seed},
                             {"normalize", opts.normalize}};
    if (opts.method.reduction == Reduction::Autoencoder) {
        j["encoder"] = opts.encoder;
        j["encoder_source"] = opts.reducer_factory ? "external" : "trained_per_fold";
    }
    if (opts.method.reduction == Reduction::Pca) j["pca_components"] = opts.pca_components;
    return j;
}

}  // namespace

std::vector<KSummary> ExperimentReport::recompute_summary() const {
    std::vector<KSummary> out;
    for (std::size_t k : k_list) {
        std::vector<double> sens, spec, auc;
        for (const auto& r : fold_reports)
            if (r.k == k) {
                sens.push_back(r.sensitivity);
                spec.push_back(r.specificity);
                auc.push_back(r.auc);
            }
        KSummary s;
        s.k = k;
        s.mean_sensitivity = mean_of(sens);
        s.mean_specificity = mean_of(spec);
        s.mean_auc = mean_of(auc);
        s.std_sensitivity = sample_std(sens);
        s.std_specificity = sample_std(spec);
        s.std_auc = sample_std(auc);
        out.push_back(s);
    }
    return out;
}

ExperimentReport run_cv(const DatasetManifest& manifest, const VectorStore& features, const CvOptions& opts) {
    if (opts.folds < 2 || opts.folds > kMaxFolds)
        throw ValidationError("folds must be in [2, " + std::to_string(kMaxFolds) + "]");
    if (opts.k_list.empty()) throw ValidationError("k_list is empty");
    for (auto k : opts.k_list)
        if (k == 0) throw ValidationError("k values must be positive");
    const auto& counts = manifest.counts();
    const auto need = static_cast<std::size_t>(opts.folds);
    if (counts.positive < need || counts.negative < need)
        throw ValidationError("each class needs at least " + std::to_string(need) + " records (have " +
                              std::to_string(counts.positive) + " positive, " + std::to_string(counts.negative) +
                              " negative)");
    if (opts.method.reduction == Reduction::Autoencoder && !opts.reducer_factory) opts.encoder.validate();

    const VectorStore selected = select_features(features, opts.method.features);
    const DatasetManifest assigned =
        manifest.folds_assigned() ? manifest : assign_folds(manifest, opts.folds, opts.seed);
    const auto splits = partition_folds(assigned, selected, opts.folds);
    const FeatureConfig index_config =
        opts.method.reduction == Reduction::None ? opts.method.features : FeatureConfig::Encoded;

    std::vector<FoldOutcome> outcomes(splits.size());
    std::vector<std::exception_ptr> errors(splits.size());
    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t f = first; f < splits.size(); f += stride) {
            try {
                outcomes[f] = run_fold(splits[f], opts, index_config);
            } catch (...) {
                errors[f] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::min<std::size_t>(std::max(opts.threads, 1u), splits.size());
    if (workers <= 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    ExperimentReport rep;
    rep.mode = manifest.mode();
    rep.method = opts.method;
    rep.folds = opts.folds;
    rep.seed = opts.seed;
    rep.k_list = opts.k_list;
    rep.records = manifest.size();
    rep.positives = counts.positive;
    rep.negatives = counts.negative;
    for (auto& o : outcomes) {
        rep.fold_reports.insert(rep.fold_reports.end(), o.reports.begin(), o.reports.end());
        for (auto& c : o.curves) rep.curves.push_back(std::move(c));
    }
    rep.summary = rep.recompute_summary();

    for (std::size_t ki = 0; ki < opts.k_list.size(); ++ki) {
        std::vector<double> scores;
        std::vector<Label> labels;
        for (const auto& o : outcomes) {
            scores.insert(scores.end(), o.scores[ki].begin(), o.scores[ki].end());
            labels.insert(labels.end(), o.labels.begin(), o.labels.end());
        }
        const auto curve = roc(scores, labels);
        const auto y = youden(curve);
        const auto c = confusion(scores, labels, y.threshold);
        auto& s = rep.summary[ki];
        s.pooled_auc = curve.auc;
        s.pooled_threshold = y.threshold;
        s.pooled_sensitivity = c.sensitivity();
        s.pooled_specificity = c.specificity();
    }
    rep.references = reference_rows(manifest.mode(), opts.method);
    rep.config = resolved_config(manifest, opts);
    return rep;
}

namespace {

struct PublishedRow {
    DatasetMode mode;
    const char* method;  // Method::name()
    std::size_t k;
    int sens, spec, auc;
};

// Image-search results averaged over 10 folds, in percent.
constexpr PublishedRow kPublished[] = {
    {DatasetMode::SemiAutomated, "AUTOTHORAX", 1001, 86, 84, 92},
    {DatasetMode::SemiAutomated, "AUTOTHORAX", 501, 86, 83, 92},
    {DatasetMode::SemiAutomated, "AUTOTHORAX", 251, 84, 85, 92},
    {DatasetMode::SemiAutomated, "AUTOTHORAX", 101, 85, 84, 92},
    {DatasetMode::SemiAutomated, "AUTOTHORAX", 51, 85, 84, 92},
    {DatasetMode::SemiAutomated, "AUTOTHORAX", 11, 81, 86, 90},
    {DatasetMode::SemiAutomated, "C3", 1001, 85, 74, 88},
    {DatasetMode::SemiAutomated, "C3", 501, 84, 76, 88},
    {DatasetMode::SemiAutomated, "C3", 251, 81, 79, 89},
    {DatasetMode::SemiAutomated, "C3", 101, 84, 78, 89},
    {DatasetMode::SemiAutomated, "C3", 51, 86, 77, 89},
    {DatasetMode::SemiAutomated, "C3", 11, 83, 80, 88},
    {DatasetMode::SemiAutomated, "C2", 1001, 86, 70, 87},
    {DatasetMode::SemiAutomated, "C2", 501, 85, 73, 88},
    {DatasetMode::SemiAutomated, "C2", 251, 84, 75, 88},
    {DatasetMode::SemiAutomated, "C2", 101, 84, 77, 88},
    {DatasetMode::SemiAutomated, "C2", 51, 79, 81, 88},
    {DatasetMode::SemiAutomated, "C2", 11, 80, 81, 87},
    {DatasetMode::SemiAutomated, "C1", 1001, 80, 78, 88},
    {DatasetMode::SemiAutomated, "C1", 501, 81, 78, 88},
    {DatasetMode::SemiAutomated, "C1", 251, 80, 80, 89},
    {DatasetMode::SemiAutomated, "C1", 101, 81, 80, 89},
    {DatasetMode::SemiAutomated, "C1", 51, 83, 80, 89},
    {DatasetMode::SemiAutomated, "C1", 11, 86, 76, 88},
    {DatasetMode::FullyAutomated, "AUTOTHORAX", 1001, 73, 75, 82},
    {DatasetMode::FullyAutomated, "AUTOTHORAX", 501, 73, 75, 82},
    {DatasetMode::FullyAutomated, "AUTOTHORAX", 251, 72, 75, 82},
    {DatasetMode::FullyAutomated, "AUTOTHORAX", 101, 69, 78, 81},
    {DatasetMode::FullyAutomated, "AUTOTHORAX", 51, 70, 75, 80},
    {DatasetMode::FullyAutomated, "AUTOTHORAX", 11, 72, 67, 74},
    {DatasetMode::FullyAutomated, "C3", 1001, 72, 63, 75},
    {DatasetMode::FullyAutomated, "C3", 501, 70, 67, 76},
    {DatasetMode::FullyAutomated, "C3", 251, 71, 67, 76},
    {DatasetMode::FullyAutomated, "C3", 101, 74, 65, 77},
    {DatasetMode::FullyAutomated, "C3", 51, 65, 74, 76},
    {DatasetMode::FullyAutomated, "C3", 11, 72, 65, 72},
    {DatasetMode::FullyAutomated, "C2", 1001, 67, 66, 74},
    {DatasetMode::FullyAutomated, "C2", 501, 64, 70, 75},
    {DatasetMode::FullyAutomated, "C2", 251, 74, 61, 75},
    {DatasetMode::FullyAutomated, "C2", 101, 70, 66, 75},
    {DatasetMode::FullyAutomated, "C2", 51, 73, 63, 75},
    {DatasetMode::FullyAutomated, "C2", 11, 68, 66, 70},
    {DatasetMode::FullyAutomated, "C1", 1001, 73, 61, 74},
    {DatasetMode::FullyAutomated, "C1", 501, 67, 68, 75},
    {DatasetMode::FullyAutomated, "C1", 251, 67, 69, 75},
    {DatasetMode::FullyAutomated, "C1", 101, 70, 65, 75},
    {DatasetMode::FullyAutomated, "C1", 51, 67, 68, 74},
    {DatasetMode::FullyAutomated, "C1", 11, 71, 60, 69},
    // Autoencoder vs. PCA comparison; only AUC was reported.
    {DatasetMode::FullyAutomated, "PCA", 11, -1, -1, 72},
    {DatasetMode::FullyAutomated, "PCA", 51, -1, -1, 76},
};

std::string reference_label(std::string_view method) {
    if (method == "AUTOTHORAX") return "Search via AutoThorax-Net features";
    if (method == "C3") return "Search via Configuration 3 (3072 features)";
    if (method == "C2") return "Search via Configuration 2 (2048 features)";
    if (method == "C1") return "Search via Configuration 1 (1024 features)";
    if (method == "PCA") return "Search via PCA features";
    return std::string(method);
}

}  // namespace

std::vector<ReferenceRow> reference_rows(DatasetMode mode, const Method& method) {
    std::vector<ReferenceRow> out;
    if (mode == DatasetMode::SemiAutomated)
        out.push_back({"CheXNet classifier", std::nullopt, 86, 76, 88});
    else
        out.push_back({"CheXNet classifier", std::nullopt, 72, 67, 77});
    const std::string name = method.name();
    for (const auto& r : kPublished)
        if (r.mode == mode && name == r.method) out.push_back({reference_label(r.method), r.k, r.sens, r.spec, r.auc});
    if (name == "PCA" && mode == DatasetMode::FullyAutomated) {
        out.push_back({"Autoencoder (PCA comparison)", 11, -1, -1, 74});
        out.push_back({"Autoencoder (PCA comparison)", 51, -1, -1, 80});
    }
    return out;
}

nlohmann::ordered_json to_json(const ExperimentReport& rep) {
    using json = nlohmann::ordered_json;
    json folds = json::array();
    for (const auto& r : rep.fold_reports)
        folds.push_back({{"fold", r.fold},
                         {"k", r.k},
                         {"sensitivity", r.sensitivity},
                         {"specificity", r.specificity},
                         {"auc", r.auc},
                         {"threshold", r.threshold},
                         {"tp", r.counts.tp},
                         {"fp", r.counts.fp},
                         {"tn", r.counts.tn},
                         {"fn", r.counts.fn},
                         {"archive_count", r.archive_count},
                         {"validation_count", r.validation_count}});
    json summary = json::array();
    for (const auto& s : rep.summary)
        summary.push_back({{"k", s.k},
                           {"mean_sensitivity", s.mean_sensitivity},
                           {"mean_specificity", s.mean_specificity},
                           {"mean_auc", s.mean_auc},
                           {"std_sensitivity", s.std_sensitivity},
                           {"std_specificity", s.std_specificity},
                           {"std_auc", s.std_auc},
                           {"pooled",
                            {{"auc", s.pooled_auc},
                             {"sensitivity", s.pooled_sensitivity},
                             {"specificity", s.pooled_specificity},
                             {"threshold", s.pooled_threshold}}}});
    json refs = json::array();
    for (const auto& r : rep.references) {
        json row{{"method", r.method}};
        row["k"] = r.k ? json(*r.k) : json(nullptr);
        row["sensitivity"] = r.sensitivity >= 0 ? json(r.sensitivity) : json(nullptr);
        row["specificity"] = r.specificity >= 0 ? json(r.specificity) : json(nullptr);
        row["auc"] = r.auc;
        refs.push_back(std::move(row));
    }
    return json{{"version", 1},
                {"dataset_mode", to_string(rep.mode)},
                {"method", rep.method.name()},
                {"folds", rep.folds},
                {"seed", rep.seed},
                {"k_list", rep.k_list},
                {"records", rep.records},
                {"positives", rep.positives},
                {"negatives", rep.negatives},
                {"threshold_selection", "youden_per_fold_validation"},
                {"fold_reports", std::move(folds)},
                {"summary", std::move(summary)},
                {"reference_values", std::move(refs)},
                {"config", rep.config}};
}

ExperimentReport report_from_json(const nlohmann::ordered_json& j) {
    ExperimentReport rep;
    try {
        rep.mode = parse_dataset_mode(j.at("dataset_mode").get<std::string>());
        rep.method = Method::parse(j.at("method").get<std::string>());
        rep.folds = j.at("folds").get<int>();
        rep.seed = j.at("seed").get<std::uint64_t>();
        rep.k_list = j.at("k_list").get<std::vector<std::size_t>>();
        rep.records = j.at("records").get<std::size_t>();
        rep.positives = j.at("positives").get<std::size_t>();
        rep.negatives = j.at("negatives").get<std::size_t>();
        for (const auto& f : j.at("fold_reports")) {
            FoldReport r;
            r.fold = f.at("fold").get<int>();
            r.k = f.at("k").get<std::size_t>();
            r.sensitivity = f.at("sensitivity").get<double>();
            r.specificity = f.at("specificity").get<double>();
            r.auc = f.at("auc").get<double>();
            r.threshold = f.at("threshold").get<double>();
            r.counts = {f.at("tp").get<std::size_t>(), f.at("fp").get<std::size_t>(), f.at("tn").get<std::size_t>(),
                        f.at("fn").get<std::size_t>()};
            r.archive_count = f.at("archive_count").get<std::size_t>();
            r.validation_count = f.at("validation_count").get<std::size_t>();
            rep.fold_reports.push_back(r);
        }
        for (const auto& s : j.at("summary")) {
            KSummary k;
            k.k = s.at("k").get<std::size_t>();
            k.mean_sensitivity = s.at("mean_sensitivity").get<double>();
            k.mean_specificity = s.at("mean_specificity").get<double>();
            k.mean_auc = s.at("mean_auc").get<double>();
            k.std_sensitivity = s.at("std_sensitivity").get<double>();
            k.std_specificity = s.at("std_specificity").get<double>();
            k.std_auc = s.at("std_auc").get<double>();
            const auto& p = s.at("pooled");
            k.pooled_auc = p.at("auc").get<double>();
            k.pooled_sensitivity = p.at("sensitivity").get<double>();
            k.pooled_specificity = p.at("specificity").get<double>();
            k.pooled_threshold = p.at("threshold").get<double>();
            rep.summary.push_back(k);
        }
        for (const auto& r : j.at("reference_values")) {
            ReferenceRow row;
            row.method = r.at("method").get<std::string>();
            if (!r.at("k").is_null()) row.k = r.at("k").get<std::size_t>();
            row.sensitivity = r.at("sensitivity").is_null() ? -1 : r.at("sensitivity").get<int>();
            row.specificity = r.at("specificity").is_null() ? -1 : r.at("specificity").get<int>();
            row.auc = r.at("auc").get<int>();
            rep.references.push_back(row);
        }
        rep.config = j.at("config");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("report: ") + e.what());
    }
    return rep;
}

namespace {

std::string pct(double fraction) { return std::to_string(static_cast<long>(std::lround(fraction * 100.0))); }
std::string pct_or_dash(int v) { return v < 0 ? "-" : std::to_string(v); }

std::string method_label(const ExperimentReport& rep, std::size_t k) {
    return rep.method.display_name() + " (k=" + std::to_string(k) + ")";
}

}  // namespace

std::string format_table(const ExperimentReport& rep) {
    std::vector<std::array<std::string, 4>> rows;
    rows.push_back({"Method", "Sensitivity", "Specificity", "AUC"});
    for (auto it = rep.summary.rbegin(); it != rep.summary.rend(); ++it)
        rows.push_back({method_label(rep, it->k), pct(it->mean_sensitivity), pct(it->mean_specificity), pct(it->mean_auc)});
    const std::size_t measured = rows.size();
    for (const auto& r : rep.references)
        rows.push_back({"[reference] " + r.method + (r.k ? " (k=" + std::to_string(*r.k) + ")" : ""),
                        pct_or_dash(r.sensitivity), pct_or_dash(r.specificity), std::to_string(r.auc)});

    std::array<std::size_t, 4> width{};
    for (const auto& r : rows)
        for (std::size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], r[c].size());
    std::ostringstream out;
    out << "Dataset mode: " << to_string(rep.mode) << "  Method: " << rep.method.name() << "  Folds: " << rep.folds
        << "  Records: " << rep.records << " (+" << rep.positives << " / -" << rep.negatives << ")\n";
    const std::size_t total = width[0] + width[1] + width[2] + width[3] + 9;
    const std::string rule(total, '-');
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i == 0 || i == 1 || i == measured) out << rule << '\n';
        out << std::left << std::setw(static_cast<int>(width[0])) << rows[i][0];
        for (std::size_t c = 1; c < 4; ++c) out << " | " << std::right << std::setw(static_cast<int>(width[c])) << rows[i][c];
        out << '\n';
    }
    out << rule << '\n';
    out << "Measured values are means over folds, in percent. Reference rows are published figures at full scale.\n";
    return out.str();
}

void write_roc_csv(std::ostream& out, const ExperimentReport& rep) {
    out << "fold,k,fpr,tpr,threshold\n";
    char buf[128];
    for (const auto& fc : rep.curves)
        for (const auto& p : fc.curve.points) {
            std::snprintf(buf, sizeof buf, "%d,%zu,%.17g,%.17g,%.17g\n", fc.fold, fc.k, p.fpr(), p.sensitivity,
                          p.threshold);
            out << buf;
        }
}

}  // namespace cxr
