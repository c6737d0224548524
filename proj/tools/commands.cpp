#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "cxr/imaging.hpp"
#include "cxr/random.hpp"
#include "cxr/search.hpp"
#include "cxr/vector_store.hpp"

namespace cxr::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& fn) {
    std::vector<std::exception_ptr> errors(n);
    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t i = first; i < n; i += stride) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::min<std::size_t>(std::max(threads, 1u), std::max<std::size_t>(n, 1));
    if (workers <= 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string bytes_hash(std::span<const std::uint8_t> bytes) {
    return hex64(fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size())));
}

void ensure_parent(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_text(const fs::path& path, const std::string& text) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json envelope(const char* kind, const RunConfig& cfg) {
    return json{{"version", 1}, {"kind", kind}, {"config", cfg.to_json()}};
}

void require_file(const fs::path& path, const std::string& what, const std::string& hint) {
    if (path.empty()) throw UsageError(what + " not set; " + hint);
    if (!fs::exists(path)) throw DataError("missing " + what + " " + path.string() + "; " + hint);
}

DatasetManifest load_population(const RunConfig& cfg, bool assign) {
    require_file(cfg.manifest, "manifest", "pass --manifest or set \"manifest\" in the config file");
    DatasetManifest m = load_manifest(cfg.manifest);
    if (cfg.mode == DatasetMode::SemiAutomated) m = restrict_to_semi_automated(m);
    if (assign && !m.folds_assigned()) m = assign_folds(m, cfg.folds, cfg.seed);
    return m;
}

/// The store serving `wanted`: --store, else the cached store of that
/// config, else the cached C3 store.
VectorStore load_features(const RunConfig& cfg, FeatureConfig wanted) {
    fs::path path = cfg.store;
    if (path.empty()) {
        path = cfg.feature_store_path(wanted);
        if (!fs::exists(path) && fs::exists(cfg.feature_store_path(FeatureConfig::C3)))
            path = cfg.feature_store_path(FeatureConfig::C3);
    }
    require_file(path, "feature store", "run `cxr extract` with the same cache dir, or pass --store");
    return select_features(load_store(path), wanted);
}

/// Rows of `store` for `ids`, in that order.
VectorStore subset(const VectorStore& store, const std::vector<std::string>& ids) {
    std::unordered_map<std::string_view, std::size_t> row_of;
    row_of.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) row_of.emplace(store.ids()[i], i);
    std::vector<float> data;
    data.reserve(ids.size() * store.dim());
    for (const auto& id : ids) {
        auto it = row_of.find(id);
        if (it == row_of.end()) throw LookupError("record '" + id + "' has no row in the feature store");
        auto row = store.row(it->second);
        data.insert(data.end(), row.begin(), row.end());
    }
    return VectorStore(store.config(), store.dim(), ids, std::move(data));
}

const char* retrain_hint = "rerun `cxr train-encoder` with the same config and cache dir";

Encoder load_fold_encoder(const RunConfig& cfg, const EncoderPipelineConfig& enc, int fold,
                          const std::string& fingerprint) {
    const fs::path stem = cfg.encoder_stem(fold);
    Encoder encoder;
    EncoderProvenance prov;
    try {
        std::tie(encoder, prov) = load_encoder(stem);
    } catch (const Error& e) {
        throw DataError("cannot load encoder " + stem.string() + ".ckpt: " + e.what() + "; " + retrain_hint);
    }
    std::string differs;
    if (prov.fold != fold) differs = "fold";
    else if (prov.train_fingerprint != fingerprint) differs = "training archive";
    else if (!(prov.config == enc)) differs = "encoder config";
    else if (prov.seed != fold_encoder_seed(cfg.seed, fold)) differs = "seed";
    if (!differs.empty())
        throw DataError("encoder " + stem.string() + ".ckpt does not match this run (" + differs + " differs); " +
                        retrain_hint);
    return encoder;
}

void check_encoders_present(const RunConfig& cfg) {
    std::vector<std::string> missing;
    for (int f = 0; f < cfg.folds; ++f)
        for (const char* ext : {".ckpt", ".json"}) {
            auto p = fs::path(cfg.encoder_stem(f)).concat(ext);
            if (!fs::exists(p)) missing.push_back(p.string());
        }
    if (missing.empty()) return;
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 4; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 4) list += " and " + std::to_string(missing.size() - 4) + " more";
    throw DataError("missing encoder checkpoints: " + list + "; run `cxr train-encoder` first or pass --inline-encoders");
}

}  // namespace

int cmd_ingest(const RunConfig& cfg, const IngestArgs& args) {
    if (args.out.empty()) throw UsageError("ingest needs --out");
    DatasetManifest m = load_population(cfg, true);
    if (args.check_images) {
        const fs::path base = cfg.image_base();
        std::vector<std::string> missing;
        for (const auto& r : m.records())
            if (!fs::exists(base / r.path)) missing.push_back(r.id + " (" + (base / r.path).string() + ")");
        if (!missing.empty())
            throw DataError(std::to_string(missing.size()) + " image(s) not found, first: " + missing.front() +
                            "; fix image_root or pass --skip-image-check");
    }
    save_manifest(args.out, m);
    const auto& c = m.counts();
    json by_source = json::object();
    for (std::size_t s = 0; s < kSourceCount; ++s) {
        const auto& row = c.by_source[s];
        if (row[0] + row[1] == 0) continue;
        by_source[std::string(to_string(static_cast<Source>(s)))] = {{"positive", row[1]}, {"negative", row[0]}};
    }
    json summary = envelope("manifest", cfg);
    summary["records"] = m.size();
    summary["positives"] = c.positive;
    summary["negatives"] = c.negative;
    summary["by_source"] = by_source;
    summary["id_fingerprint"] = [&] {
        std::vector<std::string> ids;
        for (const auto& r : m.records()) ids.push_back(r.id);
        return id_set_fingerprint(std::move(ids));
    }();
    write_json(args.out + ".json", summary);
    std::cout << "ingest: " << m.size() << " records (" << c.positive << " positive, " << c.negative
              << " negative), mode " << to_string(m.mode()) << " -> " << args.out << "\n";
    return 0;
}

int cmd_synth(const RunConfig& cfg, const SynthArgs& args) {
    if (args.out.empty()) throw UsageError("synth needs --out");
    try {
        cfg.synth.validate();
    } catch (const ValidationError& e) {
        throw UsageError(e.what());
    }
    const fs::path dir = args.out;
    fs::create_directories(dir);
    json meta = envelope("synthetic_set", cfg);
    if (cfg.synth_vector_dim > 0) {
        auto records = synth_records(cfg.synth);
        DatasetManifest m(records, DatasetMode::FullyAutomated);
        save_manifest(dir / "manifest.csv", m);
        const auto bytes = encode_store(synth_vectors(records, cfg.synth, cfg.synth_vector_dim));
        write_file_bytes(dir / "vectors.fvs", bytes);
        meta["records"] = m.size();
        meta["vectors"] = {{"file", "vectors.fvs"}, {"dim", cfg.synth_vector_dim}, {"fnv1a", bytes_hash(bytes)}};
    } else {
        auto m = write_synthetic_image_set(dir, cfg.synth, cfg.threads);
        meta["records"] = m.size();
    }
    write_json(dir / "synth.json", meta);
    std::cout << "synth: " << meta["records"].get<std::size_t>() << " records -> " << dir.string() << "\n";
    return 0;
}

int cmd_extract(const RunConfig& cfg) {
    require_file(cfg.manifest, "manifest", "pass --manifest or set \"manifest\" in the config file");
    const DatasetManifest m = load_manifest(cfg.manifest);
    const auto& recs = m.records();

    std::vector<std::pair<FeatureConfig, VectorStore>> stores;
    std::string extractor_id;
    if (cfg.extractor.kind == "external") {
        require_file(cfg.extractor.store, "external vector store", "set extractor.store in the config file");
        extractor_id = cfg.extractor.id.empty() ? "external" : cfg.extractor.id;
        ExternalFeatureSource source(load_store(cfg.extractor.store), extractor_id);
        for (auto f : cfg.features) {
            if (!source.can_serve(f))
                throw DataError("external vector store " + cfg.extractor.store + " cannot serve " +
                                std::string(to_string(f)));
            std::vector<FeatureVector> vectors;
            vectors.reserve(recs.size());
            for (const auto& r : recs) vectors.push_back(source.lookup(r.id, f));
            stores.emplace_back(f, VectorStore::from_vectors(vectors));
        }
    } else {
        const BaselinePoolExtractor extractor;
        extractor_id = cfg.extractor.id.empty() ? extractor.spec().extractor_id : cfg.extractor.id;
        const std::size_t dim = 3 * extractor.spec().base_dim;
        const fs::path base = cfg.image_base();
        std::vector<float> data(recs.size() * dim);
        parallel_for(recs.size(), cfg.threads, [&](std::size_t i) {
            const fs::path path = base / recs[i].path;
            try {
                auto v = extract_config(read_image(path), FeatureConfig::C3, extractor, recs[i].id);
                std::copy(v.values.begin(), v.values.end(), data.begin() + static_cast<std::ptrdiff_t>(i * dim));
            } catch (const Error& e) {
                throw DataError("record '" + recs[i].id + "' (" + path.string() + "): " + e.what());
            }
        });
        std::vector<std::string> ids;
        for (const auto& r : recs) ids.push_back(r.id);
        const VectorStore c3(FeatureConfig::C3, dim, std::move(ids), std::move(data));
        for (auto f : cfg.features) stores.emplace_back(f, select_features(c3, f));
    }

    for (const auto& [config, store] : stores) {
        const fs::path path = cfg.feature_store_path(config);
        ensure_parent(path);
        const auto bytes = encode_store(store);
        write_file_bytes(path, bytes);
        json meta = envelope("feature_store", cfg);
        meta["feature_config"] = to_string(config);
        meta["extractor_id"] = extractor_id;
        meta["count"] = store.size();
        meta["dim"] = store.dim();
        meta["fnv1a"] = bytes_hash(bytes);
        write_json(fs::path(path).concat(".json"), meta);
        std::cout << "extract: " << to_string(config) << " " << store.size() << " x " << store.dim() << " -> "
                  << path.string() << "\n";
    }
    return 0;
}

int cmd_train_encoder(const RunConfig& cfg) {
    const Method method = cfg.parsed_method();
    if (method.reduction != Reduction::Autoencoder)
        throw UsageError("train-encoder needs an autoencoder method (AUTOTHORAX), got " + cfg.method);
    const DatasetManifest m = load_population(cfg, true);
    const VectorStore features = load_features(cfg, method.features);
    const EncoderPipelineConfig enc = cfg.encoder_for(features.dim());
    try {
        enc.validate();
    } catch (const ValidationError& e) {
        throw UsageError(std::string("encoder config: ") + e.what());
    }

    // Each fold's encoder sees its archive only; validation rows are never touched.
    const auto splits = partition_folds(m, features, cfg.folds);
    std::vector<EncoderProvenance> provs(splits.size());
    parallel_for(splits.size(), cfg.threads, [&](std::size_t i) {
        const auto& archive = splits[i].archive;
        EncoderProvenance p;
        p.config = enc;
        p.seed = fold_encoder_seed(cfg.seed, archive.fold());
        p.fold = archive.fold();
        p.train_count = archive.ids().size();
        p.train_fingerprint = archive.fingerprint();
        const fs::path stem = cfg.encoder_stem(archive.fold());
        ensure_parent(stem);
        save_encoder(stem, train_fold_encoder(archive, enc, p.seed), p);
        provs[i] = load_encoder(stem).second;
        std::cerr << "train-encoder: fold " << archive.fold() << " (" << p.train_count << " archive vectors) -> "
                  << stem.string() << ".ckpt\n";
    });

    json index = envelope("encoder_set", cfg);
    index["dataset_mode"] = to_string(m.mode());
    index["encoder"] = enc;
    json folds = json::array();
    for (const auto& p : provs)
        folds.push_back({{"fold", p.fold},
                         {"checkpoint", "fold_" + std::to_string(p.fold) + ".ckpt"},
                         {"seed", p.seed},
                         {"train_count", p.train_count},
                         {"train_fingerprint", p.train_fingerprint},
                         {"checkpoint_fnv1a", p.checkpoint_fnv1a}});
    index["folds"] = folds;
    write_json(cfg.encoder_dir() / "encoders.json", index);
    std::cout << "train-encoder: " << provs.size() << " checkpoints -> " << cfg.encoder_dir().string() << "\n";
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const EvaluateArgs& args) {
    const Method method = cfg.parsed_method();
    const DatasetManifest m = load_population(cfg, true);
    const VectorStore features = load_features(cfg, method.features);

    CvOptions opts;
    opts.method = method;
    opts.k_list = cfg.k_list;
    opts.folds = cfg.folds;
    opts.seed = cfg.seed;
    opts.threads = cfg.threads;
    opts.normalize = cfg.normalize;
    opts.pca_components = cfg.pca_components;
    if (method.reduction == Reduction::Autoencoder) {
        opts.encoder = cfg.encoder_for(features.dim());
        try {
            opts.encoder.validate();
        } catch (const ValidationError& e) {
            throw UsageError(std::string("encoder config: ") + e.what());
        }
        if (!args.inline_encoders) {
            check_encoders_present(cfg);
            opts.reducer_factory = [&cfg, enc = opts.encoder](const ArchiveSet& archive) -> Reducer {
                auto encoder = std::make_shared<Encoder>(load_fold_encoder(cfg, enc, archive.fold(), archive.fingerprint()));
                return [encoder](const FeatureMatrix& x) { return encoder->encode(x); };
            };
        }
    }

    ExperimentReport rep = run_cv(m, features, opts);
    rep.config["run"] = cfg.to_json();
    if (opts.reducer_factory) rep.config["encoder_checkpoints"] = cfg.encoder_dir().string();

    const fs::path out = args.out.empty()
                             ? fs::path(cfg.cache_dir) / "reports" / std::string(to_string(cfg.mode)) / method.name()
                             : fs::path(args.out);
    fs::create_directories(out);
    write_json(out / "report.json", to_json(rep));
    const std::string table = format_table(rep);
    write_text(out / "report.txt", table + "\nconfig: " + cfg.to_json().dump() + "\n");
    std::ostringstream csv;
    write_roc_csv(csv, rep);
    write_text(out / "roc.csv", csv.str());
    std::cout << table << "report -> " << (out / "report.json").string() << "\n";
    return 0;
}

int cmd_search(const RunConfig& cfg, const SearchArgs& args) {
    const Method method = cfg.parsed_method();
    if (args.query_ids.empty() && args.query_store.empty()) throw UsageError("search needs --query or --query-store");
    if (method.reduction != Reduction::None && !args.fold)
        throw UsageError("method " + method.name() + " is fitted per fold; pass --fold");
    if (args.fold && (*args.fold < 0 || *args.fold >= cfg.folds))
        throw UsageError("--fold must be in [0, " + std::to_string(cfg.folds - 1) + "]");
    const std::size_t k = args.k.value_or(cfg.k_list.front());
    if (k == 0) throw UsageError("k must be positive");

    const DatasetManifest m = load_population(cfg, args.fold.has_value());
    const VectorStore features = load_features(cfg, method.features);

    std::vector<std::string> archive_ids;
    for (const auto& r : m.records())
        if (!args.fold || r.fold != *args.fold) archive_ids.push_back(r.id);
    std::sort(archive_ids.begin(), archive_ids.end());
    VectorStore archive = subset(features, archive_ids);

    std::vector<std::string> query_ids;
    VectorStore queries;
    if (!args.query_store.empty()) {
        require_file(args.query_store, "query store", "check --query-store");
        queries = select_features(load_store(args.query_store), method.features);
        if (queries.dim() != features.dim())
            throw DataError("query store has dim " + std::to_string(queries.dim()) + ", archive has " +
                            std::to_string(features.dim()));
    } else {
        for (const auto& id : args.query_ids)
            if (features.find(id) == features.size())
                throw LookupError("query id '" + id + "' has no row in the feature store");
        queries = subset(features, args.query_ids);
    }

    FeatureConfig index_config = method.features;
    if (method.reduction != Reduction::None) {
        const FeatureMatrix archive_x = to_matrix(archive);
        Reducer reduce;
        if (method.reduction == Reduction::Autoencoder) {
            const auto enc = cfg.encoder_for(features.dim());
            auto encoder = std::make_shared<Encoder>(load_fold_encoder(cfg, enc, *args.fold, id_set_fingerprint(archive_ids)));
            reduce = [encoder](const FeatureMatrix& x) { return encoder->encode(x); };
        } else {
            PcaOptions po;
            po.seed = fold_pca_seed(cfg.seed, *args.fold);
            auto pca = std::make_shared<PcaModel>(pca_fit(archive_x, cfg.pca_components, po));
            reduce = [pca](const FeatureMatrix& x) { return pca->project(x); };
        }
        auto as_store = [](const FeatureMatrix& x, const std::vector<std::string>& ids) {
            return VectorStore(FeatureConfig::Encoded, static_cast<std::size_t>(x.cols()), ids,
                               std::vector<float>(x.data(), x.data() + x.size()));
        };
        archive = as_store(reduce(archive_x), archive.ids());
        queries = as_store(reduce(to_matrix(queries)), queries.ids());
        index_config = FeatureConfig::Encoded;
    }

    const SearchIndex index = build_index(
        VectorStore(index_config, archive.dim(), archive.ids(), {archive.data().begin(), archive.data().end()}), m,
        cfg.normalize);
    KnnOptions ko;
    ko.threads = cfg.threads;
    ko.exclude_self = !args.include_self;

    json results = json::array();
    for (std::size_t q = 0; q < queries.size(); ++q) {
        results.push_back(to_json(knn(index, queries.row(q), k, queries.ids()[q], ko)));
    }
    json out = envelope("search", cfg);
    out["fold"] = args.fold ? json(*args.fold) : json(nullptr);
    out["archive_count"] = index.size();
    out["results"] = std::move(results);
    if (args.out.empty()) {
        std::cout << out.dump(2) << "\n";
    } else {
        write_json(args.out, out);
        std::cout << "search: " << queries.size() << " queries, k=" << k << " -> " << args.out << "\n";
    }
    return 0;
}

int cmd_report(const ReportArgs& args) {
    if (args.inputs.empty()) throw UsageError("report needs at least one --input");
    if (args.format != "table" && args.format != "json" && args.format != "csv")
        throw UsageError("--format must be table, json or csv");
    std::vector<ExperimentReport> reports;
    for (const auto& path : args.inputs) {
        require_file(path, "report", "run `cxr evaluate` first");
        std::ifstream in(path);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw DataError(path + " is not valid JSON: " + e.what());
        }
        ExperimentReport rep;
        try {
            rep = report_from_json(j);
        } catch (const json::exception& e) {
            throw DataError(path + ": " + e.what());
        }
        const auto again = rep.recompute_summary();
        for (std::size_t i = 0; i < again.size(); ++i) {
            const auto& a = again[i];
            const auto& b = rep.summary.at(i);
            if (std::abs(a.mean_sensitivity - b.mean_sensitivity) > 1e-12 ||
                std::abs(a.mean_specificity - b.mean_specificity) > 1e-12 || std::abs(a.mean_auc - b.mean_auc) > 1e-12)
                throw DataError(path + ": summary for k=" + std::to_string(a.k) + " does not match its fold reports");
        }
        reports.push_back(std::move(rep));
    }

    std::ostringstream text;
    if (args.format == "table") {
        for (std::size_t i = 0; i < reports.size(); ++i) {
            const auto& r = reports[i];
            if (i) text << "\n";
            text << r.method.display_name() << ", " << to_string(r.mode) << ", " << r.records << " records ("
                 << r.positives << " positive), " << r.folds << " folds\n";
            text << format_table(r);
        }
    } else if (args.format == "csv") {
        text << "method,dataset_mode,k,mean_sensitivity,mean_specificity,mean_auc,std_sensitivity,std_specificity,"
                "std_auc,pooled_auc\n";
        char buf[64];
        auto num = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.6f", v);
            return std::string(buf);
        };
        for (const auto& r : reports)
            for (const auto& s : r.summary)
                text << r.method.name() << ',' << to_string(r.mode) << ',' << s.k << ',' << num(s.mean_sensitivity)
                     << ',' << num(s.mean_specificity) << ',' << num(s.mean_auc) << ',' << num(s.std_sensitivity)
                     << ',' << num(s.std_specificity) << ',' << num(s.std_auc) << ',' << num(s.pooled_auc) << "\n";
    } else {
        json all = json::array();
        for (const auto& r : reports) all.push_back(to_json(r));
        text << json{{"version", 1}, {"kind", "report_bundle"}, {"reports", all}}.dump(2) << "\n";
    }
    if (args.out.empty()) std::cout << text.str();
    else write_text(args.out, text.str());
    return 0;
}

}  // namespace cxr::cli
