#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace cxr;
using namespace cxr::cli;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

/// Raw flag values; only the ones present on the command line override the
/// config file.
struct Flags {
    std::string config, cache_dir, manifest, image_root, store, method, dataset_mode;
    std::vector<std::string> features;
    std::vector<std::size_t> k_list;
    int folds = 0;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    bool normalize = false;
    std::size_t pca_components = 0;
    std::string extractor, extractor_store;
    int epochs = 0;
    std::size_t positives = 0, negatives = 0, image_size = 0, vector_dim = 0;
    double separation = 0.0, abnormal_fraction = 0.0;
};

enum Opt : unsigned {
    kManifest = 1u << 0,
    kMode = 1u << 1,
    kFolds = 1u << 2,
    kMethod = 1u << 3,
    kStore = 1u << 4,
    kKList = 1u << 5,
    kPca = 1u << 6,
};

void add_common(CLI::App* sub, Flags& f, unsigned which) {
    sub->add_option("-c,--config", f.config, "JSON config file (must carry \"version\": 1)");
    sub->add_option("--cache-dir", f.cache_dir, "Cache directory (overrides CXR_CACHE_DIR)");
    sub->add_option("--threads", f.threads, "Worker cap; never changes results")->check(CLI::PositiveNumber);
    sub->add_option("--seed", f.seed, "Seed for fold assignment and training");
    if (which & kManifest) {
        sub->add_option("-m,--manifest", f.manifest, "Manifest CSV");
        sub->add_option("--image-root", f.image_root, "Base for relative image paths");
    }
    if (which & kMode)
        sub->add_option("--dataset-mode", f.dataset_mode, "dataset1 (pneumothorax vs normal) or dataset2 (vs all)")
            ->check(CLI::IsMember({"dataset1", "dataset2"}));
    if (which & kFolds) sub->add_option("--folds", f.folds, "Cross-validation folds");
    if (which & kMethod)
        sub->add_option("--method", f.method, "C1, C2, C3, AUTOTHORAX or PCA")
            ->check(CLI::IsMember({"C1", "C2", "C3", "AUTOTHORAX", "PCA"}));
    if (which & kStore) sub->add_option("--store", f.store, "Feature store to use instead of the cached one");
    if (which & kKList) sub->add_option("--k-list", f.k_list, "Neighbour counts")->delimiter(',');
    if (which & kPca) sub->add_option("--pca-components", f.pca_components, "PCA width");
}

bool given(const CLI::App* sub, const char* name) {
    const auto* opt = sub->get_option_no_throw(name);
    return opt && opt->count() > 0;
}

RunConfig resolve(const CLI::App* sub, const Flags& f) {
    RunConfig cfg = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
    if (const char* env = std::getenv(kCacheEnv); env && *env) cfg.cache_dir = env;
    if (given(sub, "--cache-dir")) cfg.cache_dir = f.cache_dir;
    if (given(sub, "--threads")) cfg.threads = f.threads;
    if (given(sub, "--seed")) cfg.seed = f.seed;
    if (given(sub, "--manifest")) cfg.manifest = f.manifest;
    if (given(sub, "--image-root")) cfg.image_root = f.image_root;
    if (given(sub, "--dataset-mode")) cfg.mode = parse_dataset_mode(f.dataset_mode);
    if (given(sub, "--folds")) cfg.folds = f.folds;
    if (given(sub, "--method")) cfg.method = f.method;
    if (given(sub, "--store")) cfg.store = f.store;
    if (given(sub, "--k-list")) cfg.k_list = f.k_list;
    if (given(sub, "--pca-components")) cfg.pca_components = f.pca_components;
    if (given(sub, "--normalize")) cfg.normalize = f.normalize;
    if (given(sub, "--features")) {
        cfg.features.clear();
        for (const auto& name : f.features) cfg.features.push_back(parse_feature_config(name));
    }
    if (given(sub, "--extractor")) cfg.extractor.kind = f.extractor;
    if (given(sub, "--external-store")) {
        cfg.extractor.kind = "external";
        cfg.extractor.store = f.extractor_store;
    }
    if (given(sub, "--epochs")) cfg.encoder["epochs"] = f.epochs;
    if (given(sub, "--positives")) cfg.synth.positives = f.positives;
    if (given(sub, "--negatives")) cfg.synth.negatives = f.negatives;
    if (given(sub, "--separation")) cfg.synth.separation = f.separation;
    if (given(sub, "--abnormal-fraction")) cfg.synth.abnormal_fraction = f.abnormal_fraction;
    if (given(sub, "--image-size")) cfg.synth.image_size = f.image_size;
    if (given(sub, "--vector-dim")) cfg.synth_vector_dim = f.vector_dim;
    // synth takes its seed from --seed as well.
    if (given(sub, "--seed") && sub->get_name() == "synth") cfg.synth.seed = f.seed;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Content-based chest X-ray retrieval used as a pneumothorax classifier."};
    app.require_subcommand(1);
    app.set_version_flag("--version", "cxr 0.1.0");
    Flags f;

    auto* ingest = app.add_subcommand("ingest", "Validate a manifest, apply the dataset mode, assign folds");
    add_common(ingest, f, kManifest | kMode | kFolds);
    IngestArgs ingest_args;
    ingest->add_option("-o,--out", ingest_args.out, "Output manifest CSV")->required();
    bool skip_images = false;
    ingest->add_flag("--skip-image-check", skip_images, "Do not require image files to exist");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic two-class dataset");
    add_common(synth, f, 0);
    SynthArgs synth_args;
    synth->add_option("-o,--out", synth_args.out, "Output directory")->required();
    synth->add_option("--positives", f.positives, "Pneumothorax records");
    synth->add_option("--negatives", f.negatives, "Negative records");
    synth->add_option("--separation", f.separation, "Class signal strength (0 = identical classes)");
    synth->add_option("--abnormal-fraction", f.abnormal_fraction, "Share of negatives with another finding");
    synth->add_option("--image-size", f.image_size, "Image width and height");
    synth->add_option("--vector-dim", f.vector_dim, "Write Gaussian vectors of this width instead of images");

    auto* extract = app.add_subcommand("extract", "Compute C1/C2/C3 feature stores into the cache");
    add_common(extract, f, kManifest);
    extract->add_option("--features", f.features, "Configurations to write")
        ->delimiter(',')
        ->check(CLI::IsMember({"C1", "C2", "C3"}));
    extract->add_option("--extractor", f.extractor, "baseline or external")
        ->check(CLI::IsMember({"baseline", "external"}));
    extract->add_option("--external-store", f.extractor_store, "Precomputed vectors keyed by record id");

    auto* train = app.add_subcommand("train-encoder", "Train one encoder per fold on that fold's archive");
    add_common(train, f, kManifest | kMode | kFolds | kMethod | kStore);
    train->add_option("--epochs", f.epochs, "Epochs for both training steps")->check(CLI::PositiveNumber);

    auto* search = app.add_subcommand("search", "Nearest archive images for query records or vectors");
    add_common(search, f, kManifest | kMode | kFolds | kMethod | kStore | kKList | kPca);
    SearchArgs search_args;
    search->add_option("-q,--query", search_args.query_ids, "Query record id (repeatable)");
    search->add_option("--query-store", search_args.query_store, "Store of query vectors");
    search->add_option("--fold", search_args.fold, "Search the archive of this fold (required for AUTOTHORAX/PCA)");
    search->add_option("--k", search_args.k, "Neighbours to return (default: first of k_list)");
    search->add_flag("--normalize", f.normalize, "L2-normalise vectors before matching");
    search->add_flag("--include-self", search_args.include_self, "Keep an archive row whose id equals the query id");
    search->add_option("-o,--out", search_args.out, "Write JSON here instead of stdout");

    auto* evaluate = app.add_subcommand("evaluate", "Cross-validated search-as-classifier experiment");
    add_common(evaluate, f, kManifest | kMode | kFolds | kMethod | kStore | kKList | kPca);
    EvaluateArgs eval_args;
    evaluate->add_flag("--normalize", f.normalize, "L2-normalise vectors before matching");
    evaluate->add_flag("--inline-encoders", eval_args.inline_encoders,
                       "Train fold encoders in-process instead of loading checkpoints");
    evaluate->add_option("--epochs", f.epochs, "Epochs for inline encoder training")->check(CLI::PositiveNumber);
    evaluate->add_option("-o,--out", eval_args.out, "Report directory");

    auto* report = app.add_subcommand("report", "Render saved evaluation reports");
    ReportArgs report_args;
    report->add_option("-i,--input", report_args.inputs, "report.json (repeatable)")->required();
    report->add_option("--format", report_args.format, "table, json or csv")
        ->check(CLI::IsMember({"table", "json", "csv"}));
    report->add_option("-o,--out", report_args.out, "Write here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*report) return cmd_report(report_args);
        const CLI::App* sub = app.get_subcommands().front();
        const RunConfig cfg = resolve(sub, f);
        if (*ingest) {
            ingest_args.check_images = !skip_images;
            return cmd_ingest(cfg, ingest_args);
        }
        if (*synth) return cmd_synth(cfg, synth_args);
        if (*extract) return cmd_extract(cfg);
        if (*train) return cmd_train_encoder(cfg);
        if (*search) return cmd_search(cfg, search_args);
        if (*evaluate) return cmd_evaluate(cfg, eval_args);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
