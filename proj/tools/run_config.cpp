#include "run_config.hpp"

#include <fstream>
#include <iostream>
#include <set>

#include "cxr/error.hpp"

namespace cxr::cli {

namespace {

using json = nlohmann::ordered_json;

template <class T>
T get_as(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw UsageError(std::string("config key '") + key + "': " + e.what());
    }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw UsageError(where + " must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw UsageError("unknown config key '" + where + key + "'");
}

template <class F>
auto as_usage(const std::string& what, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw UsageError(what + ": " + e.what());
    }
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
    check_keys(j,
               {"version", "dataset_mode", "manifest", "image_root", "cache_dir", "store", "method", "features",
                "extractor", "encoder", "k_list", "folds", "seed", "normalize", "pca_components", "synth", "threads"},
               "");
    if (!j.contains("version")) throw UsageError("config file lacks the 'version' field");
    const int version = get_as<int>(j, "version");
    if (version != kConfigVersion)
        throw UsageError("unsupported config version " + std::to_string(version) + " (expected " +
                         std::to_string(kConfigVersion) + ")");

    RunConfig c;
    if (j.contains("dataset_mode"))
        c.mode = as_usage("dataset_mode", [&] { return parse_dataset_mode(get_as<std::string>(j, "dataset_mode")); });
    if (j.contains("manifest")) c.manifest = get_as<std::string>(j, "manifest");
    if (j.contains("image_root")) c.image_root = get_as<std::string>(j, "image_root");
    if (j.contains("cache_dir")) c.cache_dir = get_as<std::string>(j, "cache_dir");
    if (j.contains("store")) c.store = get_as<std::string>(j, "store");
    if (j.contains("method")) c.method = get_as<std::string>(j, "method");
    if (j.contains("features")) {
        c.features.clear();
        for (const auto& name : get_as<std::vector<std::string>>(j, "features"))
            c.features.push_back(as_usage("features", [&] { return parse_feature_config(name); }));
    }
    if (j.contains("extractor")) {
        const auto& e = j.at("extractor");
        check_keys(e, {"kind", "store", "id"}, "extractor.");
        if (e.contains("kind")) c.extractor.kind = get_as<std::string>(e, "kind");
        if (e.contains("store")) c.extractor.store = get_as<std::string>(e, "store");
        if (e.contains("id")) c.extractor.id = get_as<std::string>(e, "id");
    }
    if (j.contains("encoder")) {
        check_keys(j.at("encoder"),
                   {"input_dim", "bottleneck", "hidden_schedule", "dropout", "epochs", "batch_size", "activation",
                    "bottleneck_activation", "learning_rate", "replication_mode"},
                   "encoder.");
        c.encoder = j.at("encoder");
    }
    if (j.contains("k_list")) c.k_list = get_as<std::vector<std::size_t>>(j, "k_list");
    if (j.contains("folds")) c.folds = get_as<int>(j, "folds");
    if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j, "seed");
    if (j.contains("normalize")) c.normalize = get_as<bool>(j, "normalize");
    if (j.contains("pca_components")) c.pca_components = get_as<std::size_t>(j, "pca_components");
    if (j.contains("threads")) c.threads = get_as<unsigned>(j, "threads");
    if (j.contains("synth")) {
        const auto& s = j.at("synth");
        check_keys(s, {"positives", "negatives", "abnormal_fraction", "separation", "seed", "image_size", "vector_dim"},
                   "synth.");
        if (s.contains("positives")) c.synth.positives = get_as<std::size_t>(s, "positives");
        if (s.contains("negatives")) c.synth.negatives = get_as<std::size_t>(s, "negatives");
        if (s.contains("abnormal_fraction")) c.synth.abnormal_fraction = get_as<double>(s, "abnormal_fraction");
        if (s.contains("separation")) c.synth.separation = get_as<double>(s, "separation");
        if (s.contains("seed")) c.synth.seed = get_as<std::uint64_t>(s, "seed");
        if (s.contains("image_size")) c.synth.image_size = get_as<std::size_t>(s, "image_size");
        if (s.contains("vector_dim")) c.synth_vector_dim = get_as<std::size_t>(s, "vector_dim");
    }
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw UsageError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

json RunConfig::to_json() const {
    json features_json = json::array();
    for (auto f : features) features_json.push_back(cxr::to_string(f));
    return json{{"version", kConfigVersion},
                {"dataset_mode", cxr::to_string(mode)},
                {"manifest", manifest},
                {"image_root", image_root},
                {"cache_dir", cache_dir},
                {"store", store},
                {"method", method},
                {"features", features_json},
                {"extractor", {{"kind", extractor.kind}, {"store", extractor.store}, {"id", extractor.id}}},
                {"encoder", encoder},
                {"k_list", k_list},
                {"folds", folds},
                {"seed", seed},
                {"normalize", normalize},
                {"pca_components", pca_components},
                {"synth",
                 {{"positives", synth.positives},
                  {"negatives", synth.negatives},
                  {"abnormal_fraction", synth.abnormal_fraction},
                  {"separation", synth.separation},
                  {"seed", synth.seed},
                  {"image_size", synth.image_size},
                  {"vector_dim", synth_vector_dim}}}};
}

void RunConfig::validate() const {
    if (folds < 2 || folds > kMaxFolds)
        throw UsageError("folds must be in [2, " + std::to_string(kMaxFolds) + "], got " + std::to_string(folds));
    if (k_list.empty()) throw UsageError("k_list is empty");
    for (auto k : k_list) {
        if (k == 0) throw UsageError("k values must be positive");
        if (k % 2 == 0) std::cerr << "warning: k=" << k << " is even; votes can tie\n";
    }
    if (extractor.kind != "baseline" && extractor.kind != "external")
        throw UsageError("extractor.kind must be 'baseline' or 'external', got '" + extractor.kind + "'");
    if (features.empty()) throw UsageError("features is empty");
    for (auto f : features)
        if (f == FeatureConfig::Encoded) throw UsageError("features may only list C1, C2 and C3");
    if (cache_dir.empty()) throw UsageError("cache_dir is empty");
    if (threads == 0) throw UsageError("threads must be at least 1");
    if (pca_components == 0) throw UsageError("pca_components must be positive");
    parsed_method();
}

Method RunConfig::parsed_method() const {
    return as_usage("method", [&] { return Method::parse(method); });
}

EncoderPipelineConfig RunConfig::encoder_for(std::size_t input_dim) const {
    json merged = EncoderPipelineConfig::for_input(input_dim);
    if (!encoder.contains("hidden_schedule")) merged.erase("hidden_schedule");
    for (const auto& [key, value] : encoder.items()) merged[key] = value;
    try {
        return merged.get<EncoderPipelineConfig>();
    } catch (const json::exception& e) {
        throw UsageError(std::string("encoder config: ") + e.what());
    } catch (const Error& e) {
        throw UsageError(std::string("encoder config: ") + e.what());
    }
}

std::filesystem::path RunConfig::image_base() const {
    if (!image_root.empty()) return image_root;
    return std::filesystem::path(manifest).parent_path();
}

std::filesystem::path RunConfig::feature_store_path(FeatureConfig config) const {
    return std::filesystem::path(cache_dir) / "features" / (std::string(cxr::to_string(config)) + ".fvs");
}

std::filesystem::path RunConfig::encoder_dir() const {
    return std::filesystem::path(cache_dir) / "encoders" / std::string(cxr::to_string(mode));
}

std::filesystem::path RunConfig::encoder_stem(int fold) const {
    return encoder_dir() / ("fold_" + std::to_string(fold));
}

}  // namespace cxr::cli
