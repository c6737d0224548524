#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cxr/datamodel.hpp"
#include "cxr/encoder.hpp"
#include "cxr/experiment.hpp"
#include "cxr/synth.hpp"

namespace cxr::cli {

inline constexpr int kConfigVersion = 1;
inline constexpr const char* kCacheEnv = "CXR_CACHE_DIR";

/// Bad flags or config file. Maps to exit code 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExtractorConfig {
    std::string kind = "baseline";  ///< "baseline" or "external"
    std::string store;              ///< external vectors (FVSTORE1), keyed by record id
    std::string id;                 ///< defaults to "baseline-pool32" / "external"
};

/// Everything a command may need. Resolution order: defaults, config file,
/// CXR_CACHE_DIR (cache_dir only), command-line flags.
struct RunConfig {
    DatasetMode mode = DatasetMode::FullyAutomated;
    std::string manifest;
    /// Base for relative image paths; empty means the manifest's directory.
    std::string image_root;
    std::string cache_dir = "cxr-cache";
    /// Explicit feature store; empty means <cache_dir>/features/<config>.fvs.
    std::string store;
    std::string method = "AUTOTHORAX";
    std::vector<FeatureConfig> features = {FeatureConfig::C1, FeatureConfig::C2, FeatureConfig::C3};
    ExtractorConfig extractor;
    /// Overrides applied on top of EncoderPipelineConfig::for_input(dim).
    nlohmann::ordered_json encoder = nlohmann::ordered_json::object();
    std::vector<std::size_t> k_list = {11, 51, 101, 251, 501, 1001};
    int folds = 10;
    std::uint64_t seed = 0;
    bool normalize = false;
    std::size_t pca_components = kEncodedDim;
    SynthParams synth;
    /// 0 writes images; otherwise Gaussian vectors of this width.
    std::size_t synth_vector_dim = 0;
    /// Worker cap. Never written to outputs: it cannot change them.
    unsigned threads = 1;

    /// Throws UsageError on unknown keys, a wrong version or bad values.
    static RunConfig from_json(const nlohmann::ordered_json& j);
    static RunConfig load(const std::filesystem::path& path);

    /// The resolved settings embedded in outputs (threads excluded).
    nlohmann::ordered_json to_json() const;

    /// Range checks shared by every command. Warns on even k.
    void validate() const;

    Method parsed_method() const;
    EncoderPipelineConfig encoder_for(std::size_t input_dim) const;

    std::filesystem::path image_base() const;
    std::filesystem::path feature_store_path(FeatureConfig config) const;
    std::filesystem::path encoder_dir() const;
    std::filesystem::path encoder_stem(int fold) const;
};

}  // namespace cxr::cli
