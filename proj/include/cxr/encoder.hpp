#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cxr/datamodel.hpp"
#include "cxr/neuralnet.hpp"
#include "cxr/vector_store.hpp"

namespace cxr {

using FeatureMatrix = nn::Matrix<float>;

/// Rows of a store as a float matrix (copy).
FeatureMatrix to_matrix(const VectorStore& store);
FeatureMatrix to_matrix(const VectorStore& store, std::span<const std::size_t> rows);

struct EncoderPipelineConfig {
    std::size_t input_dim = 3072;
    std::size_t bottleneck = kEncodedDim;
    /// Widths between input and bottleneck, strictly decreasing.
    std::vector<std::size_t> hidden_schedule = {1024, 512};
    double dropout = 0.2;
    int epochs = 10;
    std::size_t batch_size = 128;
    /// Hidden layers of encoder and decoder.
    nn::Activation activation = nn::Activation::Relu;
    /// The 256-wide layer. A RELU bottleneck tends to die under the BCE
    /// fine-tuning step.
    nn::Activation bottleneck_activation = nn::Activation::Linear;
    double learning_rate = 1e-3;
    /// Enforces input_dim in {1024, 2048, 3072}, bottleneck == 256 and a
    /// completed fine-tuning step before stripping.
    bool replication_mode = true;

    /// [512] for 1024 inputs, [1024, 512] for 2048 and 3072.
    static std::vector<std::size_t> default_schedule(std::size_t input_dim);
    static EncoderPipelineConfig for_input(std::size_t input_dim);

    /// Throws ValidationError on any violated constraint.
    void validate() const;
    double compression_factor() const { return static_cast<double>(input_dim) / static_cast<double>(bottleneck); }

    friend bool operator==(const EncoderPipelineConfig&, const EncoderPipelineConfig&) = default;
};

void to_json(nlohmann::ordered_json& j, const EncoderPipelineConfig& cfg);
void from_json(const nlohmann::ordered_json& j, EncoderPipelineConfig& cfg);

/// Encoder + mirrored decoder; the first `encoder_layers` layers end at the
/// bottleneck.
struct AutoencoderModel {
    EncoderPipelineConfig config;
    nn::Network<float> network;
    std::size_t encoder_layers = 0;
    bool trained = false;
    std::vector<double> loss_history;
};

/// Encoder layers followed by a single sigmoid unit.
struct FineTunedModel {
    EncoderPipelineConfig config;
    nn::Network<float> network;
    std::size_t encoder_layers = 0;
    std::vector<double> loss_history;

    /// Head probability p per row.
    std::vector<float> predict_probability(const FeatureMatrix& x) const;
};

/// Deployed encoder: input_dim -> bottleneck, deterministic.
class Encoder {
public:
    Encoder() = default;
    explicit Encoder(nn::Network<float> network);

    const nn::Network<float>& network() const { return network_; }
    std::size_t input_dim() const { return network_.in_dim(); }
    std::size_t output_dim() const { return network_.out_dim(); }

    FeatureMatrix encode(const FeatureMatrix& x) const;
    std::vector<float> encode(std::span<const float> x) const;
    /// Encodes every row; the result is tagged ENCODED.
    VectorStore encode(const VectorStore& store) const;

private:
    nn::Network<float> network_;
};

AutoencoderModel build_autoencoder(const EncoderPipelineConfig& cfg, std::uint64_t seed);

/// Step 1: reconstruct the input under MSE.
AutoencoderModel train_step1_unsupervised(AutoencoderModel model, const FeatureMatrix& vectors, std::uint64_t seed);

/// Step 2: drop the decoder, attach a 1-unit sigmoid head after the
/// bottleneck and train encoder + head under BCE with the step-1 settings.
FineTunedModel train_step2_finetune(const AutoencoderModel& model, const FeatureMatrix& vectors,
                                    std::span<const Label> labels, std::uint64_t seed);

Encoder strip_to_encoder(const FineTunedModel& model);
/// Step-1-only encoder for ablations; rejected in replication mode.
Encoder strip_to_encoder(const AutoencoderModel& model);

/// Whole pipeline: build, step 1, step 2, strip.
Encoder train_encoder_pipeline(const EncoderPipelineConfig& cfg, const FeatureMatrix& vectors,
                               std::span<const Label> labels, std::uint64_t seed);

/// Sidecar written next to every encoder checkpoint.
struct EncoderProvenance {
    EncoderPipelineConfig config;
    std::uint64_t seed = 0;
    int fold = -1;
    std::string stage = "finetuned";
    std::size_t train_count = 0;
    std::string train_fingerprint;  ///< hash of the sorted training ids
    std::string checkpoint_fnv1a;

    friend bool operator==(const EncoderProvenance&, const EncoderProvenance&) = default;
};

void to_json(nlohmann::ordered_json& j, const EncoderProvenance& p);
void from_json(const nlohmann::ordered_json& j, EncoderProvenance& p);

/// Hex FNV-1a over the ids in sorted order, newline separated.
std::string id_set_fingerprint(std::vector<std::string> ids);

/// Writes <stem>.ckpt and <stem>.json. The sidecar's checkpoint hash is
/// filled in here.
void save_encoder(const std::filesystem::path& stem, const Encoder& encoder, EncoderProvenance provenance);
/// Loads <stem>.ckpt, checks its hash against <stem>.json.
std::pair<Encoder, EncoderProvenance> load_encoder(const std::filesystem::path& stem);

/// Principal axes of a sample, columns ordered by decreasing variance.
struct PcaModel {
    Eigen::RowVectorXd mean;
    Eigen::MatrixXd components;  ///< input_dim x k, orthonormal columns
    Eigen::VectorXd variances;   ///< eigenvalues of the sample covariance

    std::size_t input_dim() const { return static_cast<std::size_t>(components.rows()); }
    std::size_t k() const { return static_cast<std::size_t>(components.cols()); }

    std::vector<float> project(std::span<const float> x) const;
    FeatureMatrix project(const FeatureMatrix& x) const;
    FeatureMatrix reconstruct(const FeatureMatrix& projected) const;
};

struct PcaOptions {
    std::size_t max_samples = 20000;  ///< larger inputs are subsampled
    std::uint64_t seed = 0;
};

/// Covariance eigendecomposition. When samples < dims the (smaller) Gram
/// matrix is decomposed instead. k is truncated to samples - 1 when the data
/// cannot support more components. Each component's largest-magnitude entry
/// is made positive. Throws ValidationError when k > input_dim or k == 0.
PcaModel pca_fit(const FeatureMatrix& vectors, std::size_t k = kEncodedDim, const PcaOptions& opts = {});

}  // namespace cxr
