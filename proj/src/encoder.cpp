#include "cxr/encoder.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "cxr/error.hpp"
#include "cxr/random.hpp"

namespace cxr {

FeatureMatrix to_matrix(const VectorStore& store) {
    FeatureMatrix m(static_cast<Eigen::Index>(store.size()), static_cast<Eigen::Index>(store.dim()));
    std::copy(store.data().begin(), store.data().end(), m.data());
    return m;
}

FeatureMatrix to_matrix(const VectorStore& store, std::span<const std::size_t> rows) {
    FeatureMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(store.dim()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        auto src = store.row(rows[r]);
        std::copy(src.begin(), src.end(), m.data() + r * store.dim());
    }
    return m;
}

std::vector<std::size_t> EncoderPipelineConfig::default_schedule(std::size_t input_dim) {
    if (input_dim <= 1024) return {512};
    return {1024, 512};
}

EncoderPipelineConfig EncoderPipelineConfig::for_input(std::size_t input_dim) {
    EncoderPipelineConfig cfg;
    cfg.input_dim = input_dim;
    cfg.hidden_schedule = default_schedule(input_dim);
    return cfg;
}

void EncoderPipelineConfig::validate() const {
    if (replication_mode) {
        if (input_dim != 1024 && input_dim != 2048 && input_dim != 3072)
            throw ValidationError("encoder input_dim must be 1024, 2048 or 3072 in replication mode, got " +
                                  std::to_string(input_dim));
        if (bottleneck != kEncodedDim)
            throw ValidationError("encoder bottleneck must be " + std::to_string(kEncodedDim) +
                                  " in replication mode, got " + std::to_string(bottleneck));
    }
    if (input_dim == 0 || bottleneck == 0) throw ValidationError("encoder dimensions must be positive");
    if (bottleneck > input_dim) throw ValidationError("encoder bottleneck wider than its input");
    std::size_t prev = input_dim;
    for (auto w : hidden_schedule) {
        if (w >= prev || w <= bottleneck)
            throw ValidationError("hidden schedule must decrease strictly from input_dim toward the bottleneck");
        prev = w;
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("encoder dropout must be in [0, 1)");
    if (epochs < 0) throw ValidationError("encoder epochs must be non-negative");
    if (batch_size == 0) throw ValidationError("encoder batch size must be positive");
    if (!(learning_rate > 0.0)) throw ValidationError("encoder learning rate must be positive");
}

void to_json(nlohmann::ordered_json& j, const EncoderPipelineConfig& c) {
    j = nlohmann::ordered_json{{"input_dim", c.input_dim},
                               {"bottleneck", c.bottleneck},
                               {"hidden_schedule", c.hidden_schedule},
                               {"dropout", c.dropout},
                               {"epochs", c.epochs},
                               {"batch_size", c.batch_size},
                               {"activation", nn::to_string(c.activation)},
                               {"bottleneck_activation", nn::to_string(c.bottleneck_activation)},
                               {"learning_rate", c.learning_rate},
                               {"replication_mode", c.replication_mode}};
}

void from_json(const nlohmann::ordered_json& j, EncoderPipelineConfig& c) {
    EncoderPipelineConfig d;
    c.input_dim = j.value("input_dim", d.input_dim);
    c.bottleneck = j.value("bottleneck", d.bottleneck);
    c.hidden_schedule = j.contains("hidden_schedule") ? j.at("hidden_schedule").get<std::vector<std::size_t>>()
                                                      : EncoderPipelineConfig::default_schedule(c.input_dim);
    c.dropout = j.value("dropout", d.dropout);
    c.epochs = j.value("epochs", d.epochs);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.activation = nn::parse_activation(j.value("activation", std::string(nn::to_string(d.activation))));
    c.bottleneck_activation = nn::parse_activation(
        j.value("bottleneck_activation", std::string(nn::to_string(d.bottleneck_activation))));
    c.learning_rate = j.value("learning_rate", d.learning_rate);
    c.replication_mode = j.value("replication_mode", d.replication_mode);
}

std::vector<float> FineTunedModel::predict_probability(const FeatureMatrix& x) const {
    const FeatureMatrix p = nn::predict(network, x);
    return {p.data(), p.data() + p.size()};
}

Encoder::Encoder(nn::Network<float> network) : network_(std::move(network)) {}

FeatureMatrix Encoder::encode(const FeatureMatrix& x) const {
    if (network_.size() == 0) throw ValidationError("encode: empty encoder");
    return nn::predict(network_, x);
}

std::vector<float> Encoder::encode(std::span<const float> x) const {
    FeatureMatrix m(1, static_cast<Eigen::Index>(x.size()));
    std::copy(x.begin(), x.end(), m.data());
    const FeatureMatrix out = encode(m);
    return {out.data(), out.data() + out.size()};
}

VectorStore Encoder::encode(const VectorStore& store) const {
    const FeatureMatrix out = encode(to_matrix(store));
    return VectorStore(FeatureConfig::Encoded, output_dim(), store.ids(),
                       std::vector<float>(out.data(), out.data() + out.size()));
}

AutoencoderModel build_autoencoder(const EncoderPipelineConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::vector<std::size_t> dims{cfg.input_dim};
    dims.insert(dims.end(), cfg.hidden_schedule.begin(), cfg.hidden_schedule.end());
    dims.push_back(cfg.bottleneck);
    dims.insert(dims.end(), cfg.hidden_schedule.rbegin(), cfg.hidden_schedule.rend());
    dims.push_back(cfg.input_dim);
    std::vector<nn::Activation> acts(dims.size() - 1, cfg.activation);
    acts[cfg.hidden_schedule.size()] = cfg.bottleneck_activation;
    acts.back() = nn::Activation::Linear;
    AutoencoderModel m;
    m.config = cfg;
    m.network = nn::make_network<float>(dims, acts, cfg.dropout, seed);
    m.encoder_layers = cfg.hidden_schedule.size() + 1;
    return m;
}

namespace {

void check_input(const EncoderPipelineConfig& cfg, const FeatureMatrix& vectors) {
    if (static_cast<std::size_t>(vectors.cols()) != cfg.input_dim)
        throw ShapeError("encoder training: vectors have dim " + std::to_string(vectors.cols()) + ", expected " +
                         std::to_string(cfg.input_dim));
}

nn::TrainOptions train_options(const EncoderPipelineConfig& cfg, nn::LossKind loss, std::uint64_t seed) {
    nn::TrainOptions o;
    o.epochs = cfg.epochs;
    o.batch_size = cfg.batch_size;
    o.loss = loss;
    o.seed = seed;
    o.adam_alpha = cfg.learning_rate;
    return o;
}

}  // namespace

AutoencoderModel train_step1_unsupervised(AutoencoderModel model, const FeatureMatrix& vectors, std::uint64_t seed) {
    check_input(model.config, vectors);
    auto result = nn::train(model.network, vectors, vectors, train_options(model.config, nn::LossKind::Mse, seed));
    model.loss_history = std::move(result.loss_history);
    model.trained = true;
    return model;
}

FineTunedModel train_step2_finetune(const AutoencoderModel& model, const FeatureMatrix& vectors,
                                    std::span<const Label> labels, std::uint64_t seed) {
    check_input(model.config, vectors);
    if (static_cast<std::size_t>(vectors.rows()) != labels.size())
        throw ShapeError("fine-tuning: " + std::to_string(vectors.rows()) + " vectors but " +
                         std::to_string(labels.size()) + " labels");
    if (model.config.replication_mode && !model.trained)
        throw ValidationError("fine-tuning requires a step-1 trained autoencoder");

    std::vector<nn::DenseLayer<float>> layers(model.network.layers().begin(),
                                              model.network.layers().begin() +
                                                  static_cast<std::ptrdiff_t>(model.encoder_layers));
    Rng rng(derive_seed(seed, 0x4ead));
    layers.push_back(nn::make_layer<float>(model.config.bottleneck, 1, nn::Activation::Sigmoid, rng));
    // The bottleneck is unbounded, so a random head can start deep in the
    // flat part of the sigmoid where BCE has no gradient. Start it at p = 0.5.
    layers.back().weights.setZero();

    FineTunedModel ft;
    ft.config = model.config;
    ft.encoder_layers = model.encoder_layers;
    ft.network = nn::Network<float>(std::move(layers), model.config.dropout);

    FeatureMatrix targets(vectors.rows(), 1);
    for (std::size_t i = 0; i < labels.size(); ++i)
        targets(static_cast<Eigen::Index>(i), 0) = labels[i] == Label::Positive ? 1.0f : 0.0f;
    auto result = nn::train(ft.network, vectors, targets, train_options(model.config, nn::LossKind::Bce, seed));
    ft.loss_history = std::move(result.loss_history);
    return ft;
}

Encoder strip_to_encoder(const FineTunedModel& model) {
    std::vector<nn::DenseLayer<float>> layers(model.network.layers().begin(),
                                              model.network.layers().begin() +
                                                  static_cast<std::ptrdiff_t>(model.encoder_layers));
    return Encoder(nn::Network<float>(std::move(layers), model.config.dropout));
}

Encoder strip_to_encoder(const AutoencoderModel& model) {
    if (model.config.replication_mode)
        throw ValidationError("stripping a step-1 autoencoder needs replication_mode off; fine-tune first");
    std::vector<nn::DenseLayer<float>> layers(model.network.layers().begin(),
                                              model.network.layers().begin() +
                                                  static_cast<std::ptrdiff_t>(model.encoder_layers));
    return Encoder(nn::Network<float>(std::move(layers), model.config.dropout));
}

Encoder train_encoder_pipeline(const EncoderPipelineConfig& cfg, const FeatureMatrix& vectors,
                               std::span<const Label> labels, std::uint64_t seed) {
    auto ae = train_step1_unsupervised(build_autoencoder(cfg, derive_seed(seed, 1)), vectors, derive_seed(seed, 2));
    auto ft = train_step2_finetune(ae, vectors, labels, derive_seed(seed, 3));
    return strip_to_encoder(ft);
}

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

std::string id_set_fingerprint(std::vector<std::string> ids) {
    std::sort(ids.begin(), ids.end());
    std::uint64_t h = fnv1a64("");
    for (const auto& id : ids) {
        h = fnv1a64(id, h);
        h = fnv1a64("\n", h);
    }
    return hex64(h);
}

void to_json(nlohmann::ordered_json& j, const EncoderProvenance& p) {
    j = nlohmann::ordered_json{{"version", 1},
                               {"config", p.config},
                               {"seed", p.seed},
                               {"fold", p.fold},
                               {"stage", p.stage},
                               {"train_count", p.train_count},
                               {"train_fingerprint", p.train_fingerprint},
                               {"checkpoint_fnv1a", p.checkpoint_fnv1a}};
}

void from_json(const nlohmann::ordered_json& j, EncoderProvenance& p) {
    p.config = j.at("config").get<EncoderPipelineConfig>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.fold = j.at("fold").get<int>();
    p.stage = j.at("stage").get<std::string>();
    p.train_count = j.at("train_count").get<std::size_t>();
    p.train_fingerprint = j.at("train_fingerprint").get<std::string>();
    p.checkpoint_fnv1a = j.at("checkpoint_fnv1a").get<std::string>();
}

void save_encoder(const std::filesystem::path& stem, const Encoder& encoder, EncoderProvenance provenance) {
    const auto bytes = nn::encode_checkpoint(encoder.network());
    provenance.checkpoint_fnv1a =
        hex64(fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size())));
    write_file_bytes(std::filesystem::path(stem).concat(".ckpt"), bytes);
    std::ofstream out(std::filesystem::path(stem).concat(".json"), std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write encoder sidecar for " + stem.string());
    out << nlohmann::ordered_json(provenance).dump(2) << '\n';
}

std::pair<Encoder, EncoderProvenance> load_encoder(const std::filesystem::path& stem) {
    const auto ckpt = std::filesystem::path(stem).concat(".ckpt");
    const auto side = std::filesystem::path(stem).concat(".json");
    std::ifstream in(side, std::ios::binary);
    if (!in) throw IoError("missing encoder sidecar " + side.string());
    EncoderProvenance prov;
    try {
        prov = nlohmann::ordered_json::parse(in).get<EncoderProvenance>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(side.string() + ": " + e.what());
    }
    const auto bytes = read_file_bytes(ckpt);
    if (hex64(fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()))) !=
        prov.checkpoint_fnv1a)
        throw FormatError(ckpt.string() + ": checksum does not match sidecar");
    Encoder enc;
    try {
        enc = Encoder(nn::decode_checkpoint(bytes));
    } catch (const FormatError& e) {
        throw FormatError(ckpt.string() + ": " + e.what());
    }
    return {std::move(enc), std::move(prov)};
}

std::vector<float> PcaModel::project(std::span<const float> x) const {
    if (x.size() != input_dim()) throw ShapeError("pca project: dim mismatch");
    Eigen::RowVectorXd v(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) v[static_cast<Eigen::Index>(i)] = x[i];
    const Eigen::RowVectorXd p = (v - mean) * components;
    std::vector<float> out(k());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(p[static_cast<Eigen::Index>(i)]);
    return out;
}

FeatureMatrix PcaModel::project(const FeatureMatrix& x) const {
    if (static_cast<std::size_t>(x.cols()) != input_dim()) throw ShapeError("pca project: dim mismatch");
    Eigen::MatrixXd centered = x.cast<double>();
    centered.rowwise() -= mean;
    return (centered * components).cast<float>();
}

FeatureMatrix PcaModel::reconstruct(const FeatureMatrix& projected) const {
    if (static_cast<std::size_t>(projected.cols()) != k()) throw ShapeError("pca reconstruct: dim mismatch");
    Eigen::MatrixXd out = projected.cast<double>() * components.transpose();
    out.rowwise() += mean;
    return out.cast<float>();
}

PcaModel pca_fit(const FeatureMatrix& vectors, std::size_t k, const PcaOptions& opts) {
    const auto dim = static_cast<std::size_t>(vectors.cols());
    if (k == 0) throw ValidationError("pca: k must be positive");
    if (k > dim) throw ValidationError("pca: k=" + std::to_string(k) + " exceeds input dim " + std::to_string(dim));
    if (vectors.rows() < 2) throw ValidationError("pca: need at least two samples");

    Eigen::MatrixXd x;
    if (static_cast<std::size_t>(vectors.rows()) > opts.max_samples) {
        std::vector<Eigen::Index> rows(static_cast<std::size_t>(vectors.rows()));
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<Eigen::Index>(i);
        Rng rng(opts.seed);
        rng.shuffle(std::span(rows));
        rows.resize(opts.max_samples);
        std::sort(rows.begin(), rows.end());
        x.resize(static_cast<Eigen::Index>(rows.size()), vectors.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            x.row(static_cast<Eigen::Index>(i)) = vectors.row(rows[i]).cast<double>();
    } else {
        x = vectors.cast<double>();
    }
    const auto n = static_cast<std::size_t>(x.rows());
    PcaModel model;
    model.mean = x.colwise().mean();
    x.rowwise() -= model.mean;
    const double denom = static_cast<double>(n - 1);
    const std::size_t keep = std::min(k, n - 1);

    model.components.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(keep));
    model.variances.resize(static_cast<Eigen::Index>(keep));
    if (n >= dim) {
        const Eigen::MatrixXd cov = (x.transpose() * x) / denom;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        if (eig.info() != Eigen::Success) throw Error("pca: eigendecomposition failed");
        for (std::size_t c = 0; c < keep; ++c) {
            const auto src = static_cast<Eigen::Index>(dim - 1 - c);
            model.components.col(static_cast<Eigen::Index>(c)) = eig.eigenvectors().col(src);
            model.variances[static_cast<Eigen::Index>(c)] = std::max(eig.eigenvalues()[src], 0.0);
        }
    } else {
        // Gram trick: if G u = l u with G = X X^T / (n-1), then X^T u is an
        // eigenvector of the covariance with the same eigenvalue.
        const Eigen::MatrixXd gram = (x * x.transpose()) / denom;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        if (eig.info() != Eigen::Success) throw Error("pca: eigendecomposition failed");
        const double top = std::max(eig.eigenvalues()[static_cast<Eigen::Index>(n - 1)], 0.0);
        std::size_t filled = 0;
        for (; filled < keep; ++filled) {
            const auto src = static_cast<Eigen::Index>(n - 1 - filled);
            const double lambda = eig.eigenvalues()[src];
            if (!(lambda > 1e-10 * top)) break;
            Eigen::VectorXd v = x.transpose() * eig.eigenvectors().col(src);
            model.components.col(static_cast<Eigen::Index>(filled)) = v / v.norm();
            model.variances[static_cast<Eigen::Index>(filled)] = lambda;
        }
        // Null directions of a rank-deficient sample: complete the basis
        // with Gram-Schmidt over the standard axes.
        for (std::size_t axis = 0; filled < keep && axis < dim; ++axis) {
            Eigen::VectorXd v = Eigen::VectorXd::Unit(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(axis));
            const auto done = model.components.leftCols(static_cast<Eigen::Index>(filled));
            for (int pass = 0; pass < 2; ++pass) v -= done * (done.transpose() * v);
            if (v.norm() < 0.5) continue;
            model.components.col(static_cast<Eigen::Index>(filled)) = v.normalized();
            model.variances[static_cast<Eigen::Index>(filled)] = 0.0;
            ++filled;
        }
    }
    for (Eigen::Index c = 0; c < model.components.cols(); ++c) {
        Eigen::Index arg = 0;
        model.components.col(c).cwiseAbs().maxCoeff(&arg);
        if (model.components(arg, c) < 0.0) model.components.col(c) *= -1.0;
    }
    return model;
}

}  // namespace cxr
