#include "cxr/neuralnet.hpp"

#include <bit>

#include "cxr/byte_io.hpp"
#include "cxr/vector_store.hpp"

namespace cxr::nn {

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Linear: return "linear";
    }
    return "?";
}

Activation parse_activation(std::string_view s) {
    for (auto a : {Activation::Relu, Activation::Sigmoid, Activation::Linear})
        if (to_string(a) == s) return a;
    throw ValidationError("unknown activation '" + std::string(s) + "'");
}

std::vector<std::uint8_t> encode_checkpoint(const Network<float>& net) {
    cxr::detail::ByteWriter w;
    w.raw(kCheckpointMagic);
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(net.size()));
    w.u64(std::bit_cast<std::uint64_t>(net.dropout_rate()));
    for (const auto& l : net.layers()) {
        w.u32(static_cast<std::uint32_t>(l.in_dim()));
        w.u32(static_cast<std::uint32_t>(l.out_dim()));
        w.u8(static_cast<std::uint8_t>(l.activation));
        w.zeros(3);
        for (Eigen::Index i = 0; i < l.weights.size(); ++i) w.f32(l.weights.data()[i]);
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) w.f32(l.bias[i]);
    }
    const auto& b = w.bytes();
    w.u64(fnv1a64(std::string_view(reinterpret_cast<const char*>(b.data()), b.size())));
    return std::move(w.bytes());
}

Network<float> decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kCheckpointMagic.size() + 8)
        throw FormatError("checkpoint: truncated (" + std::to_string(bytes.size()) + " bytes)");
    {
        cxr::detail::ByteReader tail(bytes.subspan(bytes.size() - 8), "checkpoint");
        const auto stored = tail.u64();
        const auto body = bytes.first(bytes.size() - 8);
        if (fnv1a64(std::string_view(reinterpret_cast<const char*>(body.data()), body.size())) != stored)
            throw FormatError("checkpoint: checksum mismatch (file corrupt or modified)");
    }
    cxr::detail::ByteReader r(bytes.first(bytes.size() - 8), "checkpoint");
    if (r.raw(kCheckpointMagic.size()) != kCheckpointMagic) throw FormatError("checkpoint: bad magic");
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    const auto count = r.u32();
    const double dropout = std::bit_cast<double>(r.u64());
    std::vector<DenseLayer<float>> layers;
    for (std::uint32_t k = 0; k < count; ++k) {
        const std::uint32_t in = r.u32();
        const std::uint32_t out = r.u32();
        const auto act = r.u8();
        if (act > 2) throw FormatError("checkpoint: bad activation tag " + std::to_string(act));
        r.take(3);
        if (std::uint64_t{in} * out * 4 > r.remaining()) throw FormatError("checkpoint: truncated layer block");
        DenseLayer<float> l{Matrix<float>(in, out), RowVector<float>(out), static_cast<Activation>(act)};
        for (Eigen::Index i = 0; i < l.weights.size(); ++i) l.weights.data()[i] = r.f32();
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = r.f32();
        layers.push_back(std::move(l));
    }
    if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
    try {
        return Network<float>(std::move(layers), dropout);
    } catch (const Error& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Network<float>& net) {
    write_file_bytes(path, encode_checkpoint(net));
}

Network<float> load_checkpoint(const std::filesystem::path& path) {
    try {
        return decode_checkpoint(read_file_bytes(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace cxr::nn
