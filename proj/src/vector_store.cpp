#include "cxr/vector_store.hpp"

#include <fstream>
#include <iterator>
#include <limits>

#include "cxr/byte_io.hpp"
#include "cxr/error.hpp"

namespace cxr {

VectorStore::VectorStore(FeatureConfig config, std::size_t dim, std::vector<std::string> ids,
                         std::vector<float> data)
    : config_(config), dim_(dim), ids_(std::move(ids)), data_(std::move(data)) {
    if (data_.size() != ids_.size() * dim_)
        throw ShapeError("vector store: " + std::to_string(data_.size()) + " values for " +
                         std::to_string(ids_.size()) + " ids of dim " + std::to_string(dim_));
    for (const auto& id : ids_)
        if (id.empty() || id.find('\n') != std::string::npos)
            throw ValidationError("vector store: ids must be non-empty and free of newlines");
}

VectorStore VectorStore::from_vectors(const std::vector<FeatureVector>& vectors) {
    if (vectors.empty()) return VectorStore(FeatureConfig::C1, 0, {}, {});
    const std::size_t dim = vectors.front().dim();
    const FeatureConfig config = vectors.front().config;
    std::vector<std::string> ids;
    std::vector<float> data;
    ids.reserve(vectors.size());
    data.reserve(vectors.size() * dim);
    for (const auto& v : vectors) {
        if (v.dim() != dim)
            throw ShapeError("vector store: '" + v.record_id + "' has dim " + std::to_string(v.dim()) +
                             ", expected " + std::to_string(dim));
        if (v.config != config) throw ShapeError("vector store: mixed feature configs");
        ids.push_back(v.record_id);
        data.insert(data.end(), v.values.begin(), v.values.end());
    }
    return VectorStore(config, dim, std::move(ids), std::move(data));
}

std::size_t VectorStore::find(std::string_view id) const {
    for (std::size_t i = 0; i < ids_.size(); ++i)
        if (ids_[i] == id) return i;
    return ids_.size();
}

std::vector<FeatureVector> VectorStore::to_vectors(std::string_view extractor_id) const {
    std::vector<FeatureVector> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
        auto r = row(i);
        out.push_back({ids_[i], std::vector<float>(r.begin(), r.end()), config_, std::string(extractor_id)});
    }
    return out;
}

VectorStore VectorStore::slice_columns(std::size_t first, std::size_t count, FeatureConfig config) const {
    if (first + count > dim_)
        throw ShapeError("slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
                         ") exceeds dim " + std::to_string(dim_));
    std::vector<float> data;
    data.reserve(size() * count);
    for (std::size_t i = 0; i < size(); ++i) {
        auto r = row(i).subspan(first, count);
        data.insert(data.end(), r.begin(), r.end());
    }
    return VectorStore(config, count, ids_, std::move(data));
}

std::vector<std::uint8_t> encode_store(const VectorStore& store) {
    constexpr auto u32max = std::numeric_limits<std::uint32_t>::max();
    if (store.size() > u32max || store.dim() > u32max) throw FormatError("vector store too large");
    std::size_t id_bytes = 0;
    for (const auto& id : store.ids()) id_bytes += id.size() + 1;

    detail::ByteWriter w;
    w.bytes().reserve(kStoreHeaderBytes + store.data().size() * 4 + id_bytes);
    w.raw(kStoreMagic);
    w.u32(kStoreVersion);
    w.u32(static_cast<std::uint32_t>(store.size()));
    w.u32(static_cast<std::uint32_t>(store.dim()));
    w.u8(static_cast<std::uint8_t>(store.config()));
    w.zeros(3);
    w.u64(id_bytes);
    for (float x : store.data()) w.f32(x);
    for (const auto& id : store.ids()) {
        w.raw(id);
        w.u8('\n');
    }
    return std::move(w.bytes());
}

VectorStore decode_store(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes, "vector store");
    if (r.raw(kStoreMagic.size()) != kStoreMagic) throw FormatError("vector store: bad magic");
    const auto version = r.u32();
    if (version != kStoreVersion)
        throw FormatError("vector store: unsupported version " + std::to_string(version));
    const std::size_t count = r.u32();
    const std::size_t dim = r.u32();
    const auto tag = r.u8();
    if (tag < 1 || tag > 4) throw FormatError("vector store: bad config tag " + std::to_string(tag));
    r.take(3);
    const std::uint64_t id_bytes = r.u64();

    const std::uint64_t expected = kStoreHeaderBytes + std::uint64_t{count} * dim * 4 + id_bytes;
    if (bytes.size() < expected)
        throw FormatError("vector store: truncated (" + std::to_string(bytes.size()) + " bytes, header implies " +
                          std::to_string(expected) + ")");
    if (bytes.size() > expected) throw FormatError("vector store: trailing bytes after id table");

    std::vector<float> data(count * dim);
    for (auto& x : data) x = r.f32();
    const auto table = r.raw(static_cast<std::size_t>(id_bytes));
    std::vector<std::string> ids;
    ids.reserve(count);
    std::size_t start = 0;
    while (start < table.size()) {
        const auto nl = table.find('\n', start);
        if (nl == std::string_view::npos) throw FormatError("vector store: unterminated id table");
        ids.emplace_back(table.substr(start, nl - start));
        start = nl + 1;
    }
    if (ids.size() != count)
        throw FormatError("vector store: id table holds " + std::to_string(ids.size()) + " ids, header says " +
                          std::to_string(count));
    return VectorStore(static_cast<FeatureConfig>(tag), dim, std::move(ids), std::move(data));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

void save_store(const std::filesystem::path& path, const VectorStore& store) {
    write_file_bytes(path, encode_store(store));
}

VectorStore load_store(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return decode_store(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_store(const std::vector<FeatureVector>& vectors, const std::filesystem::path& path) {
    save_store(path, VectorStore::from_vectors(vectors));
}

std::vector<FeatureVector> read_store(const std::filesystem::path& path, std::string_view extractor_id) {
    return load_store(path).to_vectors(extractor_id);
}

}  // namespace cxr
