#include "cxr/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "cxr/error.hpp"

namespace cxr {

GrayImage::GrayImage(std::size_t width, std::size_t height, float fill)
    : width_(width), height_(height), pixels_(width * height, fill) {
    if (!(fill >= 0.0f && fill <= 1.0f)) throw ValidationError("image fill value outside [0, 1]");
}

GrayImage::GrayImage(std::size_t width, std::size_t height, std::vector<float> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (pixels_.size() != width_ * height_)
        throw ShapeError("image: " + std::to_string(pixels_.size()) + " pixels for " + std::to_string(width_) +
                         "x" + std::to_string(height_));
    for (float p : pixels_)
        if (!(p >= 0.0f && p <= 1.0f)) throw ValidationError("image pixel outside [0, 1]");
}

double GrayImage::mean() const {
    double s = 0.0;
    for (float p : pixels_) s += p;
    return pixels_.empty() ? 0.0 : s / static_cast<double>(pixels_.size());
}

namespace {

struct Tap {
    std::size_t lo, hi;
    double w;  // weight of hi
};

std::vector<Tap> taps(std::size_t src, std::size_t dst) {
    std::vector<Tap> out(dst);
    const double scale = static_cast<double>(src) / static_cast<double>(dst);
    for (std::size_t i = 0; i < dst; ++i) {
        double x = (static_cast<double>(i) + 0.5) * scale - 0.5;
        x = std::clamp(x, 0.0, static_cast<double>(src - 1));
        const auto lo = static_cast<std::size_t>(std::floor(x));
        const auto hi = std::min(lo + 1, src - 1);
        out[i] = {lo, hi, x - static_cast<double>(lo)};
    }
    return out;
}

}  // namespace

GrayImage resize(const GrayImage& image, std::size_t width, std::size_t height) {
    if (image.empty()) throw ValidationError("resize: empty image");
    if (width == 0 || height == 0) throw ValidationError("resize: target size must be positive");
    if (width == image.width() && height == image.height()) return image;

    const auto tx = taps(image.width(), width);
    const auto ty = taps(image.height(), height);
    std::vector<float> out(width * height);
    for (std::size_t y = 0; y < height; ++y) {
        const auto& [y0, y1, wy] = ty[y];
        for (std::size_t x = 0; x < width; ++x) {
            const auto& [x0, x1, wx] = tx[x];
            const double top = (1.0 - wx) * image.at(x0, y0) + wx * image.at(x1, y0);
            const double bot = (1.0 - wx) * image.at(x0, y1) + wx * image.at(x1, y1);
            const double v = (1.0 - wy) * top + wy * bot;
            out[y * width + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return GrayImage(width, height, std::move(out));
}

ChestHalves split_and_flip(const GrayImage& image) {
    const std::size_t w = image.width(), h = image.height();
    if (w < 2) throw ValidationError("split_and_flip: width must be at least 2");
    const std::size_t half = w / 2;
    std::vector<float> left(half * h), right(half * h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < half; ++x) {
            left[y * half + x] = image.at(x, y);
            right[y * half + x] = image.at(w - 1 - x, y);
        }
    return {GrayImage(half, h, std::move(left)), GrayImage(half, h, std::move(right))};
}

std::vector<float> baseline_extract(const GrayImage& image) {
    const GrayImage view =
        image.width() == kInputSize && image.height() == kInputSize ? image : resize(image, kInputSize, kInputSize);
    constexpr std::size_t patch = kInputSize / kBaselineGrid;
    constexpr double inv_area = 1.0 / static_cast<double>(patch * patch);
    std::vector<float> out(kBaselineDim);
    const auto px = view.pixels();
    for (std::size_t gy = 0; gy < kBaselineGrid; ++gy)
        for (std::size_t gx = 0; gx < kBaselineGrid; ++gx) {
            double s = 0.0;
            for (std::size_t y = gy * patch; y < (gy + 1) * patch; ++y) {
                const float* rowp = px.data() + y * kInputSize + gx * patch;
                for (std::size_t x = 0; x < patch; ++x) s += rowp[x];
            }
            out[gy * kBaselineGrid + gx] = static_cast<float>(s * inv_area);
        }
    return out;
}

ExtractionViews prepare_views(const GrayImage& image) {
    GrayImage whole = resize(image, kInputSize, kInputSize);
    auto halves = split_and_flip(whole);
    return {std::move(whole), resize(halves.left, kInputSize, kInputSize),
            resize(halves.right_flipped, kInputSize, kInputSize)};
}

FeatureVector extract_config(const GrayImage& image, FeatureConfig config, const FeatureExtractor& extractor,
                             std::string record_id) {
    if (config == FeatureConfig::Encoded)
        throw ValidationError("extract_config: ENCODED vectors come from an encoder, not an extractor");
    const auto& spec = extractor.spec();
    FeatureVector fv{std::move(record_id), {}, config, spec.extractor_id};
    fv.values.reserve(block_count(config) * spec.base_dim);

    auto append = [&](const GrayImage& view) {
        auto block = extractor.extract(view);
        if (block.size() != spec.base_dim)
            throw ShapeError("extractor '" + spec.extractor_id + "' returned " + std::to_string(block.size()) +
                             " values, declared " + std::to_string(spec.base_dim));
        fv.values.insert(fv.values.end(), block.begin(), block.end());
    };

    if (config == FeatureConfig::C1) {
        append(resize(image, kInputSize, kInputSize));
    } else {
        const auto views = prepare_views(image);
        append(views.left);
        append(views.right_flipped);
        if (config == FeatureConfig::C3) append(views.whole);
    }
    return fv;
}

ExternalFeatureSource::ExternalFeatureSource(VectorStore store, std::string extractor_id)
    : store_(std::move(store)) {
    const std::size_t blocks = block_count(store_.config());
    if (blocks == 0) throw ValidationError("external features must be C1, C2 or C3, not ENCODED");
    if (store_.dim() == 0 || store_.dim() % blocks != 0)
        throw ShapeError("external store dim " + std::to_string(store_.dim()) + " is not a multiple of " +
                         std::to_string(blocks));
    spec_ = {std::move(extractor_id), store_.dim() / blocks, ExtractorKind::ExternalFile};
    order_.resize(store_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    std::sort(order_.begin(), order_.end(), [&](auto a, auto b) { return store_.ids()[a] < store_.ids()[b]; });
}

bool ExternalFeatureSource::can_serve(FeatureConfig config) const {
    if (config == store_.config()) return true;
    return store_.config() == FeatureConfig::C3 && (config == FeatureConfig::C1 || config == FeatureConfig::C2);
}

FeatureVector ExternalFeatureSource::lookup(std::string_view record_id, FeatureConfig config) const {
    if (!can_serve(config))
        throw LookupError("external store holds " + std::string(to_string(store_.config())) + " vectors; cannot serve " +
                          std::string(to_string(config)));
    auto it = std::lower_bound(order_.begin(), order_.end(), record_id,
                               [&](std::size_t i, std::string_view key) { return store_.ids()[i] < key; });
    if (it == order_.end() || store_.ids()[*it] != record_id)
        throw LookupError("external store has no vector for record '" + std::string(record_id) + "'");
    auto row = store_.row(*it);
    const std::size_t n = spec_.base_dim;
    if (config == FeatureConfig::C1 && store_.config() == FeatureConfig::C3) row = row.subspan(2 * n, n);
    if (config == FeatureConfig::C2 && store_.config() == FeatureConfig::C3) row = row.subspan(0, 2 * n);
    return {std::string(record_id), std::vector<float>(row.begin(), row.end()), config, spec_.extractor_id};
}

namespace {

float luminance(double r, double g, double b) {
    return static_cast<float>(std::clamp(0.299 * r + 0.587 * g + 0.114 * b, 0.0, 1.0));
}

std::size_t read_pnm_int(std::istream& in) {
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF || !std::isdigit(c)) throw FormatError("PNM: malformed header");
    std::size_t v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + static_cast<std::size_t>(c - '0');
        c = in.get();
    }
    return v;  // one whitespace byte after the number is consumed
}

GrayImage read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image " + path.string());
    char magic[2];
    if (!in.read(magic, 2) || magic[0] != 'P') throw FormatError(path.string() + ": not a PNM file");
    const char kind = magic[1];
    if (kind != '2' && kind != '5' && kind != '6') throw FormatError(path.string() + ": unsupported PNM type P" + kind);
    const auto w = read_pnm_int(in), h = read_pnm_int(in), maxval = read_pnm_int(in);
    if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw FormatError(path.string() + ": bad PNM header");
    const std::size_t channels = kind == '6' ? 3 : 1;
    const double scale = 1.0 / static_cast<double>(maxval);
    std::vector<double> samples(w * h * channels);
    if (kind == '2') {
        for (auto& s : samples) {
            std::size_t v;
            if (!(in >> v) || v > maxval) throw FormatError(path.string() + ": bad PGM sample");
            s = static_cast<double>(v) * scale;
        }
    } else {
        const std::size_t bytes = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> raw(samples.size() * bytes);
        if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
            throw FormatError(path.string() + ": truncated PNM data");
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const std::size_t v = bytes == 2 ? (std::size_t{raw[2 * i]} << 8) | raw[2 * i + 1] : raw[i];
            samples[i] = std::min(static_cast<double>(v) * scale, 1.0);
        }
    }
    std::vector<float> px(w * h);
    for (std::size_t i = 0; i < px.size(); ++i)
        px[i] = channels == 3 ? luminance(samples[3 * i], samples[3 * i + 1], samples[3 * i + 2])
                              : static_cast<float>(samples[i]);
    return GrayImage(w, h, std::move(px));
}

GrayImage read_png(const std::filesystem::path& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str()))
        throw FormatError(path.string() + ": " + img.message);
    img.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&img);
        throw FormatError(path.string() + ": " + img.message);
    }
    std::vector<float> px(std::size_t{img.width} * img.height);
    for (std::size_t i = 0; i < px.size(); ++i)
        px[i] = luminance(buf[3 * i] / 255.0, buf[3 * i + 1] / 255.0, buf[3 * i + 2] / 255.0);
    return GrayImage(img.width, img.height, std::move(px));
}

}  // namespace

GrayImage read_image(const std::filesystem::path& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open image " + path.string());
    unsigned char sig[8] = {};
    probe.read(reinterpret_cast<char*>(sig), 8);
    probe.close();
    if (sig[0] == 0x89 && sig[1] == 'P' && sig[2] == 'N' && sig[3] == 'G') return read_png(path);
    if (sig[0] == 'P') return read_pnm(path);
    throw FormatError(path.string() + ": unrecognised image format (expected PNG or PGM)");
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write image " + path.string());
    out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
    std::vector<unsigned char> raw(image.pixels().size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        raw[i] = static_cast<unsigned char>(std::lround(std::clamp(image.pixels()[i], 0.0f, 1.0f) * 255.0f));
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace cxr
