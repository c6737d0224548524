#include "cxr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>

#include "cxr/error.hpp"
#include "cxr/random.hpp"

namespace cxr {

void SynthParams::validate() const {
    if (positives == 0 || negatives == 0) throw ValidationError("synthetic class counts must be positive");
    if (!(abnormal_fraction >= 0.0 && abnormal_fraction <= 1.0))
        throw ValidationError("abnormal_fraction must be in [0, 1]");
    if (!(separation >= 0.0)) throw ValidationError("separation must be non-negative");
    if (image_size < 16) throw ValidationError("image_size must be at least 16");
}

std::vector<ImageRecord> synth_records(const SynthParams& params) {
    params.validate();
    const std::size_t n = params.positives + params.negatives;
    std::vector<Label> labels(n, Label::Negative);
    std::fill_n(labels.begin(), params.positives, Label::Positive);
    Rng rng(derive_seed(params.seed, 0x1abe1));
    rng.shuffle(std::span(labels));

    std::vector<ImageRecord> out(n);
    const auto abnormal = static_cast<std::size_t>(std::llround(params.abnormal_fraction * static_cast<double>(params.negatives)));
    std::size_t negatives_seen = 0;
    for (std::size_t i = 0; i < n; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "syn-%06zu", i);
        auto& r = out[i];
        r.id = id;
        r.path = "images/" + r.id + ".pgm";
        r.label = labels[i];
        r.source = Source::Synthetic;
        if (r.label == Label::Positive) {
            r.finding = std::string(kPneumothoraxFinding);
        } else {
            r.finding = negatives_seen < abnormal ? "opacity" : std::string(kNoFinding);
            ++negatives_seen;
        }
    }
    return out;
}

namespace {

struct Ellipse {
    double cx, cy, rx, ry;
    double norm(double x, double y) const {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        return std::sqrt(dx * dx + dy * dy);
    }
};

// Soft inside indicator with a ~1.5% wide edge.
double inside(double r) { return std::clamp((1.0 - r) / 0.03 + 0.5, 0.0, 1.0); }

}  // namespace

GrayImage synth_image(const ImageRecord& record, std::size_t index, const SynthParams& params) {
    Rng rng(derive_seed(params.seed, 0x1a6e00000ULL + index));
    const std::size_t n = params.image_size;
    const double jitter = 0.012;
    const double gain = rng.uniform(0.95, 1.05);
    const double offset = rng.uniform(-0.02, 0.02);
    const double shift_x = rng.uniform(-jitter, jitter), shift_y = rng.uniform(-jitter, jitter);
    const Ellipse body{0.5 + shift_x, 0.55 + shift_y, 0.42, 0.46};
    const double lung_ry = 0.27 + rng.uniform(-0.01, 0.01);
    const Ellipse lungs[2] = {
        {0.31 + shift_x + rng.uniform(-0.006, 0.006), 0.46 + shift_y, 0.13, lung_ry},
        {0.69 + shift_x + rng.uniform(-0.006, 0.006), 0.46 + shift_y, 0.13, lung_ry},
    };
    const int rim_side = rng.bernoulli(0.5) ? 1 : 0;
    const double rim_gain = 0.5 * params.separation;
    const bool opacity = record.label == Label::Negative && !record.is_normal();

    std::vector<float> px(n * n);
    for (std::size_t yi = 0; yi < n; ++yi) {
        const double y = (static_cast<double>(yi) + 0.5) / static_cast<double>(n);
        for (std::size_t xi = 0; xi < n; ++xi) {
            const double x = (static_cast<double>(xi) + 0.5) / static_cast<double>(n);
            double v = 0.06 + 0.5 * inside(body.norm(x, y));
            const double spine = std::exp(-std::pow((x - body.cx) / 0.035, 2.0));
            v += 0.15 * spine * inside(body.norm(x, y));
            for (int side = 0; side < 2; ++side) {
                const auto& lung = lungs[side];
                const double r = lung.norm(x, y);
                const double in = inside(r);
                v -= 0.33 * in;
                if (record.label == Label::Positive && side == rim_side && y < lung.cy - 0.15 * lung.ry)
                    v += rim_gain * in * std::clamp((r - 0.55) / 0.25, 0.0, 1.0);
                if (opacity && y > lung.cy + 0.2 * lung.ry) v += 0.12 * in;
            }
            v = gain * v + offset + 0.03 * rng.normal();
            px[yi * n + xi] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return GrayImage(n, n, std::move(px));
}

VectorStore synth_vectors(const std::vector<ImageRecord>& records, const SynthParams& params, std::size_t dim) {
    params.validate();
    if (dim == 0) throw ValidationError("synthetic vector dim must be positive");
    const std::size_t shifted = std::min<std::size_t>(8, dim);
    const double shift = params.separation * 3.0 / std::sqrt(static_cast<double>(shifted));
    std::vector<std::string> ids;
    std::vector<float> data;
    data.reserve(records.size() * dim);
    for (std::size_t i = 0; i < records.size(); ++i) {
        Rng rng(derive_seed(params.seed, 0xfec700000ULL + i));
        ids.push_back(records[i].id);
        const bool pos = records[i].label == Label::Positive;
        for (std::size_t d = 0; d < dim; ++d)
            data.push_back(static_cast<float>(rng.normal() + (pos && d < shifted ? shift : 0.0)));
    }
    return VectorStore(FeatureConfig::C1, dim, std::move(ids), std::move(data));
}

DatasetManifest write_synthetic_image_set(const std::filesystem::path& dir, const SynthParams& params,
                                          unsigned threads) {
    auto records = synth_records(params);
    std::filesystem::create_directories(dir / "images");
    std::vector<std::exception_ptr> errors(records.size());
    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t i = first; i < records.size(); i += stride) {
            try {
                write_pgm(dir / records[i].path, synth_image(records[i], i, params));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::max(1u, threads);
    if (workers == 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    DatasetManifest manifest(std::move(records), DatasetMode::FullyAutomated);
    save_manifest(dir / "manifest.csv", manifest);
    return manifest;
}

}  // namespace cxr
