#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cxr/datamodel.hpp"
#include "cxr/vector_store.hpp"

namespace cxr {

/// Network input resolution; every view is brought to this size before
/// extraction.
inline constexpr std::size_t kInputSize = 224;
inline constexpr std::size_t kBaselineGrid = 32;
inline constexpr std::size_t kBaselineDim = kBaselineGrid * kBaselineGrid;

/// Row-major grayscale image with intensities in [0, 1].
class GrayImage {
public:
    GrayImage() = default;
    GrayImage(std::size_t width, std::size_t height, float fill = 0.0f);
    /// Throws ShapeError on a size mismatch, ValidationError on values
    /// outside [0, 1] or NaN.
    GrayImage(std::size_t width, std::size_t height, std::vector<float> pixels);

    std::size_t width() const { return width_; }
    std::size_t height() const { return height_; }
    bool empty() const { return pixels_.empty(); }
    std::span<const float> pixels() const { return pixels_; }

    float at(std::size_t x, std::size_t y) const { return pixels_[y * width_ + x]; }
    /// Unchecked write; callers keep values in [0, 1].
    void set(std::size_t x, std::size_t y, float v) { pixels_[y * width_ + x] = v; }

    double mean() const;

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<float> pixels_;
};

/// Bilinear resampling with half-pixel centers and edge clamping. An exact
/// 2:1 downscale therefore averages 2x2 source blocks.
GrayImage resize(const GrayImage& image, std::size_t width, std::size_t height);

struct ChestHalves {
    GrayImage left;
    GrayImage right_flipped;
};

/// Left = columns [0, w/2), right_flipped = columns [ceil(w/2), w) mirrored.
/// The center column of an odd-width image belongs to neither half.
ChestHalves split_and_flip(const GrayImage& image);

/// 32x32 grid of patch means over the 224x224 view, flattened row-major.
/// Other sizes are resized first.
std::vector<float> baseline_extract(const GrayImage& image);

enum class ExtractorKind { BaselinePool, ExternalFile };

struct ExtractorSpec {
    std::string extractor_id;
    std::size_t base_dim = 0;
    ExtractorKind kind = ExtractorKind::BaselinePool;
};

/// Pluggable per-view feature extractor. Implementations map one
/// kInputSize x kInputSize view to base_dim values and must be pure.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual const ExtractorSpec& spec() const = 0;
    virtual std::vector<float> extract(const GrayImage& view) const = 0;
};

class BaselinePoolExtractor final : public FeatureExtractor {
public:
    BaselinePoolExtractor() : spec_{"baseline-pool32", kBaselineDim, ExtractorKind::BaselinePool} {}
    const ExtractorSpec& spec() const override { return spec_; }
    std::vector<float> extract(const GrayImage& view) const override { return baseline_extract(view); }

private:
    ExtractorSpec spec_;
};

/// The three views fed to the extractor, all at kInputSize.
struct ExtractionViews {
    GrayImage whole;
    GrayImage left;
    GrayImage right_flipped;
};

/// Resize to 224x224, split, then bring each half back to 224x224.
ExtractionViews prepare_views(const GrayImage& image);

/// C1 = f(whole); C2 = f(left) ++ f(right_flipped); C3 = C2 ++ f(whole).
FeatureVector extract_config(const GrayImage& image, FeatureConfig config, const FeatureExtractor& extractor,
                             std::string record_id = {});

/// Vectors produced elsewhere (e.g. by a CNN), keyed by record id.
///
/// A C3 store can serve C1 (last block), C2 (first two blocks) and C3; a C2
/// store serves C2 only; a C1 store serves C1 only.
class ExternalFeatureSource {
public:
    ExternalFeatureSource(VectorStore store, std::string extractor_id);

    const ExtractorSpec& spec() const { return spec_; }
    bool can_serve(FeatureConfig config) const;
    /// Throws LookupError when the id is absent or the config cannot be served.
    FeatureVector lookup(std::string_view record_id, FeatureConfig config) const;

private:
    VectorStore store_;
    ExtractorSpec spec_;
    std::vector<std::size_t> order_;  // row indices sorted by id
};

/// 8-bit (or 16-bit) PGM/PPM and PNG. Color is reduced to luminance with
/// weights 0.299, 0.587, 0.114.
GrayImage read_image(const std::filesystem::path& path);
/// Binary 8-bit PGM (P5).
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

}  // namespace cxr
