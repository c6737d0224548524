#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cxr/datamodel.hpp"
#include "cxr/imaging.hpp"
#include "cxr/vector_store.hpp"

namespace cxr {

struct SynthParams {
    std::size_t positives = 1000;
    std::size_t negatives = 1000;
    /// Share of negatives carrying a non-pneumothorax finding ("opacity");
    /// those are excluded from dataset1 populations.
    double abnormal_fraction = 0.0;
    /// Strength of the class signal; 0 makes the classes identical.
    double separation = 1.0;
    std::uint64_t seed = 0;
    std::size_t image_size = 256;

    void validate() const;
};

/// Records syn-000000 ... with labels shuffled from the seed, folds unset.
std::vector<ImageRecord> synth_records(const SynthParams& params);

/// Frontal-chest-like image: body, two lung fields, mediastinum, per-image
/// jitter and noise. Positives get a bright apical rim inside one lung
/// (side drawn per image); "opacity" negatives get symmetric basal haze.
/// Pure function of (record index, params).
GrayImage synth_image(const ImageRecord& record, std::size_t index, const SynthParams& params);

/// Gaussian classes in `dim` dimensions: negatives N(0, I), positives
/// N(mu, I) with mu = separation * 3 / sqrt(8) on the first 8 axes (so
/// ||mu|| = 3 * separation). Tagged C1.
VectorStore synth_vectors(const std::vector<ImageRecord>& records, const SynthParams& params, std::size_t dim);

/// Writes <dir>/manifest.csv and <dir>/images/<id>.pgm. Image paths in
/// the manifest are relative to <dir>.
DatasetManifest write_synthetic_image_set(const std::filesystem::path& dir, const SynthParams& params,
                                          unsigned threads = 1);

}  // namespace cxr
