#pragma once

// Dataset sources and the reference / probe split.

#include <cstdint>
#include <string>
#include <utility>

#include <json.hpp>

#include "arfp/dataset.hpp"

namespace arfp {

enum class DataSource { SyntheticFaces, ImageDirectory };

struct DatasetSpec {
    DataSource source = DataSource::SyntheticFaces;
    std::string directory;  // image-directory: one sub-directory per identity
    int image_size = 64;
    int identities = 10;
    int per_identity = 20;
    double split_fraction = 0.5;  // share of each identity's images used as reference
    std::uint64_t seed = 0;
    double texture_amplitude = 0.06;  // synthetic identity texture strength

    void validate() const;
    nlohmann::json to_json() const;
    static DatasetSpec from_json(const nlohmann::json& j);
};

// Synthetic faces: a shared face template (oval, eyes, mouth) plus a smooth
// per-identity colour texture, with per-image shift, contrast / offset jitter
// and pixel noise. Image directories: <dir>/<identity>/<image>, sub-directories
// sorted by name give labels 0, 1, ...; images are resized to image_size.
Dataset load_dataset(const DatasetSpec& spec);

// Per identity, round(fraction * n) images (at least 1, at most n - 1) go to
// the reference set and the rest to the probe set.
std::pair<Dataset, Dataset> split_reference_probe(const Dataset& data, double fraction, std::uint64_t seed);

}  // namespace arfp
