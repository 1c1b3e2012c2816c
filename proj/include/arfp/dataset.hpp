#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arfp/tensor.hpp"

namespace arfp {

// Labelled image set: images [N,3,S,S] in [-1,1], one identity label per image.
struct Dataset {
    Tensor images;
    std::vector<int> labels;
    std::vector<std::string> names;  // source path or synthetic id per image

    int size() const { return static_cast<int>(labels.size()); }
    int image_size() const { return images.rank() == 4 ? images.dim(2) : 0; }
    Dataset subset(const std::vector<int>& idx) const;
    std::uint64_t hash() const;
};

}  // namespace arfp
