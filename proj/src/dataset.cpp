#include "arfp/dataset.hpp"

#include <stdexcept>

namespace arfp {

Dataset Dataset::subset(const std::vector<int>& idx) const {
    Dataset d;
    d.images = take_rows(images, idx);
    for (int i : idx) {
        d.labels.push_back(labels.at(static_cast<std::size_t>(i)));
        if (!names.empty()) d.names.push_back(names.at(static_cast<std::size_t>(i)));
    }
    return d;
}

std::uint64_t Dataset::hash() const {
    std::uint64_t h = hash_tensor(images);
    return fnv1a(labels.data(), labels.size() * sizeof(int), h);
}

}  // namespace arfp
