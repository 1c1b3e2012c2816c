#pragma once

#include <stdexcept>
#include <string>

namespace arfp {

// Raised when an embedding has zero norm and cannot be normalized.
class DegenerateEmbeddingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    IoError(const std::string& what, std::string path)
        : std::runtime_error(what + ": " + path), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

// Training or evaluation failure inside a canned experiment; names the variant.
class ExperimentError : public std::runtime_error {
public:
    ExperimentError(std::string variant, const std::string& what)
        : std::runtime_error("experiment variant '" + variant + "' failed: " + what), variant_(std::move(variant)) {}
    const std::string& variant() const { return variant_; }

private:
    std::string variant_;
};

}  // namespace arfp
