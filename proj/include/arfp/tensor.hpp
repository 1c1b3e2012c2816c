#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace arfp {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor of doubles. Images use NCHW layout.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(int n, int c, int h, int w);
    double at(int n, int c, int h, int w) const;

    // Same data, new shape with equal element count.
    Tensor reshaped(Shape shape) const;
    void fill(double v);
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    // Sample n of a batched tensor, keeping a leading dimension of 1.
    Tensor sample(int n) const;
    // Stack single-sample tensors (leading dim 1 or none) into a batch.
    static Tensor stack(const std::vector<Tensor>& items);

private:
    Shape shape_;
    std::vector<double> data_;
};

// Rows idx of the leading dimension, in the given order.
Tensor take_rows(const Tensor& t, const std::vector<int>& idx);

// FNV-1a over the raw bytes of the doubles; used for reproducibility checks.
std::uint64_t hash_tensor(const Tensor& t, std::uint64_t h = 1469598103934665603ULL);
std::uint64_t fnv1a(const void* bytes, std::size_t len, std::uint64_t h = 1469598103934665603ULL);
std::string hex64(std::uint64_t v);

}  // namespace arfp
