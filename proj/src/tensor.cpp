#include "arfp/tensor.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace arfp {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != numel(shape_))
        throw std::invalid_argument("tensor data size does not match shape " + shape_str(shape_));
}

double& Tensor::at(int n, int c, int h, int w) {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

double Tensor::at(int n, int c, int h, int w) const {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (numel(shape) != data_.size())
        throw std::invalid_argument("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) {
    for (double& x : data_) x = v;
}

Tensor Tensor::sample(int n) const {
    if (rank() < 1 || n < 0 || n >= shape_[0]) throw std::out_of_range("sample index out of range");
    Shape s = shape_;
    s[0] = 1;
    const std::size_t per = data_.size() / static_cast<std::size_t>(shape_[0]);
    std::vector<double> d(data_.begin() + static_cast<std::ptrdiff_t>(per * n),
                          data_.begin() + static_cast<std::ptrdiff_t>(per * (n + 1)));
    return Tensor(s, std::move(d));
}

Tensor Tensor::stack(const std::vector<Tensor>& items) {
    if (items.empty()) throw std::invalid_argument("cannot stack an empty list");
    Shape inner = items[0].shape();
    if (!inner.empty() && inner[0] == 1 && inner.size() > 1) inner.erase(inner.begin());
    Shape out{static_cast<int>(items.size())};
    out.insert(out.end(), inner.begin(), inner.end());
    std::vector<double> d;
    d.reserve(numel(out));
    const std::size_t per = numel(inner);
    for (const Tensor& t : items) {
        if (t.size() != per) throw std::invalid_argument("stack: inconsistent item sizes");
        d.insert(d.end(), t.vec().begin(), t.vec().end());
    }
    return Tensor(out, std::move(d));
}

std::uint64_t fnv1a(const void* bytes, std::size_t len, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t hash_tensor(const Tensor& t, std::uint64_t h) {
    for (int d : t.shape()) h = fnv1a(&d, sizeof d, h);
    return fnv1a(t.data(), t.size() * sizeof(double), h);
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

Tensor take_rows(const Tensor& t, const std::vector<int>& idx) {
    if (t.rank() < 1) throw std::invalid_argument("take_rows: rank-0 tensor");
    const std::size_t per = t.size() / static_cast<std::size_t>(t.dim(0));
    Shape s = t.shape();
    s[0] = static_cast<int>(idx.size());
    Tensor out(s);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= t.dim(0)) throw std::out_of_range("take_rows: index out of range");
        std::copy_n(t.data() + static_cast<std::size_t>(idx[r]) * per, per, out.data() + r * per);
    }
    return out;
}

}  // namespace arfp
