#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace exnet {

// Dense row-major float tensor. Video batches use (N, C, T, H, W).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<size_t>(compute_numel(shape_)), 0.0f);
    }

    Tensor(std::initializer_list<int64_t> shape)
        : Tensor(std::vector<int64_t>(shape)) {}

    static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int64_t> shape, float value) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    static Tensor from_values(std::vector<int64_t> shape, std::vector<float> values) {
        Tensor t;
        t.shape_ = std::move(shape);
        if (static_cast<int64_t>(values.size()) != compute_numel(t.shape_))
            throw std::invalid_argument("Tensor::from_values: size does not match shape");
        t.data_ = std::move(values);
        return t;
    }

    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int64_t dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    const std::vector<int64_t>& shape() const { return shape_; }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

    void reshape(std::vector<int64_t> shape) {
        if (compute_numel(shape) != numel())
            throw std::invalid_argument("Tensor::reshape: element count mismatch");
        shape_ = std::move(shape);
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    static int64_t compute_numel(const std::vector<int64_t>& shape) {
        int64_t n = 1;
        for (int64_t d : shape) {
            if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    static std::string shape_str(const std::vector<int64_t>& shape) {
        std::string s = "(";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + ")";
    }
    std::string shape_str() const { return shape_str(shape_); }

private:
    std::vector<float> data_;
    std::vector<int64_t> shape_;
};

}  // namespace exnet
