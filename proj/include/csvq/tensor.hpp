#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace csvq {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define CSVQ_REQUIRE(cond, msg)                        \
    do {                                               \
        if (!(cond)) throw ::csvq::Error(msg);         \
    } while (0)

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Dense row-major tensor (last index fastest). Rank is dynamic but stays
// small (<= 4) everywhere in this library.
template <typename T>
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_), T(0)) {}
    Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    T& at(int i, int j) { return data_[static_cast<size_t>(i) * shape_[1] + j]; }
    const T& at(int i, int j) const { return data_[static_cast<size_t>(i) * shape_[1] + j]; }
    T& at(int i, int j, int k) {
        return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }
    const T& at(int i, int j, int k) const {
        return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor reshaped(Shape s) const {
        CSVQ_REQUIRE(shape_numel(s) == size(),
                     "reshape " + shape_str(shape_) + " -> " + shape_str(s) + " changes size");
        Tensor out = *this;
        out.shape_ = std::move(s);
        return out;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    // Eigen views. `rows*cols` must cover the whole buffer.
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<Mat> mat(int64_t rows, int64_t cols) {
        return Eigen::Map<Mat>(data_.data(), rows, cols);
    }
    Eigen::Map<const Mat> mat(int64_t rows, int64_t cols) const {
        return Eigen::Map<const Mat>(data_.data(), rows, cols);
    }
    Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> arr() {
        return {data_.data(), static_cast<Eigen::Index>(data_.size())};
    }
    Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> arr() const {
        return {data_.data(), static_cast<Eigen::Index>(data_.size())};
    }

  private:
    Shape shape_;
    std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace csvq
