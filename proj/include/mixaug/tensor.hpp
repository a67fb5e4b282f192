#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mixaug {

// Dense n-dimensional array of doubles in row-major order. Shapes are
// validated on construction; stored values must stay finite.
class Tensor {
  public:
    Tensor() = default;

    // Zero-filled tensor of the given shape.
    explicit Tensor(std::vector<std::size_t> shape);

    // Takes ownership of flat row-major data. Throws DimensionError when the
    // element count does not match the shape, NumericError on NaN/Inf.
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor full(std::vector<std::size_t> shape, double value);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const;

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t i, std::size_t j);
    double at(std::size_t i, std::size_t j) const;
    double& at(std::size_t i, std::size_t j, std::size_t k);
    double at(std::size_t i, std::size_t j, std::size_t k) const;
    double& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l);
    double at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    std::string shape_str() const;

    // Throws NumericError naming `what` if any element is NaN/Inf.
    void check_finite(const std::string& what) const;

  private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_to_string(const std::vector<std::size_t>& shape);

// Standard matrix product of two rank-2 tensors. Throws DimensionError with
// both shapes in the message when the inner extents disagree.
Tensor matmul(const Tensor& a, const Tensor& b);

}  // namespace mixaug
