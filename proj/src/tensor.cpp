#include "mixaug/tensor.hpp"

#include <cmath>
#include <sstream>

#include "mixaug/errors.hpp"

namespace mixaug {

namespace {

std::size_t checked_element_count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0) {
            throw DimensionError("tensor shape has zero extent: " + shape_to_string(shape));
        }
        n *= e;
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    data_.assign(checked_element_count(shape_), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    std::size_t expected = checked_element_count(shape_);
    if (expected != data_.size()) {
        std::ostringstream os;
        os << "tensor data length " << data_.size() << " does not match shape "
           << shape_to_string(shape_);
        throw DimensionError(os.str());
    }
    check_finite("tensor construction");
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = value;
    t.check_finite("tensor fill");
    return t;
}

std::size_t Tensor::extent(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw DimensionError("axis out of range for shape " + shape_str());
    }
    return shape_[axis];
}

double& Tensor::at(std::size_t i, std::size_t j) {
    return data_[i * shape_[1] + j];
}
double Tensor::at(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
}
double& Tensor::at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
}
double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
}
double& Tensor::at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
}
double Tensor::at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

void Tensor::check_finite(const std::string& what) const {
    for (double x : data_) {
        if (!std::isfinite(x)) {
            throw NumericError("non-finite value in " + what);
        }
    }
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw DimensionError("matmul expects rank-2 tensors, got " + a.shape_str() + " and " +
                             b.shape_str());
    }
    if (a.extent(1) != b.extent(0)) {
        throw DimensionError("matmul inner extents disagree: " + a.shape_str() + " times " +
                             b.shape_str());
    }
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor out({m, n});
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = pa[i * k + kk];
            const double* brow = pb + kk * n;
            double* orow = po + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    out.check_finite("matmul result");
    return out;
}

}  // namespace mixaug
