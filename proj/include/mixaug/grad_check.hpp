#pragma once

#include <functional>

#include "mixaug/tensor.hpp"

namespace mixaug {

// Central-difference gradient of a scalar function: (f(x+eps*e_i) -
// f(x-eps*e_i)) / (2*eps) per element. Throws ArgumentError for eps <= 0 and
// NumericError when f returns a non-finite value at a probed point.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps);

}  // namespace mixaug
