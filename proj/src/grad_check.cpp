#include "mixaug/grad_check.hpp"

#include <cmath>

#include "mixaug/errors.hpp"

namespace mixaug {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps) {
    if (!(eps > 0.0)) {
        throw ArgumentError("finite_diff_grad requires eps > 0");
    }
    Tensor grad(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + eps;
        const double fp = f(probe);
        probe[i] = saved - eps;
        const double fm = f(probe);
        probe[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("finite_diff_grad probed a non-finite function value");
        }
        grad[i] = (fp - fm) / (2.0 * eps);
    }
    return grad;
}

}  // namespace mixaug
