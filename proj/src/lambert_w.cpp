#include "gaitlab/lambert_w.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gaitlab {

double lambert_w0(double x) {
    const double branch = -1.0 / std::numbers::e;
    if (std::isnan(x) || x < branch)
        throw std::domain_error("lambert_w0: argument below -1/e");
    if (x == 0.0) return 0.0;
    if (x == branch) return -1.0;

    double w;
    if (x < -0.3) {
        // expansion about the branch point
        const double r = std::sqrt(2.0 * (std::numbers::e * x + 1.0));
        w = -1.0 + r - r * r / 3.0 + 11.0 / 72.0 * r * r * r;
    } else if (x < 0.3) {
        w = x - x * x + 1.5 * x * x * x;
    } else if (x < 3.0) {
        w = std::log1p(x) * 0.75;
    } else {
        const double l = std::log(x);
        w = l - std::log(l);
    }

    for (int it = 0; it < 64; ++it) {
        const double ew = std::exp(w);
        const double f = w * ew - x;
        const double wp1 = w + 1.0;
        if (wp1 == 0.0) break;
        const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        const double dw = f / denom;
        w -= dw;
        if (std::abs(dw) <= 4e-16 * (1.0 + std::abs(w))) break;
    }
    return w;
}

} // namespace gaitlab
