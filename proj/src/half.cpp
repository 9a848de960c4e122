#include "vikin/half.hpp"

#include <cmath>
#include <limits>

namespace vikin::model {

double round_to_half(double x) {
    if (!std::isfinite(x) || x == 0.0) return x;
    const double mag = std::fabs(x);
    int exp = 0;
    std::frexp(mag, &exp);  // mag = m * 2^exp, m in [0.5, 1)
    // Spacing of binary16 values around mag: 2^(e-10) with e = exp-1, floored at the subnormal quantum 2^-24.
    const int quantum_exp = exp - 1 < -14 ? -24 : exp - 11;
    const double q = std::nearbyint(std::ldexp(mag, -quantum_exp));
    const double r = std::ldexp(q, quantum_exp);
    if (r >= 65520.0) return std::copysign(std::numeric_limits<double>::infinity(), x);
    return std::copysign(r, x);
}

}  // namespace vikin::model
