#include "dilo/divergence.hpp"

#include <cmath>
#include <stdexcept>

namespace dilo {

double FGenerator::f(double x) const {
    return (x - 1.0) * (x - 1.0);
}

double FGenerator::f_prime(double x) const {
    return 2.0 * (x - 1.0);
}

double FGenerator::f_prime_inv(double y) const {
    return 0.5 * y + 1.0;
}

static void check_finite(double x, const char* who) {
    if (!std::isfinite(x)) throw std::domain_error(std::string(who) + ": non-finite input");
}

double conjugate_p(const FGenerator& gen, double x) {
    check_finite(x, "conjugate_p");
    double w = ratio_from_residual(gen, x);
    return w * x - gen.f(w);
}

double ratio_from_residual(const FGenerator& gen, double y) {
    check_finite(y, "ratio_from_residual");
    double w = gen.f_prime_inv(y);
    return w > 0.0 ? w : 0.0;
}

double conjugate_p_derivative(const FGenerator& gen, double x) {
    check_finite(x, "conjugate_p_derivative");
    return ratio_from_residual(gen, x);
}

}  // namespace dilo
