#pragma once

namespace dilo {

// f-divergence generators. Only the Pearson chi-square generator is
// implemented; the enum exists so another generator (e.g. KL, which would
// need overflow guards in its conjugate) can slot in later.
enum class FKind { PearsonChiSquare };

struct FGenerator {
    FKind kind = FKind::PearsonChiSquare;

    // f(x) = (x-1)^2 for chi-square. Convex, f(1) = 0.
    double f(double x) const;
    // f'(x) = 2(x-1).
    double f_prime(double x) const;
    // f'^-1(y) = y/2 + 1.
    double f_prime_inv(double y) const;
};

inline FGenerator chi_square() { return FGenerator{FKind::PearsonChiSquare}; }

// Convex conjugate of f restricted to nonnegative arguments:
//   f*_p(x) = max_{w >= 0} (w*x - f(w)) = w(x)*x - f(w(x)),  w(x) = max(0, f'^-1(x)).
// For chi-square this is x^2/4 + x when x > -2 and the constant -1 when
// x <= -2 (the clamp is active and the best w is 0). Convex and nondecreasing.
// Throws std::domain_error on non-finite input.
double conjugate_p(const FGenerator& gen, double x);

// The maximizer itself: w(y) = max(0, f'^-1(y)). This is the closed-form
// optimal visitation ratio for a residual y, and by the envelope theorem it
// is also d/dx conjugate_p. Throws std::domain_error on non-finite input.
double ratio_from_residual(const FGenerator& gen, double y);

// Analytic derivative of conjugate_p; equals ratio_from_residual. At the kink
// (x = -2 for chi-square) the clamped branch's derivative 0 is returned.
double conjugate_p_derivative(const FGenerator& gen, double x);

}  // namespace dilo
