#include <cmath>
#include <limits>
#include <stdexcept>

#include "dilo/divergence.hpp"
#include "dilo/rng.hpp"
#include "doctest.h"

using dilo::chi_square;
using dilo::conjugate_p;
using dilo::conjugate_p_derivative;
using dilo::ratio_from_residual;

TEST_SUITE("divergence") {
    TEST_CASE("generator basics") {
        auto gen = chi_square();
        CHECK(gen.f(1.0) == 0.0);
        CHECK(gen.f(0.0) == 1.0);
        CHECK(gen.f(3.0) == 4.0);
        CHECK(gen.f_prime(1.0) == 0.0);
        CHECK(gen.f_prime(2.5) == doctest::Approx(3.0).epsilon(1e-15));
        CHECK(gen.f_prime_inv(0.0) == doctest::Approx(1.0).epsilon(1e-15));

        dilo::Rng rng(11);
        for (int i = 0; i < 1000; ++i) {
            double x = rng.uniform(-50.0, 50.0);
            CHECK(std::abs(gen.f_prime_inv(gen.f_prime(x)) - x) <= 1e-12 * std::max(1.0, std::abs(x)));
        }
    }

    TEST_CASE("conjugate spot values") {
        auto gen = chi_square();
        CHECK(conjugate_p(gen, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
        CHECK(conjugate_p(gen, 2.0) == doctest::Approx(3.0).epsilon(1e-15));
        CHECK(conjugate_p(gen, -4.0) == doctest::Approx(-1.0).epsilon(1e-15));
        CHECK(conjugate_p(gen, -2.0) == doctest::Approx(-1.0).epsilon(1e-15));
    }

    TEST_CASE("piecewise closed form") {
        auto gen = chi_square();
        dilo::Rng rng(12);
        for (int i = 0; i < 10000; ++i) {
            double x = rng.uniform(-10.0, 10.0);
            double expect = x > -2.0 ? x * x / 4.0 + x : -1.0;
            CHECK(conjugate_p(gen, x) == doctest::Approx(expect).epsilon(1e-13));
        }
    }

    TEST_CASE("convex nondecreasing and lower bounds on sampled points") {
        auto gen = chi_square();
        dilo::Rng rng(13);
        for (int i = 0; i < 10000; ++i) {
            double a = rng.uniform(-10.0, 10.0);
            double b = rng.uniform(-10.0, 10.0);
            double t = rng.uniform();
            double lhs = conjugate_p(gen, t * a + (1.0 - t) * b);
            double rhs = t * conjugate_p(gen, a) + (1.0 - t) * conjugate_p(gen, b);
            CHECK(lhs <= rhs + 1e-12);

            double lo = std::min(a, b), hi = std::max(a, b);
            CHECK(conjugate_p(gen, lo) <= conjugate_p(gen, hi) + 1e-12);

            // f*_p(x) >= 1*x - f(1) and f*_p(x) >= 0*x - f(0).
            CHECK(conjugate_p(gen, a) >= a - 1e-12);
            CHECK(conjugate_p(gen, a) >= -gen.f(0.0) - 1e-12);
        }
    }

    TEST_CASE("derivative matches finite differences away from the kink") {
        auto gen = chi_square();
        const double h = 1e-5;
        for (double x : {-3.0, -1.99, 0.5, 4.0}) {
            double fd = (conjugate_p(gen, x + h) - conjugate_p(gen, x - h)) / (2.0 * h);
            CHECK(std::abs(conjugate_p_derivative(gen, x) - fd) <= 1e-6);
        }
    }

    TEST_CASE("derivative equals the maximizing ratio") {
        auto gen = chi_square();
        dilo::Rng rng(14);
        for (int i = 0; i < 1000; ++i) {
            double x = rng.uniform(-10.0, 10.0);
            CHECK(conjugate_p_derivative(gen, x) == ratio_from_residual(gen, x));
        }
        CHECK(conjugate_p_derivative(gen, -2.0) == 0.0);
    }

    TEST_CASE("ratio from residual clamps at zero") {
        auto gen = chi_square();
        CHECK(ratio_from_residual(gen, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(ratio_from_residual(gen, 2.0) == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(ratio_from_residual(gen, -10.0) == 0.0);
        CHECK(ratio_from_residual(gen, -2.0) == 0.0);
    }

    TEST_CASE("non-finite input is rejected") {
        auto gen = chi_square();
        const double inf = std::numeric_limits<double>::infinity();
        const double nan = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(conjugate_p(gen, inf), std::domain_error);
        CHECK_THROWS_AS(conjugate_p(gen, nan), std::domain_error);
        CHECK_THROWS_AS(ratio_from_residual(gen, -inf), std::domain_error);
        CHECK_THROWS_AS(conjugate_p_derivative(gen, nan), std::domain_error);
    }
}
