#include <cmath>
#include <string>
#include <vector>

#include "dilo/errors.hpp"
#include "dilo/rng.hpp"
#include "dilo/util.hpp"
#include "doctest.h"
#include "test_support.hpp"

TEST_SUITE("rng_util") {
    TEST_CASE("same seed reproduces the stream") {
        dilo::Rng a(42), b(42);
        for (int i = 0; i < 200; ++i) {
            CHECK(a.uniform() == b.uniform());
            CHECK(a.uniform_int(1000) == b.uniform_int(1000));
            CHECK(a.gaussian() == b.gaussian());
        }
    }

    TEST_CASE("forks are deterministic and distinct") {
        dilo::Rng p1(7), p2(7);
        dilo::Rng c1 = p1.fork(3), c2 = p2.fork(3);
        for (int i = 0; i < 100; ++i) CHECK(c1.uniform() == c2.uniform());

        dilo::Rng p3(7);
        dilo::Rng d1 = p3.fork(3), d2 = p3.fork(4);
        int same = 0;
        for (int i = 0; i < 100; ++i)
            if (d1.uniform() == d2.uniform()) ++same;
        CHECK(same < 5);
    }

    TEST_CASE("uniform bounds and moments") {
        dilo::Rng rng(1);
        const int n = 100000;
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            double u = rng.uniform();
            CHECK(u >= 0.0);
            CHECK(u < 1.0);
            sum += u;
        }
        double se = 1.0 / std::sqrt(12.0 * n);
        CHECK(std::abs(sum / n - 0.5) <= 4.0 * se);

        double lo = rng.uniform(-2.0, 5.0);
        CHECK(lo >= -2.0);
        CHECK(lo < 5.0);
    }

    TEST_CASE("uniform_int is uniform by chi-square") {
        dilo::Rng rng(2);
        const int k = 7, n = 100000;
        std::vector<long long> counts(k, 0);
        for (int i = 0; i < n; ++i) {
            std::uint64_t v = rng.uniform_int(k);
            REQUIRE(v < static_cast<std::uint64_t>(k));
            ++counts[static_cast<int>(v)];
        }
        std::vector<double> probs(k, 1.0 / k);
        double stat = dilo::chi_square_statistic(counts, probs);
        CHECK(stat < dilo::chi_square_critical_99(k - 1));
    }

    TEST_CASE("gaussian moments") {
        dilo::Rng rng(3);
        const int n = 100000;
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < n; ++i) {
            double g = rng.gaussian();
            sum += g;
            sq += g * g;
        }
        double mean = sum / n;
        double var = sq / n - mean * mean;
        CHECK(std::abs(mean) <= 4.0 / std::sqrt(static_cast<double>(n)));
        CHECK(std::abs(var - 1.0) <= 4.0 * std::sqrt(2.0 / n));
    }

    TEST_CASE("bernoulli frequency") {
        dilo::Rng rng(4);
        const int n = 100000;
        int hits = 0;
        for (int i = 0; i < n; ++i)
            if (rng.bernoulli(0.3)) ++hits;
        double se = std::sqrt(0.3 * 0.7 / n);
        CHECK(std::abs(hits / static_cast<double>(n) - 0.3) <= 4.0 * se);
    }

    TEST_CASE("format_double round trips exactly") {
        for (double x : {0.0, 0.5, 1.0 / 3.0, -5.0 / 48.0, 1e-300, 1e300, 123456.789, -0.1}) {
            std::string s = dilo::format_double(x);
            CHECK(std::stod(s) == x);
        }
        CHECK(dilo::format_double(0.5) == "0.5");
        CHECK(dilo::format_double(1.0) == "1");
    }

    TEST_CASE("chi-square critical values near the exact table") {
        CHECK(dilo::chi_square_critical_99(3) == doctest::Approx(11.3449).epsilon(5e-3));
        CHECK(dilo::chi_square_critical_99(10) == doctest::Approx(23.2093).epsilon(5e-3));
        CHECK(dilo::chi_square_critical_99(24) == doctest::Approx(42.9798).epsilon(5e-3));
    }

    TEST_CASE("chi-square statistic hand example") {
        std::vector<long long> counts{8, 2};
        std::vector<double> probs{0.5, 0.5};
        CHECK(dilo::chi_square_statistic(counts, probs) == doctest::Approx(3.6).epsilon(1e-12));
        std::vector<long long> even{5, 5};
        CHECK(dilo::chi_square_statistic(even, probs) == 0.0);
    }

    TEST_CASE("file helpers round trip and report failures") {
        std::string dir = testsup::tmp_path("rng_util/nested/deeper");
        dilo::ensure_dir(dir);
        std::string path = dir + "/sample.txt";
        dilo::write_text_file(path, "alpha\nbeta\n");
        CHECK(dilo::read_text_file(path) == "alpha\nbeta\n");
        CHECK_THROWS_AS(dilo::read_text_file(dir + "/does_not_exist.txt"), dilo::IoError);
    }
}
