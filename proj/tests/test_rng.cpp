#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "capa/rng.hpp"

using namespace capa;

TEST_CASE("stream output is frozen") {
    RngStream s(123456789ull, 42ull);
    CHECK(s.next_u64() == 17330410435664555753ull);
    CHECK(s.next_u64() == 9543003078998299826ull);
    CHECK(s.next_u64() == 17408669100258289298ull);

    RngStream s2(123456789ull, 42ull);
    CHECK(s2.next_unit() == doctest::Approx(0.93948343222064834).epsilon(1e-15));
    CHECK(s2.next_unit() == doctest::Approx(0.51732723351429066).epsilon(1e-15));

    CHECK(stream_id_for(4, 1024, 17) == 346936508996849526ull);
}

TEST_CASE("streams with different ids are unrelated, same id identical") {
    RngStream a(7, 1), b(7, 1), c(7, 2);
    int agree = 0;
    for (int i = 0; i < 64; ++i) {
        uint64_t va = a.next_u64();
        CHECK(va == b.next_u64());
        if ((va & 1) == (c.next_u64() & 1)) ++agree;
    }
    CHECK(agree > 16);
    CHECK(agree < 48);
}

TEST_CASE("unit draws live in (0,1] and have uniform moments") {
    RngStream s(99, 0);
    double sum = 0.0, sum2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double u = s.next_unit();
        CHECK(u > 0.0);
        CHECK(u <= 1.0);
        sum += u;
        sum2 += u * u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(sum2 / n == doctest::Approx(1.0 / 3.0).epsilon(0.01));
}

TEST_CASE("gaussian moments") {
    RngStream s(5, 11);
    double m = 0.0, v = 0.0, k4 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double g = s.next_gaussian();
        m += g;
        v += g * g;
        k4 += g * g * g * g;
    }
    m /= n;
    v /= n;
    k4 /= n;
    CHECK(std::abs(m) < 0.02);
    CHECK(v == doctest::Approx(1.0).epsilon(0.02));
    CHECK(k4 == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("next_below is unbiased over a non-power-of-two range") {
    RngStream s(17, 3);
    std::vector<int64_t> counts(6, 0);
    const int64_t n = 60000;
    for (int64_t i = 0; i < n; ++i) ++counts[s.next_below(6)];
    double chi2 = 0.0;
    const double expect = double(n) / 6.0;
    for (int64_t c : counts) chi2 += (double(c) - expect) * (double(c) - expect) / expect;
    // chi^2(5) 99.9% quantile
    CHECK(chi2 < 20.515);
}

TEST_CASE("direction sampling is uniform for both 2d values") {
    for (int two_d : {6, 8}) {
        RngStream s(29, uint64_t(two_d));
        std::vector<int64_t> counts(two_d, 0);
        const int64_t n = 80000;
        for (int64_t i = 0; i < n; ++i) {
            uint32_t d = s.next_direction(two_d);
            REQUIRE(d < uint32_t(two_d));
            ++counts[d];
        }
        double chi2 = 0.0;
        const double expect = double(n) / two_d;
        for (int64_t c : counts) chi2 += (double(c) - expect) * (double(c) - expect) / expect;
        // chi^2(5) / chi^2(7) 99.9% quantiles
        CHECK(chi2 < (two_d == 6 ? 20.515 : 24.322));
    }
}

TEST_CASE("derive_stream matches direct construction") {
    RngStream a = derive_stream(101, 55);
    RngStream b(101, 55);
    for (int i = 0; i < 8; ++i) CHECK(a.next_u64() == b.next_u64());
}
