#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "capa/stats.hpp"

using namespace capa;

namespace {

MomentAccumulator acc_of(std::initializer_list<double> xs) {
    MomentAccumulator a;
    for (double x : xs) a.add(x);
    return a;
}

}  // namespace

TEST_CASE("welford basics") {
    MomentAccumulator a = acc_of({1.0, 2.0, 3.0});
    CHECK(a.count() == 3);
    CHECK(a.mean() == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(a.variance() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(acc_of({5.0}).variance() == 0.0);
    CHECK(acc_of({}).stderr_of_mean() == 0.0);
}

TEST_CASE("welford merge pools exactly") {
    MomentAccumulator a = acc_of({1.0, 2.0, 3.0});
    MomentAccumulator b = acc_of({4.0, 5.0});
    a.merge(b);
    CHECK(a.count() == 5);
    CHECK(a.mean() == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(a.variance() == doctest::Approx(2.5).epsilon(1e-15));

    // merge with empty is the identity
    MomentAccumulator e;
    MomentAccumulator c = acc_of({7.0, 9.0});
    double m = c.mean(), v = c.variance();
    c.merge(e);
    CHECK(c.count() == 2);
    CHECK(c.mean() == m);
    CHECK(c.variance() == v);
    e.merge(c);
    CHECK(e.mean() == m);
}

TEST_CASE("three-way merges are permutation invariant up to rounding") {
    MomentAccumulator p1 = acc_of({0.1, 2.7, -3.5});
    MomentAccumulator p2 = acc_of({10.0, 11.5});
    MomentAccumulator p3 = acc_of({-2.0, 0.0, 1.0, 4.4});
    MomentAccumulator ab = p1;
    ab.merge(p2);
    ab.merge(p3);
    MomentAccumulator cb = p3;
    cb.merge(p2);
    cb.merge(p1);
    CHECK(ab.count() == cb.count());
    CHECK(ab.mean() == doctest::Approx(cb.mean()).epsilon(1e-12));
    CHECK(ab.variance() == doctest::Approx(cb.variance()).epsilon(1e-12));
}

TEST_CASE("ks statistic hand cases") {
    CHECK(ks_statistic({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
    CHECK(ks_statistic({1.0, 2.0}, {10.0, 11.0, 12.0}) == 1.0);
    CHECK(ks_statistic({1.0, 2.0, 3.0}, {1.5, 2.5, 3.5}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS(ks_statistic({}, {1.0}), std::domain_error);
}

TEST_CASE("ks statistic symmetry and monotone-transform invariance") {
    std::vector<double> a{0.3, 1.1, -2.0, 0.7, 5.5, 0.0};
    std::vector<double> b{0.2, 0.9, 1.4, -1.0};
    double d = ks_statistic(a, b);
    CHECK(ks_statistic(b, a) == d);
    auto f = [](double x) { return std::exp(0.5 * x) + x; };  // strictly increasing
    std::vector<double> fa, fb;
    for (double x : a) fa.push_back(f(x));
    for (double x : b) fb.push_back(f(x));
    CHECK(ks_statistic(fa, fb) == d);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
}

TEST_CASE("bootstrap stderr of the mean tracks the analytic value") {
    RngStream s(31, 0);
    std::vector<double> xs;
    MomentAccumulator a;
    for (int i = 0; i < 400; ++i) {
        double x = s.next_gaussian();
        xs.push_back(x);
        a.add(x);
    }
    double boot = bootstrap_stderr_mean(xs, 500, RngStream(31, 1));
    CHECK(boot == doctest::Approx(a.stderr_of_mean()).epsilon(0.15));
    CHECK(bootstrap_stderr_var(xs, 500, RngStream(31, 2)) > 0.0);
}
