#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "capa/green.hpp"
#include "capa/lattice.hpp"

using namespace capa;

TEST_CASE("zero-step walk is the origin") {
    Trajectory t = simulate_srw(3, 0, RngStream(1, 1));
    REQUIRE(t.pts.size() == 1);
    CHECK(t.pts[0] == Site{0, 0, 0, 0});
    RangeSet f = RangeSet::build(t);
    CHECK(f.size() == 1);
    CHECK(f.bounding_radius() == 0);
}

TEST_CASE("unsupported dimension rejected") {
    CHECK_THROWS_AS(simulate_srw(2, 10, RngStream(1, 1)), ConfigError);
    CHECK_THROWS_AS(simulate_srw(5, 10, RngStream(1, 1)), ConfigError);
}

TEST_CASE("steps are unit moves and directions are balanced") {
    const int64_t n = 1000000;
    Trajectory t = simulate_srw(3, n, RngStream(2024, 1));
    std::vector<int64_t> dir_counts(6, 0);
    for (int64_t i = 1; i <= n; ++i) {
        int64_t l1 = 0;
        int moved = -1, sign = 0;
        for (int c = 0; c < 3; ++c) {
            int64_t d = t.pts[size_t(i)][c] - t.pts[size_t(i - 1)][c];
            l1 += std::llabs(d);
            if (d != 0) {
                moved = c;
                sign = d > 0 ? 1 : 0;
            }
        }
        REQUIRE(l1 == 1);
        ++dir_counts[size_t(2 * moved + sign)];
    }
    // binomial 3-sigma band around n/6
    const double expect = double(n) / 6.0;
    const double band = 3.0 * std::sqrt(double(n) * (1.0 / 6.0) * (5.0 / 6.0));
    for (int64_t c : dir_counts) {
        CHECK(double(c) > expect - band);
        CHECK(double(c) < expect + band);
    }
}

TEST_CASE("mean squared displacement is n") {
    const int64_t n = 100000;
    double acc = 0.0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
        Trajectory t = simulate_srw(4, n, RngStream(7, uint64_t(r)));
        const Site& e = t.pts.back();
        double r2 = 0.0;
        for (int c = 0; c < 4; ++c) r2 += double(e[c]) * double(e[c]);
        acc += r2 / double(n);
    }
    CHECK(acc / reps == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("range deduplicates in first-visit order") {
    Trajectory t;
    t.dim = 3;
    t.pts = {Site{0, 0, 0, 0}, Site{1, 0, 0, 0}, Site{0, 0, 0, 0}};
    RangeSet f = RangeSet::build(t);
    REQUIRE(f.size() == 2);
    CHECK(f.sites()[0] == Site{0, 0, 0, 0});
    CHECK(f.sites()[1] == Site{1, 0, 0, 0});
    CHECK(f.contains(Site{1, 0, 0, 0}));
    CHECK_FALSE(f.contains(Site{2, 0, 0, 0}));
    // idempotent rebuild
    RangeSet g = RangeSet::build(t);
    CHECK(g.size() == f.size());
    for (size_t i = 0; i < f.size(); ++i) CHECK(f.sites()[i] == g.sites()[i]);
}

TEST_CASE("range density approaches the escape probability") {
    GreenKernel k = GreenKernel::build(3, GreenKernel::default_rstar(3));
    const double escape = 1.0 / k.g0();  // ~0.6595
    const int64_t n = 100000;
    double acc = 0.0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
        RangeSet f = RangeSet::build(simulate_srw(3, n, RngStream(31, uint64_t(r))));
        acc += double(f.size()) / double(n);
    }
    CHECK(acc / reps == doctest::Approx(escape).epsilon(0.015));
}

TEST_CASE("first_entrance and hitting_time hand cases") {
    Trajectory t;
    t.dim = 3;
    t.pts = {Site{0, 0, 0, 0}, Site{1, 0, 0, 0}, Site{0, 0, 0, 0}};
    RangeSet fx = RangeSet::from_sites(3, {Site{1, 0, 0, 0}});
    CHECK(first_entrance(t, fx).value() == 1);
    RangeSet f0 = RangeSet::from_sites(3, {Site{0, 0, 0, 0}});
    CHECK(first_entrance(t, f0).value() == 0);
    CHECK(hitting_time(t, f0).value() == 2);
    RangeSet far = RangeSet::from_sites(3, {Site{9, 9, 9, 0}});
    CHECK_FALSE(first_entrance(t, far).has_value());
    CHECK_FALSE(hitting_time(t, far).has_value());
}

TEST_CASE("entrance and hitting agree with a linear scan oracle") {
    for (int rep = 0; rep < 10000; ++rep) {
        RngStream s(55, uint64_t(rep));
        Trajectory t = simulate_srw(3, 20, s);
        // random 3-site target set near the origin
        std::vector<Site> sites;
        for (int j = 0; j < 3; ++j) {
            Site p{0, 0, 0, 0};
            for (int c = 0; c < 3; ++c) p[c] = int64_t(s.next_below(7)) - 3;
            sites.push_back(p);
        }
        RangeSet f = RangeSet::from_sites(3, sites);
        int64_t scan_fe = -1, scan_ht = -1;
        for (int64_t i = 0; i < int64_t(t.pts.size()); ++i) {
            bool in = f.contains(t.pts[size_t(i)]);
            if (in && scan_fe < 0) scan_fe = i;
            if (in && i >= 1 && scan_ht < 0) scan_ht = i;
        }
        auto fe = first_entrance(t, f);
        auto ht = hitting_time(t, f);
        CHECK(fe.value_or(-1) == scan_fe);
        CHECK(ht.value_or(-1) == scan_ht);
        if (fe && !f.contains(t.pts[0])) CHECK(fe.value() == ht.value());
        if (fe && ht) CHECK(fe.value() <= ht.value());
    }
}

TEST_CASE("brownian endpoint is standard gaussian and scaling holds") {
    double var0 = 0.0, msq = 0.0, msq_s = 0.0;
    const int reps = 100000;
    const double s = 0.25;
    for (int r = 0; r < reps; ++r) {
        BrownianPath p = simulate_bm(1, RngStream(77, uint64_t(r)));
        var0 += p.pts.back()[0] * p.pts.back()[0];
        for (double c : p.pts.back()) msq += c * c;
        BrownianPath q = simulate_bm(4, RngStream(78, uint64_t(r)), s);
        for (double c : q.pts.back()) msq_s += c * c;
    }
    CHECK(var0 / reps == doctest::Approx(1.0).epsilon(0.01));
    CHECK(msq / reps == doctest::Approx(3.0).epsilon(0.02));
    CHECK(msq_s / reps == doctest::Approx(3.0 * s).epsilon(0.02));
}

TEST_CASE("identical streams give identical trajectories, distinct ids differ") {
    Trajectory a = simulate_srw(4, 1000, derive_stream(9, 0));
    Trajectory b = simulate_srw(4, 1000, derive_stream(9, 0));
    Trajectory c = simulate_srw(4, 1000, derive_stream(9, 1));
    CHECK(a.pts == b.pts);
    CHECK(a.pts != c.pts);
}
