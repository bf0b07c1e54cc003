#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "capa/continuum.hpp"
#include "capa/rng.hpp"

using namespace capa;

TEST_CASE("window surrogate matches the double integral of the kernel mean") {
    // E G(M_s, M_t) = (2 pi)^{-1} sqrt(2/pi) |t-s|^{-1/2}; averaging over a
    // window needs (1/dt^2) int int |t-s|^{-1/2} = (8/3) dt^{-1/2}.
    const double dt = 0.013;
    const int n = 200000;
    double acc = 0.0;  // numeric outer integral, analytic inner integral
    for (int i = 0; i < n; ++i) {
        double t = (double(i) + 0.5) * dt / n;
        acc += 2.0 * (std::sqrt(t) + std::sqrt(dt - t));
    }
    acc *= dt / n;          // int int |t-s|^{-1/2} over the square
    acc /= dt * dt;         // window average
    acc *= std::sqrt(2.0 / kPi) / (2.0 * kPi);
    CHECK(bm_window_surrogate(dt) == doctest::Approx(acc).epsilon(1e-6));
    // dt^{-1/2} homogeneity
    CHECK(bm_window_surrogate(dt / 4.0) == doctest::Approx(2.0 * bm_window_surrogate(dt)).epsilon(1e-12));
}

TEST_CASE("disc patch surrogate matches a monte carlo pair average") {
    // sphere_cloud models a patch as a disc of radius rho; the mean of
    // 1/(2 pi |x-y|) over independent uniform points of that disc is
    // (1/2pi) * (16/(3 pi rho)).
    const double rho = 0.37;
    RngStream s(99, 5);
    double acc = 0.0;
    const int n = 2000000;
    for (int i = 0; i < n; ++i) {
        double r1 = rho * std::sqrt(s.next_unit()), a1 = 2.0 * kPi * s.next_unit();
        double r2 = rho * std::sqrt(s.next_unit()), a2 = 2.0 * kPi * s.next_unit();
        double dx = r1 * std::cos(a1) - r2 * std::cos(a2);
        double dy = r1 * std::sin(a1) - r2 * std::sin(a2);
        acc += 1.0 / (2.0 * kPi * std::sqrt(dx * dx + dy * dy));
    }
    acc /= n;
    double surrogate = (1.0 / (2.0 * kPi)) * 16.0 / (3.0 * kPi * rho);
    CHECK(surrogate == doctest::Approx(acc).epsilon(0.01));
}

TEST_CASE("sphere fixture reproduces the analytic capacity") {
    for (double r : {0.5, 1.0, 2.0}) {
        PointCloud c = sphere_cloud(r, 2000);
        // uniform weights are the equilibrium measure of a sphere
        std::vector<double> u(c.pts.size(), 1.0 / double(c.pts.size()));
        CHECK(energy(c, u) == doctest::Approx(1.0 / (2.0 * kPi * r)).epsilon(0.01));
        CapacityEstimate est = capacity_bm(c);
        CHECK(est.value == doctest::Approx(2.0 * kPi * r).epsilon(0.03));
        CHECK_FALSE(est.underpowered);
    }
}

TEST_CASE("capacity scales linearly under dilation") {
    PointCloud c = sphere_cloud(1.0, 800);
    double base = capacity_bm(c).value;
    for (double s : {0.5, 3.0}) {
        CHECK(capacity_bm(scale_cloud(c, s)).value == doctest::Approx(s * base).epsilon(0.01));
    }
    CHECK_THROWS_AS(scale_cloud(c, 0.0), std::domain_error);
}

TEST_CASE("frank-wolfe basics") {
    PointCloud c = sphere_cloud(1.0, 300);
    SimplexWeights w = minimize_energy_fw(c, 1e-6, 200000);
    double sum = 0.0;
    for (double wi : w.w) {
        CHECK(wi >= 0.0);
        sum += wi;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.gap >= 0.0);
    CHECK(w.converged);
    // the reported energy matches a from-scratch evaluation
    CHECK(w.energy == doctest::Approx(energy(c, w.w)).epsilon(1e-9));
    // minimal energy is no larger than any hand-picked competitor
    std::vector<double> uniform(c.pts.size(), 1.0 / double(c.pts.size()));
    CHECK(w.energy <= energy(c, uniform) * (1.0 + 1e-9));
    std::vector<double> spike(c.pts.size(), 0.0);
    spike[0] = 1.0;
    CHECK(w.energy <= energy(c, spike));
}

TEST_CASE("single point cloud is its own minimizer") {
    PointCloud c;
    c.pts = {{0.0, 0.0, 0.0}};
    c.diag = {4.2};
    SimplexWeights w = minimize_energy_fw(c);
    CHECK(w.energy == 4.2);
    CHECK(w.w[0] == 1.0);
    CHECK(w.converged);
}

TEST_CASE("occupation cloud merges coincident samples") {
    BrownianPath p;
    p.n_steps = 4;
    p.dt = 0.25;
    p.pts = {{0, 0, 0}, {1, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    PointCloud c = occupation_cloud(p, 4);
    REQUIRE(c.pts.size() == 3);  // the duplicated sample collapses
    // merged point carries the wider window: surrogate(2 dt) = surrogate(dt)/sqrt(2)
    CHECK(c.diag[0] == doctest::Approx(bm_window_surrogate(0.5) / std::sqrt(1.0)).epsilon(1e-12));
    CHECK(c.diag[0] == doctest::Approx(bm_window_surrogate(0.25) / std::sqrt(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(occupation_cloud(p, 5), std::domain_error);
    CHECK_THROWS_AS(occupation_cloud(p, 0), std::domain_error);
}

TEST_CASE("brownian cloud capacity is reproducible and positive") {
    BrownianPath p = simulate_bm(1024, RngStream(11, 3));
    PointCloud c = occupation_cloud(p, 256);
    double a = capacity_bm(c, 1e-3).value;
    double b = capacity_bm(occupation_cloud(simulate_bm(1024, RngStream(11, 3)), 256), 1e-3).value;
    CHECK(a == b);
    CHECK(a > 0.0);
}
