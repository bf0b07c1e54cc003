#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "capa/experiments.hpp"

using namespace capa;

TEST_CASE("rows are deterministic across worker counts") {
    std::vector<int64_t> ns{16, 64};
    ExperimentReport a = exp_d4_mean_curve(ns, 12, 4242, 1);
    ExperimentReport b = exp_d4_mean_curve(ns, 12, 4242, 2);
    ExperimentReport c = exp_d4_mean_curve(ns, 12, 4242, 4);
    CHECK(report_to_csv(a) == report_to_csv(b));
    CHECK(report_to_csv(a) == report_to_csv(c));
}

TEST_CASE("csv schema is fixed") {
    ExperimentReport r = exp_d3_second_moment({8}, 5, 7, 1);
    std::string csv = report_to_csv(r);
    CHECK(csv.rfind("n,replicas,mean,var,rel_var,ratio,stderr\n", 0) == 0);
    // one header plus one row per n
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    std::string js = report_to_json(r);
    CHECK(js.find("\"version\"") != std::string::npos);
    CHECK(js.find("\"master_seed\"") != std::string::npos);
    CHECK(js.find("\"git_describe\"") != std::string::npos);
}

TEST_CASE("one-step walk capacity is the two-point closed form") {
    // X[0,1] is always a pair of neighbors
    ExperimentReport r = exp_d4_mean_curve({1}, 8, 99, 1);
    GreenKernel k = GreenKernel::build(4, GreenKernel::default_rstar(4));
    double expect = 2.0 / (2.0 * k.g0() - 1.0);
    CHECK(r.rows[0].mean == doctest::Approx(expect).epsilon(1e-6));
    CHECK(std::abs(r.rows[0].var) < 1e-12);
}

TEST_CASE("wlln rejects a single replica") {
    CHECK_THROWS_AS(exp_d4_wlln({16}, 1, 1, 1), ConfigError);
    CHECK_THROWS_AS(exp_d4_mean_curve({16, 8}, 10, 1, 1), ConfigError);  // non-ascending grid
}

TEST_CASE("capacity samples are shared between experiments") {
    // same purpose stream ids, so the d4 experiments see identical replicas
    ExperimentReport a = exp_d4_mean_curve({32}, 10, 31337, 1);
    ExperimentReport b = exp_d4_wlln({32}, 10, 31337, 2);
    REQUIRE(a.samples[0].size() == b.samples[0].size());
    for (size_t i = 0; i < a.samples[0].size(); ++i) CHECK(a.samples[0][i] == b.samples[0][i]);
}

TEST_CASE("tau mechanism: s=1 gives ratio one, targets recorded") {
    ExperimentReport r = exp_tau_mechanism(64, {0.5, 1.0}, 10, 5, 1);
    REQUIRE(r.rows.size() == 2);
    CHECK(r.rows.back().n == 64);
    CHECK(r.rows.back().ratio == 1.0);
    CHECK(r.rows[0].n == 32);
    CHECK(r.extra.at("target_32") ==
          doctest::Approx(0.5 * std::log(64.0) / std::log(32.0)).epsilon(1e-12));
    CHECK(r.extra.at("target_64") == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.rows[0].ratio > 0.0);
    CHECK(r.rows[0].ratio < 1.0);
    CHECK_THROWS_AS(exp_tau_mechanism(64, {1.5}, 10, 5, 1), ConfigError);
}

TEST_CASE("rare-event mode reports hit starvation instead of averaging silence") {
    ExperimentReport r = exp_tau_mechanism(32, {0.5}, 4, 5, 1, 8.0, 50);
    CHECK(r.extra.at("tau_trials") == 50.0);
    CHECK(r.extra.count("tau_hits") == 1);
    if (r.extra.at("tau_hits") < 50.0) {
        CHECK(r.extra.at("tau_underpowered") == 1.0);
        CHECK_FALSE(r.warnings.empty());
    }
}

TEST_CASE("d3 limit wiring: scaling the bm sample away from 1 raises the ks distance") {
    ExperimentReport r = exp_d3_limit({64, 256}, 40, 256, 40, 2718, 2);
    REQUIRE(r.rows.size() == 2);
    const std::vector<double>& srw = r.samples[1];  // largest n
    std::vector<double> bm = r.samples.back();
    double base = ks_statistic(srw, bm);
    CHECK(base == doctest::Approx(r.rows[1].ratio).epsilon(1e-12));
    for (double c : {0.5, 2.0}) {
        std::vector<double> scaled = bm;
        for (double& x : scaled) x *= c;
        CHECK(ks_statistic(srw, scaled) > base);
    }
    CHECK(r.extra.at("scale_const") == doctest::Approx(1.0 / (3.0 * std::sqrt(3.0))).epsilon(1e-15));
}

TEST_CASE("second moment report carries the grid spread") {
    ExperimentReport r = exp_d3_second_moment({32, 128}, 25, 11, 2);
    CHECK(r.rows[0].ratio == doctest::Approx(r.rows[0].mean).epsilon(1e-15));
    CHECK(r.extra.at("max_over_min") >= 1.0);
    // zero-step walk: capacity of the singleton, deterministic
    ExperimentReport z = exp_d3_second_moment({0}, 3, 11, 1);
    GreenKernel k = GreenKernel::build(3, GreenKernel::default_rstar(3));
    double cap0 = 1.0 / k.g0();
    CHECK(z.rows[0].mean == doctest::Approx(cap0 * cap0).epsilon(1e-9));
    CHECK(std::abs(z.rows[0].var) < 1e-15);
}

TEST_CASE("format_double round trips") {
    for (double v : {0.1, 1.0 / 3.0, 1234.5678, 1e-17, 0.0}) {
        CHECK(std::stod(format_double(v)) == v);
    }
}
