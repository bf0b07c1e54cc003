#pragma once

#include <cstdint>
#include <vector>

#include "capa/rng.hpp"

namespace capa {

// Streaming mean/variance (Welford). merge() is exact, so parallel
// accumulation in a fixed order reproduces the serial result.
class MomentAccumulator {
public:
    void add(double x);
    void merge(const MomentAccumulator& other);

    int64_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const;      // unbiased, 0 for n < 2
    double stddev() const;
    double stderr_of_mean() const;

private:
    int64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|.
// Inputs need not be sorted.
double ks_statistic(std::vector<double> a, std::vector<double> b);

// Bootstrap standard error of the mean (resample with replacement).
double bootstrap_stderr_mean(const std::vector<double>& xs, int n_resamples, RngStream stream);

// Bootstrap standard error of the sample variance.
double bootstrap_stderr_var(const std::vector<double>& xs, int n_resamples, RngStream stream);

}  // namespace capa
