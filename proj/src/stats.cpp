#include "capa/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace capa {

void MomentAccumulator::add(double x) {
    ++n_;
    double d = x - mean_;
    mean_ += d / double(n_);
    m2_ += d * (x - mean_);
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
    if (other.n_ == 0) return;
    if (n_ == 0) {
        *this = other;
        return;
    }
    int64_t n = n_ + other.n_;
    double d = other.mean_ - mean_;
    mean_ += d * double(other.n_) / double(n);
    m2_ += other.m2_ + d * d * double(n_) * double(other.n_) / double(n);
    n_ = n;
}

double MomentAccumulator::variance() const {
    return n_ < 2 ? 0.0 : m2_ / double(n_ - 1);
}

double MomentAccumulator::stddev() const { return std::sqrt(variance()); }

double MomentAccumulator::stderr_of_mean() const {
    return n_ < 2 ? 0.0 : std::sqrt(variance() / double(n_));
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::domain_error("ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = double(a.size()), nb = double(b.size());
    size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(double(i) / na - double(j) / nb));
    }
    return d;
}

namespace {

template <typename Stat>
double bootstrap_stderr(const std::vector<double>& xs, int n_resamples, RngStream& stream,
                        Stat stat) {
    if (xs.size() < 2 || n_resamples < 2) return 0.0;
    const uint64_t n = xs.size();
    std::vector<double> resample(n);
    MomentAccumulator acc;
    for (int r = 0; r < n_resamples; ++r) {
        for (uint64_t k = 0; k < n; ++k) resample[k] = xs[stream.next_below(n)];
        acc.add(stat(resample));
    }
    return acc.stddev();
}

}  // namespace

double bootstrap_stderr_mean(const std::vector<double>& xs, int n_resamples, RngStream stream) {
    return bootstrap_stderr(xs, n_resamples, stream, [](const std::vector<double>& v) {
        MomentAccumulator a;
        for (double x : v) a.add(x);
        return a.mean();
    });
}

double bootstrap_stderr_var(const std::vector<double>& xs, int n_resamples, RngStream stream) {
    return bootstrap_stderr(xs, n_resamples, stream, [](const std::vector<double>& v) {
        MomentAccumulator a;
        for (double x : v) a.add(x);
        return a.variance();
    });
}

}  // namespace capa
