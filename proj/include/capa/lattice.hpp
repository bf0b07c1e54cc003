#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "capa/rng.hpp"

namespace capa {

using Site = std::array<int64_t, 4>;  // unused coordinates stay zero

struct LatticePoint {
    Site c{};
    int dim = 3;

    int64_t norm1() const {
        int64_t s = 0;
        for (int i = 0; i < dim; ++i) s += std::abs(c[i]);
        return s;
    }
    int64_t norm_inf() const {
        int64_t m = 0;
        for (int i = 0; i < dim; ++i) m = std::max(m, std::abs(c[i]));
        return m;
    }
    int64_t norm2_sq() const {
        int64_t s = 0;
        for (int i = 0; i < dim; ++i) s += c[i] * c[i];
        return s;
    }
    double norm2() const { return std::sqrt(double(norm2_sq())); }

    bool operator==(const LatticePoint&) const = default;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Nearest-neighbour lattice walk; pts.front() is the start site.
struct Trajectory {
    int dim = 3;
    std::vector<Site> pts;
    uint64_t master_seed = 0;
    uint64_t stream_id = 0;

    int64_t steps() const { return int64_t(pts.size()) - 1; }
};

// Brownian path on [0, horizon], sampled every dt = horizon / n_steps.
// The recorded points are the running sums of the Gaussian draws * sqrt(dt).
struct BrownianPath {
    int64_t n_steps = 0;
    double dt = 0.0;
    std::vector<std::array<double, 3>> pts;
    uint64_t master_seed = 0;
    uint64_t stream_id = 0;
};

Trajectory simulate_srw(int dim, int64_t n, RngStream stream);
BrownianPath simulate_bm(int64_t n_steps, RngStream stream, double horizon = 1.0);

// Distinct sites of a trajectory in first-visit order, with O(1) membership.
class RangeSet {
public:
    RangeSet() = default;

    static RangeSet build(const Trajectory& t);
    static RangeSet from_sites(int dim, const std::vector<Site>& sites);

    int dim() const { return dim_; }
    size_t size() const { return sites_.size(); }
    bool empty() const { return sites_.empty(); }
    std::span<const Site> sites() const { return sites_; }
    bool contains(const Site& p) const { return find_index(p) != kNone; }
    // Index of p in first-visit order, or SIZE_MAX.
    size_t find_index(const Site& p) const;
    // max over sites of ||x||_inf
    int64_t bounding_radius() const { return bounding_radius_; }

    static constexpr size_t kNone = SIZE_MAX;

private:
    static uint64_t hash_site(const Site& p, int dim);
    void insert(const Site& p);
    void rebuild_table(size_t capacity);

    int dim_ = 3;
    std::vector<Site> sites_;
    std::vector<uint32_t> table_;  // open addressing, power of two, UINT32_MAX = empty
    uint64_t mask_ = 0;
    int64_t bounding_radius_ = 0;
};

std::optional<int64_t> first_entrance(const Trajectory& t, const RangeSet& f);
std::optional<int64_t> hitting_time(const Trajectory& t, const RangeSet& f);

}  // namespace capa
