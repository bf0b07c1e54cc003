#include "capa/lattice.hpp"

namespace capa {

Trajectory simulate_srw(int dim, int64_t n, RngStream stream) {
    if (dim != 3 && dim != 4) {
        throw ConfigError("simulate_srw: dimension must be 3 or 4");
    }
    if (n < 0) throw ConfigError("simulate_srw: negative step count");
    Trajectory t;
    t.dim = dim;
    t.master_seed = stream.master();
    t.stream_id = stream.stream();
    t.pts.reserve(size_t(n) + 1);
    Site x{};
    t.pts.push_back(x);
    const int two_d = 2 * dim;
    for (int64_t i = 0; i < n; ++i) {
        int dir = stream.next_direction(two_d);
        x[dir >> 1] += (dir & 1) ? 1 : -1;
        t.pts.push_back(x);
    }
    return t;
}

BrownianPath simulate_bm(int64_t n_steps, RngStream stream, double horizon) {
    if (n_steps < 1) throw ConfigError("simulate_bm: need n_steps >= 1");
    if (!(horizon > 0.0)) throw ConfigError("simulate_bm: need horizon > 0");
    BrownianPath p;
    p.n_steps = n_steps;
    p.dt = horizon / double(n_steps);
    p.master_seed = stream.master();
    p.stream_id = stream.stream();
    p.pts.reserve(size_t(n_steps) + 1);
    const double s = std::sqrt(p.dt);
    std::array<double, 3> x{0.0, 0.0, 0.0};
    p.pts.push_back(x);
    for (int64_t i = 0; i < n_steps; ++i) {
        for (int k = 0; k < 3; ++k) x[k] += s * stream.next_gaussian();
        p.pts.push_back(x);
    }
    return p;
}

uint64_t RangeSet::hash_site(const Site& p, int dim) {
    uint64_t h = 0x243F6A8885A308D3ull + uint64_t(dim);
    for (int i = 0; i < dim; ++i) {
        h ^= uint64_t(p[i]) + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
        h *= 0xFF51AFD7ED558CCDull;
        h ^= h >> 33;
    }
    return h;
}

void RangeSet::rebuild_table(size_t capacity) {
    size_t want = 16;
    while (want < 2 * capacity) want <<= 1;
    table_.assign(want, UINT32_MAX);
    mask_ = want - 1;
    for (size_t i = 0; i < sites_.size(); ++i) {
        uint64_t slot = hash_site(sites_[i], dim_) & mask_;
        while (table_[slot] != UINT32_MAX) slot = (slot + 1) & mask_;
        table_[slot] = uint32_t(i);
    }
}

size_t RangeSet::find_index(const Site& p) const {
    if (table_.empty()) return kNone;
    uint64_t slot = hash_site(p, dim_) & mask_;
    for (;;) {
        uint32_t idx = table_[slot];
        if (idx == UINT32_MAX) return kNone;
        const Site& q = sites_[idx];
        bool eq = true;
        for (int i = 0; i < dim_; ++i) {
            if (q[i] != p[i]) { eq = false; break; }
        }
        if (eq) return idx;
        slot = (slot + 1) & mask_;
    }
}

void RangeSet::insert(const Site& p) {
    if (2 * (sites_.size() + 1) > table_.size()) rebuild_table(sites_.size() + 1);
    uint64_t slot = hash_site(p, dim_) & mask_;
    for (;;) {
        uint32_t idx = table_[slot];
        if (idx == UINT32_MAX) break;
        const Site& q = sites_[idx];
        bool eq = true;
        for (int i = 0; i < dim_; ++i) {
            if (q[i] != p[i]) { eq = false; break; }
        }
        if (eq) return;  // already present
        slot = (slot + 1) & mask_;
    }
    table_[slot] = uint32_t(sites_.size());
    sites_.push_back(p);
    int64_t m = 0;
    for (int i = 0; i < dim_; ++i) m = std::max(m, std::abs(p[i]));
    bounding_radius_ = std::max(bounding_radius_, m);
}

RangeSet RangeSet::build(const Trajectory& t) {
    RangeSet r;
    r.dim_ = t.dim;
    r.sites_.reserve(t.pts.size());
    r.rebuild_table(t.pts.size());
    for (const Site& p : t.pts) r.insert(p);
    return r;
}

RangeSet RangeSet::from_sites(int dim, const std::vector<Site>& sites) {
    if (dim != 3 && dim != 4) throw ConfigError("RangeSet: dimension must be 3 or 4");
    RangeSet r;
    r.dim_ = dim;
    r.sites_.reserve(sites.size());
    r.rebuild_table(sites.size());
    for (const Site& p : sites) {
        Site q = p;
        for (int i = dim; i < 4; ++i) q[i] = 0;
        r.insert(q);
    }
    return r;
}

std::optional<int64_t> first_entrance(const Trajectory& t, const RangeSet& f) {
    for (size_t i = 0; i < t.pts.size(); ++i) {
        if (f.contains(t.pts[i])) return int64_t(i);
    }
    return std::nullopt;
}

std::optional<int64_t> hitting_time(const Trajectory& t, const RangeSet& f) {
    for (size_t i = 1; i < t.pts.size(); ++i) {
        if (f.contains(t.pts[i])) return int64_t(i);
    }
    return std::nullopt;
}

}  // namespace capa
