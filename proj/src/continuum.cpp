#include "capa/continuum.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace capa {

namespace {

constexpr double kTwoPi = 2.0 * kPi;

inline double kernel(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return 1.0 / (kTwoPi * std::sqrt(dx * dx + dy * dy + dz * dz));
}

}  // namespace

double bm_window_surrogate(double dt) {
    // Window-averaged kernel: E G(M_s, M_t) = (2*pi)^{-1} sqrt(2/pi) |t-s|^{-1/2},
    // integrated twice over a window of width dt gives the 8/3 factor.
    return (1.0 / kTwoPi) * std::sqrt(2.0 / kPi) * (8.0 / 3.0) / std::sqrt(dt);
}

PointCloud occupation_cloud(const BrownianPath& path, size_t n_points) {
    if (n_points < 1 || int64_t(n_points) > path.n_steps) {
        throw std::domain_error("occupation_cloud: need 1 <= N <= path samples");
    }
    const double delta = 1.0 / double(n_points);
    PointCloud c;
    c.provenance = "bm-path";
    c.dt = delta;
    std::map<std::array<double, 3>, size_t> seen;
    std::vector<size_t> mult;
    for (size_t i = 1; i <= n_points; ++i) {
        size_t idx = (i * size_t(path.n_steps)) / n_points;
        const auto& p = path.pts[idx];
        auto it = seen.find(p);
        if (it == seen.end()) {
            seen.emplace(p, c.pts.size());
            c.pts.push_back(p);
            mult.push_back(1);
        } else {
            ++mult[it->second];  // windows combine
        }
    }
    c.diag.resize(c.pts.size());
    for (size_t i = 0; i < c.pts.size(); ++i) {
        c.diag[i] = bm_window_surrogate(double(mult[i]) * delta);
    }
    return c;
}

PointCloud sphere_cloud(double r, size_t n_points) {
    if (n_points < 4) throw std::domain_error("sphere_cloud: need N >= 4");
    if (!(r > 0.0)) throw std::domain_error("sphere_cloud: need r > 0");
    PointCloud c;
    c.provenance = "sphere";
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    // Patch of area 4*pi*r^2/N as a disc: mean inverse distance on a disc of
    // radius rho is 16/(3*pi*rho).
    const double rho = 2.0 * r / std::sqrt(double(n_points));
    const double surrogate = (1.0 / kTwoPi) * 16.0 / (3.0 * kPi * rho);
    for (size_t i = 0; i < n_points; ++i) {
        double z = 1.0 - (2.0 * double(i) + 1.0) / double(n_points);
        double s = std::sqrt(std::max(0.0, 1.0 - z * z));
        double phi = golden * double(i);
        c.pts.push_back({r * s * std::cos(phi), r * s * std::sin(phi), r * z});
        c.diag.push_back(surrogate);
    }
    return c;
}

PointCloud scale_cloud(const PointCloud& c, double s) {
    if (!(s > 0.0)) throw std::domain_error("scale_cloud: need s > 0");
    PointCloud out = c;
    for (auto& p : out.pts)
        for (double& v : p) v *= s;
    for (double& d : out.diag) d /= s;
    if (out.dt > 0.0) out.dt *= s * s;  // Brownian time scales like length^2
    return out;
}

double energy(const PointCloud& cloud, const std::vector<double>& w) {
    const size_t n = cloud.pts.size();
    if (w.size() != n) throw std::domain_error("energy: weight/cloud size mismatch");
    double e = 0.0;
    for (size_t i = 0; i < n; ++i) {
        e += w[i] * w[i] * cloud.diag[i];
        for (size_t j = i + 1; j < n; ++j) {
            e += 2.0 * w[i] * w[j] * kernel(cloud.pts[i], cloud.pts[j]);
        }
    }
    return e;
}

SimplexWeights minimize_energy_fw(const PointCloud& cloud, double tol_rel, int64_t max_iter) {
    const size_t n = cloud.pts.size();
    if (n == 0) throw std::domain_error("minimize_energy_fw: empty cloud");
    if (max_iter <= 0) max_iter = 50 * int64_t(n);

    SimplexWeights res;
    res.w.assign(n, 1.0 / double(n));
    if (n == 1) {
        res.energy = cloud.diag[0];
        res.gap = 0.0;
        res.converged = true;
        return res;
    }

    // g = Q w maintained across iterations; E = w' Q w.
    std::vector<double> g(n, 0.0);
    std::vector<double> col(n);
    auto fill_gradient = [&]() {
        std::fill(g.begin(), g.end(), 0.0);
        for (size_t i = 0; i < n; ++i) {
            g[i] += cloud.diag[i] * res.w[i];
            for (size_t j = i + 1; j < n; ++j) {
                double q = kernel(cloud.pts[i], cloud.pts[j]);
                g[i] += q * res.w[j];
                g[j] += q * res.w[i];
            }
        }
    };
    fill_gradient();
    double e = 0.0;
    for (size_t i = 0; i < n; ++i) e += res.w[i] * g[i];

    int64_t it = 0;
    for (; it < max_iter; ++it) {
        size_t s = 0;
        double gmin = g[0];
        for (size_t i = 1; i < n; ++i) {
            if (g[i] < gmin) {
                gmin = g[i];
                s = i;
            }
        }
        res.gap = 2.0 * (e - gmin);
        if (res.gap <= tol_rel * e) {
            res.converged = true;
            break;
        }
        const double qss = cloud.diag[s];
        for (size_t j = 0; j < n; ++j) {
            col[j] = j == s ? qss : kernel(cloud.pts[j], cloud.pts[s]);
        }
        double denom = e - 2.0 * gmin + qss;
        double gamma = denom > 0.0 ? std::clamp((e - gmin) / denom, 0.0, 1.0) : 1.0;
        const double om = 1.0 - gamma;
        e = om * om * e + 2.0 * gamma * om * gmin + gamma * gamma * qss;
        for (size_t j = 0; j < n; ++j) {
            res.w[j] *= om;
            g[j] = om * g[j] + gamma * col[j];
        }
        res.w[s] += gamma;
        // Control drift of the maintained gradient on long runs.
        if ((it & 0x3FFF) == 0x3FFF) {
            fill_gradient();
            e = 0.0;
            for (size_t i = 0; i < n; ++i) e += res.w[i] * g[i];
        }
    }
    res.energy = e;
    res.iterations = it;
    return res;
}

CapacityEstimate capacity_bm(const PointCloud& cloud, double tol_rel, int64_t max_iter) {
    SimplexWeights w = minimize_energy_fw(cloud, tol_rel, max_iter);
    CapacityEstimate est;
    est.value = 1.0 / w.energy;
    // The duality gap bounds the energy suboptimality, hence the capacity error.
    double e_lo = std::max(w.energy - w.gap, 1e-300);
    est.stderr_ = 1.0 / e_lo - 1.0 / w.energy;
    est.method = "bm-energy-fw";
    est.params["energy"] = w.energy;
    est.params["gap"] = w.gap;
    est.params["iterations"] = double(w.iterations);
    est.params["points"] = double(cloud.pts.size());
    est.underpowered = !w.converged;
    return est;
}

}  // namespace capa
