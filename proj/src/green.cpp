#include "capa/green.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace capa {

double asym_coeff(int dim) {
    if (dim == 3) return 3.0 / (2.0 * kPi);
    if (dim == 4) return 2.0 / (kPi * kPi);
    throw ConfigError("asym_coeff: dimension must be 3 or 4");
}

double far_field_inverse(int dim) { return 1.0 / asym_coeff(dim); }

double green_asymptotic(int dim, const LatticePoint& x) {
    double r = x.norm2() + 1.0;
    return dim == 3 ? asym_coeff(3) / r : asym_coeff(4) / (r * r);
}

double green_continuum(const std::array<double, 3>& x, const std::array<double, 3>& y) {
    double dx = x[0] - y[0], dy = x[1] - y[1], dz = x[2] - y[2];
    double r = std::sqrt(dx * dx + dy * dy + dz * dz);
    if (r == 0.0) throw std::domain_error("green_continuum: coincident points");
    return 1.0 / (2.0 * kPi * r);
}

namespace {

// ---------------------------------------------------------------------------
// Quadrature machinery.
//
// G(0,x) = int_0^inf e^{-t} prod_i I_{|x_i|}(t/d) dt
//        = int_0^inf prod_i [e^{-t/d} I_{|x_i|}(t/d)] dt,
// evaluated by Gauss-Legendre panels [0,1],[1,2],[2,4],...,[A/2,A] with
// A = 2^21, plus the analytic tail
//   int_A^inf (d/(2*pi*t))^{d/2} e^{-d*||x||^2/(2t)} dt,
// which is the uniform large-t form of the integrand; the neglected Bessel
// corrections are O(1/A) relative to a tail of ~5e-4, i.e. < 1e-9 absolute.
// ---------------------------------------------------------------------------

constexpr double kTailCut = 2097152.0;  // 2^21

// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
}

// Scaled modified Bessel values i_n(z) = e^{-z} I_n(z), n = 0..nmax, by
// Miller backward recurrence normalized with e^{-z}(I_0 + 2*sum I_k) = 1.
void scaled_bessel_iv(double z, int nmax, double* out) {
    if (z == 0.0) {
        out[0] = 1.0;
        for (int n = 1; n <= nmax; ++n) out[n] = 0.0;
        return;
    }
    int start = nmax + 30 + int(12.0 * std::sqrt(z));
    double fkp1 = 0.0, fk = 1e-280;
    double sum = 0.0;  // accumulates f_0 + 2 * sum_{k>=1} f_k
    for (int k = start; k >= 1; --k) {
        if (k <= nmax) out[k] = fk;
        sum += 2.0 * fk;
        double fkm1 = fkp1 + (2.0 * k / z) * fk;
        fkp1 = fk;
        fk = fkm1;
        if (std::abs(fk) > 1e260) {
            const double sc = 1e-260;
            fk *= sc;
            fkp1 *= sc;
            sum *= sc;
            for (int n = std::max(k - 1, 1); n <= nmax; ++n) out[n] *= sc;
        }
    }
    out[0] = fk;
    sum += fk;
    for (int n = 0; n <= nmax; ++n) out[n] /= sum;
}

struct PanelGrid {
    std::vector<double> t;  // nodes
    std::vector<double> w;  // weights
};

PanelGrid make_grid(int order) {
    std::vector<double> gx, gw;
    gauss_legendre(order, gx, gw);
    PanelGrid g;
    double lo = 0.0, hi = 1.0;
    while (lo < kTailCut) {
        double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        for (int i = 0; i < order; ++i) {
            g.t.push_back(mid + half * gx[i]);
            g.w.push_back(half * gw[i]);
        }
        lo = hi;
        hi = std::min(2.0 * hi, kTailCut);
        if (lo >= kTailCut) break;
    }
    return g;
}

double tail_integral(int dim, double norm2_sq) {
    double q = 0.5 * dim * norm2_sq;
    if (dim == 3) {
        double c = std::pow(3.0 / (2.0 * kPi), 1.5);
        if (q == 0.0) return c * 2.0 / std::sqrt(kTailCut);
        return c * std::sqrt(kPi / q) * std::erf(std::sqrt(q / kTailCut));
    }
    double c = 4.0 / (kPi * kPi);
    if (q == 0.0) return c / kTailCut;
    return c * (1.0 - std::exp(-q / kTailCut)) / q;
}

// Bessel table over a grid: bess[node][n] for n = 0..nmax.
std::vector<std::vector<double>> bessel_table(const PanelGrid& g, int dim, int nmax) {
    std::vector<std::vector<double>> b(g.t.size(), std::vector<double>(nmax + 1));
    for (size_t k = 0; k < g.t.size(); ++k) {
        scaled_bessel_iv(g.t[k] / dim, nmax, b[k].data());
    }
    return b;
}

double integrate_offset(const PanelGrid& g, const std::vector<std::vector<double>>& bess,
                        int dim, const std::array<int, 4>& a) {
    double s = 0.0;
    for (size_t k = 0; k < g.t.size(); ++k) {
        const double* bk = bess[k].data();
        double p = bk[a[0]] * bk[a[1]] * bk[a[2]];
        if (dim == 4) p *= bk[a[3]];
        s += g.w[k] * p;
    }
    double n2 = 0.0;
    for (int i = 0; i < dim; ++i) n2 += double(a[i]) * double(a[i]);
    return s + tail_integral(dim, n2);
}

// Quadrature with the built-in refinement check: the 16- and 24-point panel
// rules must agree to 1e-10, else the quadrature has not converged.
double green_quadrature(int dim, const std::array<int, 4>& a) {
    static thread_local std::map<int, std::pair<PanelGrid, PanelGrid>> grids;
    auto it = grids.find(0);
    if (it == grids.end()) {
        it = grids.emplace(0, std::make_pair(make_grid(16), make_grid(24))).first;
    }
    const PanelGrid& g1 = it->second.first;
    const PanelGrid& g2 = it->second.second;
    int nmax = std::max({a[0], a[1], a[2], a[3]});
    auto b1 = bessel_table(g1, dim, nmax);
    auto b2 = bessel_table(g2, dim, nmax);
    double v1 = integrate_offset(g1, b1, dim, a);
    double v2 = integrate_offset(g2, b2, dim, a);
    if (std::abs(v1 - v2) > 1e-10) {
        std::ostringstream os;
        os << "green quadrature did not converge at offset (" << a[0] << "," << a[1]
           << "," << a[2] << "," << a[3] << "): rule gap " << std::abs(v1 - v2);
        throw NumericError(os.str());
    }
    return v2;
}

std::array<int, 4> canonical_abs(const Site& x, int dim) {
    std::array<int, 4> a{0, 0, 0, 0};
    for (int i = 0; i < dim; ++i) a[i] = int(std::abs(x[i]));
    std::sort(a.begin(), a.begin() + dim, std::greater<int>());
    return a;
}

}  // namespace

double green_exact(int dim, const LatticePoint& x) {
    if (dim != 3 && dim != 4) throw ConfigError("green_exact: dimension must be 3 or 4");
    return green_quadrature(dim, canonical_abs(x.c, dim));
}

int GreenKernel::default_rstar(int dim) { return dim == 3 ? 30 : 20; }

std::vector<std::pair<std::array<int, 4>, double>> GreenKernel::compute_canonical(int dim, int rstar) {
    PanelGrid g1 = make_grid(16), g2 = make_grid(24);
    auto b1 = bessel_table(g1, dim, rstar);
    auto b2 = bessel_table(g2, dim, rstar);
    std::vector<std::pair<std::array<int, 4>, double>> out;
    std::array<int, 4> a{0, 0, 0, 0};
    for (a[0] = 0; a[0] <= rstar; ++a[0]) {
        for (a[1] = 0; a[1] <= a[0]; ++a[1]) {
            for (a[2] = 0; a[2] <= a[1]; ++a[2]) {
                int w_hi = (dim == 4) ? a[2] : 0;
                for (a[3] = 0; a[3] <= w_hi; ++a[3]) {
                    double v1 = integrate_offset(g1, b1, dim, a);
                    double v2 = integrate_offset(g2, b2, dim, a);
                    if (std::abs(v1 - v2) > 1e-10) {
                        throw NumericError("green table quadrature did not converge");
                    }
                    out.push_back({a, v2});
                    if (dim == 3) break;
                }
            }
        }
    }
    return out;
}

GreenKernel GreenKernel::from_canonical(int dim, int rstar,
                                        const std::vector<std::pair<std::array<int, 4>, double>>& canon) {
    GreenKernel k;
    k.dim_ = dim;
    k.rstar_ = rstar;
    k.side_ = size_t(rstar) + 1;
    k.a_ = asym_coeff(dim);
    std::map<std::array<int, 4>, double> m;
    for (const auto& [a, v] : canon) m[a] = v;
    size_t total = 1;
    for (int i = 0; i < dim; ++i) total *= k.side_;
    k.cube_.assign(total, 0.0);
    std::array<int, 4> a{0, 0, 0, 0};
    for (a[0] = 0; a[0] <= rstar; ++a[0]) {
        for (a[1] = 0; a[1] <= rstar; ++a[1]) {
            for (a[2] = 0; a[2] <= rstar; ++a[2]) {
                int w_hi = (dim == 4) ? rstar : 0;
                for (a[3] = 0; a[3] <= w_hi; ++a[3]) {
                    std::array<int, 4> c = a;
                    std::sort(c.begin(), c.begin() + dim, std::greater<int>());
                    size_t idx = size_t(a[0]);
                    idx = idx * k.side_ + size_t(a[1]);
                    idx = idx * k.side_ + size_t(a[2]);
                    if (dim == 4) idx = idx * k.side_ + size_t(a[3]);
                    k.cube_[idx] = m.at(c);
                }
            }
        }
    }
    k.g0_ = k.cube_[0];
    // Matching gap on the shell ||x||_inf = rstar, against the far branch.
    double gap = 0.0;
    for (const auto& [c, v] : m) {
        if (c[0] != rstar) continue;
        double n2 = 0.0;
        for (int i = 0; i < dim; ++i) n2 += double(c[i]) * double(c[i]);
        double r = std::sqrt(n2);
        double asym = (dim == 3) ? k.a_ / r : k.a_ / (r * r);
        gap = std::max(gap, std::abs(v - asym) / v);
    }
    k.match_gap_ = gap;
    return k;
}

GreenKernel GreenKernel::build(int dim, int rstar) {
    if (dim != 3 && dim != 4) throw ConfigError("GreenKernel: dimension must be 3 or 4");
    if (rstar < 2) throw ConfigError("GreenKernel: rstar must be >= 2");
    return from_canonical(dim, rstar, compute_canonical(dim, rstar));
}

GreenKernel build_kernel_table(int dim, int rstar) { return GreenKernel::build(dim, rstar); }

std::string GreenKernel::cache_key() const {
    std::ostringstream os;
    os << "green-d" << dim_ << "-r" << rstar_ << "-q1";
    return os.str();
}

GreenKernel GreenKernel::build_cached(int dim, int rstar, const std::filesystem::path& cache_dir) {
    std::ostringstream name;
    name << "green-d" << dim << "-r" << rstar << "-q1.tbl";
    std::filesystem::path file = cache_dir / name.str();
    if (std::filesystem::exists(file)) {
        std::ifstream in(file);
        std::string magic;
        int fd = 0, fr = 0;
        in >> magic >> fd >> fr;
        if (magic == "capa-green-q1" && fd == dim && fr == rstar) {
            std::vector<std::pair<std::array<int, 4>, double>> canon;
            std::array<int, 4> a;
            std::string hex;
            while (in >> a[0] >> a[1] >> a[2] >> a[3] >> hex) {
                canon.push_back({a, std::strtod(hex.c_str(), nullptr)});
            }
            if (!canon.empty()) return from_canonical(dim, rstar, canon);
        }
    }
    GreenKernel k = build(dim, rstar);
    std::error_code ec;
    std::filesystem::create_directories(cache_dir, ec);
    auto canon = compute_canonical(dim, rstar);  // deterministic; cheap relative to use
    std::ofstream out(file);
    out << "capa-green-q1 " << dim << " " << rstar << "\n";
    char buf[64];
    for (const auto& [a, v] : canon) {
        std::snprintf(buf, sizeof buf, "%.13a", v);
        out << a[0] << " " << a[1] << " " << a[2] << " " << a[3] << " " << buf << "\n";
    }
    return k;
}

double GreenKernel::green(const Site& x) const {
    int64_t ax = std::abs(x[0]), ay = std::abs(x[1]), az = std::abs(x[2]);
    int64_t aw = dim_ == 4 ? std::abs(x[3]) : 0;
    int64_t m = std::max(std::max(ax, ay), std::max(az, aw));
    if (m <= rstar_) return cube_at(ax, ay, az, aw);
    // Sharp classical far field a_d * ||x||^{2-d}; its relative gap against
    // the table at the crossover shell is O(rstar^-2) (see matching_gap).
    double n2 = double(ax) * ax + double(ay) * ay + double(az) * az + double(aw) * aw;
    double r = std::sqrt(n2);
    return dim_ == 3 ? a_ / r : a_ / (r * r);
}

}  // namespace capa
