#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "capa/lattice.hpp"

namespace capa {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Coefficient of the far-field expansion G(0,x) ~ a_d (||x||_2 + 1)^{2-d}.
// a_3 = 3/(2*pi), a_4 = 2/pi^2.
double asym_coeff(int dim);
// s(d) = 1/a_d; s(4) = pi^2/2.
double far_field_inverse(int dim);

// Discrete Green function G(0,x) of the SRW on Z^d to ~1e-9 absolute, by
// panel quadrature of the time integral with modified-Bessel factors.
double green_exact(int dim, const LatticePoint& x);

// a_d * (||x||_2 + 1)^{2-d}
double green_asymptotic(int dim, const LatticePoint& x);

// Continuum Green function on R^3: (2*pi)^{-1} ||x-y||^{-1}.
double green_continuum(const std::array<double, 3>& x, const std::array<double, 3>& y);

// Hybrid evaluator: exact tabulated values for ||x||_inf <= rstar, the
// asymptotic branch beyond. Immutable once built; safe to share.
class GreenKernel {
public:
    static int default_rstar(int dim);  // 30 in d=3, 20 in d=4

    // Build by quadrature (deterministic; bit-identical across rebuilds).
    static GreenKernel build(int dim, int rstar);
    // Build with a persistent table cache keyed by (dim, rstar, version).
    static GreenKernel build_cached(int dim, int rstar, const std::filesystem::path& cache_dir);

    int dim() const { return dim_; }
    int rstar() const { return rstar_; }
    double g0() const { return g0_; }                  // G(0,0)
    double coeff() const { return a_; }                // a_d
    // Largest relative gap |table - asym|/table on the shell ||x||_inf = rstar.
    double matching_gap() const { return match_gap_; }

    double operator()(const Site& x) const { return green(x); }
    double green(const Site& x) const;
    // G(0,y-x)
    double green(const Site& x, const Site& y) const {
        Site dxy;
        for (int i = 0; i < 4; ++i) dxy[i] = y[i] - x[i];
        return green(dxy);
    }

    // Table value at absolute coordinates (all in [0, rstar]). No bounds check.
    double cube_at(int64_t ax, int64_t ay, int64_t az, int64_t aw) const {
        size_t idx = size_t(ax);
        idx = idx * side_ + size_t(ay);
        idx = idx * side_ + size_t(az);
        if (dim_ == 4) idx = idx * side_ + size_t(aw);
        return cube_[idx];
    }

    std::string cache_key() const;

private:
    GreenKernel() = default;
    int dim_ = 3;
    int rstar_ = 0;
    size_t side_ = 0;  // rstar + 1
    double g0_ = 0.0;
    double a_ = 0.0;
    double match_gap_ = 0.0;
    std::vector<double> cube_;  // dense over absolute coordinates

    friend GreenKernel build_kernel_table(int, int);
    static GreenKernel from_canonical(int dim, int rstar,
                                      const std::vector<std::pair<std::array<int, 4>, double>>& canon);
    static std::vector<std::pair<std::array<int, 4>, double>> compute_canonical(int dim, int rstar);
};

// Free-function alias for GreenKernel::build.
GreenKernel build_kernel_table(int dim, int rstar);

}  // namespace capa
