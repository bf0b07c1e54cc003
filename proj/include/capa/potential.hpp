#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "capa/green.hpp"
#include "capa/lattice.hpp"
#include "capa/rng.hpp"

namespace capa {

enum class SolveMethod { Auto, Cholesky, CG };

// Per-site equilibrium weights e_F on a finite set: the solution of
// sum_z G(x,z) e(z) = 1 for all x in F. Capacity is the weight sum.
struct EquilibriumSolution {
    int dim = 3;
    std::vector<Site> sites;       // same order as the input RangeSet
    std::vector<double> weights;   // negatives clamped to 0 on report
    double capacity = 0.0;         // sum of (unclamped) weights
    double residual = 0.0;         // max_x |sum_z G(x,z) e(z) - 1|
    double min_weight = 0.0;       // most negative raw weight (diagnostic)
    std::string method;
    int iterations = 0;
    double tol = 0.0;
};

struct CapacityEstimate {
    double value = 0.0;
    double stderr_ = 0.0;  // 0 for exact solves
    std::string method;    // exact-cholesky | exact-cg | mc-escape | mc-farpoint
    std::map<std::string, double> params;
    bool underpowered = false;
};

inline constexpr double kDefaultCholTol = 1e-8;
inline constexpr double kDefaultCgTol = 1e-6;
// Dense factorization above this size would dominate the budget.
inline constexpr size_t kCholeskyMaxSites = 4000;

EquilibriumSolution equilibrium_measure(const RangeSet& f, const GreenKernel& kernel,
                                        SolveMethod method = SolveMethod::Auto,
                                        double tol = 0.0);

CapacityEstimate capacity_exact(const RangeSet& f, const GreenKernel& kernel,
                                SolveMethod method = SolveMethod::Auto,
                                double tol = 0.0);

// P^x[tau(F) < inf] = sum_z G(x,z) e_F(z), clamped to [0,1].
double hitting_probability(const LatticePoint& x, const EquilibriumSolution& sol,
                           const GreenKernel& kernel);

struct McEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    int64_t successes = 0;
};

// Fraction of walks from x (in F) that exit the ball ||.||_2 <= r_stop around
// the origin before re-entering F. Raw truncated estimate, binomial stderr.
McEstimate escape_probability_mc(const LatticePoint& x, const RangeSet& f, double r_stop,
                                 int64_t trials, RngStream stream);

// |F| * mean corrected escape probability over a uniform site subset, with a
// one-pass self-consistent truncation correction.
CapacityEstimate capacity_mc(const RangeSet& f, const GreenKernel& kernel, size_t subset_size,
                             int64_t trials_per_site, double r_stop, RngStream stream);

// Hit frequency from the far start (K * radius, 0, ..) divided by G(x0);
// declared O(1/K) relative bias recorded in params["bias_bound"].
CapacityEstimate capacity_far_point(const RangeSet& f, const GreenKernel& kernel, double K,
                                    int64_t trials, RngStream stream);

}  // namespace capa
