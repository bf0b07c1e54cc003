#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "capa/lattice.hpp"
#include "capa/potential.hpp"

namespace capa {

// Discretized support of a measure in R^3. diag[i] is the self-energy
// surrogate of the patch the point stands for (Green-kernel units).
struct PointCloud {
    std::vector<std::array<double, 3>> pts;
    std::vector<double> diag;
    std::string provenance;  // "bm-path" | "sphere" | "custom"
    double dt = 0.0;         // bm-path time step, 0 otherwise
};

// Self-energy of a Brownian time window of width dt around a sample:
// (2*pi)^{-1} * sqrt(2/pi) * (8/3) * dt^{-1/2}.
double bm_window_surrogate(double dt);

// Cloud of N points M_{i/N} from a Brownian path on [0,1]; exactly
// coincident samples are merged and their windows combined.
PointCloud occupation_cloud(const BrownianPath& path, size_t n_points);

// N quasi-uniform points on the radius-r sphere (deterministic spiral);
// surrogate = self-energy of a disc-shaped patch of area 4*pi*r^2/N.
PointCloud sphere_cloud(double r, size_t n_points);

// Scale all points by s (surrogates scale by 1/s).
PointCloud scale_cloud(const PointCloud& c, double s);

// sum_{i != j} w_i w_j G(x_i, x_j) + sum_i w_i^2 diag_i
double energy(const PointCloud& cloud, const std::vector<double>& w);

struct SimplexWeights {
    std::vector<double> w;  // on the simplex
    double energy = 0.0;
    double gap = 0.0;  // Frank-Wolfe duality gap at termination
    int64_t iterations = 0;
    bool converged = false;
};

// Frank-Wolfe on the simplex with exact line search for the quadratic
// energy. Terminates when gap <= tol_rel * energy. max_iter = 0 means 50*N.
SimplexWeights minimize_energy_fw(const PointCloud& cloud, double tol_rel = 1e-4,
                                  int64_t max_iter = 0);

// Cap_BM estimate = 1 / minimal energy; the relative gap bound is carried
// as a stderr surrogate.
CapacityEstimate capacity_bm(const PointCloud& cloud, double tol_rel = 1e-4,
                             int64_t max_iter = 0);

}  // namespace capa
