#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "capa/continuum.hpp"
#include "capa/potential.hpp"
#include "capa/stats.hpp"

namespace capa {

// Stream-id purposes; replica streams are stream_id_for(purpose, n, replica),
// so experiments that draw the same (d, n) samples share them.
inline constexpr uint64_t kPurposeD3Cap = 3;
inline constexpr uint64_t kPurposeD4Cap = 4;
inline constexpr uint64_t kPurposeBmPath = 5;
inline constexpr uint64_t kPurposeTauDirect = 6;
inline constexpr uint64_t kPurposeBootstrap = 7;

// One CSV row. mean/var/rel_var describe the per-replica statistic of the
// experiment; ratio is the derived headline; stderr_ its uncertainty.
struct RowStats {
    int64_t n = 0;
    int64_t replicas = 0;
    double mean = 0.0;
    double var = 0.0;
    double rel_var = 0.0;
    double ratio = 0.0;
    double stderr_ = 0.0;
};

struct ExperimentReport {
    std::string name;
    int dim = 0;
    uint64_t master_seed = 0;
    std::vector<RowStats> rows;  // sorted by n
    std::map<std::string, double> extra;
    std::vector<std::string> warnings;
    // Raw samples per row, same order as rows (empty for mean-only runs).
    std::vector<std::vector<double>> samples;
};

// Exact (cg) capacities of `count` independent SRW ranges X[0,n]. Replica i
// uses stream_id_for(purpose, n, i); solver failures are dropped and counted
// in *excluded. Deterministic for any thread count.
std::vector<double> sample_capacities(int dim, int64_t n, int64_t count, uint64_t master,
                                      const GreenKernel& kernel, int threads,
                                      int64_t* excluded = nullptr);

// (1/(3*sqrt(3))) * Cap_BM of `count` independent Brownian paths on [0,1],
// each discretized to cloud_points occupation points.
std::vector<double> sample_bm_capacities(int64_t count, int64_t bm_steps, uint64_t master,
                                         int threads, size_t cloud_points = 512);

ExperimentReport exp_d4_mean_curve(const std::vector<int64_t>& ns, int64_t replicas,
                                   uint64_t master, int threads);
ExperimentReport exp_d4_wlln(const std::vector<int64_t>& ns, int64_t replicas, uint64_t master,
                             int threads);
// ratio column holds the KS distance against the scaled Brownian sample;
// BM sample stats go to extra{bm_mean, bm_var, bm_samples}.
ExperimentReport exp_d3_limit(const std::vector<int64_t>& ns, int64_t samples, int64_t bm_steps,
                              int64_t bm_samples, uint64_t master, int threads);
ExperimentReport exp_d3_second_moment(const std::vector<int64_t>& ns, int64_t samples,
                                      uint64_t master, int threads);
// Rows keyed by m = ceil(s*n) (plus the n row); ratio = khat(m)/khat(n);
// extra{"target_<m>"} = s*log(n)/log(m). Optional rare-event diagnostic when
// direct_trials > 0 (extra{tau_hits, tau_ks_uniform, tau_underpowered}).
ExperimentReport exp_tau_mechanism(int64_t n, const std::vector<double>& fractions,
                                   int64_t replicas, uint64_t master, int threads,
                                   double K = 8.0, int64_t direct_trials = 0);

std::string report_to_csv(const ExperimentReport& r);
std::string report_to_json(const ExperimentReport& r);
// Shortest round-trip decimal of a double.
std::string format_double(double v);
std::string git_describe();

}  // namespace capa
