#include "capa/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace capa {

namespace {

// Run jobs[0..count) on `threads` workers, results stored by job index so the
// output never depends on scheduling.
template <typename Fn>
std::vector<double> run_indexed(int64_t count, int threads, Fn job) {
    std::vector<double> out(static_cast<size_t>(count));
    threads = std::max(1, threads);
    if (threads == 1) {
        for (int64_t i = 0; i < count; ++i) out[size_t(i)] = job(i);
        return out;
    }
    std::atomic<int64_t> next{0};
    auto worker = [&]() {
        for (;;) {
            int64_t i = next.fetch_add(1);
            if (i >= count) return;
            out[size_t(i)] = job(i);
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return out;
}

std::vector<double> drop_nan(std::vector<double> xs, int64_t* excluded) {
    auto it = std::remove_if(xs.begin(), xs.end(), [](double x) { return std::isnan(x); });
    if (excluded) *excluded += int64_t(xs.end() - it);
    xs.erase(it, xs.end());
    return xs;
}

RowStats row_from(int64_t n, const std::vector<double>& xs) {
    MomentAccumulator acc;
    for (double x : xs) acc.add(x);
    RowStats r;
    r.n = n;
    r.replicas = acc.count();
    r.mean = acc.mean();
    r.var = acc.variance();
    r.rel_var = r.mean != 0.0 ? r.var / (r.mean * r.mean) : 0.0;
    r.stderr_ = acc.stderr_of_mean();
    return r;
}

double bootstrap_stderr_relvar(const std::vector<double>& xs, RngStream stream) {
    if (xs.size() < 2) return 0.0;
    const uint64_t n = xs.size();
    std::vector<double> rs(n);
    MomentAccumulator outer;
    for (int r = 0; r < 200; ++r) {
        for (uint64_t k = 0; k < n; ++k) rs[k] = xs[stream.next_below(n)];
        MomentAccumulator a;
        for (double x : rs) a.add(x);
        double m = a.mean();
        outer.add(m != 0.0 ? a.variance() / (m * m) : 0.0);
    }
    return outer.stddev();
}

double ks_vs_uniform(std::vector<double> u) {
    std::sort(u.begin(), u.end());
    const double n = double(u.size());
    double d = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        d = std::max(d, std::abs(double(i + 1) / n - u[i]));
        d = std::max(d, std::abs(u[i] - double(i) / n));
    }
    return d;
}

void check_grid(const std::vector<int64_t>& ns) {
    if (ns.empty()) throw ConfigError("empty n grid");
    for (size_t i = 0; i < ns.size(); ++i) {
        if (ns[i] < 0 || (i > 0 && ns[i] <= ns[i - 1]))
            throw ConfigError("n grid must be non-negative and strictly ascending");
    }
}

}  // namespace

std::vector<double> sample_capacities(int dim, int64_t n, int64_t count, uint64_t master,
                                      const GreenKernel& kernel, int threads,
                                      int64_t* excluded) {
    const uint64_t purpose = dim == 3 ? kPurposeD3Cap : kPurposeD4Cap;
    auto raw = run_indexed(count, threads, [&](int64_t i) -> double {
        RngStream s = derive_stream(master, stream_id_for(purpose, uint64_t(n), uint64_t(i)));
        Trajectory traj = simulate_srw(dim, n, s);
        RangeSet f = RangeSet::build(traj);
        try {
            // cg regardless of size: dense factorization is slower here and
            // the matrix-free path never materializes the kernel matrix.
            return capacity_exact(f, kernel, SolveMethod::CG).value;
        } catch (const NumericError&) {
            return std::nan("");
        }
    });
    return drop_nan(std::move(raw), excluded);
}

std::vector<double> sample_bm_capacities(int64_t count, int64_t bm_steps, uint64_t master,
                                         int threads, size_t cloud_points) {
    const double scale = 1.0 / (3.0 * std::sqrt(3.0));
    size_t pts = std::min<size_t>(cloud_points, size_t(bm_steps));
    return run_indexed(count, threads, [&](int64_t i) -> double {
        RngStream s =
            derive_stream(master, stream_id_for(kPurposeBmPath, uint64_t(bm_steps), uint64_t(i)));
        BrownianPath path = simulate_bm(bm_steps, s);
        PointCloud cloud = occupation_cloud(path, pts);
        return scale * capacity_bm(cloud, 1e-3, 400 * int64_t(cloud.pts.size())).value;
    });
}

ExperimentReport exp_d4_mean_curve(const std::vector<int64_t>& ns, int64_t replicas,
                                   uint64_t master, int threads) {
    check_grid(ns);
    if (replicas < 1) throw ConfigError("need replicas >= 1");
    GreenKernel kernel = GreenKernel::build(4, GreenKernel::default_rstar(4));
    ExperimentReport rep{"d4-mean", 4, master, {}, {}, {}, {}};
    int64_t excluded = 0;
    for (int64_t n : ns) {
        auto xs = sample_capacities(4, n, replicas, master, kernel, threads, &excluded);
        RowStats r = row_from(n, xs);
        double c = n > 1 ? std::log(double(n)) / double(n) : 1.0;
        r.ratio = c * r.mean;
        r.stderr_ *= c;
        rep.rows.push_back(r);
        rep.samples.push_back(std::move(xs));
    }
    rep.extra["target"] = kPi * kPi / 8.0;
    rep.extra["excluded"] = double(excluded);
    if (excluded > 0) rep.warnings.push_back("solver failures excluded: " + std::to_string(excluded));
    return rep;
}

ExperimentReport exp_d4_wlln(const std::vector<int64_t>& ns, int64_t replicas, uint64_t master,
                             int threads) {
    check_grid(ns);
    if (replicas < 2) throw ConfigError("variance needs replicas >= 2");
    GreenKernel kernel = GreenKernel::build(4, GreenKernel::default_rstar(4));
    ExperimentReport rep{"d4-wlln", 4, master, {}, {}, {}, {}};
    int64_t excluded = 0;
    for (int64_t n : ns) {
        auto xs = sample_capacities(4, n, replicas, master, kernel, threads, &excluded);
        RowStats r = row_from(n, xs);
        r.ratio = r.rel_var;
        r.stderr_ = bootstrap_stderr_relvar(
            xs, derive_stream(master, stream_id_for(kPurposeBootstrap, uint64_t(n), 0)));
        rep.rows.push_back(r);
        rep.samples.push_back(std::move(xs));
    }
    rep.extra["excluded"] = double(excluded);
    if (excluded > 0) rep.warnings.push_back("solver failures excluded: " + std::to_string(excluded));
    return rep;
}

ExperimentReport exp_d3_limit(const std::vector<int64_t>& ns, int64_t samples, int64_t bm_steps,
                              int64_t bm_samples, uint64_t master, int threads) {
    check_grid(ns);
    if (samples < 2 || bm_samples < 2) throw ConfigError("need samples >= 2");
    if (bm_steps < 1) throw ConfigError("need bm_steps >= 1");
    GreenKernel kernel = GreenKernel::build(3, GreenKernel::default_rstar(3));
    ExperimentReport rep{"d3-limit", 3, master, {}, {}, {}, {}};
    auto bm = sample_bm_capacities(bm_samples, bm_steps, master, threads);
    {
        MomentAccumulator a;
        for (double x : bm) a.add(x);
        rep.extra["bm_mean"] = a.mean();
        rep.extra["bm_var"] = a.variance();
        rep.extra["bm_samples"] = double(a.count());
    }
    int64_t excluded = 0;
    for (int64_t n : ns) {
        auto caps = sample_capacities(3, n, samples, master, kernel, threads, &excluded);
        const double rn = std::sqrt(double(std::max<int64_t>(n, 1)));
        for (double& c : caps) c /= rn;
        RowStats r = row_from(n, caps);
        r.ratio = ks_statistic(caps, bm);
        rep.rows.push_back(r);
        rep.samples.push_back(std::move(caps));
    }
    rep.samples.push_back(bm);
    rep.extra["scale_const"] = 1.0 / (3.0 * std::sqrt(3.0));
    rep.extra["excluded"] = double(excluded);
    if (excluded > 0) rep.warnings.push_back("solver failures excluded: " + std::to_string(excluded));
    return rep;
}

ExperimentReport exp_d3_second_moment(const std::vector<int64_t>& ns, int64_t samples,
                                      uint64_t master, int threads) {
    check_grid(ns);
    if (samples < 2) throw ConfigError("need samples >= 2");
    GreenKernel kernel = GreenKernel::build(3, GreenKernel::default_rstar(3));
    ExperimentReport rep{"d3-m2", 3, master, {}, {}, {}, {}};
    int64_t excluded = 0;
    double lo = 0.0, hi = 0.0;
    for (int64_t n : ns) {
        auto caps = sample_capacities(3, n, samples, master, kernel, threads, &excluded);
        const double dn = double(std::max<int64_t>(n, 1));
        std::vector<double> sq(caps.size());
        for (size_t i = 0; i < caps.size(); ++i) sq[i] = caps[i] * caps[i] / dn;
        RowStats r = row_from(n, sq);
        r.ratio = r.mean;  // headline: E[Cap^2]/n
        rep.rows.push_back(r);
        rep.samples.push_back(std::move(sq));
        lo = lo == 0.0 ? r.mean : std::min(lo, r.mean);
        hi = std::max(hi, r.mean);
    }
    rep.extra["max_over_min"] = lo > 0.0 ? hi / lo : 0.0;
    rep.extra["excluded"] = double(excluded);
    if (excluded > 0) rep.warnings.push_back("solver failures excluded: " + std::to_string(excluded));
    return rep;
}

ExperimentReport exp_tau_mechanism(int64_t n, const std::vector<double>& fractions,
                                   int64_t replicas, uint64_t master, int threads, double K,
                                   int64_t direct_trials) {
    if (n < 2) throw ConfigError("need n >= 2");
    if (replicas < 1) throw ConfigError("need replicas >= 1");
    for (double s : fractions)
        if (!(s > 0.0 && s <= 1.0)) throw ConfigError("fractions must lie in (0, 1]");
    GreenKernel kernel = GreenKernel::build(4, GreenKernel::default_rstar(4));
    ExperimentReport rep{"tau", 4, master, {}, {}, {}, {}};

    std::vector<int64_t> ms;
    for (double s : fractions) ms.push_back(int64_t(std::ceil(s * double(n))));
    ms.push_back(n);
    std::sort(ms.begin(), ms.end());
    ms.erase(std::unique(ms.begin(), ms.end()), ms.end());

    int64_t excluded = 0;
    std::map<int64_t, RowStats> rows;
    for (int64_t m : ms) {
        auto xs = sample_capacities(4, m, replicas, master, kernel, threads, &excluded);
        rows[m] = row_from(m, xs);
        rep.samples.push_back(std::move(xs));
    }
    const RowStats& base = rows.at(n);
    for (int64_t m : ms) {
        RowStats r = rows.at(m);
        r.ratio = r.mean / base.mean;
        double rel_m = r.mean != 0.0 ? r.stderr_ / r.mean : 0.0;
        double rel_n = base.mean != 0.0 ? base.stderr_ / base.mean : 0.0;
        r.stderr_ = m == n ? 0.0 : r.ratio * std::sqrt(rel_m * rel_m + rel_n * rel_n);
        rep.rows.push_back(r);
        double s = double(m) / double(n);
        rep.extra["target_" + std::to_string(m)] =
            s * std::log(double(n)) / std::log(double(m));
    }
    rep.extra["excluded"] = double(excluded);

    if (direct_trials > 0) {
        // Rare-event diagnostic: independent walks from far away; the time
        // index of the first-entrance site, conditioned on hitting, should be
        // near-uniform on [0, n]. Severely hit-starved at desk scale.
        RngStream rs = derive_stream(master, stream_id_for(kPurposeTauDirect, uint64_t(n), 0));
        Trajectory traj = simulate_srw(4, n, rs);
        RangeSet f = RangeSet::build(traj);
        int64_t x0 = int64_t(std::llround(K * double(n)));
        double r_out = 2.0 * double(x0);
        // First time index of each range site, so a hit maps to its tau_1.
        std::vector<int64_t> first_time(f.sites().size(), -1);
        for (int64_t t = 0; t <= traj.steps(); ++t) {
            size_t idx = f.find_index(traj.pts[size_t(t)]);
            if (first_time[idx] < 0) first_time[idx] = t;
        }
        auto taus = run_indexed(direct_trials, threads, [&](int64_t i) -> double {
            RngStream ws =
                derive_stream(master, stream_id_for(kPurposeTauDirect, uint64_t(n), uint64_t(i + 1)));
            Site y{x0, 0, 0, 0};
            const double r2_out = r_out * r_out;
            const int64_t rad = f.bounding_radius();
            for (;;) {
                uint32_t dir = ws.next_direction(8);
                y[dir >> 1] += (dir & 1) ? 1 : -1;
                int64_t linf = 0;
                double r2 = 0.0;
                for (int c = 0; c < 4; ++c) {
                    linf = std::max(linf, std::abs(y[c]));
                    r2 += double(y[c]) * double(y[c]);
                }
                if (linf <= rad) {
                    size_t idx = f.find_index(y);
                    if (idx != RangeSet::kNone) return double(first_time[idx]) / double(n);
                }
                if (r2 > r2_out) return std::nan("");
            }
        });
        auto hits = drop_nan(std::move(taus), nullptr);
        rep.extra["tau_trials"] = double(direct_trials);
        rep.extra["tau_hits"] = double(hits.size());
        rep.extra["tau_underpowered"] = hits.size() < 50 ? 1.0 : 0.0;
        if (!hits.empty()) rep.extra["tau_ks_uniform"] = ks_vs_uniform(hits);
        if (hits.size() < 50)
            rep.warnings.push_back("rare-event mode underpowered: " +
                                   std::to_string(hits.size()) + " hits");
    }
    return rep;
}

std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string report_to_csv(const ExperimentReport& r) {
    std::string out = "n,replicas,mean,var,rel_var,ratio,stderr\n";
    for (const RowStats& row : r.rows) {
        out += std::to_string(row.n) + ',' + std::to_string(row.replicas) + ',' +
               format_double(row.mean) + ',' + format_double(row.var) + ',' +
               format_double(row.rel_var) + ',' + format_double(row.ratio) + ',' +
               format_double(row.stderr_) + '\n';
    }
    return out;
}

std::string report_to_json(const ExperimentReport& r) {
    nlohmann::json j;
    j["version"] = "1";
    j["master_seed"] = r.master_seed;
    j["git_describe"] = git_describe();
    j["name"] = r.name;
    j["dim"] = r.dim;
    j["rows"] = nlohmann::json::array();
    for (const RowStats& row : r.rows) {
        j["rows"].push_back({{"n", row.n},
                             {"replicas", row.replicas},
                             {"mean", row.mean},
                             {"var", row.var},
                             {"rel_var", row.rel_var},
                             {"ratio", row.ratio},
                             {"stderr", row.stderr_}});
    }
    j["extra"] = r.extra;
    j["warnings"] = r.warnings;
    return j.dump(2) + "\n";
}

std::string git_describe() {
    FILE* p = popen("git describe --always --dirty 2>/dev/null", "r");
    if (!p) return "unknown";
    char buf[128];
    std::string out;
    while (fgets(buf, sizeof(buf), p)) out += buf;
    pclose(p);
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    return out.empty() ? "unknown" : out;
}

}  // namespace capa
