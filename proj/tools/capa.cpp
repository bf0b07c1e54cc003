#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "capa/experiments.hpp"

using namespace capa;
using nlohmann::json;

namespace {

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw ConfigError("cannot open output file: " + out_path);
    f << text;
}

json envelope(uint64_t seed) {
    return json{{"version", "1"}, {"master_seed", seed}, {"git_describe", git_describe()}};
}

std::vector<Site> read_site_file(const std::string& path, int dim) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open site file: " + path);
    std::vector<Site> sites;
    std::string line;
    while (std::getline(f, line)) {
        for (char& c : line)
            if (c == ',' || c == '(' || c == ')') c = ' ';
        std::istringstream ss(line);
        Site s{0, 0, 0, 0};
        int got = 0;
        int64_t v;
        while (got < dim && ss >> v) s[got++] = v;
        if (got == 0) continue;  // blank line
        if (got != dim) throw ConfigError("site file line has wrong arity: " + line);
        sites.push_back(s);
    }
    return sites;
}

Site parse_offset(const std::string& text, int dim) {
    std::string t = text;
    for (char& c : t)
        if (c == ',') c = ' ';
    std::istringstream ss(t);
    Site s{0, 0, 0, 0};
    int got = 0;
    int64_t v;
    while (got < dim && ss >> v) s[got++] = v;
    if (got != dim) throw ConfigError("offset needs " + std::to_string(dim) + " coordinates");
    return s;
}

struct ExpFlags {
    std::vector<int64_t> ns{1024, 4096, 16384};
    uint64_t seed = 1;
    int threads = 1;
    std::string out;
    std::string format = "csv";
};

void add_common(CLI::App* cmd, ExpFlags& f) {
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--out", f.out, "output path (default stdout)");
    cmd->add_option("--format", f.format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
}

void emit_report(const ExperimentReport& rep, const ExpFlags& f) {
    emit(f.format == "json" ? report_to_json(rep) : report_to_csv(rep), f.out);
}

int run(int argc, char** argv) {
    CLI::App app{"capacity of simple random walk ranges on Z^3/Z^4"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate an SRW range");
    int sim_d = 3;
    int64_t sim_n = 1024;
    uint64_t sim_seed = 1;
    std::string sim_out, sim_dump;
    sim->add_option("--d", sim_d)->check(CLI::IsMember({3, 4}));
    sim->add_option("--n", sim_n)->check(CLI::NonNegativeNumber);
    sim->add_option("--seed", sim_seed);
    sim->add_option("--out", sim_out);
    sim->add_option("--dump-sites", sim_dump, "write range sites, one tuple per line");

    // green
    auto* grn = app.add_subcommand("green", "print G(0,x)");
    int grn_d = 3;
    std::string grn_x = "0,0,0";
    std::string grn_out;
    int grn_rstar = 0;
    grn->add_option("--d", grn_d)->check(CLI::IsMember({3, 4}));
    grn->add_option("--x", grn_x, "offset, comma separated");
    grn->add_option("--rstar", grn_rstar, "crossover radius (0 = default)");
    grn->add_option("--out", grn_out);

    // capacity
    auto* cap = app.add_subcommand("capacity", "capacity of a finite set");
    int cap_d = 3;
    int64_t cap_n = 1024, cap_trials = 200;
    uint64_t cap_seed = 1;
    std::string cap_sites, cap_out, cap_method = "exact";
    double cap_tol = 0.0, cap_rstop = 0.0, cap_K = 16.0;
    int64_t cap_subset = 0;
    cap->add_option("--sites", cap_sites, "site list file (one tuple per line)");
    cap->add_option("--d", cap_d)->check(CLI::IsMember({3, 4}));
    cap->add_option("--n", cap_n)->check(CLI::NonNegativeNumber);
    cap->add_option("--seed", cap_seed);
    cap->add_option("--method", cap_method)
        ->check(CLI::IsMember({"exact", "cholesky", "cg", "mc", "farpoint"}));
    cap->add_option("--tol", cap_tol);
    cap->add_option("--rstop", cap_rstop, "MC stopping radius (0 = 20x set radius)");
    cap->add_option("--subset", cap_subset, "MC site subset size (0 = all)");
    cap->add_option("--trials", cap_trials);
    cap->add_option("--K", cap_K, "far-point start distance multiplier");
    cap->add_option("--out", cap_out);

    // capbm
    auto* cbm = app.add_subcommand("capbm", "Brownian-motion capacity of a point cloud");
    std::string cbm_fixture, cbm_out;
    double cbm_r = 1.0;
    int64_t cbm_n = 2000, cbm_steps = 4096;
    uint64_t cbm_seed = 1;
    int64_t cbm_points = 512;
    cbm->add_option("--fixture", cbm_fixture)->check(CLI::IsMember({"sphere"}));
    cbm->add_option("--r", cbm_r, "sphere radius");
    cbm->add_option("--n", cbm_n, "sphere cloud size");
    cbm->add_option("--bm-steps", cbm_steps);
    cbm->add_option("--points", cbm_points, "occupation cloud size");
    cbm->add_option("--seed", cbm_seed);
    cbm->add_option("--out", cbm_out);

    // experiments
    ExpFlags f_mean, f_wlln, f_lim, f_m2, f_tau;
    int64_t replicas = 100, d3_samples = 300, bm_steps = 4096, bm_samples = 300;
    auto* e_mean = app.add_subcommand("exp-d4-mean", "(log n/n) * mean capacity, d=4");
    e_mean->add_option("--ns", f_mean.ns, "n grid");
    e_mean->add_option("--replicas", replicas)->check(CLI::PositiveNumber);
    add_common(e_mean, f_mean);

    int64_t wlln_replicas = 100;
    auto* e_wlln = app.add_subcommand("exp-d4-wlln", "relative variance of capacity, d=4");
    e_wlln->add_option("--ns", f_wlln.ns, "n grid");
    e_wlln->add_option("--replicas", wlln_replicas);
    add_common(e_wlln, f_wlln);

    auto* e_lim = app.add_subcommand("exp-d3-limit", "Cap/sqrt(n) vs scaled BM capacity, d=3");
    e_lim->add_option("--ns", f_lim.ns, "n grid");
    e_lim->add_option("--samples", d3_samples)->check(CLI::PositiveNumber);
    e_lim->add_option("--bm-steps", bm_steps)->check(CLI::PositiveNumber);
    e_lim->add_option("--bm-samples", bm_samples)->check(CLI::PositiveNumber);
    add_common(e_lim, f_lim);

    int64_t m2_samples = 300;
    auto* e_m2 = app.add_subcommand("exp-d3-m2", "E[Cap^2]/n boundedness, d=3");
    e_m2->add_option("--ns", f_m2.ns, "n grid");
    e_m2->add_option("--samples", m2_samples)->check(CLI::PositiveNumber);
    add_common(e_m2, f_m2);

    int64_t tau_n = 16384, tau_replicas = 100, tau_direct = 0;
    std::vector<double> tau_fracs{0.25, 0.5, 0.75};
    double tau_K = 8.0;
    auto* e_tau = app.add_subcommand("exp-tau", "k-ratio hitting-time mechanism, d=4");
    e_tau->add_option("--n", tau_n)->check(CLI::PositiveNumber);
    e_tau->add_option("--fractions", tau_fracs);
    e_tau->add_option("--replicas", tau_replicas)->check(CLI::PositiveNumber);
    e_tau->add_option("--K", tau_K);
    e_tau->add_option("--direct-trials", tau_direct, "rare-event diagnostic trials");
    add_common(e_tau, f_tau);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (sim->parsed()) {
        RngStream s = derive_stream(sim_seed, stream_id_for(1, uint64_t(sim_n), 0));
        Trajectory t = simulate_srw(sim_d, sim_n, s);
        RangeSet f = RangeSet::build(t);
        if (!sim_dump.empty()) {
            std::ofstream df(sim_dump);
            if (!df) throw ConfigError("cannot open output file: " + sim_dump);
            for (const Site& p : f.sites()) {
                for (int c = 0; c < sim_d; ++c) df << (c ? " " : "") << p[c];
                df << '\n';
            }
        }
        json j = envelope(sim_seed);
        j["dim"] = sim_d;
        j["n"] = sim_n;
        j["range_size"] = f.size();
        j["bounding_radius"] = f.bounding_radius();
        emit(j.dump(2) + "\n", sim_out);
    } else if (grn->parsed()) {
        Site x = parse_offset(grn_x, grn_d);
        int rstar = grn_rstar > 0 ? grn_rstar : GreenKernel::default_rstar(grn_d);
        GreenKernel k = GreenKernel::build(grn_d, rstar);
        LatticePoint p{x, grn_d};
        json j = envelope(0);
        j.erase("master_seed");
        j["dim"] = grn_d;
        j["x"] = std::vector<int64_t>(x.begin(), x.begin() + grn_d);
        j["rstar"] = rstar;
        j["value"] = k.green(x);
        j["branch"] = p.norm_inf() <= rstar ? "table" : "asymptotic";
        j["g0"] = k.g0();
        j["matching_gap"] = k.matching_gap();
        emit(j.dump(2) + "\n", grn_out);
    } else if (cap->parsed()) {
        RangeSet f;
        if (!cap_sites.empty()) {
            f = RangeSet::from_sites(cap_d, read_site_file(cap_sites, cap_d));
        } else {
            RngStream s = derive_stream(cap_seed, stream_id_for(1, uint64_t(cap_n), 0));
            f = RangeSet::build(simulate_srw(cap_d, cap_n, s));
        }
        GreenKernel k = GreenKernel::build(cap_d, GreenKernel::default_rstar(cap_d));
        CapacityEstimate est;
        if (cap_method == "exact" || cap_method == "cholesky" || cap_method == "cg") {
            SolveMethod m = cap_method == "cholesky" ? SolveMethod::Cholesky
                          : cap_method == "cg"       ? SolveMethod::CG
                                                     : SolveMethod::Auto;
            est = capacity_exact(f, k, m, cap_tol);
        } else if (cap_method == "mc") {
            double rstop = cap_rstop > 0.0 ? cap_rstop
                                           : 20.0 * double(std::max<int64_t>(f.bounding_radius(), 1));
            size_t subset = cap_subset > 0 ? size_t(cap_subset) : f.size();
            est = capacity_mc(f, k, subset, cap_trials, rstop,
                              derive_stream(cap_seed, stream_id_for(2, f.size(), 0)));
        } else {
            est = capacity_far_point(f, k, cap_K, cap_trials,
                                     derive_stream(cap_seed, stream_id_for(2, f.size(), 1)));
        }
        json j = envelope(cap_seed);
        j["dim"] = cap_d;
        j["sites"] = f.size();
        j["value"] = est.value;
        j["stderr"] = est.stderr_;
        j["method"] = est.method;
        j["params"] = est.params;
        j["underpowered"] = est.underpowered;
        emit(j.dump(2) + "\n", cap_out);
    } else if (cbm->parsed()) {
        PointCloud cloud;
        if (cbm_fixture == "sphere") {
            cloud = sphere_cloud(cbm_r, size_t(cbm_n));
        } else {
            RngStream s =
                derive_stream(cbm_seed, stream_id_for(kPurposeBmPath, uint64_t(cbm_steps), 0));
            cloud = occupation_cloud(simulate_bm(cbm_steps, s),
                                     std::min<size_t>(size_t(cbm_points), size_t(cbm_steps)));
        }
        SimplexWeights w = minimize_energy_fw(cloud, 1e-4);
        json j = envelope(cbm_seed);
        j["capacity"] = 1.0 / w.energy;
        j["energy"] = w.energy;
        j["gap"] = w.gap;
        j["iterations"] = w.iterations;
        j["points"] = cloud.pts.size();
        j["converged"] = w.converged;
        emit(j.dump(2) + "\n", cbm_out);
    } else if (e_mean->parsed()) {
        emit_report(exp_d4_mean_curve(f_mean.ns, replicas, f_mean.seed, f_mean.threads), f_mean);
    } else if (e_wlln->parsed()) {
        emit_report(exp_d4_wlln(f_wlln.ns, wlln_replicas, f_wlln.seed, f_wlln.threads), f_wlln);
    } else if (e_lim->parsed()) {
        emit_report(
            exp_d3_limit(f_lim.ns, d3_samples, bm_steps, bm_samples, f_lim.seed, f_lim.threads),
            f_lim);
    } else if (e_m2->parsed()) {
        emit_report(exp_d3_second_moment(f_m2.ns, m2_samples, f_m2.seed, f_m2.threads), f_m2);
    } else if (e_tau->parsed()) {
        emit_report(exp_tau_mechanism(tau_n, tau_fracs, tau_replicas, f_tau.seed, f_tau.threads,
                                      tau_K, tau_direct),
                    f_tau);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    }
}
