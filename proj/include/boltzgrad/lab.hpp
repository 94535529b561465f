#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "boltzgrad/boltzmann.hpp"
#include "boltzgrad/errors.hpp"
#include "boltzgrad/hierarchy.hpp"
#include "boltzgrad/marginals.hpp"
#include "boltzgrad/md.hpp"
#include "boltzgrad/phase.hpp"
#include "boltzgrad/scattering.hpp"

namespace boltzgrad::lab {

// ---------------------------------------------------------------------------
// Configuration file
// ---------------------------------------------------------------------------

/// Flat `key = value` lines grouped in [sections]; '#' starts a comment.
class ConfigFile {
public:
    static ConfigFile parse(std::istream& is) {
        ConfigFile cfg;
        std::string line, section;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            auto trim = [](std::string s) {
                const auto a = s.find_first_not_of(" \t\r");
                const auto b = s.find_last_not_of(" \t\r");
                return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
            };
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError("line " + std::to_string(lineno) + ": bad section header");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string val = trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
            cfg.values_[section + "." + key] = val;
        }
        return cfg;
    }

    static ConfigFile parse_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot open config file: " + path);
        return parse(is);
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get(const std::string& key, const std::string& fallback = {}) const {
        const auto it = values_.find(key);
        if (it == values_.end()) {
            if (fallback.empty()) throw ConfigError("missing config key: " + key);
            return fallback;
        }
        used_.insert(it->first);
        return it->second;
    }

    double get_double(const std::string& key, std::optional<double> fallback = {}) const {
        const auto it = values_.find(key);
        if (it == values_.end()) {
            if (fallback) return *fallback;
            throw ConfigError("missing config key: " + key);
        }
        used_.insert(it->first);
        try {
            if (it->second == "inf") return std::numeric_limits<double>::infinity();
            return std::stod(it->second);
        } catch (...) {
            throw ConfigError("config key " + key + ": not a number: " + it->second);
        }
    }

    long get_long(const std::string& key, std::optional<long> fallback = {}) const {
        const auto it = values_.find(key);
        if (it == values_.end()) {
            if (fallback) return *fallback;
            throw ConfigError("missing config key: " + key);
        }
        used_.insert(it->first);
        try {
            return std::stol(it->second);
        } catch (...) {
            throw ConfigError("config key " + key + ": not an integer: " + it->second);
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        used_.insert(it->first);
        if (it->second == "true" || it->second == "on" || it->second == "1") return true;
        if (it->second == "false" || it->second == "off" || it->second == "0") return false;
        throw ConfigError("config key " + key + ": not a boolean: " + it->second);
    }

    std::vector<long> get_long_list(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing config key: " + key);
        used_.insert(it->first);
        std::vector<long> out;
        std::stringstream ss(it->second);
        std::string tok;
        while (std::getline(ss, tok, ','))
            try {
                out.push_back(std::stol(tok));
            } catch (...) {
                throw ConfigError("config key " + key + ": bad list entry: " + tok);
            }
        if (out.empty()) throw ConfigError("config key " + key + ": empty list");
        return out;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// ExperimentConfig
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    std::string name;  // bg-convergence, h-theorem, scattering-table,
                       // tree-series, reversibility
    std::vector<long> n_list{200};
    bool bg = true;
    double custom_eps = 0.0;
    RadialPotential potential = RadialPotential::hard_sphere();
    std::string potential_kind = "hard_sphere";
    DensitySpec density = DensitySpec::maxwellian(1.0);
    double horizon_t0 = 1.0;  // runs last horizon_t0 * t0
    long ensemble = 100;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    scattering::Cutoffs cutoffs;
    long dsmc_particles = 100000;
    bool collisions_enabled = true;
    long tree_samples = 200000;
    long md_events = 50;  // reversibility event count

    double t0() const {
        const double beta = density.beta();
        const long n = n_list.front();
        const double eps = bg ? 1.0 / std::sqrt(static_cast<double>(n)) : custom_eps;
        return hierarchy::lanford_time(static_cast<double>(n), eps, 1.0, beta, 1.0);
    }
};

inline ExperimentConfig load_experiment(const ConfigFile& cfg) {
    ExperimentConfig e;
    e.name = cfg.get("experiment.name");
    const std::vector<std::string> known{"bg-convergence", "h-theorem", "scattering-table",
                                         "tree-series", "reversibility"};
    if (std::find(known.begin(), known.end(), e.name) == known.end())
        throw ConfigError("unknown experiment name: " + e.name);
    e.seed = static_cast<std::uint64_t>(cfg.get_long("experiment.seed", 0L));
    e.output_dir = cfg.get("experiment.output_dir", "out");
    if (const char* env = std::getenv("BOLTZGRAD_OUTPUT_DIR")) e.output_dir = env;
    e.horizon_t0 = cfg.get_double("experiment.horizon_t0", 1.0);
    if (e.horizon_t0 > 5.0) throw ConfigError("horizon_t0 must be <= 5");
    if (e.horizon_t0 <= 0.0) throw ConfigError("horizon_t0 must be positive");
    e.ensemble = cfg.get_long("experiment.ensemble", 100L);
    if (e.ensemble < 1) throw ConfigError("ensemble must be >= 1");

    if (cfg.has("regime.N")) e.n_list = cfg.get_long_list("regime.N");
    e.bg = cfg.get_bool("regime.bg", true);
    if (!e.bg) {
        e.custom_eps = cfg.get_double("regime.eps");
        if (!(e.custom_eps > 0.0)) throw ConfigError("regime.eps must be positive");
    }
    for (long n : e.n_list)
        if (n < 1) throw ConfigError("regime.N entries must be positive");

    const std::string pot = cfg.get("potential.kind", "hard_sphere");
    e.potential_kind = pot;
    if (pot == "hard_sphere") {
        e.potential = RadialPotential::hard_sphere();
    } else if (pot == "zero") {
        e.potential = RadialPotential::zero();
    } else if (pot == "wall") {
        e.potential = make_wall_potential(cfg.get_double("potential.amplitude", 1.0),
                                          static_cast<int>(cfg.get_long("potential.power", 2L)));
    } else if (pot == "inverse_power") {
        e.potential = make_inverse_power_potential(cfg.get_double("potential.alpha", 2.0));
    } else if (pot == "table") {
        const std::string file = cfg.get("potential.file");
        std::ifstream is(file);
        if (!is) throw ConfigError("potential table file not found: " + file);
        std::vector<double> r, phi;
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::stringstream ss(line);
            double a, b;
            char comma;
            if (ss >> a) {
                if (ss.peek() == ',') ss >> comma;
                if (!(ss >> b)) throw ConfigError("bad potential table row: " + line);
                r.push_back(a);
                phi.push_back(b);
            }
        }
        e.potential = RadialPotential::tabulated(r, phi);
    } else {
        throw ConfigError("unknown potential kind: " + pot);
    }

    const std::string dk = cfg.get("density.kind", "maxwellian");
    if (dk == "maxwellian") {
        e.density = DensitySpec::maxwellian(cfg.get_double("density.beta", 1.0));
    } else if (dk == "two_temperature") {
        e.density = DensitySpec::two_temperature(cfg.get_double("density.beta1", 0.5),
                                                 cfg.get_double("density.beta2", 2.0),
                                                 cfg.get_double("density.weight1", 0.5));
    } else {
        throw ConfigError("unknown density kind: " + dk);
    }

    e.cutoffs.v_rel_min = cfg.get_double("cutoffs.v_rel_min", 0.0);
    e.cutoffs.rho_min = cfg.get_double("cutoffs.rho_min", 0.0);
    e.cutoffs.v_max =
        cfg.get_double("cutoffs.v_max", std::numeric_limits<double>::infinity());

    e.dsmc_particles = cfg.get_long("dsmc.particles", 100000L);
    e.collisions_enabled = cfg.get_bool("dsmc.collisions", true);
    e.tree_samples = cfg.get_long("trees.samples", 200000L);
    e.md_events = cfg.get_long("md.events", 50L);
    return e;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

/// FNV-1a 64-bit content digest.
inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

class OutputWriter {
public:
    explicit OutputWriter(std::string dir, std::string experiment)
        : dir_(std::move(dir)), experiment_(std::move(experiment)) {
        std::filesystem::create_directories(dir_);
    }

    /// Write a file and record its digest.
    void write(const std::string& name, const std::string& contents) {
        const auto path = std::filesystem::path(dir_) / name;
        std::ofstream os(path, std::ios::binary);
        if (!os) throw ConfigError("cannot write output file: " + path.string());
        os << contents;
        files_.emplace_back(name, fnv1a64(contents));
    }

    /// Write the manifest listing every emitted file with its digest.
    void finalize() {
        std::ostringstream m;
        m << "experiment " << experiment_ << "\n";
        for (const auto& [name, digest] : files_) {
            m << name << ' ' << std::hex << std::setw(16) << std::setfill('0') << digest
              << std::dec << '\n';
        }
        const auto path = std::filesystem::path(dir_) / "manifest.txt";
        std::ofstream os(path, std::ios::binary);
        os << m.str();
    }

    const std::string& dir() const { return dir_; }

private:
    std::string dir_, experiment_;
    std::vector<std::pair<std::string, std::uint64_t>> files_;
};

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_csv(const std::vector<std::string>& header,
                              const std::vector<std::vector<double>>& rows) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < header.size(); ++i)
        os << header[i] << (i + 1 < header.size() ? ',' : '\n');
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            os << row[i] << (i + 1 < row.size() ? ',' : '\n');
    }
    return os.str();
}

}  // namespace detail

/// h-theorem: seeded homogeneous DSMC runs from the configured initial data;
/// emits the seed-averaged moment/H series and a monotonicity report.
inline void run_h_theorem(const ExperimentConfig& e, OutputWriter& out) {
    const double t0 = e.t0();
    const double horizon = e.horizon_t0 * t0;
    const int seeds = static_cast<int>(e.ensemble);

    std::vector<std::vector<boltzmann::MomentRow>> series(seeds);
    for (int s = 0; s < seeds; ++s) {
        boltzmann::SolveParams p;
        p.particles = static_cast<int>(e.dsmc_particles);
        p.seed = e.seed + static_cast<std::uint64_t>(s);
        p.collisions_enabled = e.collisions_enabled;
        p.output_every = 2;
        series[s] = boltzmann::solve_boltzmann(e.density, horizon, p).series;
    }
    const std::size_t rows = series[0].size();
    std::vector<std::vector<double>> table;
    bool monotone = true;
    double prev_h = 0.0, prev_sig = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        double h_mean = 0.0, h_var = 0.0, e_mean = 0.0;
        Vec3 p_mean;
        for (int s = 0; s < seeds; ++s) {
            h_mean += series[s][r].h;
            e_mean += series[s][r].energy;
            p_mean += series[s][r].momentum;
        }
        h_mean /= seeds;
        e_mean /= seeds;
        p_mean /= static_cast<double>(seeds);
        for (int s = 0; s < seeds; ++s)
            h_var += (series[s][r].h - h_mean) * (series[s][r].h - h_mean);
        const double h_stderr =
            seeds > 1 ? std::sqrt(h_var / (seeds - 1) / seeds) : series[0][r].h_stderr;
        table.push_back({series[0][r].t, 1.0, p_mean.x, p_mean.y, p_mean.z, e_mean, h_mean,
                         h_stderr});
        if (r > 0 && e.collisions_enabled) {
            const double slack = 3.0 * std::sqrt(h_stderr * h_stderr + prev_sig * prev_sig);
            if (h_mean > prev_h + slack) monotone = false;
        }
        prev_h = h_mean;
        prev_sig = h_stderr;
    }
    out.write("moments.csv",
              detail::format_csv({"t", "mass", "p1", "p2", "p3", "energy", "H", "H_stderr"},
                                 table));

    // terminal moments against the Maxwellian fixed by the conserved energy
    const double energy_T = table.back()[5];
    const double beta_eq = 1.5 / energy_T;  // energy = (3/2) / beta at equilibrium
    double m2 = 0.0, m4 = 0.0;
    {
        boltzmann::SolveParams p;
        p.particles = static_cast<int>(e.dsmc_particles);
        p.seed = e.seed;
        p.collisions_enabled = e.collisions_enabled;
        const auto res = boltzmann::solve_boltzmann(e.density, horizon, p);
        for (const Vec3& v : res.final_state.v) {
            m2 += norm2(v);
            m4 += norm2(v) * norm2(v);
        }
        m2 /= res.final_state.count();
        m4 /= res.final_state.count();
    }
    std::ostringstream rep;
    rep.precision(17);
    rep << "h_monotone " << (monotone ? "pass" : "fail") << '\n';
    rep << "beta_equilibrium " << beta_eq << '\n';
    rep << "second_moment " << m2 << " expected " << 3.0 / beta_eq << '\n';
    rep << "fourth_moment " << m4 << " expected " << 15.0 / (beta_eq * beta_eq) << '\n';
    out.write("report.txt", rep.str());
}

/// reversibility: forward to a fixed event count, reverse, run back, reverse;
/// emits per-seed positional recovery errors.
inline void run_reversibility(const ExperimentConfig& e, OutputWriter& out) {
    const int N = static_cast<int>(e.n_list.front());
    const auto regime = e.bg ? ScalingRegime::boltzmann_grad(N)
                             : ScalingRegime::custom(N, e.custom_eps);
    std::vector<std::vector<double>> rows;
    int recovered = 0;
    for (long s = 0; s < e.ensemble; ++s) {
        const auto c0 = sample_initial(e.density, regime, e.seed + s);
        auto [t_ev, rec] = md::evolve_for_events(c0, e.md_events, 10.0 * e.t0());
        auto [fwd, r1] = md::evolve_hard_spheres(c0, t_ev);
        auto [bwd, r2] = md::evolve_hard_spheres(md::reverse_velocities(fwd), t_ev);
        const auto back = md::reverse_velocities(bwd);
        double err = 0.0;
        for (int i = 0; i < c0.count(); ++i)
            err = std::max(err, torus_distance(back.positions[i], c0.positions[i], c0.box_side));
        if (err < 1e-6) ++recovered;
        rows.push_back({static_cast<double>(s), static_cast<double>(e.md_events), t_ev, err});
    }
    out.write("reversibility.csv",
              detail::format_csv({"seed", "events", "elapsed_t", "max_position_error"}, rows));
    std::ostringstream rep;
    rep << "recovered_fraction " << static_cast<double>(recovered) / e.ensemble << '\n';
    out.write("report.txt", rep.str());
}

/// scattering-table: deflection angle, scattering time, and kernel over a
/// (rho, V) grid, plus the monotonicity report and the empirical bound on
/// t* rho V / eps.
inline void run_scattering_table(const ExperimentConfig& e, OutputWriter& out) {
    const auto& phi = e.potential;
    const double eps = 1.0;  // microscopic units in the table
    const auto mono = scattering::check_monotonicity(phi);

    std::vector<std::vector<double>> rows;
    auto bound_over = [&](int n_rho, int n_v, bool emit) {
        double worst = 0.0;
        for (int i = 0; i < n_rho; ++i) {
            const double rho = 0.05 + (1.0 - 0.05) * i / (n_rho - 1);
            for (int j = 0; j < n_v; ++j) {
                const double V = 0.1 * std::pow(100.0, static_cast<double>(j) / (n_v - 1));
                const auto o = scattering::scattering_outcome(phi, rho, V, eps);
                worst = std::max(worst, o.t_star * rho * V / eps);
                if (emit) {
                    double b = std::numeric_limits<double>::quiet_NaN();
                    if (mono.passed && phi.kind() != RadialPotential::Kind::hard_sphere) {
                        if (o.chi > 1e-6) b = scattering::cross_section_kernel(phi, V, o.chi);
                    } else if (phi.kind() == RadialPotential::Kind::hard_sphere) {
                        b = 0.25 * V;
                    }
                    rows.push_back({rho, V, o.chi, o.t_star, b});
                }
            }
        }
        return worst;
    };
    const double coarse = bound_over(8, 6, false);
    const double fine = bound_over(15, 11, true);
    out.write("scattering_table.csv",
              detail::format_csv({"rho", "V", "chi", "t_star", "B"}, rows));

    std::ostringstream rep;
    rep.precision(17);
    rep << "monotonicity " << (mono.passed ? "pass" : "fail") << '\n';
    rep << "min_condition_value " << mono.min_value << " at_r " << mono.argmin << '\n';
    rep << "indeterminate_points " << mono.indeterminate << '\n';
    rep << "bound_coarse " << coarse << '\n';
    rep << "bound_fine " << fine << '\n';
    rep << "bound_stable "
        << (coarse > 0.0 && std::abs(fine - coarse) / coarse < 0.05 ? "pass" : "fail") << '\n';
    out.write("report.txt", rep.str());
}

/// tree-series: BBF terms n = 0..2 with the envelope check, and IBF
/// recollision fractions over a falling eps family.
inline void run_tree_series(const ExperimentConfig& e, OutputWriter& out) {
    const double t0 = e.t0();
    const double t = e.horizon_t0 * t0;
    const std::vector<Vec3> root_x{{0.5, 0.5, 0.5}};
    const std::vector<Vec3> root_v{{0.4, 0.0, 0.0}};

    hierarchy::SeriesOptions opt;
    opt.seed = e.seed;
    opt.proposal_beta = 0.9 * e.density.beta_sup();
    opt.cutoffs = e.cutoffs;

    std::vector<std::vector<double>> rows;
    std::vector<hierarchy::SeriesEstimate> terms;
    for (int n = 0; n <= 2; ++n) {
        const auto est = hierarchy::eval_series_term(
            1, n, e.density, root_x, root_v, t, e.tree_samples,
            hierarchy::BackwardTrajectory::Flavor::bbf, 0.0, nullptr, opt);
        terms.push_back(est);
        rows.push_back({1.0, static_cast<double>(n), 0.0, t, est.estimate, est.stderr_value,
                        static_cast<double>(est.samples), est.recollision_fraction,
                        est.cutoff_measure});
    }
    const auto hs = RadialPotential::hard_sphere();
    for (double eps : {0.1, 0.05, 0.025}) {
        auto ibf_opt = opt;
        const auto est = hierarchy::eval_series_term(
            1, 2, e.density, root_x, root_v, t, std::min<long>(e.tree_samples, 10000),
            hierarchy::BackwardTrajectory::Flavor::ibf, eps, &hs, ibf_opt);
        rows.push_back({1.0, 2.0, eps, t, est.estimate, est.stderr_value,
                        static_cast<double>(est.samples), est.recollision_fraction,
                        est.cutoff_measure});
    }
    out.write("tree_series.csv",
              detail::format_csv({"j", "n", "flavor", "t", "estimate", "stderr", "samples",
                                  "recollision_fraction", "cutoff_measure"},
                                 rows));

    const auto bound = hierarchy::series_bound_check(terms, t, t0);
    std::ostringstream rep;
    rep.precision(17);
    rep << "t_over_t0 " << t / t0 << '\n';
    rep << "c_fit " << bound.c_fit << '\n';
    rep << "envelope " << (bound.envelope_holds ? "pass" : "fail") << '\n';
    for (std::size_t i = 0; i < bound.ratios.size(); ++i)
        rep << "ratio_" << i + 1 << ' ' << bound.ratios[i] << " sigma "
            << bound.ratio_sigmas[i] << '\n';
    out.write("report.txt", rep.str());
}

/// bg-convergence: hard-sphere ensembles across the N list at fixed N eps^2,
/// chaos defect and observable gap against one DSMC reference solution.
inline void run_bg_convergence(const ExperimentConfig& e, OutputWriter& out) {
    const double t0 = e.t0();
    const double t = e.horizon_t0 * t0;

    // one DSMC reference for the limiting one-particle density at time t
    marginals::VariableSpec v3;
    v3.kind = marginals::VariableSpec::Kind::vector3;
    v3.bins = 16;
    v3.lo = -6.0;
    v3.hi = 6.0;
    boltzmann::SolveParams sp;
    sp.particles = static_cast<int>(e.dsmc_particles);
    sp.seed = e.seed ^ 0xD5;
    const auto dsmc = boltzmann::solve_boltzmann(e.density, t, sp);
    const auto f_dsmc = marginals::marginal_from_velocities(dsmc.final_state.v, v3);
    const auto phi_test = marginals::bump_function({0.5, 0.0, 0.0}, 2.0);
    const double pair_dsmc = marginals::observable_pairing(f_dsmc, phi_test).value;

    std::vector<std::vector<double>> rows;
    std::vector<double> defects, gaps;
    for (long N : e.n_list) {
        const auto regime = e.bg ? ScalingRegime::boltzmann_grad(static_cast<int>(N))
                                 : ScalingRegime::custom(static_cast<int>(N), e.custom_eps);
        std::vector<ParticleConfiguration> ensemble;
        ensemble.reserve(e.ensemble);
        for (long r = 0; r < e.ensemble; ++r) {
            const auto c0 = sample_initial(e.density, regime,
                                           e.seed + 1000003ULL * N + static_cast<std::uint64_t>(r));
            ensemble.push_back(md::evolve_hard_spheres(c0, t).first);
        }

        // chaos defect averaged over the three velocity components
        double defect = 0.0, defect_var = 0.0;
        for (int comp = 0; comp < 3; ++comp) {
            marginals::VariableSpec var;
            var.kind = marginals::VariableSpec::Kind::component;
            var.component = comp;
            var.bins = 6;
            var.lo = -4.5;
            var.hi = 4.5;
            marginals::EstimateOptions mo;
            mo.subsets_per_member = 25;
            mo.seed = e.seed + comp;
            const auto f2 = marginals::estimate_marginal(ensemble, 2, var, mo);
            const auto f1 = marginals::estimate_marginal(ensemble, 1, var, mo);
            const auto d = marginals::chaos_defect(f2, f1, e.seed + comp);
            defect += d.value / 3.0;
            defect_var += d.stderr_value * d.stderr_value / 9.0;
        }

        // observable gap against the reference solution
        marginals::EstimateOptions mo;
        mo.subsets_per_member = 25;
        mo.seed = e.seed + 7;
        const auto f1v = marginals::estimate_marginal(ensemble, 1, v3, mo);
        const double pair_md = marginals::observable_pairing(f1v, phi_test).value;
        const double gap = std::abs(pair_md - pair_dsmc);

        rows.push_back({static_cast<double>(N), regime.epsilon, defect,
                        std::sqrt(defect_var), gap, pair_md, pair_dsmc});
        defects.push_back(defect);
        gaps.push_back(gap);
    }
    out.write("bg_convergence.csv",
              detail::format_csv({"N", "eps", "chaos_defect", "defect_stderr",
                                  "observable_gap", "pairing_md", "pairing_dsmc"},
                                 rows));

    bool defect_down = true, gap_down = true;
    for (std::size_t i = 1; i < defects.size(); ++i) {
        if (defects[i] >= defects[i - 1]) defect_down = false;
        if (gaps[i] >= gaps[i - 1]) gap_down = false;
    }
    // informational fitted slope of log defect vs log N
    double slope = 0.0;
    if (defects.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double m = static_cast<double>(defects.size());
        for (std::size_t i = 0; i < defects.size(); ++i) {
            const double x = std::log(static_cast<double>(e.n_list[i]));
            const double y = std::log(std::max(defects[i], 1e-300));
            sx += x; sy += y; sxx += x * x; sxy += x * y;
        }
        slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    }
    std::ostringstream rep;
    rep.precision(17);
    rep << "defect_strictly_decreasing " << (defect_down ? "pass" : "fail") << '\n';
    rep << "observable_gap_decreasing " << (gap_down ? "pass" : "fail") << '\n';
    rep << "fitted_slope_logN " << slope << "   # informational only\n";
    out.write("report.txt", rep.str());
}

/// Dispatch; deterministic outputs given the seed, manifest written last.
inline void run_experiment(const ExperimentConfig& e) {
    OutputWriter out(e.output_dir, e.name);
    if (e.name == "h-theorem")
        run_h_theorem(e, out);
    else if (e.name == "reversibility")
        run_reversibility(e, out);
    else if (e.name == "scattering-table")
        run_scattering_table(e, out);
    else if (e.name == "tree-series")
        run_tree_series(e, out);
    else if (e.name == "bg-convergence")
        run_bg_convergence(e, out);
    else
        throw ConfigError("unknown experiment: " + e.name);
    out.finalize();
}

// ---------------------------------------------------------------------------
// Plot scripts
// ---------------------------------------------------------------------------

/// Generate a self-contained gnuplot script for an experiment's headline
/// figure from its manifest.
inline std::string emit_plot_script(const std::string& manifest_path) {
    std::ifstream is(manifest_path);
    if (!is) throw ConfigError("cannot open manifest: " + manifest_path);
    std::string word, experiment;
    is >> word >> experiment;
    if (word != "experiment") throw ConfigError("malformed manifest: " + manifest_path);
    std::vector<std::string> files;
    std::string name, digest;
    while (is >> name >> digest) files.push_back(name);
    const auto dir = std::filesystem::path(manifest_path).parent_path();
    auto need = [&](const std::string& f) {
        if (std::find(files.begin(), files.end(), f) == files.end())
            throw ConfigError("manifest lacks required file: " + f);
        if (!std::filesystem::exists(dir / f))
            throw ConfigError("missing CSV: " + (dir / f).string());
    };

    std::ostringstream os;
    os << "# gnuplot script generated by boltzgrad plot\n";
    os << "set datafile separator ','\n";
    if (experiment == "h-theorem") {
        need("moments.csv");
        os << "set xlabel 't'\nset ylabel 'H(t)'\n";
        os << "plot 'moments.csv' using 1:7:8 skip 1 with yerrorlines title 'H with error band'\n";
    } else if (experiment == "bg-convergence") {
        need("bg_convergence.csv");
        os << "set logscale xy\nset xlabel 'N'\nset ylabel 'chaos defect'\n";
        os << "fit a*x+b 'bg_convergence.csv' using (log($1)):(log($3)) skip 1 via a,b\n";
        os << "set label sprintf('fitted slope %.3f', a) at graph 0.1,0.9\n";
        os << "plot 'bg_convergence.csv' using 1:3:4 skip 1 with yerrorlines title 'defect', \\\n";
        os << "     'bg_convergence.csv' using 1:5 skip 1 with linespoints title 'observable gap'\n";
    } else if (experiment == "scattering-table") {
        need("scattering_table.csv");
        os << "set xlabel 'rho'\nset ylabel 'chi'\n";
        os << "plot 'scattering_table.csv' using 1:3 skip 1 with points title 'deflection'\n";
    } else if (experiment == "tree-series") {
        need("tree_series.csv");
        os << "set xlabel 'n'\nset ylabel '|T(1,n)|'\nset logscale y\n";
        os << "plot 'tree_series.csv' using 2:(abs($5)):6 skip 1 with yerrorbars title 'terms'\n";
    } else if (experiment == "reversibility") {
        need("reversibility.csv");
        os << "set xlabel 'seed'\nset ylabel 'max position error'\nset logscale y\n";
        os << "plot 'reversibility.csv' using 1:4 skip 1 with points title 'recovery error'\n";
    } else {
        os << "set title 'unknown experiment'\nplot [-1:1] [-1:1] NaN notitle\n";
    }
    return os.str();
}

}  // namespace boltzgrad::lab
