#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "boltzgrad/errors.hpp"
#include "boltzgrad/md.hpp"
#include "boltzgrad/phase.hpp"
#include "boltzgrad/rng.hpp"
#include "boltzgrad/scattering.hpp"
#include "boltzgrad/vec3.hpp"

namespace boltzgrad::boltzmann {

// ---------------------------------------------------------------------------
// Sphere rule
// ---------------------------------------------------------------------------

/// 26-point Lebedev rule (octahedron vertices, edge midpoints, cube
/// diagonals), exact for spherical polynomials through degree 7. Weights sum
/// to 1; surface integrals carry the 4*pi factor.
inline const std::vector<std::pair<Vec3, double>>& lebedev26() {
    static const std::vector<std::pair<Vec3, double>> rule = [] {
        std::vector<std::pair<Vec3, double>> pts;
        const double a1 = 1.0 / 21.0, a2 = 4.0 / 105.0, a3 = 27.0 / 840.0;
        for (int s : {-1, 1}) {
            pts.push_back({{double(s), 0, 0}, a1});
            pts.push_back({{0, double(s), 0}, a1});
            pts.push_back({{0, 0, double(s)}, a1});
        }
        const double r2 = 1.0 / std::sqrt(2.0);
        for (int s1 : {-1, 1})
            for (int s2 : {-1, 1}) {
                pts.push_back({{s1 * r2, s2 * r2, 0}, a2});
                pts.push_back({{s1 * r2, 0, s2 * r2}, a2});
                pts.push_back({{0, s1 * r2, s2 * r2}, a2});
            }
        const double r3 = 1.0 / std::sqrt(3.0);
        for (int s1 : {-1, 1})
            for (int s2 : {-1, 1})
                for (int s3 : {-1, 1}) pts.push_back({{s1 * r3, s2 * r3, s3 * r3}, a3});
        return pts;
    }();
    return rule;
}

// ---------------------------------------------------------------------------
// VelocityGridFunction
// ---------------------------------------------------------------------------

/// Nonnegative density on a uniform velocity grid [-v_max, v_max]^3 with n
/// nodes per axis (endpoints included; trapezoid quadrature). A grid built
/// from an analytic density keeps it attached, so off-grid points evaluate
/// exactly; otherwise off-grid values use trilinear interpolation and vanish
/// outside the grid.
class VelocityGridFunction {
public:
    VelocityGridFunction(int n, double v_max, std::vector<double> values)
        : n_(n), v_max_(v_max), values_(std::move(values)) {
        if (n_ < 2 || !(v_max_ > 0.0) ||
            values_.size() != static_cast<std::size_t>(n_) * n_ * n_)
            throw ConfigError("VelocityGridFunction: bad grid");
        for (double v : values_)
            if (v < 0.0) throw ConfigError("VelocityGridFunction: negative value");
    }

    static VelocityGridFunction from_density(int n, double v_max, const DensitySpec& spec) {
        std::vector<double> vals(static_cast<std::size_t>(n) * n * n);
        VelocityGridFunction g(n, v_max, std::move(vals));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    g.values_[g.flat(i, j, k)] = spec.velocity_density(g.node(i, j, k));
        g.analytic_ = spec;
        return g;
    }

    /// Histogram density of a velocity sample on this grid's node cells.
    static VelocityGridFunction from_samples(int n, double v_max,
                                             std::span<const Vec3> velocities) {
        std::vector<double> vals(static_cast<std::size_t>(n) * n * n, 0.0);
        VelocityGridFunction g(n, v_max, std::move(vals));
        const double h = g.spacing();
        std::size_t inside = 0;
        for (const Vec3& v : velocities) {
            int idx[3];
            bool ok = true;
            for (int a = 0; a < 3; ++a) {
                const double f = (v[a] + v_max) / h;
                const int i = static_cast<int>(std::lround(f));
                if (i < 0 || i >= n) {
                    ok = false;
                    break;
                }
                idx[a] = i;
            }
            if (ok) {
                g.values_[g.flat(idx[0], idx[1], idx[2])] += 1.0;
                ++inside;
            }
        }
        const double norm = static_cast<double>(velocities.size()) * h * h * h;
        if (norm > 0.0)
            for (double& v : g.values_) v /= norm;
        return g;
    }

    int nodes_per_axis() const { return n_; }
    double v_max() const { return v_max_; }
    double spacing() const { return 2.0 * v_max_ / (n_ - 1); }
    bool has_analytic() const { return analytic_.has_value(); }
    const std::optional<DensitySpec>& analytic() const { return analytic_; }

    std::size_t flat(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * n_ + j) * n_ + k;
    }
    Vec3 node(int i, int j, int k) const {
        const double h = spacing();
        return {-v_max_ + i * h, -v_max_ + j * h, -v_max_ + k * h};
    }
    double node_value(int i, int j, int k) const { return values_[flat(i, j, k)]; }
    const std::vector<double>& values() const { return values_; }

    double trap_weight(int i) const { return (i == 0 || i == n_ - 1) ? 0.5 : 1.0; }
    double node_weight(int i, int j, int k) const {
        const double h = spacing();
        return trap_weight(i) * trap_weight(j) * trap_weight(k) * h * h * h;
    }

    double value_at(const Vec3& v) const {
        if (analytic_) return analytic_->velocity_density(v);
        return trilinear(v);
    }

    /// f(a) * f(b), evaluated analytically when possible (for Maxwellian
    /// mixtures this is a short sum of exponentials and preserves the exact
    /// collision-invariance cancellations).
    double pair_product(const Vec3& a, const Vec3& b) const {
        if (analytic_ && !analytic_->is_tabulated()) {
            const auto& comps = analytic_->components();
            double s = 0.0;
            for (const auto& ci : comps)
                for (const auto& cj : comps)
                    s += ci.amp * cj.amp *
                         std::exp(-0.5 * (ci.beta * norm2(a - ci.drift) +
                                          cj.beta * norm2(b - cj.drift)));
            return s;
        }
        return value_at(a) * value_at(b);
    }

    bool inside(const Vec3& v) const {
        return std::abs(v.x) <= v_max_ && std::abs(v.y) <= v_max_ && std::abs(v.z) <= v_max_;
    }

    double mass() const {
        double m = 0.0;
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                for (int k = 0; k < n_; ++k) m += node_weight(i, j, k) * node_value(i, j, k);
        return m;
    }

private:
    double trilinear(const Vec3& v) const {
        const double h = spacing();
        double f[3];
        int i0[3];
        for (int a = 0; a < 3; ++a) {
            const double t = (v[a] + v_max_) / h;
            if (t < 0.0 || t > n_ - 1) return 0.0;
            i0[a] = std::min(static_cast<int>(t), n_ - 2);
            f[a] = t - i0[a];
        }
        double s = 0.0;
        for (int di = 0; di < 2; ++di)
            for (int dj = 0; dj < 2; ++dj)
                for (int dk = 0; dk < 2; ++dk)
                    s += (di ? f[0] : 1 - f[0]) * (dj ? f[1] : 1 - f[1]) *
                         (dk ? f[2] : 1 - f[2]) *
                         values_[flat(i0[0] + di, i0[1] + dj, i0[2] + dk)];
        return s;
    }

    int n_;
    double v_max_;
    std::vector<double> values_;
    std::optional<DensitySpec> analytic_;
};

// ---------------------------------------------------------------------------
// Hard-sphere collision operator by direct quadrature
// ---------------------------------------------------------------------------

struct QDiagnostics {
    double escaped_mass = 0.0;  // loss-side mass whose post-collision pair left the grid
};

/// Q(f,f)(v) for the hard-sphere kernel: velocity integral by the grid's
/// trapezoid rule, sphere integral by the 26-point rule over the full sphere
/// with kernel |nu.(v - v*)| / 2 (the integrand is even in nu).
inline double q_hardsphere(const VelocityGridFunction& f, const Vec3& v,
                           QDiagnostics* diag = nullptr) {
    const int n = f.nodes_per_axis();
    const auto& sphere = lebedev26();
    // prune pairs whose joint Gaussian bound is negligible
    double beta_sup = 0.0, prune_log = std::numeric_limits<double>::infinity();
    if (f.has_analytic() && !f.analytic()->is_tabulated()) {
        beta_sup = f.analytic()->beta_sup();
        prune_log = (65.0 * 2.0) / beta_sup;  // |v|^2 + |v*|^2 above this is < e-65 relative
    }
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const Vec3 vs = f.node(i, j, k);
                if (norm2(v) + norm2(vs) > prune_log) continue;
                const double w = f.node_weight(i, j, k);
                const double loss = f.pair_product(v, vs);
                const Vec3 g = v - vs;
                double cell = 0.0;
                for (const auto& [nu, wn] : sphere) {
                    const double b = dot(g, nu);
                    const double kern = 0.5 * std::abs(b);
                    if (kern == 0.0) continue;
                    const Vec3 vp = v - b * nu;
                    const Vec3 vsp = vs + b * nu;
                    double gain;
                    if (f.has_analytic()) {
                        gain = f.pair_product(vp, vsp);
                    } else if (f.inside(vp) && f.inside(vsp)) {
                        gain = f.pair_product(vp, vsp);
                    } else {
                        gain = 0.0;
                        if (diag) diag->escaped_mass += 4.0 * kPi * wn * w * kern * loss;
                    }
                    cell += wn * kern * (gain - loss);
                }
                acc += w * 4.0 * kPi * cell;
            }
    return acc;
}

struct InvariantIntegrals {
    double mass = 0.0;
    Vec3 momentum;
    double energy = 0.0;    // integral of |v|^2 Q
    double moment4 = 0.0;   // integral of |v|^4 Q
};

/// Integrals of {1, v, |v|^2, |v|^4} against Q(f,f), accumulated in a single
/// symmetrized pass over unordered node pairs.
inline InvariantIntegrals q_invariant_integrals(const VelocityGridFunction& f) {
    const int n = f.nodes_per_axis();
    const auto& sphere = lebedev26();
    double beta_sup = 0.0, prune_log = std::numeric_limits<double>::infinity();
    if (f.has_analytic() && !f.analytic()->is_tabulated()) {
        beta_sup = f.analytic()->beta_sup();
        prune_log = (65.0 * 2.0) / beta_sup;
    }
    struct Node {
        Vec3 v;
        double w;
    };
    std::vector<Node> nodes;
    nodes.reserve(static_cast<std::size_t>(n) * n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                nodes.push_back({f.node(i, j, k), f.node_weight(i, j, k)});

    InvariantIntegrals out;
    const std::size_t m = nodes.size();
    for (std::size_t a = 0; a < m; ++a) {
        const Vec3 va = nodes[a].v;
        const double na2 = norm2(va);
        for (std::size_t b = a + 1; b < m; ++b) {
            const Vec3 vb = nodes[b].v;
            const double e_pair = na2 + norm2(vb);
            if (e_pair > prune_log) continue;
            const double w = nodes[a].w * nodes[b].w;
            const double loss = f.pair_product(va, vb);
            const Vec3 g = va - vb;
            double s0 = 0.0, s2a = 0.0, s2b = 0.0, s4a = 0.0, s4b = 0.0;
            Vec3 s1a, s1b;
            for (const auto& [nu, wn] : sphere) {
                const double bb = dot(g, nu);
                const double kern = 0.5 * std::abs(bb);
                if (kern == 0.0) continue;
                const Vec3 vp = va - bb * nu;
                const Vec3 vbp = vb + bb * nu;
                double gain;
                if (f.has_analytic() || (f.inside(vp) && f.inside(vbp)))
                    gain = f.pair_product(vp, vbp);
                else
                    gain = 0.0;
                const double d = wn * kern * (gain - loss);
                s0 += d;
                s1a += d * va;
                s1b += d * vb;
                s2a += d * na2;
                s2b += d * norm2(vb);
                s4a += d * na2 * na2;
                s4b += d * norm2(vb) * norm2(vb);
            }
            const double c = 4.0 * kPi * w;
            out.mass += c * (s0 + s0);
            out.momentum += c * (s1a + s1b);
            out.energy += c * (s2a + s2b);
            out.moment4 += c * (s4a + s4b);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// H-functional
// ---------------------------------------------------------------------------

/// H(f) = integral of f (log f - 1) by the grid's trapezoid rule; empty cells
/// contribute 0 (x log x -> 0).
inline double h_functional_grid(const VelocityGridFunction& f) {
    const int n = f.nodes_per_axis();
    double h = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const double v = f.node_value(i, j, k);
                if (v > 0.0) h += f.node_weight(i, j, k) * v * (std::log(v) - 1.0);
            }
    return h;
}

struct HSampleEstimate {
    double value = 0.0;
    double stderr_value = 0.0;
    int occupied_bins = 0;
};

/// Histogram estimate of H from a velocity sample. Bin widths follow Scott's
/// rule per axis; the plug-in value receives the Miller-Madow occupancy
/// correction; empty bins contribute 0. The standard error comes from eight
/// index-strided sample batches evaluated on the same bin edges.
inline HSampleEstimate h_functional_samples(std::span<const Vec3> vel) {
    const std::size_t m = vel.size();
    if (m < 16) throw ConfigError("h_functional_samples needs at least 16 samples");
    Vec3 mean{}, lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (const Vec3& v : vel) mean += v;
    mean /= static_cast<double>(m);
    Vec3 var{};
    for (const Vec3& v : vel)
        for (int a = 0; a < 3; ++a) {
            var[a] += (v[a] - mean[a]) * (v[a] - mean[a]);
            lo[a] = std::min(lo[a], v[a]);
            hi[a] = std::max(hi[a], v[a]);
        }
    double width[3];
    int bins[3];
    double origin[3];
    for (int a = 0; a < 3; ++a) {
        const double sigma = std::sqrt(var[a] / (m - 1));
        // Scott's multivariate rule: h = 3.49 sigma m^{-1/(d+2)}, d = 3
        width[a] = 3.49 * sigma * std::pow(static_cast<double>(m), -1.0 / 5.0);
        if (!(width[a] > 0.0)) width[a] = 1.0;
        origin[a] = lo[a] - 0.5 * width[a];
        bins[a] = static_cast<int>((hi[a] - origin[a]) / width[a]) + 2;
    }
    const double cell_vol = width[0] * width[1] * width[2];
    const std::size_t nb =
        static_cast<std::size_t>(bins[0]) * bins[1] * bins[2];
    if (nb > 80'000'000) throw BudgetError("h_functional_samples: histogram too large");

    constexpr int kBatches = 8;
    std::vector<std::uint32_t> count(nb, 0);
    std::vector<std::vector<std::uint32_t>> bcount(kBatches, std::vector<std::uint32_t>(nb, 0));
    auto bin_of = [&](const Vec3& v) {
        std::size_t idx = 0;
        for (int a = 0; a < 3; ++a) {
            const int i = static_cast<int>((v[a] - origin[a]) / width[a]);
            idx = idx * bins[a] + static_cast<std::size_t>(std::clamp(i, 0, bins[a] - 1));
        }
        return idx;
    };
    for (std::size_t s = 0; s < m; ++s) {
        const std::size_t b = bin_of(vel[s]);
        ++count[b];
        ++bcount[s % kBatches][b];
    }

    auto plugin = [&](const std::vector<std::uint32_t>& c, double total) {
        double h = 0.0;
        int occ = 0;
        for (std::size_t b = 0; b < nb; ++b)
            if (c[b] > 0) {
                ++occ;
                const double p = c[b] / total;
                h += p * (std::log(p / cell_vol) - 1.0);
            }
        return std::pair<double, int>{h, occ};
    };
    auto [h_all, occ] = plugin(count, static_cast<double>(m));
    HSampleEstimate est;
    est.occupied_bins = occ;
    est.value = h_all - (occ - 1) / (2.0 * static_cast<double>(m));

    double batch_mean = 0.0, batch_var = 0.0;
    std::array<double, kBatches> hb{};
    for (int b = 0; b < kBatches; ++b) {
        double total = 0.0;
        for (auto c : bcount[b]) total += c;
        auto [h, o] = plugin(bcount[b], total);
        hb[b] = h - (o - 1) / (2.0 * total);
        batch_mean += hb[b] / kBatches;
    }
    for (int b = 0; b < kBatches; ++b)
        batch_var += (hb[b] - batch_mean) * (hb[b] - batch_mean);
    est.stderr_value = std::sqrt(batch_var / (kBatches - 1)) / std::sqrt(double(kBatches));
    return est;
}

// ---------------------------------------------------------------------------
// DSMC
// ---------------------------------------------------------------------------

/// Particle representation of the one-particle density on the unit periodic
/// box: M equal-weight simulation particles, per-cell no-time-counter
/// collision sampling with a relative-speed majorant, and the hard-sphere
/// contact law (analytic kernel) or the full two-body outcome of a tabulated
/// deflection table.
struct DsmcState {
    std::vector<Vec3> x, v;
    double t = 0.0;
    double box_side = 1.0;
    int cells_per_side = 1;
    std::uint64_t seed = 0;
    std::uint64_t step_index = 0;
    double b_max = 0.0;  // majorant on the pair relative speed
    int majorant_doublings = 0;
    std::optional<scattering::DeflectionTable> kernel_table;  // empty: hard sphere

    int count() const { return static_cast<int>(v.size()); }

    void validate() const {
        if (x.size() != v.size()) throw InvalidConfigurationError("DSMC state size mismatch");
        for (const Vec3& p : x)
            for (int a = 0; a < 3; ++a)
                if (p[a] < 0.0 || p[a] >= box_side)
                    throw InvalidConfigurationError("DSMC particle outside the box");
    }
};

inline DsmcState make_dsmc(const DensitySpec& f0, int M, std::uint64_t seed,
                           int cells_per_side = 1,
                           std::optional<scattering::DeflectionTable> table = std::nullopt) {
    if (M < 1) throw ConfigError("DSMC needs at least one particle");
    DsmcState s;
    s.seed = seed;
    s.cells_per_side = std::max(1, cells_per_side);
    s.kernel_table = std::move(table);
    auto rng = make_rng(seed, 0xD0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    s.x.resize(M);
    s.v.resize(M);
    double vmax = 0.0;
    for (int i = 0; i < M; ++i) {
        s.x[i] = {u(rng), u(rng), u(rng)};
        s.v[i] = f0.sample_velocity(rng);
        vmax = std::max(vmax, norm(s.v[i]));
    }
    s.b_max = 2.2 * vmax + 1e-12;
    return s;
}

/// Mean pair relative speed from a deterministic subsample.
inline double mean_relative_speed(const DsmcState& s) {
    auto rng = make_rng(s.seed, 0xA11, s.step_index);
    std::uniform_int_distribution<int> pick(0, s.count() - 1);
    double acc = 0.0;
    const int samples = std::min(2000, s.count());
    for (int t = 0; t < samples; ++t) {
        int i = pick(rng), j = pick(rng);
        while (j == i) j = pick(rng);
        acc += norm(s.v[i] - s.v[j]);
    }
    return acc / samples;
}

/// Mean free time 1 / (pi n <g>) with unit number density on the unit box.
inline double mean_free_time(const DsmcState& s) {
    const double g = mean_relative_speed(s);
    const double n_density = 1.0 / (s.box_side * s.box_side * s.box_side);
    return 1.0 / (kPi * n_density * std::max(g, 1e-12));
}

/// Exact free transport with periodic wrap.
inline void transport_step(DsmcState& s, double dt) {
    for (int i = 0; i < s.count(); ++i) s.x[i] = wrap(s.x[i] + dt * s.v[i], s.box_side);
    s.t += dt;
}

/// One Bird-type collision sub-step of length dt. Candidate pairs per cell
/// are Poisson-thinned by g / b_max; accepted pairs scatter with the contact
/// direction drawn from the hard-sphere flux law (cos-weighted hemisphere
/// around the relative velocity). Per-cell RNG streams derive from
/// (seed, step index, cell index), so results do not depend on cell order.
inline void dsmc_step(DsmcState& s, double dt) {
    const int mc = s.cells_per_side;
    const int ncells = mc * mc * mc;
    const double vol_cell = std::pow(s.box_side / mc, 3);
    const double inv_m = 1.0 / static_cast<double>(s.count());

    std::vector<std::vector<int>> occupants(ncells);
    for (int i = 0; i < s.count(); ++i) {
        int c[3];
        for (int a = 0; a < 3; ++a) {
            c[a] = static_cast<int>(s.x[i][a] / s.box_side * mc);
            c[a] = std::clamp(c[a], 0, mc - 1);
        }
        occupants[(c[0] * mc + c[1]) * mc + c[2]].push_back(i);
    }

    for (int cell = 0; cell < ncells; ++cell) {
        auto& occ = occupants[cell];
        const int nc = static_cast<int>(occ.size());
        if (nc < 2) continue;
        auto rng = make_rng(s.seed, 0xC011, s.step_index, static_cast<std::uint64_t>(cell));
        std::uniform_real_distribution<double> u(0.0, 1.0);

        const double lambda_max = kPi * s.b_max * inv_m / vol_cell;
        const double mean_cand = 0.5 * nc * (nc - 1) * lambda_max * dt;
        long cand = static_cast<long>(mean_cand);
        if (u(rng) < mean_cand - cand) ++cand;

        std::uniform_int_distribution<int> pick(0, nc - 1);
        for (long c = 0; c < cand; ++c) {
            int a = pick(rng), b = pick(rng);
            while (b == a) b = pick(rng);
            const int i = occ[a], j = occ[b];
            const Vec3 g = s.v[i] - s.v[j];
            const double gn = norm(g);
            if (gn > s.b_max) {
                s.b_max *= 2.0;  // majorant exceeded: double and go on
                ++s.majorant_doublings;
            }
            if (u(rng) * s.b_max >= gn) continue;  // null collision
            // contact direction: cos-weighted hemisphere around g
            const Vec3 ghat = g / gn;
            const double ct = std::sqrt(u(rng));
            const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
            const double phi = 2.0 * kPi * u(rng);
            const Vec3 e1 = scattering::detail::any_unit_perpendicular(ghat);
            const Vec3 e2 = cross(ghat, e1);
            const Vec3 nu = ct * ghat + st * (std::cos(phi) * e1 + std::sin(phi) * e2);
            if (s.kernel_table) {
                auto [vi, vj] = scattering::scattering_map(s.v[i], s.v[j], nu, *s.kernel_table);
                s.v[i] = vi;
                s.v[j] = vj;
            } else {
                auto [vi, vj] = md::apply_collision(s.v[i], s.v[j], nu);
                s.v[i] = vi;
                s.v[j] = vj;
            }
        }
    }
    ++s.step_index;
}

// ---------------------------------------------------------------------------
// Full solver (Strang splitting)
// ---------------------------------------------------------------------------

struct MomentRow {
    double t = 0.0;
    double mass = 1.0;
    Vec3 momentum;
    double energy = 0.0;  // (1/2) <|v|^2>
    double h = 0.0;
    double h_stderr = 0.0;
};

inline void write_moments_csv(std::ostream& os, const std::vector<MomentRow>& rows) {
    os << "t,mass,p1,p2,p3,energy,H,H_stderr\n";
    os.precision(17);
    for (const auto& r : rows)
        os << r.t << ',' << r.mass << ',' << r.momentum.x << ',' << r.momentum.y << ','
           << r.momentum.z << ',' << r.energy << ',' << r.h << ',' << r.h_stderr << '\n';
}

struct SolveParams {
    int particles = 100000;
    int cells_per_side = 1;          // homogeneous default
    double dt = 0.0;                 // 0: auto, 0.1 of the initial mean free time
    int output_every = 1;
    std::uint64_t seed = 0;
    bool collisions_enabled = true;
    std::optional<scattering::DeflectionTable> kernel_table;
    std::vector<double> snapshot_times;
    int snapshot_nodes = 32;
    double snapshot_v_max = 8.0;
};

struct SolveResult {
    std::vector<MomentRow> series;
    std::vector<std::pair<double, VelocityGridFunction>> snapshots;
    DsmcState final_state;
};

inline MomentRow measure(const DsmcState& s) {
    MomentRow r;
    r.t = s.t;
    r.mass = 1.0;
    double e = 0.0;
    Vec3 p;
    for (const Vec3& v : s.v) {
        p += v;
        e += 0.5 * norm2(v);
    }
    r.momentum = p / static_cast<double>(s.count());
    r.energy = e / static_cast<double>(s.count());
    const auto h = h_functional_samples(s.v);
    r.h = h.value;
    r.h_stderr = h.stderr_value;
    return r;
}

/// Strang-split evolution: half transport, collisions, half transport per
/// step. Emits moments and the H estimate on the output stride and snapshot
/// histograms at the requested times.
inline SolveResult solve_boltzmann(const DensitySpec& f0, double t_final, SolveParams params) {
    DsmcState s = make_dsmc(f0, params.particles, params.seed, params.cells_per_side,
                            std::move(params.kernel_table));
    double dt = params.dt;
    if (dt <= 0.0) dt = 0.1 * mean_free_time(s);
    const long steps = std::max(1L, static_cast<long>(std::ceil(t_final / dt)));
    dt = t_final / static_cast<double>(steps);

    SolveResult out;
    out.series.push_back(measure(s));
    std::size_t next_snap = 0;
    std::vector<double> snaps = params.snapshot_times;
    std::sort(snaps.begin(), snaps.end());
    for (long k = 0; k < steps; ++k) {
        transport_step(s, 0.5 * dt);
        if (params.collisions_enabled) dsmc_step(s, dt);
        transport_step(s, 0.5 * dt);
        if ((k + 1) % params.output_every == 0 || k + 1 == steps)
            out.series.push_back(measure(s));
        while (next_snap < snaps.size() && s.t >= snaps[next_snap] - 1e-12) {
            out.snapshots.emplace_back(
                s.t, VelocityGridFunction::from_samples(params.snapshot_nodes,
                                                        params.snapshot_v_max, s.v));
            ++next_snap;
        }
    }
    out.final_state = std::move(s);
    return out;
}

}  // namespace boltzgrad::boltzmann
