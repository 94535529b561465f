#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "boltzgrad/errors.hpp"
#include "boltzgrad/md.hpp"
#include "boltzgrad/phase.hpp"
#include "boltzgrad/rng.hpp"
#include "boltzgrad/scattering.hpp"
#include "boltzgrad/vec3.hpp"

namespace boltzgrad::hierarchy {

// ---------------------------------------------------------------------------
// Collision trees
// ---------------------------------------------------------------------------

/// Binary tree with j roots and n added nodes; progenitor[i] (0-based) is the
/// index of the particle that creates particle j + i, so progenitor[i] < j + i.
struct CollisionTree {
    int roots = 1;
    std::vector<int> progenitors;

    int nodes() const { return static_cast<int>(progenitors.size()); }
};

/// All progenitor assignments in lexicographic order. The count is
/// j (j+1) ... (j+n-1); more than 1e5 trees is a budget error.
inline std::vector<CollisionTree> enumerate_trees(int j, int n) {
    if (j < 1 || n < 0) throw ConfigError("enumerate_trees requires j >= 1, n >= 0");
    double count = 1.0;
    for (int i = 0; i < n; ++i) count *= j + i;
    if (count > 1e5) throw BudgetError("enumerate_trees: more than 1e5 trees");
    std::vector<CollisionTree> out;
    CollisionTree cur{j, std::vector<int>(n, 0)};
    while (true) {
        out.push_back(cur);
        int pos = n - 1;
        while (pos >= 0) {
            if (++cur.progenitors[pos] < j + pos) break;
            cur.progenitors[pos] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lambda samples
// ---------------------------------------------------------------------------

/// One draw of the creation variables: ordered times, impact vectors on S^2,
/// created velocities, and creation types. `weight` is the importance weight
/// that makes sample averages unbiased for the d-Lambda integral; it excludes
/// the 2^n sigma factor, which is owned by the sigma mode of the evaluator.
struct LambdaSample {
    std::vector<double> times;     // t_1 > t_2 > ... > t_n in (0, t)
    std::vector<Vec3> impacts;     // unit vectors
    std::vector<Vec3> velocities;  // v_{j+1} .. v_{j+n}
    std::vector<int> sigmas;       // +1 / -1 (used only in sampled-sigma mode)
    double weight = 1.0;           // t^n/n! * (4 pi)^n * prod 1/q(v_i)
};

inline LambdaSample sample_lambda(const CollisionTree& tree, double t, double proposal_beta,
                                  std::uint64_t seed) {
    if (!(t > 0.0)) throw ConfigError("sample_lambda requires t > 0");
    const int n = tree.nodes();
    auto rng = make_rng(seed, 0x7A3B);
    LambdaSample s;
    s.times.resize(n);
    std::uniform_real_distribution<double> u(0.0, t);
    for (int i = 0; i < n; ++i) s.times[i] = u(rng);
    std::sort(s.times.begin(), s.times.end(), std::greater<>());
    s.impacts.reserve(n);
    s.velocities.reserve(n);
    s.sigmas.reserve(n);
    const double q_norm = std::pow(proposal_beta / (2.0 * kPi), 1.5);
    double log_w = 0.0;
    for (int i = 0; i < n; ++i) {
        s.impacts.push_back(sample_unit_sphere(rng));
        const Vec3 v = sample_maxwellian(rng, proposal_beta);
        s.velocities.push_back(v);
        s.sigmas.push_back(uniform01(rng) < 0.5 ? 1 : -1);
        // 1 / q(v) for the Gaussian proposal
        log_w += 0.5 * proposal_beta * norm2(v) - std::log(q_norm);
        log_w += std::log(4.0 * kPi);
        log_w += std::log(t) - std::log(static_cast<double>(i + 1));  // t^n / n!
    }
    s.weight = std::exp(log_w);
    return s;
}

// ---------------------------------------------------------------------------
// Backward trajectories
// ---------------------------------------------------------------------------

/// Piecewise-linear backward trajectory of the growing particle set. Pieces
/// are ordered downward in time from s = t; within a piece the alive set and
/// all velocities are constant, and positions at s come from the stored state
/// at the piece's upper end.
struct BackwardTrajectory {
    enum class Flavor { bbf, ibf };

    struct Piece {
        double s_lo = 0.0, s_hi = 0.0;
        std::vector<Vec3> pos_hi;  // positions at s_hi (wrapped)
        std::vector<Vec3> vel;     // constant on the piece
        int creation_pair_a = -1;  // creating pair to skip in recollision scans
        int creation_pair_b = -1;
    };

    struct Creation {
        double time = 0.0;
        int progenitor = 0;
        int created = 0;
        int sigma = 0;
        Vec3 nu;
        double kernel = 0.0;  // B_i = |nu . (v_created - eta_progenitor(t_i+))|
    };

    struct InternalCollision {
        double s = 0.0;  // forward-time parameter of the contact
        int i = 0, k = 0;
    };

    Flavor flavor = Flavor::bbf;
    double epsilon = 0.0;
    double box_side = 1.0;
    bool admissible = true;     // all sigma indicators satisfied
    bool clearance_ok = true;   // IBF creation clearance against bystanders
    int sign = 1;               // product of sigmas
    std::vector<Piece> pieces;
    std::vector<Creation> creations;
    std::vector<InternalCollision> internal_collisions;
    std::vector<Vec3> endpoint_positions;   // zeta(0)
    std::vector<Vec3> endpoint_velocities;

    double kernel_product() const {
        double p = 1.0;
        for (const auto& c : creations) p *= c.kernel;
        return p;
    }
};

namespace detail {

struct SweepState {
    std::vector<Vec3> pos;  // at current sweep time (wrapped)
    std::vector<Vec3> vel;
    double s_cur;
};

/// Free backward flight of every particle from s_cur down to s_new.
inline void free_backward(SweepState& st, double s_new, double L) {
    const double ds = st.s_cur - s_new;
    for (std::size_t i = 0; i < st.pos.size(); ++i)
        st.pos[i] = wrap(st.pos[i] - ds * st.vel[i], L);
    st.s_cur = s_new;
}

}  // namespace detail

struct BuildOptions {
    bool auto_sigma = false;  // determine sigma_i from the creation geometry
                              // (equivalent to the exact sigma summation:
                              // the complementary type has indicator zero)
    const scattering::Cutoffs* cutoffs = nullptr;
    bool* cutoff_hit = nullptr;
};

/// Boltzmann backward flow: free flight between creations; created particles
/// appear at their progenitor's position. An outgoing creation (sigma = +1,
/// with nu . (v_created - eta_prog) >= 0) continues backward with the pair
/// velocities replaced by the elastic exchange; an incoming creation
/// (sigma = -1) keeps them. The term's sign is the product of the sigmas.
inline BackwardTrajectory build_bbf(const CollisionTree& tree, const LambdaSample& lam,
                                    const std::vector<Vec3>& root_pos,
                                    const std::vector<Vec3>& root_vel, double t,
                                    double box_side = 1.0, BuildOptions opt = {}) {
    const int j = tree.roots, n = tree.nodes();
    if (static_cast<int>(root_pos.size()) != j || static_cast<int>(root_vel.size()) != j)
        throw ConfigError("build_bbf: root count mismatch");

    BackwardTrajectory traj;
    traj.flavor = BackwardTrajectory::Flavor::bbf;
    traj.box_side = box_side;
    detail::SweepState st{root_pos, root_vel, t};
    for (Vec3& p : st.pos) p = wrap(p, box_side);

    for (int i = 0; i < n; ++i) {
        const double ti = lam.times[i];
        // piece from t_i up to the previous creation (or t)
        traj.pieces.push_back({ti, st.s_cur, st.pos, st.vel,
                               i > 0 ? tree.progenitors[i - 1] : -1,
                               i > 0 ? j + i - 1 : -1});
        detail::free_backward(st, ti, box_side);

        const int prog = tree.progenitors[i];
        const Vec3 v_new = lam.velocities[i];
        const Vec3 nu = lam.impacts[i];
        const double rel = dot(nu, v_new - st.vel[prog]);
        const int sigma = opt.auto_sigma ? (rel >= 0.0 ? 1 : -1) : lam.sigmas[i];
        if (static_cast<double>(sigma) * rel < 0.0) traj.admissible = false;
        traj.sign *= sigma;

        if (opt.cutoffs && opt.cutoffs->active()) {
            const double V = norm(v_new - st.vel[prog]);
            const double rho = V > 0.0 ? norm(cross(nu, (v_new - st.vel[prog]) / V)) : 0.0;
            double max_speed = norm(v_new);
            for (const Vec3& w : st.vel) max_speed = std::max(max_speed, norm(w));
            if (opt.cutoffs->excludes(rho, V, max_speed)) {
                traj.admissible = false;
                if (opt.cutoff_hit) *opt.cutoff_hit = true;
            }
        }

        traj.creations.push_back({ti, prog, j + i, sigma, nu, std::abs(rel)});
        st.pos.push_back(st.pos[prog]);
        st.vel.push_back(v_new);
        if (sigma > 0) {
            auto [vp, vc] = md::apply_collision(st.vel[prog], st.vel.back(), nu);
            st.vel[prog] = vp;
            st.vel.back() = vc;
        }
    }
    traj.pieces.push_back({0.0, st.s_cur, st.pos, st.vel,
                           n > 0 ? tree.progenitors[n - 1] : -1, n > 0 ? j + n - 1 : -1});
    detail::free_backward(st, 0.0, box_side);
    traj.endpoint_positions = st.pos;
    traj.endpoint_velocities = st.vel;
    return traj;
}

/// Interacting backward flow: between creations the whole set evolves under
/// the reversed hard-sphere dynamics (or the reversed Newton flow for a
/// smooth potential); created particles appear at distance eps from their
/// progenitors along nu, and every other particle must be clear of the
/// creation point. Contacts inside a segment are recorded as internal
/// collisions (recollisions).
inline BackwardTrajectory build_ibf(const CollisionTree& tree, const LambdaSample& lam,
                                    const std::vector<Vec3>& root_pos,
                                    const std::vector<Vec3>& root_vel, double t, double eps,
                                    const RadialPotential& phi, double box_side = 1.0,
                                    BuildOptions opt = {}) {
    const int j = tree.roots, n = tree.nodes();
    if (static_cast<int>(root_pos.size()) != j || static_cast<int>(root_vel.size()) != j)
        throw ConfigError("build_ibf: root count mismatch");
    const bool hard = phi.kind() == RadialPotential::Kind::hard_sphere;

    BackwardTrajectory traj;
    traj.flavor = BackwardTrajectory::Flavor::ibf;
    traj.epsilon = eps;
    traj.box_side = box_side;
    detail::SweepState st{root_pos, root_vel, t};
    for (Vec3& p : st.pos) p = wrap(p, box_side);

    // evolve the current set backward from st.s_cur to s_new, recording
    // piecewise-constant-velocity sub-pieces and internal contacts
    auto evolve_segment = [&](double s_new, int cp_a, int cp_b) {
        const double span = st.s_cur - s_new;
        if (span <= 0.0) {
            traj.pieces.push_back({s_new, st.s_cur, st.pos, st.vel, cp_a, cp_b});
            st.s_cur = s_new;
            return;
        }
        if (hard) {
            ParticleConfiguration c;
            c.epsilon = eps;
            c.box_side = box_side;
            c.positions = st.pos;
            c.velocities = st.vel;
            for (Vec3& v : c.velocities) v = -v;
            auto [final_cfg, rec] = md::evolve_hard_spheres(c, span);
            // replay the event list to cut the segment into linear sub-pieces;
            // pieces store forward-flow velocities (minus the reversed ones)
            double tau_prev = 0.0;
            auto cur = c;
            auto forward_vel = [](const std::vector<Vec3>& w) {
                std::vector<Vec3> out(w.size());
                for (std::size_t q = 0; q < w.size(); ++q) out[q] = -w[q];
                return out;
            };
            for (const auto& ev : rec.events) {
                traj.pieces.push_back({st.s_cur - ev.time, st.s_cur - tau_prev, cur.positions,
                                       forward_vel(cur.velocities), cp_a, cp_b});
                for (std::size_t q = 0; q < cur.positions.size(); ++q)
                    cur.positions[q] =
                        wrap(cur.positions[q] + (ev.time - tau_prev) * cur.velocities[q],
                             box_side);
                auto [vi, vk] =
                    md::apply_collision(cur.velocities[ev.i], cur.velocities[ev.k], ev.nu);
                cur.velocities[ev.i] = vi;
                cur.velocities[ev.k] = vk;
                traj.internal_collisions.push_back({st.s_cur - ev.time, ev.i, ev.k});
                tau_prev = ev.time;
                cp_a = cp_b = -1;  // only the first sub-piece holds the creation pair
            }
            traj.pieces.push_back({s_new, st.s_cur - tau_prev, cur.positions,
                                   forward_vel(cur.velocities), cp_a, cp_b});
            st.pos = final_cfg.positions;
            st.vel = final_cfg.velocities;
            for (Vec3& v : st.vel) v = -v;
        } else {
            // smooth potential: reversed Newton flow, pieces at chunk ends
            ParticleConfiguration c;
            c.epsilon = eps;
            c.box_side = box_side;
            c.positions = st.pos;
            c.velocities = st.vel;
            for (Vec3& v : c.velocities) v = -v;
            double vmax = 1e-9;
            for (const Vec3& v : c.velocities) vmax = std::max(vmax, norm(v));
            const double dt = eps / (100.0 * vmax);
            const int chunks = 16;
            for (int q = 0; q < chunks; ++q) {
                traj.pieces.push_back({st.s_cur - span * (q + 1) / chunks,
                                       st.s_cur - span * q / chunks, c.positions,
                                       c.velocities, cp_a, cp_b});
                c = md::evolve_newton(c, span / chunks, phi, dt);
                cp_a = cp_b = -1;
            }
            // piece velocities above are the reversed ones; flip for the scan
            for (int q = 0; q < chunks; ++q) {
                auto& piece = traj.pieces[traj.pieces.size() - chunks + q];
                for (Vec3& v : piece.vel) v = -v;
            }
            st.pos = c.positions;
            st.vel = c.velocities;
            for (Vec3& v : st.vel) v = -v;
        }
        st.s_cur = s_new;
    };

    int pending_a = -1, pending_b = -1;
    for (int i = 0; i < n; ++i) {
        const double ti = lam.times[i];
        evolve_segment(ti, pending_a, pending_b);

        const int prog = tree.progenitors[i];
        const Vec3 v_new = lam.velocities[i];
        const Vec3 nu = lam.impacts[i];
        const double rel = dot(nu, v_new - st.vel[prog]);
        const int sigma = opt.auto_sigma ? (rel >= 0.0 ? 1 : -1) : lam.sigmas[i];
        if (static_cast<double>(sigma) * rel < 0.0) traj.admissible = false;
        traj.sign *= sigma;

        if (opt.cutoffs && opt.cutoffs->active()) {
            const double V = norm(v_new - st.vel[prog]);
            const double rho = V > 0.0 ? norm(cross(nu, (v_new - st.vel[prog]) / V)) : 0.0;
            double max_speed = norm(v_new);
            for (const Vec3& w : st.vel) max_speed = std::max(max_speed, norm(w));
            if (opt.cutoffs->excludes(rho, V, max_speed)) {
                traj.admissible = false;
                if (opt.cutoff_hit) *opt.cutoff_hit = true;
            }
        }

        const Vec3 birth = wrap(st.pos[prog] + eps * nu, box_side);
        // clearance: every particle other than the progenitor stays outside eps
        for (std::size_t l = 0; l < st.pos.size(); ++l)
            if (static_cast<int>(l) != prog &&
                torus_distance(birth, st.pos[l], box_side) <= eps)
                traj.clearance_ok = false;

        traj.creations.push_back({ti, prog, j + i, sigma, nu, std::abs(rel)});
        st.pos.push_back(birth);
        st.vel.push_back(v_new);
        if (sigma > 0) {
            auto [vp, vc] = md::apply_collision(st.vel[prog], st.vel.back(), nu);
            st.vel[prog] = vp;
            st.vel.back() = vc;
        }
        pending_a = prog;
        pending_b = j + i;
        if (!traj.clearance_ok) break;  // the sample's weight is already zero
    }
    if (traj.clearance_ok) evolve_segment(0.0, pending_a, pending_b);
    traj.endpoint_positions = st.pos;
    traj.endpoint_velocities = st.vel;
    return traj;
}

// ---------------------------------------------------------------------------
// Recollision detection
// ---------------------------------------------------------------------------

struct RecollisionReport {
    struct Hit {
        int i = 0, k = 0;
        double s = 0.0;
        double distance = 0.0;
    };
    std::vector<Hit> hits;
    bool any() const { return !hits.empty(); }
};

/// Minimum pairwise distances over all pieces; a pair closer than delta is a
/// recollision, excluding each creation contact on its own piece. Internal
/// IBF contacts are reported unconditionally.
inline RecollisionReport detect_recollision(const BackwardTrajectory& traj, double delta) {
    if (traj.flavor == BackwardTrajectory::Flavor::ibf && delta < traj.epsilon)
        throw ConfigError("detect_recollision: delta must be >= eps for the IBF");
    if (!(delta > 0.0)) throw ConfigError("detect_recollision: delta must be positive");
    RecollisionReport rep;
    const double L = traj.box_side;
    for (const auto& piece : traj.pieces) {
        const int alive = static_cast<int>(piece.pos_hi.size());
        const double span = piece.s_hi - piece.s_lo;
        for (int a = 0; a < alive; ++a)
            for (int b = a + 1; b < alive; ++b) {
                if ((a == piece.creation_pair_a && b == piece.creation_pair_b) ||
                    (a == piece.creation_pair_b && b == piece.creation_pair_a))
                    continue;
                const Vec3 dv = piece.vel[b] - piece.vel[a];
                const double dvn = norm(dv);
                // subdivide so each chunk's relative motion stays below L/4
                const int chunks =
                    std::max(1, static_cast<int>(std::ceil(span * dvn / (L / 4.0))));
                for (int q = 0; q < chunks; ++q) {
                    const double u0 = span * q / chunks, u1 = span * (q + 1) / chunks;
                    const Vec3 d0 = min_image(
                        (piece.pos_hi[b] - u0 * piece.vel[b]) -
                            (piece.pos_hi[a] - u0 * piece.vel[a]),
                        L);
                    // relative displacement at backward offset u: d0 - (u - u0) dv
                    double u_star = dvn > 0.0 ? dot(d0, dv) / (dvn * dvn) : 0.0;
                    u_star = std::clamp(u_star, 0.0, u1 - u0);
                    const double dist = norm(d0 - u_star * dv);
                    if (dist < delta)
                        rep.hits.push_back({a, b, piece.s_hi - (u0 + u_star), dist});
                }
            }
    }
    for (const auto& ic : traj.internal_collisions)
        rep.hits.push_back({ic.i, ic.k, ic.s, traj.epsilon});
    return rep;
}

// ---------------------------------------------------------------------------
// Series terms
// ---------------------------------------------------------------------------

struct SeriesOptions {
    std::uint64_t seed = 0;
    bool auto_sigma = true;            // exact sigma handling (the complementary
                                       // type carries indicator zero)
    double proposal_beta = 1.0;
    scattering::Cutoffs cutoffs;
    int batches = 32;
    double recollision_delta = 0.0;    // BBF scan threshold; 0 disables
    long sample_budget = 50'000'000;   // flagged partial beyond this
};

struct SeriesEstimate {
    int j = 1, n = 0;
    double t = 0.0;
    double estimate = 0.0;
    double stderr_value = 0.0;
    long samples = 0;
    double recollision_fraction = 0.0;
    double clearance_failure_fraction = 0.0;
    double cutoff_measure = 0.0;  // proposal-measure fraction excluded
    bool partial = false;
};

/// Monte Carlo estimate of the order-n series term: sum over trees of the
/// signed d-Lambda integral of the kernel product against the factorized
/// initial data evaluated at zeta(0). The BBF estimates the Boltzmann-side
/// term; the IBF (with eps and a potential) the particle-side term.
inline SeriesEstimate eval_series_term(int j, int n, const DensitySpec& f0,
                                       const std::vector<Vec3>& root_pos,
                                       const std::vector<Vec3>& root_vel, double t,
                                       long samples, BackwardTrajectory::Flavor flavor,
                                       double eps = 0.0,
                                       const RadialPotential* phi = nullptr,
                                       SeriesOptions opt = {}) {
    if (n > 3) throw ConfigError("eval_series_term: n <= 3");
    if (!(t > 0.0)) throw ConfigError("eval_series_term: t > 0");
    SeriesEstimate out;
    out.j = j;
    out.n = n;
    out.t = t;

    const auto trees = enumerate_trees(j, n);
    if (n == 0) {
        // exact: pure backward free flight, zero variance
        double prod = 1.0;
        for (const Vec3& v : root_vel) prod *= f0.velocity_density(v);
        out.estimate = prod;
        out.samples = 0;
        return out;
    }

    const long per_tree = samples;
    if (per_tree * static_cast<long>(trees.size()) > opt.sample_budget) {
        out.partial = true;
    }
    const long budget_per_tree =
        std::min(per_tree, opt.sample_budget / static_cast<long>(trees.size()));

    const int nb = opt.batches;
    std::vector<double> batch_sum(nb, 0.0);
    std::vector<long> batch_cnt(nb, 0);
    long recollisions = 0, clearance_failures = 0, cutoff_hits = 0, total = 0;
    const RadialPotential hs = RadialPotential::hard_sphere();
    const RadialPotential& pot = phi ? *phi : hs;
    // sampled sigmas carry the 2^n factor; determined sigmas sum exactly
    const double sigma_scale = opt.auto_sigma ? 1.0 : std::pow(2.0, n);

    for (std::size_t tr = 0; tr < trees.size(); ++tr) {
        for (long s = 0; s < budget_per_tree; ++s) {
            const auto lam = sample_lambda(trees[tr], t, opt.proposal_beta,
                                           mix64(opt.seed) ^ mix64(tr * 1000003 + s));
            BuildOptions bopt;
            bopt.auto_sigma = opt.auto_sigma;
            bopt.cutoffs = &opt.cutoffs;
            bool cut = false;
            bopt.cutoff_hit = &cut;
            const auto traj =
                flavor == BackwardTrajectory::Flavor::bbf
                    ? build_bbf(trees[tr], lam, root_pos, root_vel, t, 1.0, bopt)
                    : build_ibf(trees[tr], lam, root_pos, root_vel, t, eps, pot, 1.0, bopt);
            ++total;
            if (cut) ++cutoff_hits;
            double value = 0.0;
            if (traj.admissible && traj.clearance_ok && !cut) {
                double prod = sigma_scale * lam.weight * traj.kernel_product() * traj.sign;
                for (const Vec3& v : traj.endpoint_velocities) prod *= f0.velocity_density(v);
                value = prod;
            }
            if (!traj.clearance_ok) ++clearance_failures;
            if (flavor == BackwardTrajectory::Flavor::ibf) {
                if (!traj.internal_collisions.empty()) ++recollisions;
            } else if (opt.recollision_delta > 0.0) {
                if (detect_recollision(traj, opt.recollision_delta).any()) ++recollisions;
            }
            const int b = static_cast<int>(s % nb);
            batch_sum[b] += value;
            ++batch_cnt[b];
        }
    }
    out.samples = total;
    if (total == 0) return out;
    // per-tree sums share batches; the estimate is the sum over trees of the
    // per-tree means, i.e. (sum of values) * trees / total
    const double scale = static_cast<double>(trees.size());
    double mean = 0.0;
    for (int b = 0; b < nb; ++b) mean += batch_sum[b];
    mean = mean / static_cast<double>(total) * scale;
    double var = 0.0;
    int used = 0;
    for (int b = 0; b < nb; ++b) {
        if (batch_cnt[b] == 0) continue;
        const double bm = batch_sum[b] / batch_cnt[b] * scale;
        var += (bm - mean) * (bm - mean);
        ++used;
    }
    out.estimate = mean;
    out.stderr_value = used > 1 ? std::sqrt(var / (used - 1) / used) : 0.0;
    out.recollision_fraction = static_cast<double>(recollisions) / total;
    out.clearance_failure_fraction = static_cast<double>(clearance_failures) / total;
    out.cutoff_measure = static_cast<double>(cutoff_hits) / total;
    return out;
}

// ---------------------------------------------------------------------------
// Scalars of the expansion
// ---------------------------------------------------------------------------

/// alpha_n(j) = eps^{2n} (N-j)(N-j-1)...(N-j-n+1); zero when the series
/// truncates (n > N - j).
inline double alpha(int N, double eps, int j, int n) {
    if (N < 1 || j < 0 || n < 0) throw ConfigError("alpha: bad arguments");
    if (n > N - j) return 0.0;
    double prod = 1.0;
    for (int i = 0; i < n; ++i) prod *= eps * (eps * static_cast<double>(N - j - i));
    return prod;
}

/// t0 = [K pi N eps^2 b beta^{-1/2}]^{-1}.
inline double lanford_time(double N, double eps, double b, double beta, double K) {
    if (!(N > 0) || !(eps > 0) || !(b > 0) || !(beta > 0) || !(K > 0))
        throw ConfigError("lanford_time: all arguments must be positive");
    return 1.0 / (K * kPi * N * eps * eps * b / std::sqrt(beta));
}

struct SeriesBoundReport {
    double c_fit = 0.0;                  // smallest C with |T_n| <= C (t/t0)^n
    bool envelope_holds = true;          // consecutive ratios within t/t0 + 3 sigma
    std::vector<double> ratios;          // |T_{n+1}| / |T_n|
    std::vector<double> ratio_sigmas;    // propagated standard errors
};

/// Fit of the geometric envelope |T(j,n)| <= C (t/t0)^n and the consecutive
/// ratio test against t/t0 within three propagated standard errors.
inline SeriesBoundReport series_bound_check(const std::vector<SeriesEstimate>& terms, double t,
                                            double t0) {
    SeriesBoundReport rep;
    const double q = t / t0;
    for (const auto& term : terms) {
        const double envelope = std::pow(q, term.n);
        if (envelope > 0.0) rep.c_fit = std::max(rep.c_fit, std::abs(term.estimate) / envelope);
    }
    for (std::size_t i = 0; i + 1 < terms.size(); ++i) {
        const double a = std::abs(terms[i].estimate);
        const double b = std::abs(terms[i + 1].estimate);
        if (a == 0.0) continue;
        const double r = b / a;
        const double sr =
            r * std::sqrt(std::pow(terms[i].stderr_value / std::max(a, 1e-300), 2) +
                          std::pow(terms[i + 1].stderr_value / std::max(b, 1e-300), 2));
        rep.ratios.push_back(r);
        rep.ratio_sigmas.push_back(sr);
        if (r > q + 3.0 * sr) rep.envelope_holds = false;
    }
    return rep;
}

}  // namespace boltzgrad::hierarchy
