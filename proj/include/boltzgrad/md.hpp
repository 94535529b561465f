#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <queue>
#include <vector>

#include "boltzgrad/errors.hpp"
#include "boltzgrad/phase.hpp"
#include "boltzgrad/vec3.hpp"

namespace boltzgrad::md {

// ---------------------------------------------------------------------------
// Collision primitives
// ---------------------------------------------------------------------------

/// One hard-sphere contact: time, pair, and the unit impact vector pointing
/// from particle i to particle k at contact (pre-collision: nu.(v_k - v_i) <= 0).
struct CollisionEvent {
    double time = 0.0;
    int i = 0, k = 0;
    Vec3 nu;
};

struct TrajectoryRecord {
    std::vector<CollisionEvent> events;
    ParticleConfiguration initial;
    ParticleConfiguration final_config;
    std::uint64_t event_count = 0;
    double wall_seconds = 0.0;
};

inline void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec) {
    os << "event_index,time,i,k,nu1,nu2,nu3\n";
    os.precision(17);
    for (std::size_t e = 0; e < rec.events.size(); ++e) {
        const CollisionEvent& ev = rec.events[e];
        os << e << ',' << ev.time << ',' << ev.i << ',' << ev.k << ',' << ev.nu.x << ','
           << ev.nu.y << ',' << ev.nu.z << '\n';
    }
}

/// Earliest contact time of two free-streaming spheres of diameter eps within
/// (0, horizon], or nullopt. Separations use the minimum image at time 0.
/// Tangential grazing (closest approach exactly eps) yields no event.
inline std::optional<double> pair_collision_time(const Vec3& xi, const Vec3& vi, const Vec3& xk,
                                                 const Vec3& vk, double eps, double horizon,
                                                 double box_side = 1.0) {
    const Vec3 dx = min_image(xk - xi, box_side);
    const Vec3 dv = vk - vi;
    const double b = dot(dx, dv);
    if (b >= 0.0) return std::nullopt;  // not approaching
    const double a = norm2(dv);
    if (a == 0.0) return std::nullopt;
    const double c = norm2(dx) - eps * eps;
    const double disc = b * b - a * c;
    if (disc <= 0.0) return std::nullopt;  // misses (or grazes tangentially)
    const double t = (-b - std::sqrt(disc)) / a;
    if (t <= 0.0 || t > horizon) return std::nullopt;
    return t;
}

/// Elastic hard-sphere exchange of the normal velocity components:
///   v_i' = v_i - [(v_i - v_k) . nu] nu,   v_k' = v_k + [(v_i - v_k) . nu] nu.
inline std::pair<Vec3, Vec3> apply_collision(const Vec3& vi, const Vec3& vk, const Vec3& nu) {
    if (std::abs(norm(nu) - 1.0) > 1e-12)
        throw NumericalError("apply_collision: impact vector is not unit");
    const double g = dot(vi - vk, nu);
    return {vi - g * nu, vk + g * nu};
}

inline ParticleConfiguration reverse_velocities(ParticleConfiguration c) {
    for (Vec3& v : c.velocities) v = -v;
    return c;
}

// ---------------------------------------------------------------------------
// Event-driven hard-sphere flow
// ---------------------------------------------------------------------------

namespace detail {

struct QueueEntry {
    double t;
    int a, b;  // b < 0: cell crossing of a along axis (-b - 1) / 3, dir from sign field
    int axis;
    int dir;
    std::uint64_t ca, cb;
};

struct EntryLater {
    bool operator()(const QueueEntry& l, const QueueEntry& r) const {
        if (l.t != r.t) return l.t > r.t;
        if (l.a != r.a) return l.a > r.a;
        return l.b > r.b;
    }
};

/// Asynchronous event-driven simulator with cell lists. Each particle carries
/// its own timestamp; predictions are invalidated through per-particle event
/// counters, incremented on every processed event (collision or cell change).
/// Positions are kept unwrapped (periodicity enters only through minimum-image
/// differences), and cell coordinates are continuous integers reduced modulo
/// the grid for storage; this keeps position and cell consistent at the
/// boundary crossings.
class HardSphereSimulator {
public:
    HardSphereSimulator(const ParticleConfiguration& config, double t_final)
        : eps_(config.epsilon), L_(config.box_side), t_final_(t_final) {
        n_ = config.count();
        r_ = config.positions;
        v_ = config.velocities;
        for (Vec3& x : r_) x = wrap(x, L_);
        stamp_.assign(n_, 0.0);
        count_.assign(n_, 0);
        m_ = eps_ > 0.0 ? static_cast<int>(std::floor(L_ / eps_)) : 1;
        m_ = std::min(m_, 20);
        use_cells_ = m_ >= 4 && n_ > 8;
        if (!use_cells_) m_ = 1;
        cell_of_.assign(n_, {0, 0, 0});
        cells_.assign(static_cast<std::size_t>(m_) * m_ * m_, {});
        for (int i = 0; i < n_; ++i) {
            for (int a = 0; a < 3; ++a) {
                auto c = static_cast<std::int64_t>(std::floor(r_[i][a] / L_ * m_));
                cell_of_[i][a] = std::clamp<std::int64_t>(c, 0, m_ - 1);
            }
            cells_[flat(cell_of_[i])].push_back(i);
        }
    }

    /// Run to t_final; returns collision events in time order.
    std::vector<CollisionEvent> run(std::uint64_t event_budget) {
        for (int i = 0; i < n_; ++i) schedule(i, 0.0);
        std::vector<CollisionEvent> events;
        while (!queue_.empty()) {
            QueueEntry e = queue_.top();
            if (e.t > t_final_) break;
            queue_.pop();
            if (e.b < 0) {
                if (count_[e.a] != e.ca) continue;
                process_cell_cross(e);
            } else {
                if (count_[e.a] != e.ca || count_[e.b] != e.cb) continue;
                events.push_back(process_collision(e));
                if (events.size() > event_budget)
                    throw BudgetError("hard-sphere event budget exceeded");
            }
        }
        for (int i = 0; i < n_; ++i) advance(i, t_final_);
        return events;
    }

    ParticleConfiguration configuration() const {
        ParticleConfiguration c;
        c.positions = r_;
        for (Vec3& x : c.positions) x = wrap(x, L_);
        c.velocities = v_;
        c.epsilon = eps_;
        c.box_side = L_;
        return c;
    }

private:
    using Cell = std::array<std::int64_t, 3>;

    std::size_t flat(const Cell& c) const {
        auto red = [&](std::int64_t v) {
            return static_cast<std::size_t>(((v % m_) + m_) % m_);
        };
        return (red(c[0]) * m_ + red(c[1])) * m_ + red(c[2]);
    }

    void advance(int i, double t) {
        const double dt = t - stamp_[i];
        if (dt > 0.0) {
            r_[i] += v_[i] * dt;  // unwrapped; periodicity via minimum image
            stamp_[i] = t;
        }
    }

    Vec3 position_at(int i, double t) const { return r_[i] + v_[i] * (t - stamp_[i]); }

    void schedule(int i, double now) {
        if (use_cells_) schedule_cell_exit(i, now);
        schedule_collisions(i, now);
    }

    void schedule_cell_exit(int i, double now) {
        const double side = L_ / m_;
        double best = std::numeric_limits<double>::infinity();
        int best_axis = -1, best_dir = 0;
        for (int a = 0; a < 3; ++a) {
            const double va = v_[i][a];
            if (va == 0.0) continue;
            // continuous cell coordinates share the particle's unwrapped frame
            const double lo = static_cast<double>(cell_of_[i][a]) * side;
            const double target = va > 0.0 ? lo + side : lo;
            double dt = (target - r_[i][a]) / va;
            if (dt < 0.0) dt = 0.0;  // roundoff at the boundary: cross immediately
            if (dt < best) {
                best = dt;
                best_axis = a;
                best_dir = va > 0.0 ? 1 : -1;
            }
        }
        if (best_axis >= 0 && now + best <= t_final_)
            queue_.push({now + best, i, -1, best_axis, best_dir, count_[i], 0});
    }

    void schedule_collisions(int i, double now) {
        auto try_pair = [&](int k) {
            if (k == i) return;
            const Vec3 dx = min_image(position_at(k, now) - position_at(i, now), L_);
            const Vec3 dv = v_[k] - v_[i];
            const double b = dot(dx, dv);
            if (b >= 0.0) return;
            const double a2 = norm2(dv);
            double c2 = norm2(dx) - eps_ * eps_;
            double t_hit;
            if (c2 <= 0.0) {
                // already at (or within roundoff of) contact and approaching
                if (c2 < -1e-10 * eps_ * eps_)
                    throw InvalidConfigurationError("overlap detected during evolution");
                t_hit = now;
            } else {
                const double disc = b * b - a2 * c2;
                if (disc <= 0.0) return;
                t_hit = now + (-b - std::sqrt(disc)) / a2;
            }
            if (t_hit < now) t_hit = now;
            if (t_hit > t_final_) return;
            const int lo = std::min(i, k), hi = std::max(i, k);
            queue_.push({t_hit, lo, hi, 0, 0, count_[lo], count_[hi]});
        };
        if (use_cells_) {
            const Cell& c = cell_of_[i];
            for (int dx = -1; dx <= 1; ++dx)
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dz = -1; dz <= 1; ++dz) {
                        const Cell nb{c[0] + dx, c[1] + dy, c[2] + dz};
                        for (int k : cells_[flat(nb)]) try_pair(k);
                    }
        } else {
            for (int k = 0; k < n_; ++k) try_pair(k);
        }
    }

    void process_cell_cross(const QueueEntry& e) {
        const int i = e.a;
        advance(i, e.t);
        auto& list = cells_[flat(cell_of_[i])];
        list.erase(std::find(list.begin(), list.end(), i));
        cell_of_[i][e.axis] += e.dir;
        cells_[flat(cell_of_[i])].push_back(i);
        ++count_[i];
        schedule(i, e.t);
    }

    CollisionEvent process_collision(const QueueEntry& e) {
        const int i = e.a, k = e.b;
        advance(i, e.t);
        advance(k, e.t);
        Vec3 nu = min_image(r_[k] - r_[i], L_);
        nu /= norm(nu);
        auto [vi, vk] = apply_collision(v_[i], v_[k], nu);
        v_[i] = vi;
        v_[k] = vk;
        ++count_[i];
        ++count_[k];
        schedule(i, e.t);
        schedule(k, e.t);
        return {e.t, i, k, nu};
    }

    int n_ = 0, m_ = 1;
    bool use_cells_ = false;
    double eps_, L_, t_final_;
    std::vector<Vec3> r_, v_;
    std::vector<double> stamp_;
    std::vector<std::uint64_t> count_;
    std::vector<Cell> cell_of_;
    std::vector<std::vector<int>> cells_;
    std::priority_queue<QueueEntry, std::vector<QueueEntry>, EntryLater> queue_;
};

}  // namespace detail

/// Exact event-driven hard-sphere evolution to t_final. Free flight between
/// contacts, elastic exchange at each contact, periodic wrap throughout.
/// Simultaneous events resolve in ascending (time, i, k) order.
inline std::pair<ParticleConfiguration, TrajectoryRecord> evolve_hard_spheres(
    const ParticleConfiguration& config, double t_final, std::uint64_t event_budget = 100'000'000) {
    config.validate(/*hard_sphere_mode=*/true);
    if (t_final < 0.0) throw ConfigError("t_final must be nonnegative");
    TrajectoryRecord rec;
    rec.initial = config;
    const auto wall0 = std::chrono::steady_clock::now();
    detail::HardSphereSimulator sim(config, t_final);
    rec.events = sim.run(event_budget);
    rec.event_count = rec.events.size();
    rec.final_config = sim.configuration();
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return {rec.final_config, std::move(rec)};
}

/// Evolve until `target_events` collisions have occurred (or t_cap elapses).
/// Returns the elapsed time together with the record; used by reversibility
/// experiments that count events rather than time.
inline std::pair<double, TrajectoryRecord> evolve_for_events(const ParticleConfiguration& config,
                                                             std::uint64_t target_events,
                                                             double t_cap) {
    // Bisection-free approach: run to t_cap, truncate at the target event's time.
    auto [final_cfg, rec] = evolve_hard_spheres(config, t_cap);
    if (rec.events.size() < target_events)
        throw BudgetError("evolve_for_events: fewer events than requested within t_cap");
    const double t_stop = rec.events[target_events - 1].time;
    auto [cfg2, rec2] = evolve_hard_spheres(config, t_stop);
    return {t_stop, std::move(rec2)};
}

// ---------------------------------------------------------------------------
// Smooth-potential flow (velocity Verlet)
// ---------------------------------------------------------------------------

/// Second-order symplectic integration of the Newton equations for a smooth
/// short-range potential. Works internally in microscopic variables (which
/// removes the 1/eps force prefactor) and rescales on output. dt is the
/// macroscopic step; it should satisfy dt <= eps / (50 v_max).
inline ParticleConfiguration evolve_newton(const ParticleConfiguration& config, double t_final,
                                           const RadialPotential& phi, double dt) {
    if (phi.kind() == RadialPotential::Kind::hard_sphere)
        throw ConfigError("evolve_newton requires a smooth potential");
    if (!(dt > 0.0) || t_final < 0.0) throw ConfigError("invalid step or horizon");
    const double eps = config.epsilon;
    if (!(eps > 0.0)) throw ConfigError("evolve_newton requires epsilon > 0");

    const int n = config.count();
    const double Lm = config.box_side / eps;  // microscopic box side
    std::vector<Vec3> q(n), v = config.velocities;
    for (int i = 0; i < n; ++i) q[i] = config.positions[i] / eps;

    const double tau_final = t_final / eps;
    const double dt_micro = dt / eps;
    const std::int64_t steps = std::max<std::int64_t>(1, static_cast<std::int64_t>(
                                                             std::ceil(tau_final / dt_micro)));
    const double h = tau_final / static_cast<double>(steps);

    const double r_floor = phi.kind() == RadialPotential::Kind::tabulated
                               ? phi.tabulated_r_min()
                               : 1e-12;
    auto forces = [&](const std::vector<Vec3>& qq, std::vector<Vec3>& f) {
        for (Vec3& fi : f) fi = Vec3{};
        for (int i = 0; i < n; ++i)
            for (int k = i + 1; k < n; ++k) {
                const Vec3 d = min_image(qq[i] - qq[k], Lm);
                const double r = norm(d);
                if (r >= 1.0) continue;
                if (r < r_floor)
                    throw DomainError("pair separation below the potential's domain");
                const double fp = -phi.derivative(r) / r;  // magnitude / r
                f[i] += fp * d;
                f[k] -= fp * d;
            }
    };

    std::vector<Vec3> f(n), fnew(n);
    forces(q, f);
    for (std::int64_t s = 0; s < steps; ++s) {
        for (int i = 0; i < n; ++i) {
            v[i] += 0.5 * h * f[i];
            q[i] = wrap(q[i] + h * v[i], Lm);
        }
        forces(q, fnew);
        for (int i = 0; i < n; ++i) v[i] += 0.5 * h * fnew[i];
        f.swap(fnew);
    }

    ParticleConfiguration out;
    out.epsilon = eps;
    out.box_side = config.box_side;
    out.velocities = std::move(v);
    out.positions.resize(n);
    for (int i = 0; i < n; ++i) out.positions[i] = wrap(q[i] * eps, config.box_side);
    return out;
}

}  // namespace boltzgrad::md
