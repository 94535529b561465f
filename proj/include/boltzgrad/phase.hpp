#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "boltzgrad/errors.hpp"
#include "boltzgrad/rng.hpp"
#include "boltzgrad/vec3.hpp"

namespace boltzgrad {

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// ParticleConfiguration
// ---------------------------------------------------------------------------

/// Positions and velocities of N identical particles in a periodic box of
/// side L (macroscopic units), with hard-core diameter epsilon.
struct ParticleConfiguration {
    std::vector<Vec3> positions;
    std::vector<Vec3> velocities;
    double epsilon = 0.0;
    double box_side = 1.0;

    int count() const { return static_cast<int>(positions.size()); }

    double min_pair_distance() const {
        const int n = count();
        double dmin = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i)
            for (int k = i + 1; k < n; ++k)
                dmin = std::min(dmin, torus_distance(positions[i], positions[k], box_side));
        return dmin;
    }

    /// Structural invariants; pairwise exclusion only in hard-sphere mode.
    void validate(bool hard_sphere_mode = true) const {
        if (positions.size() != velocities.size())
            throw InvalidConfigurationError("positions/velocities size mismatch");
        if (epsilon < 0.0 || !(epsilon < box_side / 4.0))
            throw InvalidConfigurationError("diameter must satisfy 0 <= epsilon < L/4");
        if (hard_sphere_mode && count() > 1) {
            if (min_pair_distance() < epsilon * (1.0 - 1e-12))
                throw InvalidConfigurationError("overlapping pair in hard-sphere configuration");
        }
    }
};

inline double kinetic_energy(const ParticleConfiguration& c) {
    double e = 0.0;
    for (const Vec3& v : c.velocities) e += 0.5 * norm2(v);
    return e;
}

inline Vec3 total_momentum(const ParticleConfiguration& c) {
    Vec3 p;
    for (const Vec3& v : c.velocities) p += v;
    return p;
}

// ---------------------------------------------------------------------------
// RadialPotential
// ---------------------------------------------------------------------------

/// A radial two-body potential in microscopic units, supported in r < 1.
/// Hard sphere is a distinguished kind; analytic potentials carry value and
/// two derivatives; tabulated potentials use a natural cubic spline.
class RadialPotential {
public:
    enum class Kind { hard_sphere, analytic, tabulated };

    static RadialPotential hard_sphere() {
        RadialPotential p;
        p.kind_ = Kind::hard_sphere;
        p.name_ = "hard_sphere";
        return p;
    }

    static RadialPotential zero() {
        return analytic(
            "zero", [](double) { return 0.0; }, [](double) { return 0.0; },
            [](double) { return 0.0; });
    }

    /// Analytic potential from value/derivative/second-derivative callables on (0,1).
    /// Non-increase (phi' <= 0) is checked on a sample grid unless disabled;
    /// disabling admits the attractive/unstable cases used only for diagnostics.
    static RadialPotential analytic(std::string name, std::function<double(double)> value,
                                    std::function<double(double)> deriv,
                                    std::function<double(double)> second,
                                    bool enforce_nonincreasing = true) {
        RadialPotential p;
        p.kind_ = Kind::analytic;
        p.name_ = std::move(name);
        p.value_ = std::move(value);
        p.deriv_ = std::move(deriv);
        p.second_ = std::move(second);
        if (enforce_nonincreasing) p.check_nonincreasing();
        return p;
    }

    /// Tabulated (r, phi) samples on (0,1], natural cubic spline interpolation.
    static RadialPotential tabulated(std::vector<double> r, std::vector<double> phi,
                                     bool enforce_nonincreasing = true) {
        if (r.size() != phi.size() || r.size() < 4)
            throw ConfigError("tabulated potential needs >= 4 (r, phi) samples");
        for (std::size_t i = 1; i < r.size(); ++i)
            if (!(r[i] > r[i - 1])) throw ConfigError("tabulated r values must be increasing");
        if (!(r.front() > 0.0) || !(r.back() <= 1.0))
            throw ConfigError("tabulated r values must lie in (0,1]");
        RadialPotential p;
        p.kind_ = Kind::tabulated;
        p.name_ = "tabulated";
        p.r_ = std::move(r);
        p.phi_ = std::move(phi);
        p.build_spline();
        if (enforce_nonincreasing) p.check_nonincreasing();
        return p;
    }

    Kind kind() const { return kind_; }
    const std::string& name() const { return name_; }

    /// Phi(r); identically 0 for r >= 1. Hard sphere returns +inf inside r < 1.
    double value(double r) const {
        if (r >= 1.0) return 0.0;
        switch (kind_) {
            case Kind::hard_sphere:
                return std::numeric_limits<double>::infinity();
            case Kind::analytic:
                return value_(r);
            case Kind::tabulated:
                return spline_eval(r, 0);
        }
        return 0.0;
    }

    double derivative(double r) const {
        if (r >= 1.0) return 0.0;
        switch (kind_) {
            case Kind::hard_sphere:
                throw DomainError("hard-sphere potential has no derivative");
            case Kind::analytic:
                return deriv_(r);
            case Kind::tabulated:
                return spline_eval(r, 1);
        }
        return 0.0;
    }

    double second_derivative(double r) const {
        if (r >= 1.0) return 0.0;
        switch (kind_) {
            case Kind::hard_sphere:
                throw DomainError("hard-sphere potential has no derivative");
            case Kind::analytic:
                return second_(r);
            case Kind::tabulated:
                return spline_eval(r, 2);
        }
        return 0.0;
    }

    double tabulated_r_min() const { return kind_ == Kind::tabulated ? r_.front() : 0.0; }

private:
    void check_nonincreasing() const {
        for (int i = 1; i <= 256; ++i) {
            const double r = i / 257.0;
            const double d = derivative(r);
            if (std::isfinite(d) && d > 1e-12)
                throw ConfigError("potential '" + name_ + "' is not non-increasing on (0,1)");
        }
    }

    // Natural cubic spline over the tabulated nodes.
    void build_spline() {
        const std::size_t n = r_.size();
        std::vector<double> h(n - 1), alpha(n, 0.0), l(n), mu(n), zv(n);
        for (std::size_t i = 0; i + 1 < n; ++i) h[i] = r_[i + 1] - r_[i];
        for (std::size_t i = 1; i + 1 < n; ++i)
            alpha[i] = 3.0 * ((phi_[i + 1] - phi_[i]) / h[i] - (phi_[i] - phi_[i - 1]) / h[i - 1]);
        l[0] = 1.0; mu[0] = 0.0; zv[0] = 0.0;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            l[i] = 2.0 * (r_[i + 1] - r_[i - 1]) - h[i - 1] * mu[i - 1];
            mu[i] = h[i] / l[i];
            zv[i] = (alpha[i] - h[i - 1] * zv[i - 1]) / l[i];
        }
        spline_c_.assign(n, 0.0);
        spline_b_.assign(n - 1, 0.0);
        spline_d_.assign(n - 1, 0.0);
        for (std::size_t j = n - 1; j-- > 0;) {
            spline_c_[j] = zv[j] - mu[j] * spline_c_[j + 1];
            spline_b_[j] =
                (phi_[j + 1] - phi_[j]) / h[j] - h[j] * (spline_c_[j + 1] + 2.0 * spline_c_[j]) / 3.0;
            spline_d_[j] = (spline_c_[j + 1] - spline_c_[j]) / (3.0 * h[j]);
        }
    }

    double spline_eval(double r, int order) const {
        if (r < r_.front())
            throw DomainError("tabulated potential evaluated below its domain (r = " +
                              std::to_string(r) + ")");
        const auto it = std::upper_bound(r_.begin(), r_.end(), r);
        std::size_t j = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - r_.begin() - 1, 0));
        j = std::min(j, r_.size() - 2);
        const double dx = r - r_[j];
        switch (order) {
            case 0: return phi_[j] + dx * (spline_b_[j] + dx * (spline_c_[j] + dx * spline_d_[j]));
            case 1: return spline_b_[j] + dx * (2.0 * spline_c_[j] + 3.0 * dx * spline_d_[j]);
            default: return 2.0 * spline_c_[j] + 6.0 * dx * spline_d_[j];
        }
    }

    Kind kind_ = Kind::hard_sphere;
    std::string name_;
    std::function<double(double)> value_, deriv_, second_;
    std::vector<double> r_, phi_, spline_b_, spline_c_, spline_d_;
};

/// Named analytic families used by configs and tests.
///   wall:          a*(1-r)^p      (repulsive wall, bounded at 0)
///   inverse_power: r^-a - 1       (unbounded at 0, vanishes at 1)
///   linear:        a*(1-r)
inline RadialPotential make_wall_potential(double amplitude, int power) {
    std::ostringstream nm;
    nm << "wall(a=" << amplitude << ",p=" << power << ")";
    return RadialPotential::analytic(
        nm.str(),
        [amplitude, power](double r) { return amplitude * std::pow(1.0 - r, power); },
        [amplitude, power](double r) { return -amplitude * power * std::pow(1.0 - r, power - 1); },
        [amplitude, power](double r) {
            return amplitude * power * (power - 1) * std::pow(1.0 - r, power - 2);
        });
}

inline RadialPotential make_inverse_power_potential(double alpha) {
    std::ostringstream nm;
    nm << "inverse_power(alpha=" << alpha << ")";
    return RadialPotential::analytic(
        nm.str(), [alpha](double r) { return std::pow(r, -alpha) - 1.0; },
        [alpha](double r) { return -alpha * std::pow(r, -alpha - 1.0); },
        [alpha](double r) { return alpha * (alpha + 1.0) * std::pow(r, -alpha - 2.0); },
        /*enforce_nonincreasing=*/alpha > 0.0);
}

inline RadialPotential make_linear_potential(double slope) {
    std::ostringstream nm;
    nm << "linear(a=" << slope << ")";
    return RadialPotential::analytic(
        nm.str(), [slope](double r) { return slope * (1.0 - r); },
        [slope](double) { return -slope; }, [](double) { return 0.0; });
}

// ---------------------------------------------------------------------------
// ScalingRegime
// ---------------------------------------------------------------------------

/// The (N, epsilon) pair; the low-density constructor enforces N*eps^2 = 1.
struct ScalingRegime {
    int N = 0;
    double epsilon = 0.0;
    bool bg = false;

    static ScalingRegime boltzmann_grad(int N) {
        if (N < 1) throw ConfigError("N must be positive");
        ScalingRegime r;
        r.N = N;
        r.epsilon = 1.0 / std::sqrt(static_cast<double>(N));
        r.bg = true;
        if (std::abs(r.product() - 1.0) >= 1e-12)
            throw NumericalError("low-density constructor failed to satisfy N*eps^2 = 1");
        return r;
    }

    static ScalingRegime custom(int N, double epsilon) {
        if (N < 1 || epsilon < 0.0) throw ConfigError("invalid (N, epsilon)");
        ScalingRegime r;
        r.N = N;
        r.epsilon = epsilon;
        r.bg = std::abs(r.product() - 1.0) < 1e-12;
        return r;
    }

    double product() const { return static_cast<double>(N) * epsilon * epsilon; }
    double packing_fraction(double L = 1.0) const {
        return static_cast<double>(N) * (kPi / 6.0) * epsilon * epsilon * epsilon / (L * L * L);
    }
};

// ---------------------------------------------------------------------------
// DensitySpec
// ---------------------------------------------------------------------------

/// One-particle initial density f(0,x,v): uniform in x over the unit box,
/// times either a Maxwellian mixture or a tabulated velocity grid.
class DensitySpec {
public:
    struct Component {
        double weight = 1.0;
        double beta = 1.0;
        Vec3 drift;
        double amp = 0.0;  // weight * (beta/2pi)^{3/2}, cached at construction
    };

    static DensitySpec maxwellian(double beta, Vec3 drift = {}) {
        DensitySpec d;
        d.comps_ = {{1.0, beta, drift}};
        d.finalize();
        return d;
    }

    static DensitySpec two_temperature(double beta1, double beta2, double w1 = 0.5) {
        DensitySpec d;
        d.comps_ = {{w1, beta1, {}}, {1.0 - w1, beta2, {}}};
        d.finalize();
        return d;
    }

    static DensitySpec mixture(std::vector<Component> comps) {
        DensitySpec d;
        d.comps_ = std::move(comps);
        d.finalize();
        return d;
    }

    /// Tabulated density on a uniform velocity grid [-v_max, v_max]^3 with n
    /// nodes per axis (node-centered). Values are normalized to unit mass;
    /// the input must already integrate to 1 within 1e-8.
    static DensitySpec tabulated(int n, double v_max, std::vector<double> values) {
        if (n < 2 || v_max <= 0.0 || values.size() != static_cast<std::size_t>(n) * n * n)
            throw ConfigError("tabulated density: bad grid");
        DensitySpec d;
        d.grid_n_ = n;
        d.grid_vmax_ = v_max;
        d.grid_ = std::move(values);
        double mass = 0.0;
        const double h = 2.0 * v_max / (n - 1);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    const double v = d.grid_[(static_cast<std::size_t>(i) * n + j) * n + k];
                    if (v < 0.0) throw ConfigError("tabulated density: negative value");
                    const double w = d.trap_w(i) * d.trap_w(j) * d.trap_w(k) * h * h * h;
                    mass += w * v;
                }
        if (std::abs(mass - 1.0) > 1e-8)
            throw ConfigError("tabulated density does not integrate to 1 (mass = " +
                              std::to_string(mass) + ")");
        // second moment for beta metadata
        double m2 = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    const double v = d.grid_[(static_cast<std::size_t>(i) * n + j) * n + k];
                    const Vec3 node{-v_max + i * h, -v_max + j * h, -v_max + k * h};
                    const double w = d.trap_w(i) * d.trap_w(j) * d.trap_w(k) * h * h * h;
                    m2 += w * v * norm2(node);
                }
        d.second_moment_ = m2;
        return d;
    }

    bool is_tabulated() const { return grid_n_ > 0; }
    const std::vector<Component>& components() const { return comps_; }

    /// Velocity marginal g(v); the full density is f(x,v) = g(v) on the box.
    double velocity_density(const Vec3& v) const {
        if (is_tabulated()) return grid_value(v);
        double s = 0.0;
        for (const Component& c : comps_)
            s += c.amp * std::exp(-0.5 * c.beta * norm2(v - c.drift));
        return s;
    }

    double value(const Vec3& /*x*/, const Vec3& v) const { return velocity_density(v); }

    Vec3 sample_velocity(std::mt19937_64& rng) const {
        if (is_tabulated()) return sample_tabulated(rng);
        double u = uniform01(rng);
        for (const Component& c : comps_) {
            if (u < c.weight) return sample_maxwellian(rng, c.beta, c.drift);
            u -= c.weight;
        }
        return sample_maxwellian(rng, comps_.back().beta, comps_.back().drift);
    }

    /// E|v|^2 of the velocity marginal.
    double second_moment() const { return second_moment_; }

    /// Effective inverse temperature, 3 / E|v|^2; equals beta for a pure Maxwellian.
    double beta() const { return 3.0 / second_moment_; }

    /// Largest b such that sup f * exp(b |v|^2 / 2) is finite (drift-free mixtures:
    /// the smallest component beta).
    double beta_sup() const {
        if (is_tabulated()) return beta();
        double b = std::numeric_limits<double>::infinity();
        for (const Component& c : comps_) b = std::min(b, c.beta);
        return b;
    }

private:
    void finalize() {
        double wsum = 0.0;
        for (Component& c : comps_) {
            if (c.weight < 0.0 || c.beta <= 0.0) throw ConfigError("invalid mixture component");
            wsum += c.weight;
            c.amp = c.weight * std::pow(c.beta / (2.0 * kPi), 1.5);
        }
        if (std::abs(wsum - 1.0) > 1e-8) throw ConfigError("mixture weights must sum to 1");
        second_moment_ = 0.0;
        for (const Component& c : comps_)
            second_moment_ += c.weight * (3.0 / c.beta + norm2(c.drift));
    }

    double trap_w(int i) const { return (i == 0 || i == grid_n_ - 1) ? 0.5 : 1.0; }

    double grid_value(const Vec3& v) const {
        const double h = 2.0 * grid_vmax_ / (grid_n_ - 1);
        auto idx = [&](double c) { return (c + grid_vmax_) / h; };
        const double fx = idx(v.x), fy = idx(v.y), fz = idx(v.z);
        if (fx < 0 || fy < 0 || fz < 0 || fx > grid_n_ - 1 || fy > grid_n_ - 1 || fz > grid_n_ - 1)
            return 0.0;
        const int i0 = std::min(static_cast<int>(fx), grid_n_ - 2);
        const int j0 = std::min(static_cast<int>(fy), grid_n_ - 2);
        const int k0 = std::min(static_cast<int>(fz), grid_n_ - 2);
        const double ax = fx - i0, ay = fy - j0, az = fz - k0;
        auto g = [&](int i, int j, int k) {
            return grid_[(static_cast<std::size_t>(i) * grid_n_ + j) * grid_n_ + k];
        };
        double s = 0.0;
        for (int di = 0; di < 2; ++di)
            for (int dj = 0; dj < 2; ++dj)
                for (int dk = 0; dk < 2; ++dk)
                    s += (di ? ax : 1 - ax) * (dj ? ay : 1 - ay) * (dk ? az : 1 - az) *
                         g(i0 + di, j0 + dj, k0 + dk);
        return s;
    }

    Vec3 sample_tabulated(std::mt19937_64& rng) const {
        // Discrete sampling over nodes weighted by trapezoid mass, then uniform jitter
        // within the node's cell.
        if (grid_cdf_.empty()) {
            const double h = 2.0 * grid_vmax_ / (grid_n_ - 1);
            grid_cdf_.reserve(grid_.size());
            double acc = 0.0;
            for (int i = 0; i < grid_n_; ++i)
                for (int j = 0; j < grid_n_; ++j)
                    for (int k = 0; k < grid_n_; ++k) {
                        const double w = trap_w(i) * trap_w(j) * trap_w(k) * h * h * h;
                        acc += w * grid_[(static_cast<std::size_t>(i) * grid_n_ + j) * grid_n_ + k];
                        grid_cdf_.push_back(acc);
                    }
            for (double& c : grid_cdf_) c /= acc;
        }
        const double u = uniform01(rng);
        const auto it = std::lower_bound(grid_cdf_.begin(), grid_cdf_.end(), u);
        std::size_t flat = static_cast<std::size_t>(it - grid_cdf_.begin());
        flat = std::min(flat, grid_.size() - 1);
        const int k = static_cast<int>(flat % grid_n_);
        const int j = static_cast<int>((flat / grid_n_) % grid_n_);
        const int i = static_cast<int>(flat / (static_cast<std::size_t>(grid_n_) * grid_n_));
        const double h = 2.0 * grid_vmax_ / (grid_n_ - 1);
        auto node = [&](int a) { return -grid_vmax_ + a * h; };
        std::uniform_real_distribution<double> jit(-0.5 * h, 0.5 * h);
        return {node(i) + jit(rng), node(j) + jit(rng), node(k) + jit(rng)};
    }

    std::vector<Component> comps_;
    double second_moment_ = 0.0;
    int grid_n_ = 0;
    double grid_vmax_ = 0.0;
    std::vector<double> grid_;
    mutable std::vector<double> grid_cdf_;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Total energy: (1/2) sum |v_i|^2 plus the ordered-pair potential sum
/// sum_{i != j} Phi(|x_i - x_j| / eps) (each unordered pair counted twice).
/// Hard spheres carry no potential energy; an overlapping pair is an error.
inline double hamiltonian(const ParticleConfiguration& config, const RadialPotential& phi) {
    const int n = config.count();
    double e = kinetic_energy(config);
    if (phi.kind() == RadialPotential::Kind::hard_sphere) {
        if (n > 1 && config.min_pair_distance() < config.epsilon * (1.0 - 1e-12))
            throw InvalidConfigurationError("hard-sphere overlap in hamiltonian");
        return e;
    }
    if (config.epsilon <= 0.0) return e;
    for (int i = 0; i < n; ++i)
        for (int k = i + 1; k < n; ++k) {
            const double r =
                torus_distance(config.positions[i], config.positions[k], config.box_side) /
                config.epsilon;
            if (r < 1.0) e += 2.0 * phi.value(r);
        }
    return e;
}

/// Hyperbolic scaling t = eps*tau, x = eps*q. Velocities are unchanged.
inline std::pair<double, std::vector<Vec3>> to_macroscopic(double tau, const std::vector<Vec3>& q,
                                                           double eps) {
    if (!(eps > 0.0)) throw ConfigError("scale parameter must be positive");
    std::vector<Vec3> x(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) x[i] = q[i] * eps;
    return {eps * tau, std::move(x)};
}

inline std::pair<double, std::vector<Vec3>> to_microscopic(double t, const std::vector<Vec3>& x,
                                                           double eps) {
    if (!(eps > 0.0)) throw ConfigError("scale parameter must be positive");
    std::vector<Vec3> q(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) q[i] = x[i] / eps;
    return {t / eps, std::move(q)};
}

/// i.i.d. product data conditioned on pairwise exclusion: positions are
/// inserted sequentially, rejecting any proposal within eps of an accepted
/// particle; velocities are i.i.d. from the velocity law. Deterministic in
/// the seed. Exceeding the proposal budget is the packing-too-dense error.
inline ParticleConfiguration sample_initial(const DensitySpec& spec, const ScalingRegime& regime,
                                            std::uint64_t seed, double box_side = 1.0) {
    ParticleConfiguration c;
    c.epsilon = regime.epsilon;
    c.box_side = box_side;
    if (!(regime.epsilon < box_side / 4.0))
        throw InvalidConfigurationError("epsilon must be < L/4");
    auto rng = make_rng(seed, /*stream=*/0xC0FFEE);
    std::uniform_real_distribution<double> u(0.0, box_side);

    constexpr std::int64_t kProposalBudget = 1'000'000;
    std::int64_t proposals = 0;
    c.positions.reserve(regime.N);
    while (c.count() < regime.N) {
        if (++proposals > kProposalBudget)
            throw BudgetError("packing too dense: exceeded 1e6 position proposals");
        const Vec3 x{u(rng), u(rng), u(rng)};
        bool ok = true;
        for (const Vec3& y : c.positions)
            if (torus_distance(x, y, box_side) < regime.epsilon) {
                ok = false;
                break;
            }
        if (ok) c.positions.push_back(x);
    }
    c.velocities.reserve(regime.N);
    for (int i = 0; i < regime.N; ++i) c.velocities.push_back(spec.sample_velocity(rng));
    return c;
}

// ---------------------------------------------------------------------------
// CSV serialization
// ---------------------------------------------------------------------------

inline void write_configuration_csv(std::ostream& os, const ParticleConfiguration& c) {
    os << "particle_id,x1,x2,x3,v1,v2,v3\n";
    os.precision(17);
    for (int i = 0; i < c.count(); ++i) {
        const Vec3& x = c.positions[i];
        const Vec3& v = c.velocities[i];
        os << i << ',' << x.x << ',' << x.y << ',' << x.z << ',' << v.x << ',' << v.y << ','
           << v.z << '\n';
    }
}

inline ParticleConfiguration read_configuration_csv(std::istream& is, double epsilon,
                                                    double box_side = 1.0) {
    ParticleConfiguration c;
    c.epsilon = epsilon;
    c.box_side = box_side;
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("empty configuration CSV");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        double vals[7];
        for (int i = 0; i < 7; ++i) {
            if (!std::getline(ss, tok, ',')) throw ConfigError("short row in configuration CSV");
            vals[i] = std::stod(tok);
        }
        c.positions.push_back({vals[1], vals[2], vals[3]});
        c.velocities.push_back({vals[4], vals[5], vals[6]});
    }
    return c;
}

}  // namespace boltzgrad
