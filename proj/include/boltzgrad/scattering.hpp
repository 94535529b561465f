#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "boltzgrad/errors.hpp"
#include "boltzgrad/phase.hpp"
#include "boltzgrad/vec3.hpp"

namespace boltzgrad::scattering {

/// Map with nu.(v_k - v_i) > 0: the pair is already separating.
struct OutgoingConfigurationError : NumericalError {
    using NumericalError::NumericalError;
};

namespace detail {

/// Adaptive Simpson quadrature with absolute tolerance.
inline double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                          double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0) return left + right + delta / 15.0;
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol, int depth = 48) {
    if (b <= a) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

/// Radial energy bracket g(r) = 1 - rho^2/r^2 - 4 Phi(r)/V^2 of the two-body
/// reduction with reduced mass 1/2 (equal unit masses, relative energy V^2/4).
struct RadialBracket {
    const RadialPotential* phi;
    double rho, V;
    double operator()(double r) const {
        return 1.0 - (rho * rho) / (r * r) - 4.0 * phi->value(r) / (V * V);
    }
    double derivative(double r) const {
        return 2.0 * rho * rho / (r * r * r) - 4.0 * phi->derivative(r) / (V * V);
    }
};

/// Largest root of g in (0, 1]; requires g(1) >= 0. For a non-increasing
/// potential g is strictly increasing, so a downward scan brackets it. The
/// scan step starts fine near the support edge (where steep-wall roots sit)
/// and grows as it descends.
inline std::optional<double> turning_radius(const RadialBracket& g) {
    double hi = 1.0;
    if (g(hi) < 0.0) return std::nullopt;
    double step = 1.0 / 4096.0;
    double lo = hi - step;
    while (lo > 1e-9) {
        if (g(lo) < 0.0) {
            double a = lo, b = hi;
            for (int it = 0; it < 80 && (b - a) > 1e-15; ++it) {
                const double m = 0.5 * (a + b);
                (g(m) < 0.0 ? a : b) = m;
            }
            return b;  // upper end, so g >= 0 on [r_min, 1]
        }
        hi = lo;
        step = std::min(step * 1.25, 1.0 / 128.0);
        lo = hi - step;
    }
    if (g(1e-9) < 0.0) {
        double a = 1e-9, b = hi;
        for (int it = 0; it < 80 && (b - a) > 1e-15; ++it) {
            const double m = 0.5 * (a + b);
            (g(m) < 0.0 ? a : b) = m;
        }
        return b;
    }
    return std::nullopt;  // bounded potential, pass-through
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Deflection angle
// ---------------------------------------------------------------------------

struct DeflectionResult {
    double chi = 0.0;        // deflection angle in [0, pi]
    double r_min = 1.0;      // turning radius (microscopic units)
    bool no_scattering = false;  // rho > 1, or pass-through central encounter
};

/// Classical deflection angle for a radial potential supported in r < 1:
///   chi = pi - 2 asin(rho) - 2 Int_{r_min}^{1} (rho/r^2) [g(r)]^{-1/2} dr,
/// with g the radial bracket; the turning-point inverse square root is
/// removed by the substitution u = sqrt(r - r_min). Quadrature tolerance 1e-8.
inline DeflectionResult deflection_angle(const RadialPotential& phi, double rho, double V,
                                         double quad_tol = 1e-8) {
    if (!(V > 0.0)) throw ConfigError("deflection_angle requires V > 0");
    if (rho < 0.0) throw ConfigError("deflection_angle requires rho >= 0");
    if (rho > 1.0) return {0.0, 1.0, true};

    if (phi.kind() == RadialPotential::Kind::hard_sphere) {
        const double c = std::clamp(rho, 0.0, 1.0);
        return {2.0 * std::acos(c), c, false};
    }

    detail::RadialBracket g{&phi, rho, V};

    if (rho == 0.0) {
        // central encounter: reflect iff the barrier exceeds the relative energy
        const double r_probe = phi.kind() == RadialPotential::Kind::tabulated
                                   ? std::max(phi.tabulated_r_min(), 1e-8)
                                   : 1e-8;
        if (4.0 * phi.value(r_probe) / (V * V) < 1.0) return {0.0, 0.0, true};
        const auto rmin = detail::turning_radius(g);
        if (!rmin) throw NumericalError("deflection_angle: no turning point at rho = 0");
        return {kPi, *rmin, false};
    }

    const auto rmin_opt = detail::turning_radius(g);
    if (!rmin_opt) {
        if (phi.value(0.5) > 0.0)
            throw NumericalError("deflection_angle: repulsive bracket without root");
        return {0.0, rho, true};
    }
    const double r_min = *rmin_opt;
    const double gp = g.derivative(r_min);
    if (!(gp > 0.0))
        throw NumericalError("deflection_angle: degenerate turning point (orbiting)");

    const double u_max = std::sqrt(std::max(0.0, 1.0 - r_min));
    auto integrand = [&](double u) {
        const double r = r_min + u * u;
        if (u == 0.0) return 2.0 * rho / (r_min * r_min * std::sqrt(gp));
        double gr = g(r);
        if (gr <= 0.0) gr = gp * u * u;  // first-order value inside roundoff band
        return 2.0 * u * rho / (r * r * std::sqrt(gr));
    };
    const double integral = detail::adaptive_simpson(integrand, 0.0, u_max, quad_tol);
    const double theta = kPi - 2.0 * std::asin(std::min(rho, 1.0)) - 2.0 * integral;
    // fold the signed deflection into the scattering angle in [0, pi];
    // theta < 0 occurs only for attractive (out-of-class) potentials
    double chi = std::fmod(std::abs(theta), 2.0 * kPi);
    if (chi > kPi) chi = 2.0 * kPi - chi;
    return {chi, r_min, false};
}

// ---------------------------------------------------------------------------
// Monotonicity condition r Phi'' + 2 Phi' >= 0
// ---------------------------------------------------------------------------

struct MonotonicityReport {
    bool passed = false;
    double min_value = 0.0;  // minimum of s(r) = r Phi''(r) + 2 Phi'(r)
    double argmin = 0.0;
    int indeterminate = 0;   // non-finite samples, excluded
};

/// Evaluates s(r) = r Phi'' + 2 Phi' on a log-spaced grid over (0,1); s >= 0
/// everywhere is the condition for the deflection angle to be monotone in rho.
inline MonotonicityReport check_monotonicity(const RadialPotential& phi, int grid_size = 256) {
    if (phi.kind() == RadialPotential::Kind::hard_sphere)
        return {true, 0.0, 1.0, 0};
    if (grid_size < 2) throw ConfigError("grid_size must be >= 2");
    MonotonicityReport rep;
    rep.min_value = std::numeric_limits<double>::infinity();
    const double r_lo = phi.kind() == RadialPotential::Kind::tabulated
                            ? std::max(phi.tabulated_r_min(), 1e-3)
                            : 1e-3;
    const double l0 = std::log(r_lo), l1 = std::log(1.0 - 1e-9);
    for (int i = 0; i < grid_size; ++i) {
        const double r = std::exp(l0 + (l1 - l0) * i / (grid_size - 1));
        const double s = r * phi.second_derivative(r) + 2.0 * phi.derivative(r);
        if (!std::isfinite(s)) {
            ++rep.indeterminate;
            continue;
        }
        if (s < rep.min_value) {
            rep.min_value = s;
            rep.argmin = r;
        }
    }
    rep.passed = rep.min_value >= -1e-12;
    return rep;
}

// ---------------------------------------------------------------------------
// Scattering time
// ---------------------------------------------------------------------------

/// Macroscopic duration of the encounter with separation below eps:
///   t* = eps * (2/V) Int_{r_min}^{1} dr / sqrt(g(r)).
/// Orbits that stay in range past 1e3 * eps / V are reported as trapped
/// (possible only outside the repulsive non-increasing class).
inline double scattering_time(const RadialPotential& phi, double rho, double V, double eps,
                              double quad_tol = 1e-8) {
    if (!(V > 0.0) || !(eps > 0.0)) throw ConfigError("scattering_time requires V, eps > 0");
    if (!(rho > 0.0) || rho > 1.0) throw ConfigError("scattering_time requires rho in (0, 1]");
    if (rho == 1.0) return 0.0;  // tangent chord
    if (phi.kind() == RadialPotential::Kind::hard_sphere) return 0.0;  // instantaneous contact

    detail::RadialBracket g{&phi, rho, V};
    const auto rmin_opt = detail::turning_radius(g);
    if (!rmin_opt) throw NumericalError("scattering_time: no turning point");
    const double r_min = *rmin_opt;

    // interior near-zeros of g above the turning point mean near-vanishing
    // radial speed across a barrier: an orbiting encounter. Scan for the
    // interior minimum, then refine it by golden-section.
    const double cap_micro = 1e3 / V;
    {
        const double left = r_min + std::max(1e-6, (1.0 - r_min) * 1e-4);
        double arg = left, mn = std::numeric_limits<double>::infinity();
        const int scan = 2000;
        for (int s = 0; s <= scan; ++s) {
            const double r = left + (1.0 - left) * s / scan;
            const double val = g(r);
            if (val < mn) {
                mn = val;
                arg = r;
            }
        }
        if (arg > left && arg < 1.0) {
            const double step = (1.0 - left) / scan;
            double a = std::max(left, arg - step), b = std::min(1.0, arg + step);
            constexpr double kGolden = 0.3819660112501051;
            for (int it = 0; it < 80 && (b - a) > 1e-15; ++it) {
                const double x1 = a + kGolden * (b - a), x2 = b - kGolden * (b - a);
                if (g(x1) < g(x2)) b = x2; else a = x1;
            }
            mn = std::min(mn, g(0.5 * (a + b)));
        }
        if (mn < 1e-9)
            throw TrappedOrbitError("scattering_time: orbiting barrier detected");
    }

    const double gp = g.derivative(r_min);
    if (!(gp > 0.0)) throw TrappedOrbitError("scattering_time: degenerate turning point");
    const double u_max = std::sqrt(std::max(0.0, 1.0 - r_min));
    auto integrand = [&](double u) {
        if (u == 0.0) return 2.0 / std::sqrt(gp);
        const double r = r_min + u * u;
        double gr = g(r);
        if (gr <= 0.0) gr = gp * u * u;
        return 2.0 * u / std::sqrt(gr);
    };
    const double t_micro = (2.0 / V) * detail::adaptive_simpson(integrand, 0.0, u_max, quad_tol);
    if (t_micro > cap_micro)
        throw TrappedOrbitError("scattering_time: time in range exceeded 1e3 eps / V");
    return eps * t_micro;
}

/// Full per-encounter record (used by the scattering-table export).
struct ScatteringOutcome {
    double chi = 0.0;
    double rho = 0.0;
    double V = 0.0;
    double t_star = 0.0;
    double r_min = 1.0;
};

inline ScatteringOutcome scattering_outcome(const RadialPotential& phi, double rho, double V,
                                            double eps) {
    const DeflectionResult d = deflection_angle(phi, rho, V);
    ScatteringOutcome out;
    out.chi = d.chi;
    out.rho = rho;
    out.V = V;
    out.r_min = d.r_min;
    out.t_star = (rho > 0.0 && rho <= 1.0 && phi.kind() != RadialPotential::Kind::hard_sphere)
                     ? scattering_time(phi, rho, V, eps)
                     : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Tabulated deflection (for DSMC and repeated maps)
// ---------------------------------------------------------------------------

/// chi(rho, V) sampled on a (rho, log V) grid with bilinear interpolation.
/// No inversion of the deflection angle is ever required here.
class DeflectionTable {
public:
    DeflectionTable(const RadialPotential& phi, int n_rho = 129, int n_v = 33,
                    double v_lo = 0.05, double v_hi = 20.0)
        : n_rho_(n_rho), n_v_(n_v), lv_lo_(std::log(v_lo)), lv_hi_(std::log(v_hi)) {
        if (n_rho < 2 || n_v < 2 || !(v_lo > 0.0) || !(v_hi > v_lo))
            throw ConfigError("DeflectionTable: bad grid");
        chi_.resize(static_cast<std::size_t>(n_rho_) * n_v_);
        for (int j = 0; j < n_v_; ++j) {
            const double V = std::exp(lv_lo_ + (lv_hi_ - lv_lo_) * j / (n_v_ - 1));
            for (int i = 0; i < n_rho_; ++i) {
                const double rho = static_cast<double>(i) / (n_rho_ - 1);
                chi_[static_cast<std::size_t>(i) * n_v_ + j] = deflection_angle(phi, rho, V).chi;
            }
        }
    }

    double chi(double rho, double V) const {
        rho = std::clamp(rho, 0.0, 1.0);
        const double lv = std::clamp(std::log(std::max(V, 1e-300)), lv_lo_, lv_hi_);
        const double fx = rho * (n_rho_ - 1);
        const double fy = (lv - lv_lo_) / (lv_hi_ - lv_lo_) * (n_v_ - 1);
        const int i0 = std::min(static_cast<int>(fx), n_rho_ - 2);
        const int j0 = std::min(static_cast<int>(fy), n_v_ - 2);
        const double ax = fx - i0, ay = fy - j0;
        auto at = [&](int i, int j) { return chi_[static_cast<std::size_t>(i) * n_v_ + j]; };
        return (1 - ax) * (1 - ay) * at(i0, j0) + ax * (1 - ay) * at(i0 + 1, j0) +
               (1 - ax) * ay * at(i0, j0 + 1) + ax * ay * at(i0 + 1, j0 + 1);
    }

private:
    int n_rho_, n_v_;
    double lv_lo_, lv_hi_;
    std::vector<double> chi_;
};

// ---------------------------------------------------------------------------
// Full two-body outcome
// ---------------------------------------------------------------------------

namespace detail {

inline Vec3 any_unit_perpendicular(const Vec3& g) {
    const Vec3 trial = std::abs(g.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    return normalized(cross(g, trial));
}

/// Rotate the relative velocity by chi in the plane spanned by it and the
/// contact direction; center-of-mass velocity is preserved.
inline std::pair<Vec3, Vec3> rotate_pair(const Vec3& vi, const Vec3& vk, const Vec3& nu,
                                         double chi) {
    const Vec3 g = vi - vk;
    const double V = norm(g);
    const Vec3 ghat = g / V;
    Vec3 perp = -nu + dot(nu, ghat) * ghat;  // component of -nu orthogonal to ghat
    const double pn = norm(perp);
    const Vec3 bhat = pn > 1e-13 ? perp / pn : any_unit_perpendicular(ghat);
    const Vec3 gout = V * (std::cos(chi) * ghat + std::sin(chi) * bhat);
    const Vec3 cm = 0.5 * (vi + vk);
    return {cm + 0.5 * gout, cm - 0.5 * gout};
}

}  // namespace detail

/// Two-body outcome at contact: nu is the unit vector from particle i to
/// particle k and the pair must be incoming, nu.(v_k - v_i) <= 0. The
/// relative velocity is rotated by the deflection angle of the encounter.
inline std::pair<Vec3, Vec3> scattering_map(const Vec3& vi, const Vec3& vk, const Vec3& nu,
                                            const RadialPotential& phi) {
    if (std::abs(norm(nu) - 1.0) > 1e-12)
        throw NumericalError("scattering_map: impact vector is not unit");
    const Vec3 g = vi - vk;
    const double V = norm(g);
    if (V == 0.0) return {vi, vk};  // no encounter
    if (dot(nu, vk - vi) > 1e-12 * V)
        throw OutgoingConfigurationError("scattering_map: pair is not incoming");
    const double rho = std::min(1.0, norm(cross(nu, g / V)));
    const double chi = phi.kind() == RadialPotential::Kind::hard_sphere
                           ? 2.0 * std::acos(std::clamp(rho, 0.0, 1.0))
                           : deflection_angle(phi, rho, V).chi;
    return detail::rotate_pair(vi, vk, nu, chi);
}

inline std::pair<Vec3, Vec3> scattering_map(const Vec3& vi, const Vec3& vk, const Vec3& nu,
                                            const DeflectionTable& table) {
    if (std::abs(norm(nu) - 1.0) > 1e-12)
        throw NumericalError("scattering_map: impact vector is not unit");
    const Vec3 g = vi - vk;
    const double V = norm(g);
    if (V == 0.0) return {vi, vk};
    if (dot(nu, vk - vi) > 1e-12 * V)
        throw OutgoingConfigurationError("scattering_map: pair is not incoming");
    const double rho = std::min(1.0, norm(cross(nu, g / V)));
    return detail::rotate_pair(vi, vk, nu, table.chi(rho, V));
}

// ---------------------------------------------------------------------------
// Cross-section kernel
// ---------------------------------------------------------------------------

/// Kernel B(V, chi) = V rho(chi) |d rho / d chi| / sin(chi), obtained by
/// numerically inverting the deflection angle (monotone non-increasing in rho
/// is required) and differencing. Hard spheres give the flat B = V/4.
inline double cross_section_kernel(const RadialPotential& phi, double V, double chi_query) {
    if (!(V > 0.0)) throw ConfigError("cross_section_kernel requires V > 0");
    if (!(chi_query > 0.0) || chi_query > kPi)
        throw ConfigError("cross_section_kernel requires chi in (0, pi]");
    if (phi.kind() == RadialPotential::Kind::hard_sphere) return 0.25 * V;

    constexpr int kTable = 257;
    std::vector<double> chis(kTable);
    for (int i = 0; i < kTable; ++i)
        chis[i] = deflection_angle(phi, static_cast<double>(i) / (kTable - 1), V).chi;
    for (int i = 1; i < kTable; ++i)
        if (chis[i] > chis[i - 1] + 1e-9)
            throw AmbiguousInverseError("deflection angle is not monotone in rho");
    if (chi_query > chis[0]) return 0.0;  // beyond the maximal deflection

    // locate the bracketing table cell and interpolate the inverse
    int lo = 0, hi = kTable - 1;
    while (hi - lo > 1) {
        const int m = (lo + hi) / 2;
        (chis[m] >= chi_query ? lo : hi) = m;
    }
    const double h = 1.0 / (kTable - 1);
    const double denom = chis[lo] - chis[hi];
    const double frac = denom > 0.0 ? (chis[lo] - chi_query) / denom : 0.5;
    const double rho = (lo + frac) * h;
    const double dchi_drho = (chis[hi] - chis[lo]) / h;  // local slope (negative)
    if (dchi_drho == 0.0) return 0.0;
    return V * rho * std::abs(1.0 / dchi_drho) / std::sin(chi_query);
}

// ---------------------------------------------------------------------------
// Cut-off thresholds (section-3 style bookkeeping)
// ---------------------------------------------------------------------------

/// Optional thresholds excluding singular-scattering and high-energy sets;
/// callers report the measure of what was excluded.
struct Cutoffs {
    double v_rel_min = 0.0;  // relative-speed floor (long scattering times)
    double rho_min = 0.0;    // impact-parameter floor (central collisions)
    double v_max = std::numeric_limits<double>::infinity();  // velocity cap

    bool excludes(double rho, double v_rel, double max_speed) const {
        return v_rel < v_rel_min || rho < rho_min || max_speed > v_max;
    }
    bool active() const {
        return v_rel_min > 0.0 || rho_min > 0.0 || std::isfinite(v_max);
    }
};

}  // namespace boltzgrad::scattering
