#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "boltzgrad/md.hpp"
#include "boltzgrad/scattering.hpp"
#include "oracles.hpp"

using namespace boltzgrad;
using namespace boltzgrad::scattering;

TEST_CASE("deflection_angle: free motion is undeflected") {
    const auto zero = RadialPotential::zero();
    for (double rho : {0.1, 0.5, 0.9}) {
        for (double V : {0.3, 1.0, 4.0}) {
            const auto d = deflection_angle(zero, rho, V);
            REQUIRE(std::abs(d.chi) < 1e-7);
        }
    }
}

TEST_CASE("deflection_angle: rho beyond the support means no scattering") {
    const auto d = deflection_angle(make_wall_potential(1.0, 2), 1.5, 1.0);
    REQUIRE(d.no_scattering);
    REQUIRE(d.chi == 0.0);
}

TEST_CASE("deflection_angle: steep-wall family approaches the hard-sphere law") {
    const double rho = 1.0 / std::sqrt(2.0), V = 1.0;
    const double chi_hs = 2.0 * std::acos(rho);  // pi/2
    double prev_err = 1e9;
    for (double amp : {1e4, 1e8, 1e12, 1e16}) {
        const auto phi = make_wall_potential(amp, 4);
        const double err = std::abs(deflection_angle(phi, rho, V).chi - chi_hs);
        REQUIRE(err < prev_err + 1e-12);
        prev_err = err;
    }
    REQUIRE(prev_err < 1e-3);
}

TEST_CASE("deflection_angle: central collision against an unbounded core backscatters") {
    const auto phi = make_inverse_power_potential(2.0);
    const auto d = deflection_angle(phi, 0.0, 1.0);
    REQUIRE(d.chi == Catch::Approx(kPi));
}

TEST_CASE("deflection_angle: monotone non-increasing in rho for the admissible class") {
    for (double alpha : {1.5, 2.0, 3.0}) {
        const auto phi = make_inverse_power_potential(alpha);
        REQUIRE(check_monotonicity(phi).passed);
        double prev = kPi + 1.0;
        for (int i = 0; i < 64; ++i) {
            const double rho = static_cast<double>(i) / 63.0;
            const double chi = deflection_angle(phi, rho, 1.3).chi;
            REQUIRE(chi <= prev + 1e-6);
            prev = chi;
        }
    }
}

TEST_CASE("check_monotonicity: closed-form pass and fail cases") {
    // s(r) = alpha (alpha - 1) r^{-alpha - 1}
    REQUIRE(check_monotonicity(make_inverse_power_potential(2.0)).passed);

    const auto half = check_monotonicity(make_inverse_power_potential(0.5));
    REQUIRE_FALSE(half.passed);
    REQUIRE(half.min_value < 0.0);

    const auto lin = check_monotonicity(make_linear_potential(1.0));
    REQUIRE_FALSE(lin.passed);
    REQUIRE(lin.min_value == Catch::Approx(-2.0).epsilon(1e-9));
}

TEST_CASE("scattering_time: free chords") {
    const auto zero = RadialPotential::zero();
    REQUIRE(scattering_time(zero, 1.0, 2.0, 1.0) == 0.0);
    REQUIRE(scattering_time(zero, 0.6, 2.0, 1.0) == Catch::Approx(0.8).margin(1e-7));
    // macroscopic duration scales with eps
    REQUIRE(scattering_time(zero, 0.6, 2.0, 0.05) == Catch::Approx(0.05 * 0.8).margin(1e-8));
}

namespace {

/// Planar two-body oracle: time spent with separation below 1 (microscopic),
/// from fixed-step RK4 on the relative motion with reduced mass 1/2.
double residence_time_oracle(const RadialPotential& phi, double rho, double V) {
    struct State { double x, y, vx, vy; };
    auto deriv = [&](const State& s) {
        const double rr = std::hypot(s.x, s.y);
        double ax = 0.0, ay = 0.0;
        if (rr < 1.0) {
            const double f = -2.0 * phi.derivative(rr) / rr;  // F/mu with mu = 1/2
            ax = f * s.x;
            ay = f * s.y;
        }
        return State{s.vx, s.vy, ax, ay};
    };
    auto step = [&](State s, double h) {
        const State k1 = deriv(s);
        const State s2{s.x + 0.5 * h * k1.x, s.y + 0.5 * h * k1.y, s.vx + 0.5 * h * k1.vx,
                       s.vy + 0.5 * h * k1.vy};
        const State k2 = deriv(s2);
        const State s3{s.x + 0.5 * h * k2.x, s.y + 0.5 * h * k2.y, s.vx + 0.5 * h * k2.vx,
                       s.vy + 0.5 * h * k2.vy};
        const State k3 = deriv(s3);
        const State s4{s.x + h * k3.x, s.y + h * k3.y, s.vx + h * k3.vx, s.vy + h * k3.vy};
        const State k4 = deriv(s4);
        return State{s.x + h / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x),
                     s.y + h / 6 * (k1.y + 2 * k2.y + 2 * k3.y + k4.y),
                     s.vx + h / 6 * (k1.vx + 2 * k2.vx + 2 * k3.vx + k4.vx),
                     s.vy + h / 6 * (k1.vy + 2 * k2.vy + 2 * k3.vy + k4.vy)};
    };
    State s{-3.0, rho, V, 0.0};
    const double h = 2e-5 / V;
    double t = 0.0, inside = 0.0, r_prev = std::hypot(s.x, s.y);
    while (t < 40.0 / V) {
        const State s2 = step(s, h);
        const double r_new = std::hypot(s2.x, s2.y);
        const bool was_in = r_prev < 1.0, is_in = r_new < 1.0;
        if (was_in && is_in) {
            inside += h;
        } else if (was_in != is_in) {
            const double frac = std::abs(1.0 - r_prev) / std::abs(r_new - r_prev);
            inside += was_in ? frac * h : (1.0 - frac) * h;
        }
        s = s2;
        r_prev = r_new;
        t += h;
        if (s.x > 3.0) break;
    }
    return inside;
}

}  // namespace

TEST_CASE("scattering_time: repulsion shortens residence; oracle agreement") {
    const auto phi = make_wall_potential(1.0, 2);
    const double rho = 0.5, V = 2.0;
    const double chord = 2.0 * std::sqrt(1.0 - rho * rho) / V;
    const double t_star = scattering_time(phi, rho, V, 1.0);
    REQUIRE(t_star > 0.0);
    REQUIRE(t_star <= chord);
    REQUIRE(t_star == Catch::Approx(residence_time_oracle(phi, rho, V)).margin(2e-4));
}

TEST_CASE("scattering_time: orbiting near the critical impact parameter is trapped") {
    // repulsive bump with an interior barrier; non-monotone, outside the
    // admissible class, constructed with the monotonicity check disabled.
    // At V = 1.5 the energy clears the bare barrier and the centrifugal term
    // produces a critical impact parameter with a degenerate turning point.
    const auto bump = RadialPotential::analytic(
        "bump",
        [](double r) { return 8.0 * r * r * (1.0 - r) * (1.0 - r); },
        [](double r) { return 8.0 * (2.0 * r * (1 - r) * (1 - r) - 2.0 * r * r * (1 - r)); },
        [](double r) { return 8.0 * (2.0 * (1 - r) * (1 - r) - 8.0 * r * (1 - r) + 2.0 * r * r); },
        /*enforce_nonincreasing=*/false);
    const double V = 1.5;

    // the turning radius jumps between the inner and outer branch at the
    // critical rho; bisect the jump
    auto rmin_of = [&](double rho) {
        detail::RadialBracket g{&bump, rho, V};
        const auto rm = detail::turning_radius(g);
        REQUIRE(rm.has_value());
        return *rm;
    };
    double lo = 0.05, hi = 0.60;
    REQUIRE(rmin_of(lo) < 0.35);   // inner branch: passes over the barrier
    REQUIRE(rmin_of(hi) > 0.35);   // outer branch: turns outside it
    for (int it = 0; it < 80; ++it) {
        const double m = 0.5 * (lo + hi);
        (rmin_of(m) < 0.35 ? lo : hi) = m;
    }
    bool trapped_seen = false;
    for (double rho : {lo, hi}) {
        try {
            scattering_time(bump, rho, V, 1.0);
        } catch (const TrappedOrbitError&) {
            trapped_seen = true;
        }
    }
    REQUIRE(trapped_seen);
}

TEST_CASE("scattering_map: hard spheres reproduce the exchange law") {
    const auto hs = RadialPotential::hard_sphere();
    auto rng = make_rng(55);
    int tested = 0;
    while (tested < 100) {
        const Vec3 vi = sample_maxwellian(rng, 1.0), vk = sample_maxwellian(rng, 1.0);
        const Vec3 nu = sample_unit_sphere(rng);
        if (dot(nu, vk - vi) > 0.0) continue;  // keep only incoming geometry
        ++tested;
        auto [a, b] = scattering_map(vi, vk, nu, hs);
        auto [c, d] = md::apply_collision(vi, vk, nu);
        REQUIRE(norm(a - c) < 1e-12);
        REQUIRE(norm(b - d) < 1e-12);
    }
}

TEST_CASE("scattering_map: conservation, no-encounter, and error branches") {
    const auto phi = make_wall_potential(1.0, 2);
    auto rng = make_rng(56);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec3 vi = sample_maxwellian(rng, 1.0), vk = sample_maxwellian(rng, 1.0);
        Vec3 nu = sample_unit_sphere(rng);
        if (dot(nu, vk - vi) > 0.0) nu = -nu;
        auto [a, b] = scattering_map(vi, vk, nu, phi);
        REQUIRE(norm((a + b) - (vi + vk)) < 1e-12);                              // momentum
        REQUIRE(std::abs(norm2(a) + norm2(b) - norm2(vi) - norm2(vk)) < 1e-8);   // energy
    }

    const Vec3 v{0.4, 0.1, 0.0};
    auto [sa, sb] = scattering_map(v, v, Vec3{1, 0, 0}, phi);  // zero relative velocity
    REQUIRE(sa == v);
    REQUIRE(sb == v);

    REQUIRE_THROWS_AS(scattering_map({-1, 0, 0}, {0, 0, 0}, Vec3{1, 0, 0}, phi),
                      OutgoingConfigurationError);
}

TEST_CASE("scattering_map: head-on reflection below the wall height exchanges velocities") {
    // E_rel = V^2/4 = 1/4 < Phi(0+) = 1: full reflection; for equal masses that
    // is a velocity exchange
    const auto phi = make_wall_potential(1.0, 2);
    auto [a, b] = scattering_map({1, 0, 0}, {0, 0, 0}, Vec3{1, 0, 0}, phi);
    REQUIRE(norm(a - Vec3{0, 0, 0}) < 1e-9);
    REQUIRE(norm(b - Vec3{1, 0, 0}) < 1e-9);
}

TEST_CASE("scattering_map: smooth map agrees with the Newton flow on two bodies") {
    const auto phi = make_wall_potential(1.0, 2);
    const double eps = 0.02;
    // oblique encounter: place the pair at contact distance eps, incoming
    ParticleConfiguration c;
    c.epsilon = eps;
    c.positions = {{0.5, 0.5, 0.5}, {0.5 + eps * 0.8, 0.5 + eps * 0.6, 0.5}};
    c.velocities = {{0.5, 0.0, 0.0}, {-0.3, 0.1, 0.0}};
    const Vec3 nu = normalized(min_image(c.positions[1] - c.positions[0], 1.0));
    REQUIRE(dot(nu, c.velocities[1] - c.velocities[0]) <= 0.0);

    auto [ma, mb] = scattering_map(c.velocities[0], c.velocities[1], nu, phi);

    const double vmax = 1.0;
    const double dt = eps / (400.0 * vmax);
    const auto out = md::evolve_newton(c, 6.0 * eps, phi, dt);
    REQUIRE(norm(out.velocities[0] - ma) < 1e-5);
    REQUIRE(norm(out.velocities[1] - mb) < 1e-5);
}

TEST_CASE("cross_section_kernel: hard-sphere kernel is flat with total pi") {
    const auto hs = RadialPotential::hard_sphere();
    for (double V : {0.5, 1.0, 3.0}) {
        REQUIRE(cross_section_kernel(hs, V, 0.3) == Catch::Approx(0.25 * V));
        REQUIRE(cross_section_kernel(hs, V, 2.0) == Catch::Approx(0.25 * V));
    }
    // total cross-section: integral of (B/V) over the sphere = pi (eps = 1)
    const double V = 1.0;
    double total = 0.0;
    const int n = 400;
    for (int i = 0; i < n; ++i) {
        const double chi = (i + 0.5) * kPi / n;
        total += 2.0 * kPi * (cross_section_kernel(hs, V, chi) / V) * std::sin(chi) * (kPi / n);
    }
    REQUIRE(total == Catch::Approx(kPi).epsilon(1e-4));
}

TEST_CASE("cross_section_kernel: grazing limit through the rho-drho form") {
    // B sin(chi) = V rho |drho/dchi| decays toward grazing (rho -> 1)
    const auto phi = make_wall_potential(1e4, 2);
    double prev = 1e9;
    for (double chi : {0.8, 0.5, 0.3, 0.15}) {
        const double val = cross_section_kernel(phi, 1.0, chi) * std::sin(chi);
        REQUIRE(val < prev);
        prev = val;
    }
    REQUIRE(prev < 0.05);
}

TEST_CASE("cross_section_kernel: non-monotone deflection is an ambiguous inverse") {
    // attractive potential (diagnostics only): rainbow makes |deflection|
    // non-monotone in rho
    const auto attract = RadialPotential::analytic(
        "attractive_well", [](double r) { return -2.0 * (1 - r) * (1 - r); },
        [](double r) { return 4.0 * (1 - r); }, [](double) { return -4.0; },
        /*enforce_nonincreasing=*/false);
    REQUIRE_THROWS_AS(cross_section_kernel(attract, 1.0, 0.5), AmbiguousInverseError);
}

TEST_CASE("deflection table: agrees with direct quadrature") {
    const auto phi = make_wall_potential(1.0, 2);
    const DeflectionTable table(phi, 257, 49, 0.05, 10.0);
    auto rng = make_rng(77);
    for (int i = 0; i < 50; ++i) {
        const double rho = uniform01(rng);
        const double V = 0.1 + 5.0 * uniform01(rng);
        const double direct = deflection_angle(phi, rho, V).chi;
        REQUIRE(std::abs(table.chi(rho, V) - direct) < 1e-2);
    }
}

TEST_CASE("empirical bound constant for the scattering time stays finite") {
    // max over a (rho, V) grid of t* rho V / eps, stable under refinement
    const auto phi = make_wall_potential(1.0, 2);
    auto bound = [&](int n_rho, int n_v) {
        double worst = 0.0;
        for (int i = 0; i < n_rho; ++i) {
            const double rho = 0.05 + (1.0 - 0.05) * i / (n_rho - 1);
            for (int j = 0; j < n_v; ++j) {
                const double V = 0.1 * std::pow(100.0, static_cast<double>(j) / (n_v - 1));
                worst = std::max(worst, scattering_time(phi, rho, V, 1.0) * rho * V);
            }
        }
        return worst;
    };
    const double coarse = bound(8, 6), fine = bound(15, 11);
    REQUIRE(fine >= coarse - 1e-12);
    REQUIRE(std::abs(fine - coarse) / coarse < 0.05);
}

TEST_CASE("cutoffs: exclusion predicate") {
    Cutoffs cut;
    REQUIRE_FALSE(cut.active());
    cut.v_rel_min = 0.1;
    cut.rho_min = 0.05;
    cut.v_max = 8.0;
    REQUIRE(cut.active());
    REQUIRE(cut.excludes(0.01, 1.0, 1.0));   // central
    REQUIRE(cut.excludes(0.5, 0.05, 1.0));   // slow
    REQUIRE(cut.excludes(0.5, 1.0, 9.0));    // fast
    REQUIRE_FALSE(cut.excludes(0.5, 1.0, 1.0));
}
