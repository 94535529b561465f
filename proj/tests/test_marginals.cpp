#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "boltzgrad/marginals.hpp"
#include "boltzgrad/md.hpp"
#include "oracles.hpp"

using namespace boltzgrad;
using namespace boltzgrad::marginals;

namespace {

/// Two-particle members with velocities from the two-bin values {-0.5, +0.5}.
std::vector<ParticleConfiguration> two_bin_ensemble(const std::vector<std::pair<int, int>>& pat) {
    std::vector<ParticleConfiguration> ens;
    for (auto [a, b] : pat) {
        ParticleConfiguration c;
        c.epsilon = 0.0;
        c.positions = {{0.2, 0.5, 0.5}, {0.7, 0.5, 0.5}};
        c.velocities = {{a ? 0.5 : -0.5, 0, 0}, {b ? 0.5 : -0.5, 0, 0}};
        ens.push_back(c);
    }
    return ens;
}

VariableSpec two_bins() {
    VariableSpec v;
    v.kind = VariableSpec::Kind::component;
    v.component = 0;
    v.bins = 2;
    v.lo = -1.0;
    v.hi = 1.0;
    return v;
}

}  // namespace

TEST_CASE("estimate_marginal: identical members produce a point mass") {
    auto ens = two_bin_ensemble({{1, 0}, {1, 0}, {1, 0}});
    const auto m = estimate_marginal(ens, 1, two_bins());
    const auto p = m.probabilities();
    REQUIRE(p[1] == 1.0);
    REQUIRE(p[0] == 0.0);
    REQUIRE(m.mass() == 1.0);
}

TEST_CASE("estimate_marginal: matches the sampling law cellwise") {
    // i.i.d. Maxwellian members via sample_initial at vanishing exclusion
    const auto spec = DensitySpec::maxwellian(1.0);
    const auto regime = ScalingRegime::custom(8, 0.0);
    std::vector<ParticleConfiguration> ens;
    for (int r = 0; r < 500; ++r) ens.push_back(sample_initial(spec, regime, 9000 + r));

    VariableSpec var;
    var.kind = VariableSpec::Kind::component;
    var.bins = 8;
    var.lo = -4.0;
    var.hi = 4.0;
    const auto m = estimate_marginal(ens, 1, var);
    const auto p = m.probabilities();
    for (int b = 0; b < var.bins; ++b) {
        // exact bin probability of the standard normal
        const double lo = var.lo + b * (var.hi - var.lo) / var.bins;
        const double hi = lo + (var.hi - var.lo) / var.bins;
        const double prob = 0.5 * (std::erf(hi / std::sqrt(2.0)) - std::erf(lo / std::sqrt(2.0)));
        const double sigma = std::sqrt(prob * (1.0 - prob) / 500.0);
        REQUIRE(std::abs(p[b] - prob) < 3.5 * sigma + 1e-9);
    }
}

TEST_CASE("estimate_marginal: subset averaging agrees with the first-particle choice") {
    const auto spec = DensitySpec::maxwellian(1.0);
    const auto regime = ScalingRegime::boltzmann_grad(30);
    std::vector<ParticleConfiguration> ens;
    for (int r = 0; r < 400; ++r) ens.push_back(sample_initial(spec, regime, 9500 + r));
    VariableSpec var;
    var.kind = VariableSpec::Kind::component;
    var.bins = 6;
    var.lo = -4.0;
    var.hi = 4.0;
    const auto a = estimate_marginal(ens, 1, var);
    EstimateOptions opt;
    opt.subsets_per_member = 10;
    opt.seed = 3;
    const auto b = estimate_marginal(ens, 1, var, opt);
    const auto pa = a.probabilities(), pb = b.probabilities();
    for (int c = 0; c < var.bins; ++c) {
        const double sigma = std::sqrt(std::max(pa[c], 0.01) / 400.0);
        REQUIRE(std::abs(pa[c] - pb[c]) < 3.5 * sigma);
    }
}

TEST_CASE("estimate_marginal: reduced equals plain at eps = 0, close at small eps") {
    const auto spec = DensitySpec::maxwellian(1.0);
    {
        const auto regime = ScalingRegime::custom(10, 0.0);
        std::vector<ParticleConfiguration> ens;
        for (int r = 0; r < 100; ++r) ens.push_back(sample_initial(spec, regime, 700 + r));
        const auto plain = estimate_marginal(ens, 1, two_bins());
        EstimateOptions opt;
        opt.reduced = true;
        const auto red = estimate_marginal(ens, 1, two_bins(), opt);
        REQUIRE(plain.probabilities() == red.probabilities());
        REQUIRE(red.mass() == plain.mass());  // bins truncate both identically
    }
    {
        // excluded-volume bound: L1 gap <= 5 N eps^3
        const auto regime = ScalingRegime::boltzmann_grad(50);
        std::vector<ParticleConfiguration> ens;
        for (int r = 0; r < 400; ++r) ens.push_back(sample_initial(spec, regime, 800 + r));
        VariableSpec var;
        var.kind = VariableSpec::Kind::component;
        var.bins = 6;
        var.lo = -4.0;
        var.hi = 4.0;
        const auto plain = estimate_marginal(ens, 1, var);
        EstimateOptions opt;
        opt.reduced = true;
        const auto red = estimate_marginal(ens, 1, var, opt);
        REQUIRE(red.mass() <= 1.0 + 1e-12);
        double l1 = 0.0;
        const auto pp = plain.probabilities(), pr = red.probabilities();
        for (std::size_t c = 0; c < pp.size(); ++c) l1 += std::abs(pp[c] - pr[c]);
        const double bound = 5.0 * 50.0 * std::pow(regime.epsilon, 3);
        REQUIRE(l1 <= bound);
    }
}

TEST_CASE("chaos_defect: exact zero for a product pattern, one for the diagonal") {
    // balanced product pattern
    const auto prod = two_bin_ensemble({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
    const auto f2p = estimate_marginal(prod, 2, two_bins());
    const auto f1p = estimate_marginal(prod, 1, two_bins());
    REQUIRE(chaos_defect(f2p, f1p).value == 0.0);

    // perfectly correlated pair: closed-form defect 1 on the 2-bin grid
    const auto diag = two_bin_ensemble({{0, 0}, {1, 1}});
    const auto f2d = estimate_marginal(diag, 2, two_bins());
    const auto f1d = estimate_marginal(diag, 1, two_bins());
    REQUIRE(chaos_defect(f2d, f1d).value == Catch::Approx(1.0));
}

TEST_CASE("chaos_defect: incompatible binning is an error") {
    const auto ens = two_bin_ensemble({{0, 0}, {1, 1}});
    const auto f2 = estimate_marginal(ens, 2, two_bins());
    VariableSpec other = two_bins();
    other.bins = 4;
    const auto f1 = estimate_marginal(ens, 1, other);
    REQUIRE_THROWS_AS(chaos_defect(f2, f1), ConfigError);
}

TEST_CASE("chaos_defect: i.i.d. ensembles give a small defect with a sane error bar") {
    const auto spec = DensitySpec::maxwellian(1.0);
    const auto regime = ScalingRegime::custom(10, 0.0);
    std::vector<ParticleConfiguration> ens;
    for (int r = 0; r < 2000; ++r) ens.push_back(sample_initial(spec, regime, 20000 + r));
    VariableSpec var;
    var.kind = VariableSpec::Kind::component;
    var.bins = 6;
    var.lo = -4.0;
    var.hi = 4.0;
    EstimateOptions opt;
    opt.subsets_per_member = 10;
    opt.seed = 9;
    const auto f2 = estimate_marginal(ens, 2, var, opt);
    const auto f1 = estimate_marginal(ens, 1, var, opt);
    const auto d = chaos_defect(f2, f1);
    REQUIRE(d.value < 0.15);  // pure sampling noise at this R
    REQUIRE(d.stderr_value > 0.0);
    REQUIRE(d.stderr_value < 0.1);
}

TEST_CASE("weighted_norm: the matching Maxwellian has unit norm") {
    const double beta = 1.3;
    const auto f = boltzmann::VelocityGridFunction::from_density(
        24, 6.0, DensitySpec::maxwellian(beta));
    const auto rep = weighted_norm(f, beta);
    REQUIRE(rep.value == Catch::Approx(1.0).margin(1e-12));

    const auto zero = boltzmann::VelocityGridFunction(
        8, 3.0, std::vector<double>(8 * 8 * 8, 0.0));
    REQUIRE(weighted_norm(zero, beta).value == 0.0);
}

TEST_CASE("weighted_norm: colder data diverge with the grid extent") {
    // f at temperature beta' < beta is not in the beta-weighted space: the
    // finite-grid supremum grows with v_max
    const double beta = 1.0, beta_prime = 0.5;
    const auto small = boltzmann::VelocityGridFunction::from_density(
        24, 4.0, DensitySpec::maxwellian(beta_prime));
    const auto large = boltzmann::VelocityGridFunction::from_density(
        36, 6.0, DensitySpec::maxwellian(beta_prime));
    REQUIRE(weighted_norm(large, beta).value > 2.0 * weighted_norm(small, beta).value);
}

TEST_CASE("weighted_norm: exactly homogeneous under power-of-two scaling") {
    auto rng = make_rng(5);
    std::vector<double> vals(12 * 12 * 12);
    for (double& v : vals) v = uniform01(rng);
    const boltzmann::VelocityGridFunction f(12, 3.0, vals);
    for (double& v : vals) v *= 2.0;
    const boltzmann::VelocityGridFunction g(12, 3.0, vals);
    REQUIRE(weighted_norm(g, 1.0).value == 2.0 * weighted_norm(f, 1.0).value);
}

TEST_CASE("seq_norm: single order and Maxwellian-product family") {
    REQUIRE(seq_norm({{1, 3.0}}, 1.0) == 3.0);
    REQUIRE(seq_norm({{1, 3.0}}, 2.0) == 1.5);
    // Maxwellian products have unit norm at every order
    REQUIRE(seq_norm({{1, 1.0}, {2, 1.0}, {3, 1.0}}, 1.0) == 1.0);
    REQUIRE(seq_norm({{1, 1.0}, {2, 1.0}}, 2.0) == 0.5);  // max at j = 1
}

TEST_CASE("observable_pairing: mass, odd symmetry, and truncation warning") {
    auto rng = make_rng(71);
    std::vector<Vec3> vel(50000);
    for (Vec3& v : vel) v = sample_maxwellian(rng, 1.0);
    VariableSpec var;
    var.kind = VariableSpec::Kind::vector3;
    var.bins = 16;
    var.lo = -5.0;
    var.hi = 5.0;
    const auto f = marginal_from_velocities(vel, var);

    const auto one = observable_pairing(f, indicator_ball({}, 20.0));
    REQUIRE(one.value == Catch::Approx(f.mass()).margin(1e-12));
    REQUIRE(one.truncated);  // support exceeds the grid on purpose

    const auto odd = observable_pairing(f, truncated_component({}, 4.0, 0));
    REQUIRE(std::abs(odd.value) < 3.0 / std::sqrt(50000.0));

    const auto inside = observable_pairing(f, bump_function({}, 2.0));
    REQUIRE_FALSE(inside.truncated);
    REQUIRE(inside.value > 0.0);
}

TEST_CASE("observable_pairing: grid function agrees with the histogram pairing") {
    auto rng = make_rng(73);
    std::vector<Vec3> vel(100000);
    for (Vec3& v : vel) v = sample_maxwellian(rng, 1.0);
    VariableSpec var;
    var.kind = VariableSpec::Kind::vector3;
    var.bins = 20;
    var.lo = -5.0;
    var.hi = 5.0;
    const auto hist = marginal_from_velocities(vel, var);
    const auto grid = boltzmann::VelocityGridFunction::from_density(
        32, 5.0, DensitySpec::maxwellian(1.0));
    const auto phi = bump_function({0.5, 0, 0}, 1.5);
    const double a = observable_pairing(hist, phi).value;
    const double b = observable_pairing(grid, phi).value;
    REQUIRE(std::abs(a - b) < 0.01);
}

TEST_CASE("marginal CSV export lists bin centers and weights") {
    const auto ens = two_bin_ensemble({{1, 0}, {0, 1}});
    const auto m = estimate_marginal(ens, 1, two_bins());
    std::stringstream ss;
    write_marginal_csv(ss, m);
    std::string header;
    std::getline(ss, header);
    REQUIRE(header == "c1,weight");
    int rows = 0;
    std::string line;
    while (std::getline(ss, line))
        if (!line.empty()) ++rows;
    REQUIRE(rows == 2);
}
