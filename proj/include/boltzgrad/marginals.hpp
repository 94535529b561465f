#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "boltzgrad/boltzmann.hpp"
#include "boltzgrad/errors.hpp"
#include "boltzgrad/phase.hpp"
#include "boltzgrad/rng.hpp"
#include "boltzgrad/vec3.hpp"

namespace boltzgrad::marginals {

// ---------------------------------------------------------------------------
// Histogram variables
// ---------------------------------------------------------------------------

/// Per-particle variable used for marginal histograms: one velocity
/// component, the speed, or the full velocity vector.
struct VariableSpec {
    enum class Kind { component, speed, vector3 };
    Kind kind = Kind::component;
    int component = 0;
    int bins = 8;
    double lo = -4.0, hi = 4.0;

    int dims() const { return kind == Kind::vector3 ? 3 : 1; }
    std::size_t cells() const {
        std::size_t c = 1;
        for (int d = 0; d < dims(); ++d) c *= bins;
        return c;
    }
    bool operator==(const VariableSpec& o) const {
        return kind == o.kind && component == o.component && bins == o.bins && lo == o.lo &&
               hi == o.hi;
    }

    /// Flat bin index, or -1 if outside the range.
    long bin_of(const Vec3& v) const {
        const double w = (hi - lo) / bins;
        auto idx1 = [&](double x) -> long {
            const long i = static_cast<long>(std::floor((x - lo) / w));
            return (i < 0 || i >= bins) ? -1 : i;
        };
        switch (kind) {
            case Kind::component:
                return idx1(v[component]);
            case Kind::speed:
                return idx1(norm(v));
            case Kind::vector3: {
                long flat = 0;
                for (int a = 0; a < 3; ++a) {
                    const long i = idx1(v[a]);
                    if (i < 0) return -1;
                    flat = flat * bins + i;
                }
                return flat;
            }
        }
        return -1;
    }

    double cell_volume() const {
        const double w = (hi - lo) / bins;
        double vol = 1.0;
        for (int d = 0; d < dims(); ++d) vol *= w;
        return vol;
    }

    /// Center of a (1D) bin; vector3 centers come from center3.
    double center(long i) const { return lo + (i + 0.5) * (hi - lo) / bins; }
    Vec3 center3(long flat) const {
        Vec3 c;
        for (int a = 2; a >= 0; --a) {
            c[a] = center(flat % bins);
            flat /= bins;
        }
        return c;
    }
};

// ---------------------------------------------------------------------------
// EmpiricalMarginal
// ---------------------------------------------------------------------------

/// Histogram estimate of the order-j marginal over the chosen per-particle
/// variable (j <= 2). Weights sum to at most the ensemble size; reduced
/// marginals lose the mass of members whose unobserved particles intrude on
/// the eps-balls of the observed ones. Block partial sums support bootstrap
/// errors.
class EmpiricalMarginal {
public:
    EmpiricalMarginal(int order, VariableSpec var, int blocks = 50)
        : order_(order), var_(var), blocks_(std::max(1, blocks)) {
        if (order < 1 || order > 2) throw ConfigError("marginal order must be 1 or 2");
        std::size_t cells = var_.cells();
        if (order == 2) cells *= var_.cells();
        weights_.assign(cells, 0.0);
        block_totals_.assign(blocks_, 0.0);
        block_weights_.assign(blocks_, std::vector<double>(cells, 0.0));
    }

    int order() const { return order_; }
    const VariableSpec& variable() const { return var_; }
    bool reduced() const { return reduced_; }
    void set_reduced(bool r) { reduced_ = r; }
    int ensemble_size() const { return ensemble_size_; }
    int blocks() const { return blocks_; }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<std::vector<double>>& block_weights() const { return block_weights_; }

    /// Add one weighted j-tuple observation (weight 0 allowed).
    void add(std::span<const Vec3> tuple, double weight, int block) {
        if (static_cast<int>(tuple.size()) != order_)
            throw ConfigError("marginal observation order mismatch");
        ++observations_;
        if (weight == 0.0) return;
        long flat = 0;
        for (int p = 0; p < order_; ++p) {
            const long b = var_.bin_of(tuple[p]);
            if (b < 0) return;  // outside the grid: dropped mass
            flat = flat * static_cast<long>(var_.cells()) + b;
        }
        weights_[flat] += weight;
        const int bl = std::clamp(block, 0, blocks_ - 1);
        block_weights_[bl][flat] += weight;
        block_totals_[bl] += weight;
    }

    void set_ensemble_size(int r) { ensemble_size_ = r; }

    /// Total retained probability mass (= 1 for plain marginals up to grid
    /// truncation; < 1 for reduced marginals).
    double mass() const {
        if (ensemble_size_ == 0) return 0.0;
        const double s = std::accumulate(weights_.begin(), weights_.end(), 0.0);
        return s / ensemble_size_;
    }

    /// Cell probabilities p_cell (normalized by the ensemble size, not the
    /// retained mass, so reduced marginals keep mass < 1).
    std::vector<double> probabilities() const {
        std::vector<double> p(weights_.size());
        const double r = ensemble_size_ > 0 ? 1.0 / ensemble_size_ : 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = weights_[i] * r;
        return p;
    }

private:
    int order_;
    VariableSpec var_;
    bool reduced_ = false;
    int ensemble_size_ = 0;
    long observations_ = 0;
    int blocks_;
    std::vector<double> weights_;
    std::vector<double> block_totals_;
    std::vector<std::vector<double>> block_weights_;
};

struct EstimateOptions {
    bool reduced = false;
    int subsets_per_member = 0;  // 0: the first j particles; else average over
                                 // this many random j-subsets (exchangeability)
    std::uint64_t seed = 0;
    int blocks = 50;
};

/// Histogram of the first j particles of each ensemble member (optionally
/// averaged over random j-subsets). The reduced variant weights each
/// observation by the indicator that every unobserved particle stays outside
/// the eps-balls of the observed positions.
inline EmpiricalMarginal estimate_marginal(std::span<const ParticleConfiguration> ensemble,
                                           int j, const VariableSpec& var,
                                           EstimateOptions opt = {}) {
    if (ensemble.empty()) throw ConfigError("estimate_marginal: empty ensemble");
    EmpiricalMarginal m(j, var, opt.blocks);
    m.set_ensemble_size(static_cast<int>(ensemble.size()));
    m.set_reduced(opt.reduced);
    const int R = static_cast<int>(ensemble.size());

    std::vector<int> idx;
    std::vector<Vec3> tuple(j);
    for (int r = 0; r < R; ++r) {
        const auto& c = ensemble[r];
        if (c.count() < j) throw ConfigError("estimate_marginal: member smaller than j");
        const int block = static_cast<int>(static_cast<long>(r) * opt.blocks / R);
        const int subsets = std::max(1, opt.subsets_per_member);
        auto rng = make_rng(opt.seed, 0x5E7, static_cast<std::uint64_t>(r));
        const double w0 = 1.0 / subsets;
        for (int s = 0; s < subsets; ++s) {
            idx.clear();
            if (opt.subsets_per_member == 0) {
                for (int p = 0; p < j; ++p) idx.push_back(p);
            } else {
                std::uniform_int_distribution<int> pick(0, c.count() - 1);
                while (static_cast<int>(idx.size()) < j) {
                    const int cand = pick(rng);
                    if (std::find(idx.begin(), idx.end(), cand) == idx.end())
                        idx.push_back(cand);
                }
            }
            double w = w0;
            if (opt.reduced && c.epsilon > 0.0) {
                for (int q = 0; q < c.count() && w != 0.0; ++q) {
                    if (std::find(idx.begin(), idx.end(), q) != idx.end()) continue;
                    for (int p : idx)
                        if (torus_distance(c.positions[q], c.positions[p], c.box_side) <=
                            c.epsilon) {
                            w = 0.0;
                            break;
                        }
                }
            }
            for (int p = 0; p < j; ++p) tuple[p] = c.velocities[idx[p]];
            m.add(tuple, w, block);
        }
    }
    return m;
}

/// Order-1 marginal of a plain velocity sample (e.g. a DSMC population) on
/// the same binning, for comparisons against ensemble marginals.
inline EmpiricalMarginal marginal_from_velocities(std::span<const Vec3> velocities,
                                                  const VariableSpec& var, int blocks = 50) {
    if (velocities.empty()) throw ConfigError("marginal_from_velocities: empty sample");
    EmpiricalMarginal m(1, var, blocks);
    m.set_ensemble_size(static_cast<int>(velocities.size()));
    const long R = static_cast<long>(velocities.size());
    for (long i = 0; i < R; ++i) {
        const Vec3 tuple[1] = {velocities[i]};
        m.add(tuple, 1.0, static_cast<int>(i * blocks / R));
    }
    return m;
}

// ---------------------------------------------------------------------------
// Chaos defect
// ---------------------------------------------------------------------------

struct ChaosDefect {
    double value = 0.0;
    double stderr_value = 0.0;
};

namespace detail {

inline double l1_defect(const std::vector<double>& p2, const std::vector<double>& p1) {
    const std::size_t k = p1.size();
    double s = 0.0;
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) s += std::abs(p2[a * k + b] - p1[a] * p1[b]);
    return s;
}

}  // namespace detail

/// L1 distance between the pair marginal and the product of the one-particle
/// marginal with itself, with a block-bootstrap standard error (200
/// replicates over the ensemble blocks).
inline ChaosDefect chaos_defect(const EmpiricalMarginal& f2, const EmpiricalMarginal& f1,
                                std::uint64_t bootstrap_seed = 0) {
    if (f2.order() != 2 || f1.order() != 1)
        throw ConfigError("chaos_defect needs a pair marginal and a one-particle marginal");
    if (!(f2.variable() == f1.variable()))
        throw ConfigError("chaos_defect: incompatible binning");
    ChaosDefect out;
    out.value = detail::l1_defect(f2.probabilities(), f1.probabilities());

    if (f2.blocks() != f1.blocks() || f2.ensemble_size() == 0) return out;
    const int nb = f2.blocks();
    const double r2 = f2.ensemble_size(), r1 = f1.ensemble_size();
    auto rng = make_rng(bootstrap_seed, 0xB007);
    std::uniform_int_distribution<int> pick(0, nb - 1);
    constexpr int kReps = 200;
    double mean = 0.0, m2 = 0.0;
    std::vector<double> p2(f2.weights().size()), p1(f1.weights().size());
    for (int rep = 0; rep < kReps; ++rep) {
        std::fill(p2.begin(), p2.end(), 0.0);
        std::fill(p1.begin(), p1.end(), 0.0);
        for (int b = 0; b < nb; ++b) {
            const int c = pick(rng);
            const auto& w2 = f2.block_weights()[c];
            const auto& w1 = f1.block_weights()[c];
            for (std::size_t i = 0; i < p2.size(); ++i) p2[i] += w2[i];
            for (std::size_t i = 0; i < p1.size(); ++i) p1[i] += w1[i];
        }
        for (double& x : p2) x /= r2;
        for (double& x : p1) x /= r1;
        const double d = detail::l1_defect(p2, p1);
        const double delta = d - mean;
        mean += delta / (rep + 1);
        m2 += delta * (d - mean);
    }
    out.stderr_value = std::sqrt(m2 / (kReps - 1));
    return out;
}

// ---------------------------------------------------------------------------
// Weighted norms
// ---------------------------------------------------------------------------

struct WeightedNormReport {
    int order = 1;
    double beta = 1.0;
    double value = 0.0;
    std::vector<Vec3> location;  // argmax velocities (one per particle)
};

/// sup over grid nodes of |f| (beta/2pi)^{-3j/2} exp(beta sum |v_i|^2 / 2),
/// the hard-sphere weighted norm (the potential part of the energy vanishes
/// on the admissible set).
inline WeightedNormReport weighted_norm(const boltzmann::VelocityGridFunction& f, double beta) {
    if (!(beta > 0.0)) throw ConfigError("weighted_norm: beta > 0");
    WeightedNormReport rep;
    rep.order = 1;
    rep.beta = beta;
    const int n = f.nodes_per_axis();
    const double c = std::pow(beta / (2.0 * kPi), -1.5);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const Vec3 v = f.node(i, j, k);
                const double w =
                    std::abs(f.node_value(i, j, k)) * c * std::exp(0.5 * beta * norm2(v));
                if (w > rep.value) {
                    rep.value = w;
                    rep.location = {v};
                }
            }
    return rep;
}

/// Weighted sup of an empirical marginal's cell densities (cell centers carry
/// the weight); meaningful for vector3 binning.
inline WeightedNormReport weighted_norm(const EmpiricalMarginal& f, double beta) {
    if (!(beta > 0.0)) throw ConfigError("weighted_norm: beta > 0");
    if (f.variable().kind != VariableSpec::Kind::vector3)
        throw ConfigError("weighted_norm: marginal must bin the full velocity vector");
    WeightedNormReport rep;
    rep.order = f.order();
    rep.beta = beta;
    const double c = std::pow(beta / (2.0 * kPi), -1.5 * f.order());
    const double vol = std::pow(f.variable().cell_volume(), f.order());
    const auto p = f.probabilities();
    const std::size_t k = f.variable().cells();
    for (std::size_t flat = 0; flat < p.size(); ++flat) {
        if (p[flat] == 0.0) continue;
        std::vector<Vec3> centers;
        double h = 0.0;
        std::size_t rest = flat;
        for (int q = f.order() - 1; q >= 0; --q) {
            const Vec3 vc = f.variable().center3(static_cast<long>(rest % k));
            centers.insert(centers.begin(), vc);
            h += 0.5 * norm2(vc);
            rest /= k;
        }
        const double w = (p[flat] / vol) * c * std::exp(beta * h);
        if (w > rep.value) {
            rep.value = w;
            rep.location = centers;
        }
    }
    return rep;
}

/// Sequence norm: max over the provided orders of b^{-j} ||f_j||.
inline double seq_norm(const std::vector<std::pair<int, double>>& norms_by_order, double b) {
    if (!(b > 0.0)) throw ConfigError("seq_norm: b > 0");
    double s = 0.0;
    for (const auto& [j, norm_j] : norms_by_order) s = std::max(s, std::pow(b, -j) * norm_j);
    return s;
}

// ---------------------------------------------------------------------------
// Observable pairing
// ---------------------------------------------------------------------------

/// Compactly supported velocity test function.
struct TestFunction {
    std::function<double(const Vec3&)> fn;
    Vec3 center;
    double support_radius = 1.0;
    std::string name;

    double operator()(const Vec3& v) const { return fn(v); }
};

/// Smooth bump exp(1 - 1/(1 - u^2)) on |v - center| < radius.
inline TestFunction bump_function(Vec3 center = {}, double radius = 2.0) {
    TestFunction t;
    t.center = center;
    t.support_radius = radius;
    t.name = "bump";
    t.fn = [center, radius](const Vec3& v) {
        const double u2 = norm2(v - center) / (radius * radius);
        if (u2 >= 1.0) return 0.0;
        return std::exp(1.0 - 1.0 / (1.0 - u2));
    };
    return t;
}

/// First velocity component, truncated to |v - center| < radius.
inline TestFunction truncated_component(Vec3 center = {}, double radius = 3.0,
                                        int component = 0) {
    TestFunction t;
    t.center = center;
    t.support_radius = radius;
    t.name = "truncated_v" + std::to_string(component + 1);
    t.fn = [center, radius, component](const Vec3& v) {
        return norm2(v - center) < radius * radius ? v[component] : 0.0;
    };
    return t;
}

inline TestFunction indicator_ball(Vec3 center = {}, double radius = 2.0) {
    TestFunction t;
    t.center = center;
    t.support_radius = radius;
    t.name = "indicator";
    t.fn = [center, radius](const Vec3& v) {
        return norm2(v - center) < radius * radius ? 1.0 : 0.0;
    };
    return t;
}

struct PairingResult {
    double value = 0.0;
    bool truncated = false;        // support exceeds the histogram range
    double excluded_bound = 0.0;   // sup |phi| times the mass outside the grid
};

/// Velocity integral of phi against an order-1 marginal: cell-center
/// quadrature consistent with the histogram binning.
inline PairingResult observable_pairing(const EmpiricalMarginal& f, const TestFunction& phi) {
    if (f.order() != 1 || f.variable().kind != VariableSpec::Kind::vector3)
        throw ConfigError("observable_pairing: order-1 vector3 marginal required");
    PairingResult out;
    const auto p = f.probabilities();
    double sup_phi = 0.0;
    for (std::size_t flat = 0; flat < p.size(); ++flat) {
        const Vec3 c = f.variable().center3(static_cast<long>(flat));
        const double val = phi(c);
        sup_phi = std::max(sup_phi, std::abs(val));
        out.value += val * p[flat];
    }
    for (int a = 0; a < 3; ++a) {
        if (phi.center[a] - phi.support_radius < f.variable().lo ||
            phi.center[a] + phi.support_radius > f.variable().hi)
            out.truncated = true;
    }
    if (out.truncated) out.excluded_bound = sup_phi * std::max(0.0, 1.0 - f.mass());
    return out;
}

/// Same pairing against a velocity grid function (trapezoid quadrature).
inline PairingResult observable_pairing(const boltzmann::VelocityGridFunction& f,
                                        const TestFunction& phi) {
    PairingResult out;
    const int n = f.nodes_per_axis();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                out.value += f.node_weight(i, j, k) * f.node_value(i, j, k) *
                             phi(f.node(i, j, k));
    for (int a = 0; a < 3; ++a)
        if (phi.center[a] - phi.support_radius < -f.v_max() ||
            phi.center[a] + phi.support_radius > f.v_max())
            out.truncated = true;
    return out;
}

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

inline void write_marginal_csv(std::ostream& os, const EmpiricalMarginal& f) {
    const int d = f.variable().dims() * f.order();
    os << "";
    for (int a = 0; a < d; ++a) os << "c" << (a + 1) << ',';
    os << "weight\n";
    os.precision(17);
    const auto& w = f.weights();
    const std::size_t k = f.variable().cells();
    for (std::size_t flat = 0; flat < w.size(); ++flat) {
        if (w[flat] == 0.0) continue;
        std::vector<double> coords;
        std::size_t rest = flat;
        for (int q = f.order() - 1; q >= 0; --q) {
            const long cell = static_cast<long>(rest % k);
            rest /= k;
            if (f.variable().kind == VariableSpec::Kind::vector3) {
                const Vec3 c = f.variable().center3(cell);
                coords.insert(coords.begin(), {c.x, c.y, c.z});
            } else {
                coords.insert(coords.begin(), f.variable().center(cell));
            }
        }
        for (double c : coords) os << c << ',';
        os << w[flat] << '\n';
    }
}

}  // namespace boltzgrad::marginals
