#pragma once

// Exact finite-lattice evolution of wave functions carrying per-atom
// local-entanglement indices.
//
// A particle A and N atoms live on a ring of n_sites sites. Each atom carries
// an index r in {0, 1}; the family of components psi_s is indexed by the
// N-bit string s (bit a set <=> atom a locally entangled). The particle may
// carry an internal channel label j, with channel-dependent contact coupling.
//
// Amplitude layout: index = ((channel * n_strings) + string) * n_space + config,
// where config encodes the sites of (particle, atom_0, ..., atom_{N-1}) as
// base-n_sites digits, particle first.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "collapse_lab/error.hpp"
#include "collapse_lab/rng.hpp"

namespace collapse_lab::quantum {

using Complex = std::complex<double>;
using Amplitudes = std::vector<Complex>;

inline constexpr std::size_t kDefaultDimensionCap = 20'000'000;

struct LatticeModel {
    std::size_t n_sites = 3;
    std::size_t n_atoms = 1;
    double hop_atom = 1.0;
    double hop_particle = 1.0;
    double u_strength = 1.0;
    double v_strength = 0.0;
    /// Channel j couples with u_strength * channel_scale[j]. One entry means
    /// the particle has no internal label.
    std::vector<double> channel_scale{1.0};
    bool symmetrize = false;
    std::size_t dimension_cap = kDefaultDimensionCap;

    std::size_t n_channels() const noexcept { return channel_scale.size(); }
    std::size_t n_strings() const noexcept { return std::size_t{1} << n_atoms; }
    double channel_coupling(std::size_t channel) const { return u_strength * channel_scale.at(channel); }
};

namespace detail {

inline std::optional<std::size_t> checked_mul(std::size_t a, std::size_t b, std::size_t cap) {
    if (a != 0 && b > cap / a) return std::nullopt;
    const std::size_t r = a * b;
    if (r > cap) return std::nullopt;
    return r;
}

}  // namespace detail

/// n_sites^(N+1), or nullopt past `cap`.
inline std::optional<std::size_t> spatial_dimension(std::size_t n_sites, std::size_t n_atoms,
                                                    std::size_t cap) {
    std::size_t d = 1;
    for (std::size_t b = 0; b <= n_atoms; ++b) {
        auto next = detail::checked_mul(d, n_sites, cap);
        if (!next) return std::nullopt;
        d = *next;
    }
    return d;
}

/// channels * 2^N * n_sites^(N+1), or nullopt past the model's cap.
inline std::optional<std::size_t> indexed_dimension(const LatticeModel& m) {
    if (m.n_atoms >= 63) return std::nullopt;
    auto space = spatial_dimension(m.n_sites, m.n_atoms, m.dimension_cap);
    if (!space) return std::nullopt;
    auto with_strings = detail::checked_mul(*space, m.n_strings(), m.dimension_cap);
    if (!with_strings) return std::nullopt;
    return detail::checked_mul(*with_strings, m.n_channels(), m.dimension_cap);
}

inline void validate(const LatticeModel& m) {
    if (m.n_sites < 2) throw ValidationError("lattice model: n_sites must be >= 2");
    if (m.n_atoms < 1) throw ValidationError("lattice model: n_atoms must be >= 1");
    if (m.channel_scale.empty()) throw ValidationError("lattice model: at least one channel required");
    auto finite = [](double x) { return std::isfinite(x); };
    if (!finite(m.hop_atom) || !finite(m.hop_particle))
        throw ValidationError("lattice model: hopping coefficients must be finite");
    if (!finite(m.u_strength) || !finite(m.v_strength))
        throw ValidationError("lattice model: non-finite coupling (u_strength / v_strength)");
    for (double s : m.channel_scale)
        if (!finite(s)) throw ValidationError("lattice model: non-finite channel_scale entry");
    if (!indexed_dimension(m))
        throw ValidationError("lattice model: indexed dimension exceeds cap of " +
                              std::to_string(m.dimension_cap) + " amplitudes");
}

/// Configurations of (particle, atoms) on the ring. Body 0 is the particle,
/// body a+1 is atom a.
class SpatialBasis {
public:
    SpatialBasis(std::size_t n_sites, std::size_t n_atoms) : n_sites_(n_sites), stride_(n_atoms + 2, 1) {
        for (std::size_t b = 1; b < stride_.size(); ++b) stride_[b] = stride_[b - 1] * n_sites;
    }

    std::size_t size() const noexcept { return stride_.back(); }
    std::size_t n_sites() const noexcept { return n_sites_; }
    std::size_t n_bodies() const noexcept { return stride_.size() - 1; }

    std::size_t site(std::size_t config, std::size_t body) const noexcept {
        return (config / stride_[body]) % n_sites_;
    }
    std::size_t moved(std::size_t config, std::size_t body, std::size_t to) const noexcept {
        return config - site(config, body) * stride_[body] + to * stride_[body];
    }
    std::size_t encode(std::span<const std::size_t> sites) const {
        std::size_t c = 0;
        for (std::size_t b = 0; b < sites.size(); ++b) c += sites[b] * stride_[b];
        return c;
    }

    /// Ring neighbours. A 2-site ring has a single bond.
    std::vector<std::size_t> neighbours(std::size_t s) const {
        if (n_sites_ == 2) return {1 - s};
        return {(s + 1) % n_sites_, (s + n_sites_ - 1) % n_sites_};
    }

private:
    std::size_t n_sites_;
    std::vector<std::size_t> stride_;
};

struct StateLayout {
    std::size_t n_channels = 1;
    std::size_t n_strings = 1;
    std::size_t n_space = 1;

    std::size_t size() const noexcept { return n_channels * n_strings * n_space; }
    std::size_t index(std::size_t channel, std::size_t string, std::size_t config) const noexcept {
        return (channel * n_strings + string) * n_space + config;
    }
    std::size_t channel_of(std::size_t i) const noexcept { return i / (n_strings * n_space); }
    std::size_t string_of(std::size_t i) const noexcept { return (i / n_space) % n_strings; }
    std::size_t config_of(std::size_t i) const noexcept { return i % n_space; }

    friend bool operator==(const StateLayout&, const StateLayout&) = default;
};

struct Entry {
    std::size_t row;
    std::size_t col;
    double value;
};

/// Real sparse matrix in compressed-row form, acting on complex vectors.
class SparseOperator {
public:
    SparseOperator() = default;

    /// Duplicate (row, col) entries are summed; exact zeros are dropped.
    SparseOperator(std::size_t dimension, std::vector<Entry> entries) : dim_(dimension), row_ptr_(dimension + 1, 0) {
        std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        for (std::size_t i = 0; i < entries.size();) {
            const Entry& e = entries[i];
            if (e.row >= dim_ || e.col >= dim_) throw ValidationError("sparse operator: entry out of range");
            double v = 0.0;
            std::size_t k = i;
            for (; k < entries.size() && entries[k].row == e.row && entries[k].col == e.col; ++k)
                v += entries[k].value;
            if (v != 0.0) {
                cols_.push_back(e.col);
                values_.push_back(v);
                ++row_ptr_[e.row + 1];
            }
            i = k;
        }
        std::partial_sum(row_ptr_.begin(), row_ptr_.end(), row_ptr_.begin());
    }

    std::size_t dimension() const noexcept { return dim_; }
    std::size_t non_zeros() const noexcept { return values_.size(); }

    double coefficient(std::size_t row, std::size_t col) const {
        auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row]);
        auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row + 1]);
        auto it = std::lower_bound(first, last, col);
        if (it == last || *it != col) return 0.0;
        return values_[static_cast<std::size_t>(it - cols_.begin())];
    }

    /// y = A x
    void apply(std::span<const Complex> x, std::span<Complex> y) const {
        for (std::size_t r = 0; r < dim_; ++r) {
            Complex acc{0.0, 0.0};
            for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) acc += values_[k] * x[cols_[k]];
            y[r] = acc;
        }
    }

    template <class F>
    void for_each(F&& f) const {
        for (std::size_t r = 0; r < dim_; ++r)
            for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) f(r, cols_[k], values_[k]);
    }

    std::vector<Entry> entries() const {
        std::vector<Entry> out;
        out.reserve(non_zeros());
        for_each([&](std::size_t r, std::size_t c, double v) { out.push_back({r, c, v}); });
        return out;
    }

    /// Maximum absolute row sum; bounds the spectral radius.
    double row_sum_bound() const {
        double best = 0.0;
        for (std::size_t r = 0; r < dim_; ++r) {
            double s = 0.0;
            for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += std::abs(values_[k]);
            best = std::max(best, s);
        }
        return best;
    }

private:
    std::size_t dim_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> cols_;
    std::vector<double> values_;
};

struct CouplingFlags {
    bool kinetic = false;
    bool particle_atom = false;
    bool atom_atom = false;
};

/// H' acting on the whole component family.
class IndexedGenerator {
public:
    IndexedGenerator(StateLayout layout, SparseOperator op, CouplingFlags flags)
        : layout_(layout), op_(std::move(op)), flags_(flags) {}

    const StateLayout& layout() const noexcept { return layout_; }
    const SparseOperator& op() const noexcept { return op_; }
    const CouplingFlags& flags() const noexcept { return flags_; }

    /// Copy with additional entries summed in. Used to build negative controls.
    IndexedGenerator with_extra_entries(const std::vector<Entry>& extra) const {
        auto all = op_.entries();
        all.insert(all.end(), extra.begin(), extra.end());
        return IndexedGenerator(layout_, SparseOperator(layout_.size(), std::move(all)), flags_);
    }

private:
    StateLayout layout_;
    SparseOperator op_;
    CouplingFlags flags_;
};

namespace detail {

// Shared assembly of H (indexed = false: one string, plain contact terms) and
// H' (indexed = true: contact terms dressed with the index matrices).
//
// Particle-atom contact U (S_a + P1_a): from string s the amplitude lands on
// s | bit(a), whatever s_a was.
// Atom-atom contact V (P0 P0 + P1 P1 + P1 S + S P1): equal indices stay put,
// mixed indices (1,0) or (0,1) both land on (1,1).
inline SparseOperator assemble(const LatticeModel& m, bool indexed) {
    validate(m);
    const SpatialBasis basis(m.n_sites, m.n_atoms);
    const StateLayout layout{m.n_channels(), indexed ? m.n_strings() : 1, basis.size()};
    std::vector<Entry> entries;
    const std::size_t per_col = 2 * (m.n_atoms + 1) + m.n_atoms + m.n_atoms * m.n_atoms;
    entries.reserve(layout.size() * per_col);

    for (std::size_t ch = 0; ch < layout.n_channels; ++ch) {
        const double u = m.channel_coupling(ch);
        for (std::size_t s = 0; s < layout.n_strings; ++s) {
            for (std::size_t x = 0; x < basis.size(); ++x) {
                const std::size_t col = layout.index(ch, s, x);
                for (std::size_t b = 0; b < basis.n_bodies(); ++b) {
                    const double hop = b == 0 ? m.hop_particle : m.hop_atom;
                    if (hop == 0.0) continue;
                    for (std::size_t to : basis.neighbours(basis.site(x, b)))
                        entries.push_back({layout.index(ch, s, basis.moved(x, b, to)), col, -hop});
                }
                const std::size_t particle_site = basis.site(x, 0);
                for (std::size_t a = 0; a < m.n_atoms; ++a) {
                    if (u == 0.0 || basis.site(x, a + 1) != particle_site) continue;
                    const std::size_t target = indexed ? (s | (std::size_t{1} << a)) : s;
                    entries.push_back({layout.index(ch, target, x), col, u});
                }
                if (m.v_strength == 0.0) continue;
                for (std::size_t a = 0; a < m.n_atoms; ++a) {
                    for (std::size_t c = a + 1; c < m.n_atoms; ++c) {
                        if (basis.site(x, a + 1) != basis.site(x, c + 1)) continue;
                        std::size_t target = s;
                        if (indexed && (((s >> a) ^ (s >> c)) & 1U))
                            target = s | (std::size_t{1} << a) | (std::size_t{1} << c);
                        entries.push_back({layout.index(ch, target, x), col, m.v_strength});
                    }
                }
            }
        }
    }
    return SparseOperator(layout.size(), std::move(entries));
}

}  // namespace detail

inline IndexedGenerator build_indexed_generator(const LatticeModel& m) {
    SparseOperator op = detail::assemble(m, true);
    CouplingFlags flags;
    flags.kinetic = m.hop_atom != 0.0 || m.hop_particle != 0.0;
    flags.particle_atom = std::any_of(m.channel_scale.begin(), m.channel_scale.end(),
                                      [&](double s) { return m.u_strength * s != 0.0; });
    flags.atom_atom = m.v_strength != 0.0 && m.n_atoms >= 2;
    const StateLayout layout{m.n_channels(), m.n_strings(), SpatialBasis(m.n_sites, m.n_atoms).size()};
    return IndexedGenerator(layout, std::move(op), flags);
}

/// Index-free Hamiltonian H over (channel, configuration).
inline SparseOperator build_standard_hamiltonian(const LatticeModel& m) { return detail::assemble(m, false); }

struct IndexedWaveState {
    StateLayout layout;
    Amplitudes amplitudes;
    double time = 0.0;

    std::span<const Complex> component(std::size_t channel, std::size_t string) const {
        return std::span<const Complex>(amplitudes).subspan(layout.index(channel, string, 0), layout.n_space);
    }
};

inline double norm(std::span<const Complex> v) {
    double s = 0.0;
    for (const auto& z : v) s += std::norm(z);
    return std::sqrt(s);
}

inline double distance(std::span<const Complex> a, std::span<const Complex> b) {
    if (a.size() != b.size()) throw ValidationError("distance: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a[i] - b[i]);
    return std::sqrt(s);
}

/// Family with psi_{s0} = psi0 (per channel) and every other component zero.
inline IndexedWaveState initial_indexed_state(const LatticeModel& m, std::span<const Complex> psi0) {
    const StateLayout layout{m.n_channels(), m.n_strings(), SpatialBasis(m.n_sites, m.n_atoms).size()};
    if (psi0.size() != layout.n_channels * layout.n_space)
        throw ValidationError("initial_indexed_state: expected " +
                              std::to_string(layout.n_channels * layout.n_space) + " amplitudes");
    IndexedWaveState st{layout, Amplitudes(layout.size()), 0.0};
    for (std::size_t ch = 0; ch < layout.n_channels; ++ch)
        std::copy_n(psi0.begin() + static_cast<std::ptrdiff_t>(ch * layout.n_space), layout.n_space,
                    st.amplitudes.begin() + static_cast<std::ptrdiff_t>(layout.index(ch, 0, 0)));
    return st;
}

/// Product state: particle and atoms on given sites, channel amplitudes c_j.
inline Amplitudes localized_state(const LatticeModel& m, std::size_t particle_site,
                                  std::span<const std::size_t> atom_sites,
                                  std::span<const Complex> channel_amplitudes) {
    validate(m);
    if (atom_sites.size() != m.n_atoms) throw ValidationError("localized_state: need one site per atom");
    if (channel_amplitudes.size() != m.n_channels())
        throw ValidationError("localized_state: need one amplitude per channel");
    const SpatialBasis basis(m.n_sites, m.n_atoms);
    std::vector<std::size_t> sites{particle_site};
    sites.insert(sites.end(), atom_sites.begin(), atom_sites.end());
    for (auto s : sites)
        if (s >= m.n_sites) throw ValidationError("localized_state: site out of range");
    const std::size_t x = basis.encode(sites);
    Amplitudes psi(m.n_channels() * basis.size());
    for (std::size_t ch = 0; ch < m.n_channels(); ++ch) psi[ch * basis.size() + x] = channel_amplitudes[ch];
    const double n = norm(psi);
    if (n == 0.0) throw ValidationError("localized_state: zero channel amplitudes");
    for (auto& z : psi) z /= n;
    return psi;
}

/// Normalized state with i.i.d. complex Gaussian amplitudes.
inline Amplitudes random_state(const LatticeModel& m, std::uint64_t seed) {
    validate(m);
    const std::size_t dim = m.n_channels() * SpatialBasis(m.n_sites, m.n_atoms).size();
    Rng rng = make_rng(seed);
    std::normal_distribution<double> gauss;
    Amplitudes psi(dim);
    for (auto& z : psi) z = {gauss(rng), gauss(rng)};
    const double n = norm(psi);
    for (auto& z : psi) z /= n;
    return psi;
}

/// Bose-symmetrizes the atom coordinates of a channel-by-configuration
/// vector and renormalizes it.
inline Amplitudes symmetrize_atoms(const LatticeModel& m, std::span<const Complex> psi) {
    const SpatialBasis basis(m.n_sites, m.n_atoms);
    if (psi.size() != m.n_channels() * basis.size()) throw ValidationError("symmetrize_atoms: size mismatch");
    std::vector<std::size_t> perm(m.n_atoms);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Amplitudes out(psi.size());
    std::vector<std::size_t> sites(m.n_atoms + 1);
    do {
        for (std::size_t x = 0; x < basis.size(); ++x) {
            sites[0] = basis.site(x, 0);
            for (std::size_t a = 0; a < m.n_atoms; ++a) sites[a + 1] = basis.site(x, perm[a] + 1);
            const std::size_t y = basis.encode(sites);
            for (std::size_t ch = 0; ch < m.n_channels(); ++ch)
                out[ch * basis.size() + y] += psi[ch * basis.size() + x];
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    const double n = norm(out);
    if (n == 0.0) throw ValidationError("symmetrize_atoms: state vanishes under symmetrization");
    for (auto& z : out) z /= n;
    return out;
}

/// Largest |psi_s(x) - psi_s(x with atoms a, b swapped)| over strings s and
/// atom pairs carrying equal indices in s.
inline double exchange_symmetry_defect(const LatticeModel& m, const IndexedWaveState& st) {
    const SpatialBasis basis(m.n_sites, m.n_atoms);
    double worst = 0.0;
    for (std::size_t ch = 0; ch < st.layout.n_channels; ++ch)
        for (std::size_t s = 0; s < st.layout.n_strings; ++s)
            for (std::size_t a = 0; a < m.n_atoms; ++a)
                for (std::size_t b = a + 1; b < m.n_atoms; ++b) {
                    if (((s >> a) & 1U) != ((s >> b) & 1U)) continue;
                    for (std::size_t x = 0; x < basis.size(); ++x) {
                        const std::size_t sa = basis.site(x, a + 1), sb = basis.site(x, b + 1);
                        const std::size_t y = basis.moved(basis.moved(x, a + 1, sb), b + 1, sa);
                        worst = std::max(worst, std::abs(st.amplitudes[st.layout.index(ch, s, x)] -
                                                         st.amplitudes[st.layout.index(ch, s, y)]));
                    }
                }
    return worst;
}

struct IntegrationStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
};

/// Integrates i dpsi/dt = A psi over `duration` with the Dormand-Prince 5(4)
/// embedded pair. A step of size h is accepted when the embedded error
/// estimate is at most tol * h (local error per unit time).
inline IntegrationStats integrate(const SparseOperator& op, Amplitudes& psi, double duration, double tol) {
    if (!(tol > 0.0)) throw ValidationError("integrate: tolerance must be > 0");
    if (!(duration >= 0.0) || !std::isfinite(duration)) throw ValidationError("integrate: invalid duration");
    if (psi.size() != op.dimension()) throw ValidationError("integrate: state / operator size mismatch");
    IntegrationStats stats;
    if (duration == 0.0) return stats;

    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;

    const std::size_t n = psi.size();
    const Complex minus_i{0.0, -1.0};
    auto rhs = [&](const Amplitudes& y, Amplitudes& out) {
        op.apply(y, out);
        for (auto& z : out) z *= minus_i;
    };

    Amplitudes k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), next(n);
    rhs(psi, k1);
    const double scale = std::max(op.row_sum_bound(), 1e-3);
    double h = std::min(duration, 0.05 / scale);
    double t = 0.0;
    while (t < duration) {
        const bool last = t + h >= duration;
        if (last) h = duration - t;
        auto stage = [&](Amplitudes& out, std::initializer_list<std::pair<double, const Amplitudes*>> terms) {
            for (std::size_t i = 0; i < n; ++i) {
                Complex acc = psi[i];
                for (const auto& [c, k] : terms) acc += h * c * (*k)[i];
                tmp[i] = acc;
            }
            rhs(tmp, out);
        };
        stage(k2, {{a21, &k1}});
        stage(k3, {{a31, &k1}, {a32, &k2}});
        stage(k4, {{a41, &k1}, {a42, &k2}, {a43, &k3}});
        stage(k5, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}});
        stage(k6, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}});
        for (std::size_t i = 0; i < n; ++i)
            next[i] = psi[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        rhs(next, k7);
        double err2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Complex e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            err2 += std::norm(e);
        }
        const double err = std::sqrt(err2);
        if (!std::isfinite(err)) throw RuntimeError("integrate: non-finite amplitude");
        const double allowed = tol * h;
        if (err <= allowed) {
            t = last ? duration : t + h;
            psi.swap(next);
            k1.swap(k7);
            ++stats.accepted;
        } else {
            ++stats.rejected;
        }
        const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(allowed / err, 0.25), 0.2, 5.0);
        h *= factor;
        if (t < duration && h < 1e-13 * std::max(1.0, duration))
            throw RuntimeError("integrate: step-size underflow");
    }
    return stats;
}

/// Evolves the component family under H' up to absolute time t_final.
inline IndexedWaveState evolve_indexed(IndexedWaveState state, const IndexedGenerator& gen, double t_final,
                                       double tol = 1e-9) {
    if (!(state.layout == gen.layout())) throw ValidationError("evolve_indexed: layout mismatch");
    if (!(t_final >= state.time)) throw ValidationError("evolve_indexed: t_final precedes state time");
    integrate(gen.op(), state.amplitudes, t_final - state.time, tol);
    state.time = t_final;
    return state;
}

/// Standard evolution under the index-free Hamiltonian from time 0.
inline Amplitudes evolve_standard(Amplitudes psi0, const LatticeModel& m, double t_final, double tol = 1e-9) {
    integrate(build_standard_hamiltonian(m), psi0, t_final, tol);
    return psi0;
}

/// psi'' = sum_s psi_s, per channel (channel-major).
inline Amplitudes string_sum(const IndexedWaveState& st) {
    const auto& L = st.layout;
    Amplitudes out(L.n_channels * L.n_space);
    for (std::size_t ch = 0; ch < L.n_channels; ++ch)
        for (std::size_t s = 0; s < L.n_strings; ++s) {
            auto comp = st.component(ch, s);
            for (std::size_t x = 0; x < L.n_space; ++x) out[ch * L.n_space + x] += comp[x];
        }
    return out;
}

struct CellFractions {
    bool defined = false;
    double f1 = std::numeric_limits<double>::quiet_NaN();  ///< sum_j p_j f_j
    double f0 = std::numeric_limits<double>::quiet_NaN();  ///< from index-0 counts
    std::vector<double> f_channel;                         ///< f_j; NaN where channel j has no weight
    double expected_entangled = 0.0;                       ///< <N_1,cell>
    double expected_atoms = 0.0;                           ///< <N_cell>
};

struct FractionReport {
    std::vector<CellFractions> cells;
    CellFractions global;
    std::vector<double> channel_probs;  ///< p_j = |psi''_j|^2 / |psi''|^2
    double sum_norm_sq = 0.0;           ///< |psi''|^2
};

/// Local entanglement probabilities per cell of sites.
///
/// Component weights are |psi_{j,s}(x)|^2 / |psi''|^2. Within channel j,
/// f_j(cell) is the weighted count of index-1 atoms in the cell over the
/// weighted count of all atoms in the cell; f0(cell) is accumulated from the
/// index-0 counts. An empty cell (no sites or no weight) is reported with
/// defined = false.
inline FractionReport entanglement_fractions(const LatticeModel& m, const IndexedWaveState& st,
                                             const std::vector<std::vector<std::size_t>>& cells) {
    const SpatialBasis basis(m.n_sites, m.n_atoms);
    const auto& L = st.layout;
    if (L.n_space != basis.size() || L.n_strings != m.n_strings() || L.n_channels != m.n_channels())
        throw ValidationError("entanglement_fractions: state does not match model");
    std::vector<std::size_t> cell_of(m.n_sites, cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c)
        for (std::size_t site : cells[c]) {
            if (site >= m.n_sites) throw ValidationError("entanglement_fractions: site out of range");
            if (cell_of[site] != cells.size())
                throw ValidationError("entanglement_fractions: site " + std::to_string(site) + " in two cells");
            cell_of[site] = c;
        }
    for (std::size_t s = 0; s < m.n_sites; ++s)
        if (cell_of[s] == cells.size())
            throw ValidationError("entanglement_fractions: site " + std::to_string(s) + " not covered");

    FractionReport rep;
    const Amplitudes sum = string_sum(st);
    rep.sum_norm_sq = std::pow(norm(sum), 2);
    if (rep.sum_norm_sq == 0.0) throw RuntimeError("entanglement_fractions: string sum vanishes");
    rep.channel_probs.assign(L.n_channels, 0.0);
    for (std::size_t ch = 0; ch < L.n_channels; ++ch)
        rep.channel_probs[ch] =
            std::pow(norm(std::span<const Complex>(sum).subspan(ch * L.n_space, L.n_space)), 2) / rep.sum_norm_sq;

    const std::size_t n_cells = cells.size();
    // [channel][cell] weighted counts; the extra cell slot is the global total.
    std::vector<std::vector<double>> one(L.n_channels, std::vector<double>(n_cells + 1));
    auto zero = one, all = one;
    for (std::size_t ch = 0; ch < L.n_channels; ++ch)
        for (std::size_t s = 0; s < L.n_strings; ++s) {
            auto comp = st.component(ch, s);
            for (std::size_t x = 0; x < L.n_space; ++x) {
                const double w = std::norm(comp[x]) / rep.sum_norm_sq;
                if (w == 0.0) continue;
                for (std::size_t a = 0; a < m.n_atoms; ++a) {
                    const std::size_t c = cell_of[basis.site(x, a + 1)];
                    auto& bucket = ((s >> a) & 1U) ? one : zero;
                    bucket[ch][c] += w;
                    bucket[ch][n_cells] += w;
                    all[ch][c] += w;
                    all[ch][n_cells] += w;
                }
            }
        }

    auto summarize = [&](std::size_t c) {
        CellFractions f;
        f.f_channel.assign(L.n_channels, std::numeric_limits<double>::quiet_NaN());
        double f1 = 0.0, f0 = 0.0, weight = 0.0;
        for (std::size_t ch = 0; ch < L.n_channels; ++ch) {
            f.expected_entangled += one[ch][c];
            f.expected_atoms += all[ch][c];
            if (all[ch][c] <= 0.0) continue;
            f.f_channel[ch] = one[ch][c] / all[ch][c];
            f1 += rep.channel_probs[ch] * f.f_channel[ch];
            f0 += rep.channel_probs[ch] * (zero[ch][c] / all[ch][c]);
            weight += rep.channel_probs[ch];
        }
        if (weight > 0.0) {
            f.defined = true;
            f.f1 = f1 / weight;
            f.f0 = f0 / weight;
        }
        return f;
    };
    for (std::size_t c = 0; c < n_cells; ++c) rep.cells.push_back(summarize(c));
    rep.global = summarize(n_cells);
    return rep;
}

/// Every site in its own cell.
inline std::vector<std::vector<std::size_t>> site_cells(std::size_t n_sites) {
    std::vector<std::vector<std::size_t>> cells(n_sites);
    for (std::size_t s = 0; s < n_sites; ++s) cells[s] = {s};
    return cells;
}

struct FlowReport {
    bool directed = true;
    std::size_t violations = 0;
    std::optional<Entry> first_violation;
};

/// True iff every nonzero coupling from string s lands on a superset s' of s,
/// within the same channel.
inline FlowReport check_directed_flow(const IndexedGenerator& gen) {
    FlowReport rep;
    const auto& L = gen.layout();
    gen.op().for_each([&](std::size_t r, std::size_t c, double v) {
        const std::size_t to = L.string_of(r), from = L.string_of(c);
        if (L.channel_of(r) == L.channel_of(c) && (to & from) == from) return;
        rep.directed = false;
        if (rep.violations++ == 0) rep.first_violation = Entry{r, c, v};
    });
    return rep;
}

struct AdjointWitness {
    std::size_t phi_index;  ///< phi = e_phi
    std::size_t psi_index;  ///< psi = e_psi
    Complex lhs;            ///< <phi|H' psi>
    Complex rhs;            ///< conj(<psi|H' phi>)
    double gap() const { return std::abs(lhs - rhs); }
};

/// A basis-vector pair exhibiting <phi|H'psi> != conj(<psi|H'phi>), if any
/// pair differs by more than `threshold`.
inline std::optional<AdjointWitness> find_adjoint_witness(const IndexedGenerator& gen, double threshold = 1e-12) {
    std::optional<AdjointWitness> found;
    const auto& op = gen.op();
    op.for_each([&](std::size_t r, std::size_t c, double v) {
        if (found) return;
        const double transposed = op.coefficient(c, r);
        if (std::abs(v - transposed) > threshold) found = AdjointWitness{r, c, Complex{v, 0.0}, Complex{transposed, 0.0}};
    });
    return found;
}

/// <phi|A psi> - conj(<psi|A phi>) for arbitrary vectors.
inline Complex adjoint_gap(const SparseOperator& op, std::span<const Complex> phi, std::span<const Complex> psi) {
    Amplitudes a_psi(op.dimension()), a_phi(op.dimension());
    op.apply(psi, a_psi);
    op.apply(phi, a_phi);
    Complex lhs{0.0, 0.0}, rhs{0.0, 0.0};
    for (std::size_t i = 0; i < op.dimension(); ++i) {
        lhs += std::conj(phi[i]) * a_psi[i];
        rhs += std::conj(psi[i]) * a_phi[i];
    }
    return lhs - std::conj(rhs);
}

}  // namespace collapse_lab::quantum
