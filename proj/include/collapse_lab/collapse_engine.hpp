#pragma once

// Integer-count slip dynamics between measurement channels, covariance
// checks, Born-rule Monte Carlo, the two-channel Fokker-Planck reference and
// the collapse timescale.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "collapse_lab/error.hpp"
#include "collapse_lab/rng.hpp"

namespace collapse_lab::collapse {

using Count = std::int64_t;

// -------------------------------------------------------------------- channels

struct ChannelSpec {
    std::vector<std::complex<double>> amplitudes;

    static ChannelSpec from_probabilities(const std::vector<double>& p) {
        ChannelSpec c;
        for (double x : p) c.amplitudes.emplace_back(std::sqrt(std::max(0.0, x)), 0.0);
        return c;
    }
    std::vector<double> probabilities() const {
        std::vector<double> p;
        for (auto a : amplitudes) p.push_back(std::norm(a));
        return p;
    }
};

inline void validate(const ChannelSpec& c) {
    if (c.amplitudes.size() < 2) throw ValidationError("at least two channels are required");
    double s = 0.0;
    for (auto a : c.amplitudes) {
        if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) throw ValidationError("channel amplitudes must be finite");
        s += std::norm(a);
    }
    if (std::abs(s - 1.0) > 1e-12) throw ValidationError("channel probabilities sum to " + std::to_string(s) + ", not 1");
}

// ----------------------------------------------------------------------- cells

struct CollapseParams {
    /// Incoherence probability, in (0, 4/(3 pi)].
    double W = 0.4;
    double tau = 1.0;
    double n_a = 1.0;
    double lambda = 1.0;
    double dt = 0.01;
    double t_max = 1e4;
};

inline void validate(const CollapseParams& p) {
    std::string msg;
    constexpr double w_max = 4.0 / (3.0 * 3.14159265358979323846);
    if (!(p.W > 0.0 && p.W <= w_max + 1e-15)) msg += "\n  W must lie in (0, 4/(3 pi)]";
    if (!(p.tau > 0.0 && std::isfinite(p.tau))) msg += "\n  tau must be positive";
    if (!(p.n_a > 0.0 && std::isfinite(p.n_a))) msg += "\n  n_a must be positive";
    if (!(p.lambda > 0.0 && std::isfinite(p.lambda))) msg += "\n  lambda must be positive";
    if (!(p.dt > 0.0 && p.dt <= 0.1 * p.tau)) msg += "\n  dt must lie in (0, tau/10]";
    if (!(p.t_max > 0.0)) msg += "\n  t_max must be positive";
    if (!msg.empty()) throw ValidationError("invalid collapse parameters:" + msg);
}

/// One spatial cell: quadrature weights are atoms per node (n_a dV), f[j][node]
/// the local-entanglement probability of channel j, counts[j] the entangled atoms
/// currently attributed to channel j.
struct Cell {
    std::size_t id = 0;
    Count n_atoms = 0;
    std::vector<double> weights;
    std::vector<std::vector<double>> f;
    std::vector<Count> counts;

    Count entangled() const { return std::accumulate(counts.begin(), counts.end(), Count{0}); }
};

struct CellEnsemble {
    std::vector<Cell> cells;
    CollapseParams params;

    std::size_t n_channels() const { return cells.empty() ? 0 : cells.front().counts.size(); }
    std::vector<Count> global_counts() const {
        std::vector<Count> g(n_channels(), 0);
        for (const auto& c : cells)
            for (std::size_t j = 0; j < g.size(); ++j) g[j] += c.counts[j];
        return g;
    }
    std::vector<double> global_p() const {
        const auto g = global_counts();
        const auto total = static_cast<double>(std::accumulate(g.begin(), g.end(), Count{0}));
        std::vector<double> p(g.size(), 0.0);
        if (total > 0)
            for (std::size_t j = 0; j < g.size(); ++j) p[j] = static_cast<double>(g[j]) / total;
        return p;
    }
};

inline void validate(const CellEnsemble& e) {
    validate(e.params);
    if (e.cells.empty()) throw ValidationError("ensemble has no cells");
    const std::size_t J = e.n_channels();
    if (J < 2) throw ValidationError("ensemble needs at least two channels");
    for (const auto& c : e.cells) {
        const std::string where = "cell " + std::to_string(c.id) + ": ";
        if (c.counts.size() != J || c.f.size() != J) throw ValidationError(where + "channel count mismatch");
        if (c.n_atoms <= 0) throw ValidationError(where + "n_atoms must be positive");
        for (Count k : c.counts)
            if (k < 0) throw ValidationError(where + "negative count");
        if (c.entangled() > c.n_atoms) throw ValidationError(where + "more entangled atoms than atoms");
        for (const auto& fj : c.f) {
            if (fj.size() != c.weights.size()) throw ValidationError(where + "profile and weights differ in length");
            for (double v : fj)
                if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(where + "f_j outside [0, 1]");
        }
        for (double w : c.weights)
            if (!(w >= 0.0 && std::isfinite(w))) throw ValidationError(where + "negative quadrature weight");
    }
    for (std::size_t a = 0; a < e.cells.size(); ++a)
        for (std::size_t b = a + 1; b < e.cells.size(); ++b)
            if (e.cells[a].id == e.cells[b].id) throw ValidationError("duplicate cell id " + std::to_string(e.cells[a].id));
}

/// Largest-remainder split of total into parts proportional to p.
inline std::vector<Count> apportion(Count total, const std::vector<double>& p) {
    std::vector<Count> out(p.size(), 0);
    std::vector<std::pair<double, std::size_t>> rem;
    Count used = 0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double exact = p[j] * static_cast<double>(total);
        out[j] = static_cast<Count>(std::floor(exact + 1e-9));
        used += out[j];
        rem.emplace_back(exact - static_cast<double>(out[j]), j);
    }
    std::stable_sort(rem.begin(), rem.end(), [](auto a, auto b) { return a.first > b.first; });
    for (std::size_t k = 0; used < total && k < rem.size(); ++k, ++used) ++out[rem[k].second];
    return out;
}

/// f0 = 1 - sum_k p_k f_k at node i.
inline double local_f0(const Cell& c, const std::vector<double>& p, std::size_t i) {
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) s += p[k] * c.f[k][i];
    return std::clamp(1.0 - s, 0.0, 1.0);
}

/// n_a * integral over the cell of f_j f0.
inline double overlap(const Cell& c, std::size_t j, const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.weights.size(); ++i) s += c.weights[i] * c.f[j][i] * local_f0(c, p, i);
    return s;
}

/// Cells with one node each, constant f for every channel; entangled atoms
/// round(n_atoms * f) split across channels by p.
inline CellEnsemble uniform_ensemble(const std::vector<double>& p, std::size_t n_cells, Count atoms_per_cell, double f,
                                     const CollapseParams& params) {
    CellEnsemble e;
    e.params = params;
    for (std::size_t b = 0; b < n_cells; ++b) {
        Cell c;
        c.id = b;
        c.n_atoms = atoms_per_cell;
        c.weights = {static_cast<double>(atoms_per_cell)};
        c.f.assign(p.size(), std::vector<double>{f});
        c.counts = apportion(static_cast<Count>(std::llround(static_cast<double>(atoms_per_cell) * f)), p);
        e.cells.push_back(std::move(c));
    }
    validate(e);
    return e;
}

/// Radial shell profile f(r) = f_peak on [r_in, r_out] and 0 elsewhere,
/// sampled on nodes of a sphere of the given radius, one cell per radial band.
inline CellEnsemble shell_ensemble(const std::vector<double>& p, std::size_t n_cells, double radius, double r_in, double r_out,
                                   double f_peak, std::size_t nodes_per_cell, const CollapseParams& params) {
    CellEnsemble e;
    e.params = params;
    const double dr = radius / static_cast<double>(n_cells * nodes_per_cell);
    for (std::size_t b = 0; b < n_cells; ++b) {
        Cell c;
        c.id = b;
        c.f.assign(p.size(), {});
        double atoms = 0.0, entangled = 0.0;
        for (std::size_t k = 0; k < nodes_per_cell; ++k) {
            const double r = (static_cast<double>(b * nodes_per_cell + k) + 0.5) * dr;
            const double w = params.n_a * 4.0 * 3.14159265358979323846 * r * r * dr;
            const double fv = (r >= r_in && r <= r_out) ? f_peak : 0.0;
            c.weights.push_back(w);
            for (auto& fj : c.f) fj.push_back(fv);
            atoms += w;
            entangled += w * fv;
        }
        c.n_atoms = std::max<Count>(1, static_cast<Count>(std::llround(atoms)));
        c.counts = apportion(static_cast<Count>(std::llround(entangled)), p);
        e.cells.push_back(std::move(c));
    }
    validate(e);
    return e;
}

// -------------------------------------------------------------- slip identity

/// Expected count changes for a slip toward channel j. The gain is the
/// negated floating-point sum of the losses (in index order, skipping j), so
/// conservation_residual is exactly zero.
inline std::vector<double> slip_transfer(std::size_t j, const std::vector<double>& p, double f_j, double f0, double W,
                                         double dt, double tau) {
    if (j >= p.size()) throw ValidationError("slip channel out of range");
    const double scale = W * p[j] * f_j * f0 * (dt / (2.0 * tau));
    std::vector<double> dn(p.size(), 0.0);
    double lost = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (k == j) continue;
        dn[k] = -scale * p[k];
        lost += dn[k];
    }
    dn[j] = -lost;
    return dn;
}

/// Losses summed in index order, then the gain added.
inline double conservation_residual(const std::vector<double>& dn, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < dn.size(); ++k)
        if (k != j) s += dn[k];
    return s + dn[j];
}

// ------------------------------------------------------------------ cell step

struct Slip {
    std::size_t cell = 0;
    std::size_t from = 0;
    std::size_t to = 0;
};

namespace detail {

struct PairRate {
    std::size_t j;
    std::size_t partner;
    double rate;
};

/// Slip populations per ordered (j, partner): mean W p_j p_partner A_j dt / (2 tau).
/// Each slip is a rho+ event (partner -> j) or a rho- event (j -> partner) with
/// equal probability.
inline void pair_rates(const Cell& c, const std::vector<double>& p, const CollapseParams& prm, std::vector<PairRate>& out) {
    out.clear();
    const double k = prm.W * prm.dt / (2.0 * prm.tau);
    for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[j] <= 0.0) continue;
        const double a = overlap(c, j, p);
        if (a <= 0.0) continue;
        for (std::size_t q = 0; q < p.size(); ++q)
            if (q != j && p[q] > 0.0) out.push_back({j, q, k * p[j] * p[q] * a});
    }
}

}  // namespace detail

/// Draws this step's slips for one cell from its own substream.
inline void draw_slips(const Cell& c, const std::vector<double>& p, const CollapseParams& prm, Rng& rng, std::vector<Slip>& out,
                       std::vector<detail::PairRate>& scratch) {
    detail::pair_rates(c, p, prm, scratch);
    double total = 0.0;
    for (const auto& r : scratch) total += r.rate;
    if (total <= 0.0) return;
    const int k = std::poisson_distribution<int>(total)(rng);
    std::uniform_real_distribution<double> u(0.0, total);
    for (int e = 0; e < k; ++e) {
        double x = u(rng);
        std::size_t pick = 0;
        while (pick + 1 < scratch.size() && x >= scratch[pick].rate) x -= scratch[pick++].rate;
        const auto& r = scratch[pick];
        const bool plus = (rng() >> 63) != 0;
        out.push_back(plus ? Slip{c.id, r.partner, r.j} : Slip{c.id, r.j, r.partner});
    }
}

struct CellStepResult {
    std::vector<Count> delta;
    std::size_t slips = 0;
    std::size_t discarded = 0;
};

/// Draws and applies one step of slips to a single cell. A slip out of an
/// empty channel is discarded.
inline CellStepResult cell_step(Cell& c, const std::vector<double>& p, const CollapseParams& prm, Rng& rng) {
    std::vector<Slip> slips;
    std::vector<detail::PairRate> scratch;
    draw_slips(c, p, prm, rng, slips, scratch);
    CellStepResult r;
    r.delta.assign(c.counts.size(), 0);
    for (const auto& s : slips) {
        if (c.counts[s.from] == 0) {
            ++r.discarded;
            continue;
        }
        --c.counts[s.from];
        ++c.counts[s.to];
        --r.delta[s.from];
        ++r.delta[s.to];
        ++r.slips;
    }
    return r;
}

// -------------------------------------------------------------------- runs

struct Checkpoint {
    double time = 0.0;
    std::vector<double> p;
};

struct CollapseRunResult {
    std::vector<Checkpoint> trajectory;
    /// Channel holding every count at the end, or nullopt on timeout.
    std::optional<std::size_t> outcome;
    double collapse_time = 0.0;
    std::size_t slip_count = 0;
    /// Slips whose source channel was empty in the whole ensemble.
    std::size_t discarded = 0;
    /// Slips served by another cell because the source cell was empty.
    std::size_t borrowed = 0;
    std::uint64_t seed = 0;
    std::uint64_t trial = 0;
    std::vector<Count> final_counts;
};

namespace detail {

inline std::optional<std::size_t> sole_channel(const std::vector<Count>& g) {
    std::optional<std::size_t> live;
    for (std::size_t j = 0; j < g.size(); ++j) {
        if (g[j] == 0) continue;
        if (live) return std::nullopt;
        live = j;
    }
    return live;
}

}  // namespace detail

/// Steps every cell until one channel holds all counts or t_max is reached.
/// Cell b of trial k draws from substream (master_seed, k, b). Slips are applied
/// in cell order; a slip from a channel that is empty in its own cell is served
/// by the first cell (by position) that still holds that channel, and is
/// discarded only when the channel is extinct.
inline CollapseRunResult run_collapse(CellEnsemble e, std::uint64_t master_seed, std::uint64_t trial = 0,
                                      const std::vector<double>& checkpoints = {}) {
    validate(e);
    const auto& prm = e.params;
    CollapseRunResult res;
    res.seed = master_seed;
    res.trial = trial;
    std::vector<Rng> rngs;
    rngs.reserve(e.cells.size());
    for (const auto& c : e.cells) rngs.emplace_back(substream_seed(master_seed, trial, c.id));
    std::vector<Count> g = e.global_counts();
    const auto total = static_cast<double>(std::accumulate(g.begin(), g.end(), Count{0}));
    if (total == 0) throw ValidationError("ensemble holds no entangled atoms");
    std::vector<double> p(g.size());
    auto refresh = [&] {
        for (std::size_t j = 0; j < g.size(); ++j) p[j] = static_cast<double>(g[j]) / total;
    };
    refresh();
    std::size_t next_cp = 0;
    auto record = [&](double t, bool flush) {
        while (next_cp < checkpoints.size() && (flush || checkpoints[next_cp] <= t + 1e-9 * prm.dt))
            res.trajectory.push_back({checkpoints[next_cp++], p});
    };
    std::vector<Slip> slips;
    std::vector<detail::PairRate> scratch;
    std::uint64_t step = 0;
    double t = 0.0;
    record(t, false);
    while (true) {
        if (auto k = detail::sole_channel(g)) {
            res.outcome = k;
            break;
        }
        if (t >= prm.t_max - 1e-9 * prm.dt) break;
        for (std::size_t b = 0; b < e.cells.size(); ++b) {
            slips.clear();
            draw_slips(e.cells[b], p, prm, rngs[b], slips, scratch);
            for (const auto& s : slips) {
                Cell* src = &e.cells[b];
                if (src->counts[s.from] == 0) {
                    src = nullptr;
                    for (auto& c : e.cells)
                        if (c.counts[s.from] > 0) {
                            src = &c;
                            break;
                        }
                    if (!src) {
                        ++res.discarded;
                        continue;
                    }
                    ++res.borrowed;
                }
                --src->counts[s.from];
                ++src->counts[s.to];
                --g[s.from];
                ++g[s.to];
                ++res.slip_count;
            }
        }
        ++step;
        t = static_cast<double>(step) * prm.dt;
        refresh();
        record(t, false);
    }
    res.collapse_time = t;
    record(t, true);
    res.final_counts = g;
    return res;
}

// ----------------------------------------------------------------- covariance

struct CovarianceReport {
    std::size_t samples = 0;
    std::vector<std::vector<double>> empirical;
    std::vector<std::vector<double>> analytic;
    std::vector<double> empirical_row_sums;
    std::vector<double> analytic_row_sums;
    std::vector<double> c_coefficients;
    std::vector<double> p;
};

/// C_j = sum over cells of A_j / N^2.
inline std::vector<double> correlation_coefficients(const CellEnsemble& e, const std::vector<double>& p) {
    std::vector<double> c(p.size(), 0.0);
    for (const auto& cell : e.cells) {
        const double n2 = static_cast<double>(cell.n_atoms) * static_cast<double>(cell.n_atoms);
        for (std::size_t j = 0; j < p.size(); ++j) c[j] += overlap(cell, j, p) / n2;
    }
    return c;
}

/// Analytic <dp_j dp_j'> per step: p_j(1-p_j) W C_j dt/tau on the diagonal,
/// -p_j p_j' W (C_j + C_j') dt/tau off it.
inline std::vector<std::vector<double>> analytic_covariance(const CellEnsemble& e, const std::vector<double>& p) {
    const auto c = correlation_coefficients(e, p);
    const double k = e.params.W * e.params.dt / e.params.tau;
    std::vector<std::vector<double>> m(p.size(), std::vector<double>(p.size()));
    for (std::size_t a = 0; a < p.size(); ++a)
        for (std::size_t b = 0; b < p.size(); ++b)
            m[a][b] = a == b ? p[a] * (1.0 - p[a]) * k * c[a] : -p[a] * p[b] * k * (c[a] + c[b]);
    return m;
}

/// Repeats one step from the fixed ensemble state. Each sample gives
/// dp_j = sum over cells of dN_j / N_cell; sample s of cell b uses substream (seed, s, b).
inline CovarianceReport aggregate_covariance(const CellEnsemble& e, std::size_t samples, std::uint64_t seed) {
    validate(e);
    if (samples < 2) throw ValidationError("covariance needs at least two samples");
    const std::size_t J = e.n_channels();
    const auto p = e.global_p();
    std::vector<double> mean(J, 0.0);
    std::vector<std::vector<double>> second(J, std::vector<double>(J, 0.0));
    std::vector<double> dp(J);
    for (std::size_t s = 0; s < samples; ++s) {
        std::fill(dp.begin(), dp.end(), 0.0);
        for (const auto& cell : e.cells) {
            Cell copy = cell;
            Rng rng(substream_seed(seed, s, cell.id));
            const auto r = cell_step(copy, p, e.params, rng);
            for (std::size_t j = 0; j < J; ++j) dp[j] += static_cast<double>(r.delta[j]) / static_cast<double>(cell.n_atoms);
        }
        for (std::size_t a = 0; a < J; ++a) {
            mean[a] += dp[a];
            for (std::size_t b = 0; b < J; ++b) second[a][b] += dp[a] * dp[b];
        }
    }
    CovarianceReport rep;
    rep.samples = samples;
    rep.p = p;
    const auto n = static_cast<double>(samples);
    rep.empirical.assign(J, std::vector<double>(J));
    for (std::size_t a = 0; a < J; ++a)
        for (std::size_t b = 0; b < J; ++b) rep.empirical[a][b] = (second[a][b] - mean[a] * mean[b] / n) / (n - 1.0);
    rep.analytic = analytic_covariance(e, p);
    rep.c_coefficients = correlation_coefficients(e, p);
    for (std::size_t a = 0; a < J; ++a) {
        rep.empirical_row_sums.push_back(std::accumulate(rep.empirical[a].begin(), rep.empirical[a].end(), 0.0));
        rep.analytic_row_sums.push_back(std::accumulate(rep.analytic[a].begin(), rep.analytic[a].end(), 0.0));
    }
    return rep;
}

/// Diffusion scale kappa of the global two-channel probability, a(p) = kappa p (1 - p),
/// for profiles with equal f_j: kappa = W sum_b A_b / (2 tau E^2), E the entangled total.
inline double global_kappa(const CellEnsemble& e) {
    const auto p = e.global_p();
    const auto g = e.global_counts();
    const auto total = static_cast<double>(std::accumulate(g.begin(), g.end(), Count{0}));
    double a = 0.0;
    for (const auto& c : e.cells) a += overlap(c, 0, p);
    return e.params.W * a / (2.0 * e.params.tau * total * total);
}

// ------------------------------------------------------------ Born ensembles

struct BinomialBand {
    Count lo = 0;
    Count hi = 0;
};

/// Central exact-binomial band with tail probability `tail` on each side
/// (0.00135 matches a 3 sigma normal band).
inline BinomialBand binomial_band(Count n, double p, double tail = 0.00135) {
    if (p <= 0.0) return {0, 0};
    if (p >= 1.0) return {n, n};
    const double lp = std::log(p), lq = std::log1p(-p);
    const double lgn = std::lgamma(static_cast<double>(n) + 1.0);
    std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
    for (Count k = 0; k <= n; ++k) {
        const auto kd = static_cast<double>(k);
        pmf[static_cast<std::size_t>(k)] =
            std::exp(lgn - std::lgamma(kd + 1.0) - std::lgamma(static_cast<double>(n - k) + 1.0) + kd * lp + static_cast<double>(n - k) * lq);
    }
    BinomialBand b{0, n};
    double acc = 0.0;
    for (Count k = 0; k <= n; ++k) {
        if (acc + pmf[static_cast<std::size_t>(k)] > tail) {
            b.lo = k;
            break;
        }
        acc += pmf[static_cast<std::size_t>(k)];
    }
    acc = 0.0;
    for (Count k = n; k >= 0; --k) {
        if (acc + pmf[static_cast<std::size_t>(k)] > tail) {
            b.hi = k;
            break;
        }
        acc += pmf[static_cast<std::size_t>(k)];
    }
    return b;
}

struct EnsembleSummary {
    std::size_t trials = 0;
    std::vector<Count> outcomes;
    std::size_t timeouts = 0;
    std::vector<double> checkpoint_times;
    /// mean[c][j] and standard error of p_j at checkpoint c.
    std::vector<std::vector<double>> mean;
    std::vector<std::vector<double>> standard_error;
    std::vector<CollapseRunResult> runs;
};

/// Runs trials 0..trials-1 of the ensemble. Per-run results are kept when keep_runs is set.
inline EnsembleSummary run_ensemble(const CellEnsemble& e, std::size_t trials, std::uint64_t seed,
                                    const std::vector<double>& checkpoints = {}, bool keep_runs = false) {
    EnsembleSummary s;
    s.trials = trials;
    s.outcomes.assign(e.n_channels(), 0);
    s.checkpoint_times = checkpoints;
    const std::size_t J = e.n_channels();
    std::vector<std::vector<double>> sum(checkpoints.size(), std::vector<double>(J, 0.0)), sq = sum;
    for (std::size_t k = 0; k < trials; ++k) {
        auto r = run_collapse(e, seed, k, checkpoints);
        if (r.outcome) ++s.outcomes[*r.outcome];
        else ++s.timeouts;
        for (std::size_t c = 0; c < checkpoints.size(); ++c)
            for (std::size_t j = 0; j < J; ++j) {
                sum[c][j] += r.trajectory[c].p[j];
                sq[c][j] += r.trajectory[c].p[j] * r.trajectory[c].p[j];
            }
        if (keep_runs) s.runs.push_back(std::move(r));
    }
    const auto n = static_cast<double>(trials);
    s.mean = sum;
    s.standard_error = sum;
    for (std::size_t c = 0; c < checkpoints.size(); ++c)
        for (std::size_t j = 0; j < J; ++j) {
            const double m = sum[c][j] / n;
            const double var = trials > 1 ? std::max(0.0, (sq[c][j] - n * m * m) / (n - 1.0)) : 0.0;
            s.mean[c][j] = m;
            s.standard_error[c][j] = std::sqrt(var / n);
        }
    return s;
}

struct BornResult {
    EnsembleSummary summary;
    std::vector<double> targets;
    std::vector<double> frequencies;
    std::vector<BinomialBand> bands;
    std::vector<bool> pass;
    bool all_pass = false;
};

inline BornResult born_rule_experiment(const CellEnsemble& e, const ChannelSpec& spec, std::size_t trials, std::uint64_t seed,
                                       const std::vector<double>& checkpoints = {}) {
    validate(spec);
    if (trials < 100) throw ValidationError("Born experiment needs at least 100 trials");
    if (spec.amplitudes.size() != e.n_channels()) throw ValidationError("channel spec does not match the ensemble");
    BornResult r;
    r.summary = run_ensemble(e, trials, seed, checkpoints);
    r.targets = spec.probabilities();
    r.all_pass = r.summary.timeouts == 0;
    for (std::size_t j = 0; j < r.targets.size(); ++j) {
        const Count k = r.summary.outcomes[j];
        r.frequencies.push_back(static_cast<double>(k) / static_cast<double>(trials));
        r.bands.push_back(binomial_band(static_cast<Count>(trials), r.targets[j]));
        const bool ok = k >= r.bands.back().lo && k <= r.bands.back().hi;
        r.pass.push_back(ok);
        r.all_pass = r.all_pass && ok;
    }
    return r;
}

// ------------------------------------------------------------ Fokker-Planck

struct FokkerPlanckConfig {
    double p0 = 0.3;
    double kappa = 1.0;
    std::size_t intervals = 400;
    double t_final = 10.0;
    /// Standard deviation of the initial Gaussian bump.
    double bump_width = 0.02;
    /// Non-positive means 0.9 of the explicit limit 2 h^2 / kappa.
    double dt = 0.0;
    /// Cadence of the absorbed-mass history; non-positive disables it.
    double record_interval = 0.0;
};

struct FokkerPlanckSample {
    double time;
    double absorbed_left;
    double absorbed_right;
    double interior;
};

struct FokkerPlanckResult {
    std::vector<double> p;
    std::vector<double> phi;
    double absorbed_left = 0.0;
    double absorbed_right = 0.0;
    double interior_mass = 0.0;
    double initial_mass = 0.0;
    double initial_mean = 0.0;
    double time = 0.0;
    double dt = 0.0;
    std::vector<FokkerPlanckSample> history;
};

/// dPhi/dt = d^2[a(p) Phi]/dp^2 with a = kappa p (1 - p) and Phi = 0 at both ends.
/// With g = a Phi the interior update is a second difference of g, and the
/// absorbed fluxes are g_1/h (left) and g_{M-1}/h (right), so mass is
/// conserved to rounding.
inline FokkerPlanckResult fokker_planck_2ch(const FokkerPlanckConfig& c) {
    if (!(c.p0 > 0.0 && c.p0 < 1.0)) throw ValidationError("p0 must lie in (0, 1)");
    if (!(c.kappa > 0.0 && std::isfinite(c.kappa))) throw ValidationError("kappa must be positive");
    if (c.intervals < 8) throw ValidationError("grid needs at least 8 intervals");
    if (!(c.t_final >= 0.0)) throw ValidationError("t_final must be non-negative");
    if (!(c.bump_width > 0.0)) throw ValidationError("bump_width must be positive");
    const std::size_t M = c.intervals;
    const double h = 1.0 / static_cast<double>(M);
    const double limit = 2.0 * h * h / c.kappa;
    if (c.dt > limit * (1.0 + 1e-12)) throw ValidationError("dt violates the explicit limit 2 h^2 / kappa");
    const double dt_max = c.dt > 0.0 ? c.dt : 0.9 * limit;
    FokkerPlanckResult r;
    r.p.resize(M + 1);
    r.phi.assign(M + 1, 0.0);
    std::vector<double> a(M + 1), g(M + 1, 0.0);
    for (std::size_t i = 0; i <= M; ++i) {
        r.p[i] = static_cast<double>(i) * h;
        a[i] = c.kappa * r.p[i] * (1.0 - r.p[i]);
    }
    double mass = 0.0, first = 0.0;
    for (std::size_t i = 1; i < M; ++i) {
        const double z = (r.p[i] - c.p0) / c.bump_width;
        r.phi[i] = std::exp(-0.5 * z * z);
        mass += r.phi[i] * h;
    }
    for (std::size_t i = 1; i < M; ++i) {
        r.phi[i] /= mass;
        first += r.p[i] * r.phi[i] * h;
    }
    r.initial_mass = 1.0;
    r.initial_mean = first;
    const auto n_steps = c.t_final > 0.0 ? static_cast<std::size_t>(std::ceil(c.t_final / dt_max - 1e-9)) : 0;
    const double dt = n_steps > 0 ? c.t_final / static_cast<double>(n_steps) : dt_max;
    r.dt = dt;
    const std::size_t rec_every =
        c.record_interval > 0.0 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(c.record_interval / dt))) : 0;
    auto interior = [&] {
        double s = 0.0;
        for (std::size_t i = 1; i < M; ++i) s += r.phi[i] * h;
        return s;
    };
    if (rec_every) r.history.push_back({0.0, 0.0, 0.0, interior()});
    const double k = dt / (h * h);
    for (std::size_t n = 1; n <= n_steps; ++n) {
        for (std::size_t i = 1; i < M; ++i) g[i] = a[i] * r.phi[i];
        r.absorbed_left += dt * g[1] / h;
        r.absorbed_right += dt * g[M - 1] / h;
        for (std::size_t i = 1; i < M; ++i) r.phi[i] += k * (g[i + 1] - 2.0 * g[i] + g[i - 1]);
        r.time = n == n_steps ? c.t_final : static_cast<double>(n) * dt;
        if (rec_every && (n % rec_every == 0 || n == n_steps))
            r.history.push_back({r.time, r.absorbed_left, r.absorbed_right, interior()});
    }
    r.interior_mass = interior();
    return r;
}

// ------------------------------------------------------------------ timescale

/// tau L^2 / (n_a lambda^5 W), cgs units.
inline double collapse_timescale(double tau, double L, double n_a, double lambda, double W) {
    for (double v : {tau, L, n_a, lambda, W})
        if (!(v > 0.0 && std::isfinite(v))) throw ValidationError("timescale inputs must be positive and finite");
    return tau * L * L / (n_a * std::pow(lambda, 5) * W);
}

/// The value quoted in the text for tau = 1e-10 s, L = 1 cm, n_a = 1e20 cm^-3, lambda = 1e-5 cm, W = 0.1.
inline constexpr double kQuotedTimescale = 1e-14;

}  // namespace collapse_lab::collapse
