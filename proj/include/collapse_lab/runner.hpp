#pragma once

// Executes a validated scenario: runs the module, writes CSV/SVG artifacts
// atomically, and returns a manifest with a key-metric summary.

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "collapse_lab/collapse_engine.hpp"
#include "collapse_lab/front_solver.hpp"
#include "collapse_lab/incoherence.hpp"
#include "collapse_lab/io/atomic_file.hpp"
#include "collapse_lab/io/csv.hpp"
#include "collapse_lab/io/svg.hpp"
#include "collapse_lab/quantum_lattice.hpp"
#include "collapse_lab/scenario.hpp"

#ifndef COLLAPSE_LAB_VERSION
#define COLLAPSE_LAB_VERSION "0.0.0"
#endif

namespace collapse_lab::runner {

namespace fs = std::filesystem;
using scenario::json;
using scenario::Kind;
using scenario::ScenarioConfig;

inline constexpr const char* kToolVersion = COLLAPSE_LAB_VERSION;

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

struct OutputFile {
    std::string file;
    std::size_t rows = 0;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    std::string name;
    std::string kind;
    std::string config_hash;
    std::string tool_version = kToolVersion;
    std::uint64_t seed = 0;
    std::string output_dir;
    std::vector<OutputFile> outputs;
    double duration_s = 0.0;
    std::vector<std::string> warnings;
    json summary = json::object();
    json config;

    json to_json() const {
        json files = json::array();
        for (const auto& o : outputs) files.push_back({{"file", o.file}, {"rows", o.rows}, {"bytes", o.bytes}});
        return {{"name", name},          {"kind", kind},         {"config_hash", config_hash},
                {"tool_version", tool_version}, {"seed", seed}, {"output_dir", output_dir},
                {"outputs", files},      {"duration_s", duration_s}, {"warnings", warnings},
                {"summary", summary},    {"config", config}};
    }
};

/// Collects artifacts of one run under its output directory.
class Artifacts {
public:
    explicit Artifacts(fs::path dir) : dir_(std::move(dir)) {}

    void csv(const std::string& file, const io::CsvTable& t) { write(file, t.str(), t.row_count()); }
    void text(const std::string& file, const std::string& content) {
        std::size_t lines = 0;
        for (char c : content) lines += c == '\n';
        write(file, content, lines);
    }
    const std::vector<OutputFile>& outputs() const { return outputs_; }
    const fs::path& dir() const { return dir_; }

private:
    void write(const std::string& file, const std::string& content, std::size_t rows) {
        io::write_atomic(dir_ / file, content);
        outputs_.push_back({file, rows, content.size()});
    }
    fs::path dir_;
    std::vector<OutputFile> outputs_;
};

namespace detail {

inline json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::string opt_cell(const std::optional<double>& v) { return v ? io::format_number(*v) : std::string(); }

// --------------------------------------------------------------------- exact

inline quantum::Amplitudes initial_amplitudes(const ScenarioConfig& c) {
    const auto& s = c.exact;
    const auto& m = s.model;
    quantum::Amplitudes psi;
    if (s.initial == "random") {
        psi = quantum::random_state(m, substream_seed(c.master_seed, 0));
    } else {
        std::vector<std::size_t> atoms = s.atom_sites;
        if (atoms.empty())
            for (std::size_t a = 0; a < m.n_atoms; ++a) atoms.push_back((a + 1) % m.n_sites);
        std::vector<quantum::Complex> amps(m.n_channels(), quantum::Complex{1.0, 0.0});
        for (std::size_t j = 0; j < s.channel_amplitudes.size(); ++j) amps[j] = s.channel_amplitudes[j];
        psi = quantum::localized_state(m, s.particle_site, atoms, amps);
    }
    if (m.symmetrize) psi = quantum::symmetrize_atoms(m, psi);
    return psi;
}

inline quantum::LatticeModel random_model(std::uint64_t seed, std::uint64_t k) {
    Rng rng = make_rng(seed, 1, k);
    std::uniform_int_distribution<int> sites(2, 4), atoms(1, 3), zero(0, 3);
    std::uniform_real_distribution<double> coupling(-2.0, 2.0), hop(0.2, 2.0);
    quantum::LatticeModel m;
    m.n_sites = static_cast<std::size_t>(sites(rng));
    m.n_atoms = static_cast<std::size_t>(atoms(rng));
    m.hop_atom = hop(rng);
    m.hop_particle = hop(rng);
    m.u_strength = zero(rng) == 0 ? 0.0 : coupling(rng);
    m.v_strength = zero(rng) == 0 ? 0.0 : coupling(rng);
    return m;
}

inline void run_exact(const ScenarioConfig& c, Artifacts& out, RunManifest& man) {
    const auto& s = c.exact;
    const auto& m = s.model;
    const auto gen = quantum::build_indexed_generator(m);
    const auto psi0 = initial_amplitudes(c);
    auto indexed = quantum::initial_indexed_state(m, psi0);
    auto standard = psi0;
    const auto h = quantum::build_standard_hamiltonian(m);
    std::vector<double> times = c.checkpoints.empty() ? std::vector<double>{s.t_final} : c.checkpoints;

    io::CsvTable table({"time", "distance", "norm_string_sum", "norm_standard", "f1", "f0"});
    double worst = 0.0, t_prev = 0.0;
    for (double t : times) {
        indexed = quantum::evolve_indexed(std::move(indexed), gen, t, s.tol);
        quantum::integrate(h, standard, t - t_prev, s.tol);
        t_prev = t;
        const auto sum = quantum::string_sum(indexed);
        const double d = quantum::distance(sum, standard);
        worst = std::max(worst, d);
        const auto fr = quantum::entanglement_fractions(m, indexed, quantum::site_cells(m.n_sites));
        table.row() << t << d << quantum::norm(sum) << quantum::norm(standard) << fr.global.f1 << fr.global.f0;
    }
    out.csv("checkpoints.csv", table);

    const auto final_fr = quantum::entanglement_fractions(m, indexed, quantum::site_cells(m.n_sites));
    io::CsvTable cells({"site", "f1", "f0", "expected_entangled", "expected_atoms"});
    for (std::size_t i = 0; i < final_fr.cells.size(); ++i) {
        const auto& f = final_fr.cells[i];
        cells.row() << i << f.f1 << f.f0 << f.expected_entangled << f.expected_atoms;
    }
    out.csv("fractions.csv", cells);

    const auto flow = quantum::check_directed_flow(gen);
    const auto witness = quantum::find_adjoint_witness(gen);
    json summary{{"max_distance", worst},
                 {"checkpoints", times.size()},
                 {"dimension", indexed.amplitudes.size()},
                 {"directed_flow", flow.directed},
                 {"self_adjoint", !witness.has_value()}};
    if (m.symmetrize) summary["exchange_symmetry_defect"] = quantum::exchange_symmetry_defect(m, indexed);

    if (s.random_models > 0) {
        io::CsvTable models({"model", "n_sites", "n_atoms", "u", "v", "directed", "violations", "witness", "expected_witness"});
        bool all_directed = true, witness_when_u = true, rule_holds = true;
        for (std::size_t k = 0; k < s.random_models; ++k) {
            const auto rm = random_model(c.master_seed, k);
            const auto g = quantum::build_indexed_generator(rm);
            const auto fl = quantum::check_directed_flow(g);
            const bool w = quantum::find_adjoint_witness(g).has_value();
            const bool expected = rm.u_strength != 0.0 || (rm.v_strength != 0.0 && rm.n_atoms >= 2);
            all_directed = all_directed && fl.directed;
            if (rm.u_strength != 0.0) witness_when_u = witness_when_u && w;
            rule_holds = rule_holds && (w == expected);
            models.row() << k << rm.n_sites << rm.n_atoms << rm.u_strength << rm.v_strength << fl.directed << fl.violations
                         << w << expected;
        }
        out.csv("flow_models.csv", models);
        summary["random_models"] = s.random_models;
        summary["all_directed"] = all_directed;
        summary["witness_whenever_u"] = witness_when_u;
        summary["witness_rule_holds"] = rule_holds;
    }
    man.summary = summary;
}

// --------------------------------------------------------------------- front

inline void write_front_outputs(const ScenarioConfig& c, const front::Trajectory& traj, Artifacts& out, bool all_snapshots) {
    const auto& s = c.front;
    io::CsvTable track({"time", "position"});
    for (const auto& p : traj.front) track.row() << p.time << opt_cell(p.position);
    out.csv("front_track.csv", track);

    const std::size_t J = n_channels(s.config);
    std::vector<std::string> header{"time", "x", "f1", "f0"};
    if (J > 1)
        for (std::size_t j = 0; j < J; ++j) header.push_back("f_" + std::to_string(j));
    io::CsvTable prof(header);
    const std::size_t first = all_snapshots ? 0 : traj.snapshots.size() - 1;
    for (std::size_t k = first; k < traj.snapshots.size(); ++k) {
        const auto& w = traj.snapshots[k];
        for (std::size_t i = 0; i < w.size(); i += s.profile_stride) {
            prof.row() << w.time << w.x(i) << w.f1(i) << w.f0(i);
            if (J > 1)
                for (std::size_t j = 0; j < J; ++j) prof << w.values[j][i];
        }
    }
    out.csv("profiles.csv", prof);

    std::vector<io::Series> series;
    const std::size_t n = traj.snapshots.size();
    const std::size_t shown = std::min<std::size_t>(6, n);
    for (std::size_t k = 0; k < shown; ++k) {
        const auto& w = traj.snapshots[shown == 1 ? n - 1 : k * (n - 1) / (shown - 1)];
        io::Series ser;
        char label[48];
        std::snprintf(label, sizeof label, "t = %.4g", w.time);
        ser.label = label;
        for (std::size_t i = 0; i < w.size(); i += s.profile_stride) {
            ser.x.push_back(w.x(i));
            ser.y.push_back(w.f1(i));
        }
        series.push_back(std::move(ser));
    }
    out.text("profiles.svg", io::svg_plot({"Local entanglement profile f1(x, t)", "x", "f1"}, series));
}

inline json front_summary(const ScenarioConfig& c, const front::Trajectory& traj) {
    const auto& s = c.front;
    const auto& cfg = s.config;
    const double D = front::effective_diffusion(cfg);
    const auto& last = traj.final_field();
    json sm{{"diffusion", D},
            {"dt", traj.dt},
            {"steps", traj.steps},
            {"final_time", last.time},
            {"final_front", opt(front::front_position(last, cfg.threshold))},
            {"pulled_speed", front::pulled_speed(D, cfg.tau)},
            {"claimed_speed", front::sound_speed_claim(cfg.lambda, cfg.tau)}};
    try {
        const auto fit = s.fit_window.size() == 2 ? front::front_speed(traj.front, s.fit_window[0], s.fit_window[1])
                                                  : front::front_speed(traj);
        sm["speed"] = fit.speed;
        sm["speed_standard_error"] = fit.standard_error;
        sm["speed_points"] = fit.points;
        sm["speed_over_pulled"] = fit.speed / front::pulled_speed(D, cfg.tau);
        sm["speed_over_claimed"] = fit.speed / front::sound_speed_claim(cfg.lambda, cfg.tau);
    } catch (const RuntimeError& e) {
        sm["speed"] = nullptr;
        sm["speed_error"] = e.what();
    }
    json behind = json::array();
    for (double d : s.behind_distances)
        behind.push_back({{"distance_lambda", d}, {"f1", opt(front::f1_behind_front(last, d * cfg.lambda, cfg.threshold))}});
    sm["f1_behind_front"] = behind;
    const auto dist = front::distance_to_level(last, s.level, cfg.threshold);
    sm["level"] = s.level;
    sm["distance_to_level_lambda"] = dist ? json(*dist / cfg.lambda) : json(nullptr);
    sm["mass"] = front::mass(last);
    return sm;
}

inline void run_front(const ScenarioConfig& c, Artifacts& out, RunManifest& man) {
    const auto traj = front::run(c.front.config);
    man.warnings.insert(man.warnings.end(), traj.warnings.begin(), traj.warnings.end());
    write_front_outputs(c, traj, out, true);
    man.summary = front_summary(c, traj);
}

// -------------------------------------------------------------------- wigner

inline void run_wigner(const ScenarioConfig& c, Artifacts& out, RunManifest& man) {
    namespace inc = incoherence;
    const auto& s = c.wigner;
    const bool wigner = s.ensemble == "wigner";
    io::CsvTable samples = wigner ? io::CsvTable({"sample", "seed", "w_plus", "w_minus", "gap", "ks"})
                                  : io::CsvTable({"sample", "seed", "w_plus", "w_minus", "gap", "mean", "variance",
                                                  "variance_over_p2", "variance_over_mean"});
    double sum = 0.0, sq = 0.0, max_gap = 0.0, pooled_var = 0.0;
    std::vector<double> first_eig;
    double first_ks = 0.0;
    for (std::size_t k = 0; k < s.samples; ++k) {
        const std::uint64_t seed = substream_seed(c.master_seed, k);
        const auto smp = wigner ? inc::sample_wigner(s.n, seed, s.real_symmetric) : inc::sample_exponential_spectrum(s.n, seed);
        const auto ws = inc::weigh_sample(smp, s.traceless);
        const double gap = std::abs(ws.w_plus - ws.w_minus);
        max_gap = std::max(max_gap, gap);
        sum += ws.w_plus;
        sq += ws.w_plus * ws.w_plus;
        samples.row() << k << seed << ws.w_plus << ws.w_minus << gap;
        if (wigner) {
            samples << ws.ks;
            if (k == 0) first_ks = ws.ks;
        } else {
            const auto st = inc::spectrum_stats(inc::eigenvalues(smp.entries), s.n);
            pooled_var += st.variance_over_p2;
            samples << st.mean << st.variance << st.variance_over_p2 << st.variance_over_mean;
        }
        if (k == 0) first_eig = inc::eigenvalues(s.traceless ? inc::traceless(smp.entries) : smp.entries);
    }
    out.csv("samples.csv", samples);

    const auto n = static_cast<double>(s.samples);
    const double mean = sum / n;
    const double se = s.samples > 1 ? std::sqrt(std::max(0.0, (sq - n * mean * mean) / (n - 1.0)) / n) : 0.0;
    json sm{{"n", s.n},
            {"samples", s.samples},
            {"ensemble", s.ensemble},
            {"mean_w_plus", mean},
            {"standard_error", se},
            {"max_gap", max_gap},
            {"target", inc::kSemicircleWeight},
            {"relative_error", std::abs(mean - inc::kSemicircleWeight) / inc::kSemicircleWeight}};

    if (wigner) {
        sm["ks_first_sample"] = first_ks;
        io::CsvTable hist({"bin_center", "empirical_density", "semicircle_density"});
        std::vector<double> counts(s.histogram_bins, 0.0);
        const double lo = -2.2, hi = 2.2, width = (hi - lo) / static_cast<double>(s.histogram_bins);
        for (double e : first_eig) {
            const auto b = static_cast<long>(std::floor((e - lo) / width));
            if (b >= 0 && b < static_cast<long>(counts.size())) counts[static_cast<std::size_t>(b)] += 1.0;
        }
        io::Series emp{"sample 0", {}, {}}, law{"semicircle", {}, {}};
        for (std::size_t b = 0; b < counts.size(); ++b) {
            const double x = lo + (static_cast<double>(b) + 0.5) * width;
            const double dens = counts[b] / (static_cast<double>(first_eig.size()) * width);
            hist.row() << x << dens << inc::semicircle_density(x);
            emp.x.push_back(x);
            emp.y.push_back(dens);
            law.x.push_back(x);
            law.y.push_back(inc::semicircle_density(x));
        }
        out.csv("spectrum_histogram.csv", hist);
        out.text("spectrum.svg", io::svg_plot({"Spectral density", "eigenvalue", "density"}, {emp, law}));
    } else {
        sm["pooled_variance_over_p2"] = pooled_var / n;
    }
    man.summary = sm;
}

// ------------------------------------------------------------------ collapse

inline std::vector<std::string> channel_columns(const std::string& prefix, std::size_t J) {
    std::vector<std::string> cols;
    for (std::size_t j = 0; j < J; ++j) cols.push_back(prefix + std::to_string(j));
    return cols;
}

inline json identity_check(std::size_t draws, std::uint64_t seed, Artifacts& out) {
    Rng rng = make_rng(seed, 2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> channels(2, 8);
    std::size_t nonzero = 0;
    double worst = 0.0;
    for (std::size_t k = 0; k < draws; ++k) {
        const std::size_t J = channels(rng);
        std::vector<double> p(J);
        double s = 0.0;
        for (double& x : p) s += (x = u(rng));
        for (double& x : p) x /= s;
        const std::size_t j = std::uniform_int_distribution<std::size_t>(0, J - 1)(rng);
        const double fj = u(rng), f0 = u(rng), W = incoherence::kSemicircleWeight * u(rng), dt = 0.1 * u(rng);
        const double r = collapse::conservation_residual(collapse::slip_transfer(j, p, fj, f0, W, dt, 1.0), j);
        if (r != 0.0) ++nonzero;
        worst = std::max(worst, std::abs(r));
    }
    io::CsvTable t({"draws", "nonzero_residuals", "max_abs_residual"});
    t.row() << draws << nonzero << worst;
    out.csv("slip_identity.csv", t);
    return {{"draws", draws}, {"nonzero_residuals", nonzero}, {"max_abs_residual", worst}};
}

inline json covariance_check(const collapse::CellEnsemble& e, std::size_t samples, std::uint64_t seed, Artifacts& out) {
    const auto rep = collapse::aggregate_covariance(e, samples, substream_seed(seed, 1));
    const std::size_t J = rep.p.size();
    io::CsvTable t({"a", "b", "empirical", "analytic", "ratio"});
    json ratios = json::array();
    for (std::size_t a = 0; a < J; ++a)
        for (std::size_t b = 0; b < J; ++b) {
            const double an = rep.analytic[a][b], em = rep.empirical[a][b];
            const double ratio = an != 0.0 ? em / an : std::numeric_limits<double>::quiet_NaN();
            t.row() << a << b << em << an << ratio;
            if (a == b) ratios.push_back(an != 0.0 ? json(ratio) : json(nullptr));
        }
    out.csv("covariance.csv", t);
    io::CsvTable rows({"channel", "empirical_row_sum", "analytic_row_sum", "analytic_row_sum_over_variance"});
    json gaps = json::array();
    for (std::size_t a = 0; a < J; ++a) {
        const double rel = rep.analytic[a][a] != 0.0 ? rep.analytic_row_sums[a] / rep.analytic[a][a]
                                                     : std::numeric_limits<double>::quiet_NaN();
        rows.row() << a << rep.empirical_row_sums[a] << rep.analytic_row_sums[a] << rel;
        gaps.push_back(rep.analytic_row_sums[a]);
    }
    out.csv("covariance_row_sums.csv", rows);
    return {{"samples", samples}, {"variance_ratio", ratios}, {"analytic_row_sums", gaps},
            {"empirical_row_sums", rep.empirical_row_sums}};
}

inline json ensemble_runs(const collapse::CellEnsemble& e, std::size_t trials, std::size_t trace_runs,
                          const ScenarioConfig& c, Artifacts& out) {
    const std::size_t J = e.n_channels();
    const auto p0 = e.global_p();
    const auto sum = collapse::run_ensemble(e, trials, c.master_seed, c.checkpoints, true);

    io::CsvTable runs({"trial", "outcome", "collapse_time", "slips", "discarded", "borrowed"});
    double time_sum = 0.0;
    std::size_t discarded = 0, borrowed = 0;
    for (const auto& r : sum.runs) {
        runs.row() << r.trial << (r.outcome ? std::to_string(*r.outcome) : std::string("timeout")) << r.collapse_time
                   << r.slip_count << r.discarded << r.borrowed;
        time_sum += r.collapse_time;
        discarded += r.discarded;
        borrowed += r.borrowed;
    }
    out.csv("runs.csv", runs);

    json summary{{"trials", trials}, {"timeouts", sum.timeouts}, {"discarded_slips", discarded}, {"borrowed_slips", borrowed},
                 {"mean_collapse_time", trials ? time_sum / static_cast<double>(trials) : 0.0}};
    json outcomes = json::array(), freq = json::array();
    for (std::size_t j = 0; j < J; ++j) {
        outcomes.push_back(sum.outcomes[j]);
        freq.push_back(trials ? static_cast<double>(sum.outcomes[j]) / static_cast<double>(trials) : 0.0);
    }
    summary["initial_p"] = p0;
    summary["outcomes"] = outcomes;
    summary["frequencies"] = freq;

    if (!c.checkpoints.empty()) {
        std::vector<std::string> cols{"time"};
        for (auto& s : channel_columns("mean_p", J)) cols.push_back(s);
        for (auto& s : channel_columns("se_p", J)) cols.push_back(s);
        for (auto& s : channel_columns("z_p", J)) cols.push_back(s);
        io::CsvTable mean(cols);
        double max_z = 0.0;
        for (std::size_t k = 0; k < c.checkpoints.size(); ++k) {
            mean.row() << c.checkpoints[k];
            for (std::size_t j = 0; j < J; ++j) mean << sum.mean[k][j];
            for (std::size_t j = 0; j < J; ++j) mean << sum.standard_error[k][j];
            for (std::size_t j = 0; j < J; ++j) {
                const double se = sum.standard_error[k][j];
                const double z = se > 0.0 ? (sum.mean[k][j] - p0[j]) / se : 0.0;
                mean << z;
                max_z = std::max(max_z, std::abs(z));
            }
        }
        out.csv("martingale.csv", mean);
        summary["max_abs_z"] = max_z;

        std::vector<std::string> tcols{"trial", "time"};
        for (auto& s : channel_columns("p", J)) tcols.push_back(s);
        io::CsvTable traces(tcols);
        std::vector<io::Series> series;
        for (std::size_t k = 0; k < std::min(trace_runs, sum.runs.size()); ++k) {
            io::Series ser{"trial " + std::to_string(k), {}, {}};
            for (const auto& cp : sum.runs[k].trajectory) {
                traces.row() << k << cp.time;
                for (double v : cp.p) traces << v;
                ser.x.push_back(cp.time);
                ser.y.push_back(cp.p[0]);
            }
            series.push_back(std::move(ser));
        }
        out.csv("traces.csv", traces);
        out.text("traces.svg", io::svg_plot({"Channel-0 probability p_0(t)", "time", "p_0"}, series));
    }
    return summary;
}

inline void run_collapse_kind(const ScenarioConfig& c, Artifacts& out, RunManifest& man) {
    const auto e = scenario::build_ensemble(c.ensemble);
    json sm = json::object();
    sm["kappa"] = collapse::global_kappa(e);
    if (c.collapse.identity_draws > 0) sm["slip_identity"] = identity_check(c.collapse.identity_draws, c.master_seed, out);
    if (c.collapse.covariance_samples > 0)
        sm["covariance"] = covariance_check(e, c.collapse.covariance_samples, c.master_seed, out);
    if (c.collapse.trials > 0) sm["monte_carlo"] = ensemble_runs(e, c.collapse.trials, c.collapse.trace_runs, c, out);
    man.summary = sm;
}

inline void run_born(const ScenarioConfig& c, Artifacts& out, RunManifest& man) {
    const auto e = scenario::build_ensemble(c.ensemble);
    const auto r = collapse::born_rule_experiment(e, c.ensemble.spec(), c.born.trials, c.master_seed, c.checkpoints);
    io::CsvTable t({"channel", "target", "count", "frequency", "band_lo", "band_hi", "within_band"});
    json chans = json::array();
    for (std::size_t j = 0; j < r.targets.size(); ++j) {
        t.row() << j << r.targets[j] << r.summary.outcomes[j] << r.frequencies[j] << r.bands[j].lo << r.bands[j].hi
                << static_cast<bool>(r.pass[j]);
        chans.push_back({{"target", r.targets[j]},
                         {"count", r.summary.outcomes[j]},
                         {"frequency", r.frequencies[j]},
                         {"band", {r.bands[j].lo, r.bands[j].hi}},
                         {"within_band", static_cast<bool>(r.pass[j])}});
    }
    out.csv("born.csv", t);
    man.summary = {{"trials", c.born.trials}, {"timeouts", r.summary.timeouts}, {"channels", chans}, {"all_within_band", r.all_pass}};
}

// ------------------------------------------------------------- fokker-planck

inline void run_fokker_planck(const ScenarioConfig& c, Artifacts& out, RunManifest& man) {
    const auto& s = c.fokker_planck;
    const auto r = collapse::fokker_planck_2ch(s.config);
    io::CsvTable dens({"p", "phi"});
    for (std::size_t i = 0; i < r.p.size(); ++i) dens.row() << r.p[i] << r.phi[i];
    out.csv("density.csv", dens);
    io::CsvTable hist({"time", "absorbed_left", "absorbed_right", "interior"});
    io::Series right{"absorbed at p = 1", {}, {}}, left{"absorbed at p = 0", {}, {}};
    for (const auto& h : r.history) {
        hist.row() << h.time << h.absorbed_left << h.absorbed_right << h.interior;
        right.x.push_back(h.time);
        right.y.push_back(h.absorbed_right);
        left.x.push_back(h.time);
        left.y.push_back(h.absorbed_left);
    }
    out.csv("absorption.csv", hist);
    if (!r.history.empty()) out.text("absorption.svg", io::svg_plot({"Absorbed probability", "time", "mass"}, {right, left}));
    json sm{{"p0", s.config.p0},
            {"initial_mean", r.initial_mean},
            {"absorbed_left", r.absorbed_left},
            {"absorbed_right", r.absorbed_right},
            {"interior_mass", r.interior_mass},
            {"mass_error", std::abs(r.absorbed_left + r.absorbed_right + r.interior_mass - r.initial_mass)},
            {"dt", r.dt}};
    if (s.monte_carlo_trials > 0) {
        const auto e = scenario::build_ensemble(c.ensemble);
        const auto ens = collapse::run_ensemble(e, s.monte_carlo_trials, c.master_seed);
        const double freq = static_cast<double>(ens.outcomes[0]) / static_cast<double>(s.monte_carlo_trials);
        const double se = std::sqrt(freq * (1.0 - freq) / static_cast<double>(s.monte_carlo_trials));
        io::CsvTable mc({"trials", "channel0_wins", "timeouts", "frequency", "standard_error", "fp_absorbed_right", "difference"});
        mc.row() << s.monte_carlo_trials << ens.outcomes[0] << ens.timeouts << freq << se << r.absorbed_right
                 << freq - r.absorbed_right;
        out.csv("monte_carlo.csv", mc);
        sm["monte_carlo"] = {{"trials", s.monte_carlo_trials},
                             {"initial_p", e.global_p()[0]},
                             {"frequency", freq},
                             {"standard_error", se},
                             {"timeouts", ens.timeouts},
                             {"relative_difference", std::abs(freq - r.absorbed_right) / r.absorbed_right}};
    }
    man.summary = sm;
}

// ----------------------------------------------------------------- timescale

inline void run_timescale(const ScenarioConfig& c, Artifacts& out, RunManifest& man) {
    const auto& s = c.timescale;
    const double value = collapse::collapse_timescale(s.tau, s.L, s.n_a, s.lambda, s.W);
    io::CsvTable t({"quantity", "value"});
    t.row() << "formula_seconds" << value;
    t.row() << "quoted_seconds" << collapse::kQuotedTimescale;
    t.row() << "formula_over_quoted" << value / collapse::kQuotedTimescale;
    out.csv("timescale.csv", t);
    man.summary = {{"formula_seconds", value},
                   {"quoted_seconds", collapse::kQuotedTimescale},
                   {"formula_over_quoted", value / collapse::kQuotedTimescale},
                   {"discrepancy_flagged", std::abs(std::log10(value / collapse::kQuotedTimescale)) > 1.0}};
    if (std::abs(std::log10(value / collapse::kQuotedTimescale)) > 1.0)
        man.warnings.push_back("formula value " + io::format_number(value) + " s differs from the quoted 1e-14 s");
}

// ------------------------------------------------------------- full pipeline

/// Cells from a radial field: n_cells contiguous bands of grid nodes with
/// atoms per node n_a times the node's volume element.
inline collapse::CellEnsemble ensemble_from_field(const front::WaveField& w, const std::vector<double>& p, std::size_t n_cells,
                                                  const collapse::CollapseParams& params) {
    const int dim = front::dimension(w.geometry);
    const double surface = dim == 1 ? 1.0 : dim == 2 ? 2.0 * 3.14159265358979323846 : 4.0 * 3.14159265358979323846;
    const std::size_t n = w.size();
    if (n_cells < 1 || n_cells > n) throw ValidationError("n_cells must lie in [1, grid nodes]");
    collapse::CellEnsemble e;
    e.params = params;
    for (std::size_t b = 0; b < n_cells; ++b) {
        const std::size_t lo = b * n / n_cells, hi = (b + 1) * n / n_cells;
        collapse::Cell cell;
        cell.id = b;
        cell.f.assign(p.size(), {});
        double atoms = 0.0, entangled = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            const double r = w.x(i);
            const double vol = i == 0 ? surface * std::pow(0.5 * w.dx, dim) / dim : surface * std::pow(r, dim - 1) * w.dx;
            const double weight = params.n_a * vol;
            cell.weights.push_back(weight);
            double f1 = 0.0;
            for (std::size_t j = 0; j < p.size(); ++j) {
                const double fj = std::clamp(w.values.size() == p.size() ? w.values[j][i] : w.f1(i), 0.0, 1.0);
                cell.f[j].push_back(fj);
                f1 += p[j] * fj;
            }
            atoms += weight;
            entangled += weight * f1;
        }
        cell.n_atoms = std::max<collapse::Count>(1, static_cast<collapse::Count>(std::llround(atoms)));
        cell.counts = collapse::apportion(std::min(cell.n_atoms, static_cast<collapse::Count>(std::llround(entangled))), p);
        e.cells.push_back(std::move(cell));
    }
    collapse::validate(e);
    return e;
}

inline void run_pipeline(const ScenarioConfig& c, Artifacts& out, RunManifest& man) {
    ScenarioConfig fc = c;
    const auto p = c.ensemble.spec().probabilities();
    fc.front.config.channel_probs = p;
    const auto traj = front::run(fc.front.config);
    man.warnings.insert(man.warnings.end(), traj.warnings.begin(), traj.warnings.end());
    write_front_outputs(fc, traj, out, false);

    const auto e = ensemble_from_field(traj.final_field(), p, c.ensemble.n_cells, c.ensemble.params);
    io::CsvTable cells({"cell", "n_atoms", "entangled", "overlap"});
    for (const auto& cell : e.cells)
        cells.row() << cell.id << cell.n_atoms << cell.entangled() << collapse::overlap(cell, 0, e.global_p());
    out.csv("cells.csv", cells);

    json sm{{"front", front_summary(fc, traj)}, {"kappa", collapse::global_kappa(e)}, {"entangled_atoms", 0}};
    collapse::Count total = 0;
    for (auto g : e.global_counts()) total += g;
    sm["entangled_atoms"] = total;
    if (total == 0) throw RuntimeError("the front produced no entangled atoms; raise n_a or t_final");
    if (c.collapse.trials > 0) sm["monte_carlo"] = ensemble_runs(e, c.collapse.trials, c.collapse.trace_runs, c, out);
    man.summary = sm;
}

}  // namespace detail

/// Runs the scenario and writes artifacts plus manifest.json to output_dir.
/// Module errors are rethrown with the scenario name prefixed.
inline RunManifest execute(const ScenarioConfig& cfg, bool write_manifest = true) {
    const auto start = std::chrono::steady_clock::now();
    RunManifest man;
    man.name = cfg.name.empty() ? scenario::to_string(cfg.kind) : cfg.name;
    man.kind = scenario::to_string(cfg.kind);
    man.seed = cfg.master_seed;
    man.output_dir = cfg.output_dir;
    man.config = scenario::to_json(cfg);
    man.config_hash = hex64(fnv1a64(man.config.dump()));
    Artifacts out(cfg.output_dir);
    const std::string ctx = "scenario '" + man.name + "' (" + man.kind + "): ";
    try {
        switch (cfg.kind) {
            case Kind::exact: detail::run_exact(cfg, out, man); break;
            case Kind::front: detail::run_front(cfg, out, man); break;
            case Kind::wigner: detail::run_wigner(cfg, out, man); break;
            case Kind::collapse: detail::run_collapse_kind(cfg, out, man); break;
            case Kind::born: detail::run_born(cfg, out, man); break;
            case Kind::fokker_planck: detail::run_fokker_planck(cfg, out, man); break;
            case Kind::timescale: detail::run_timescale(cfg, out, man); break;
            case Kind::full_pipeline: detail::run_pipeline(cfg, out, man); break;
        }
    } catch (const ValidationError& e) {
        throw ValidationError(ctx + e.what());
    } catch (const RuntimeError& e) {
        throw RuntimeError(ctx + e.what());
    }
    man.outputs = out.outputs();
    for (const auto& o : man.outputs) {
        std::error_code ec;
        const auto size = fs::file_size(out.dir() / o.file, ec);
        if (ec || size == 0) throw RuntimeError(ctx + "declared output " + o.file + " is missing or empty");
    }
    man.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (write_manifest) io::write_atomic(out.dir() / "manifest.json", man.to_json().dump(2) + "\n");
    return man;
}

}  // namespace collapse_lab::runner
