#pragma once

// Scenario configuration: strict JSON parsing, schema export and validation.
//
// Every block is described once by a bind_* function that registers each key
// with its target field. The same registration drives parsing (type checks,
// unknown-key rejection), serialization of the effective config, and the
// published schema, so the three cannot drift apart.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "collapse_lab/collapse_engine.hpp"
#include "collapse_lab/error.hpp"
#include "collapse_lab/front_solver.hpp"
#include "collapse_lab/io/atomic_file.hpp"
#include "collapse_lab/quantum_lattice.hpp"

namespace collapse_lab::scenario {

using json = nlohmann::ordered_json;

enum class Kind { exact, front, wigner, collapse, born, fokker_planck, timescale, full_pipeline };

inline const std::vector<std::pair<Kind, const char*>>& kind_names() {
    static const std::vector<std::pair<Kind, const char*>> names{
        {Kind::exact, "exact"},         {Kind::front, "front"},
        {Kind::wigner, "wigner"},       {Kind::collapse, "collapse"},
        {Kind::born, "born"},           {Kind::fokker_planck, "fokker-planck"},
        {Kind::timescale, "timescale"}, {Kind::full_pipeline, "full-pipeline"}};
    return names;
}

inline const char* to_string(Kind k) {
    for (const auto& [kind, name] : kind_names())
        if (kind == k) return name;
    return "exact";
}

inline std::optional<Kind> parse_kind(const std::string& s) {
    for (const auto& [kind, name] : kind_names())
        if (s == name) return kind;
    return std::nullopt;
}

/// Validation failure carrying every problem found, one per entry.
class ConfigError : public ValidationError {
public:
    explicit ConfigError(std::vector<std::string> errors)
        : ValidationError(join(errors)), errors_(std::move(errors)) {}
    const std::vector<std::string>& errors() const { return errors_; }

private:
    static std::string join(const std::vector<std::string>& errors) {
        std::string s = std::to_string(errors.size()) + " configuration error(s):";
        for (const auto& e : errors) s += "\n  " + e;
        return s;
    }
    std::vector<std::string> errors_;
};

// ------------------------------------------------------------------ settings

struct ExactSettings {
    quantum::LatticeModel model = [] {
        quantum::LatticeModel m;
        m.n_sites = 5;
        m.n_atoms = 3;
        m.u_strength = 1.0;
        m.v_strength = 0.5;
        return m;
    }();
    /// "random" (seeded Gaussian amplitudes) or "localized".
    std::string initial = "random";
    std::size_t particle_site = 0;
    /// Empty: atom a on site (a + 1) mod n_sites.
    std::vector<std::size_t> atom_sites;
    /// Real channel amplitudes for a localized start; empty means equal.
    std::vector<double> channel_amplitudes;
    double t_final = 10.0;
    double tol = 1e-11;
    /// Number of random models for the directed-flow survey.
    std::size_t random_models = 0;
};

struct FrontSettings {
    front::FrontConfig config;
    std::string geometry = "planar";
    std::string scheme = "euler";
    /// [t_lo, t_hi]; empty fits the final half of the run.
    std::vector<double> fit_window;
    /// Distances behind the front, in mean free paths, where f1 is reported.
    std::vector<double> behind_distances{1.0};
    double level = 0.99;
    /// Write every k-th grid node to the profile table.
    std::size_t profile_stride = 1;
};

struct WignerSettings {
    std::size_t n = 256;
    std::size_t samples = 1;
    /// "wigner" or "exponential".
    std::string ensemble = "wigner";
    bool real_symmetric = false;
    bool traceless = true;
    std::size_t histogram_bins = 40;
};

struct EnsembleSettings {
    std::vector<double> probabilities{0.5, 0.5};
    /// [re, im] pairs; overrides probabilities when given.
    std::vector<std::array<double, 2>> amplitudes;
    /// "uniform" or "shell". full-pipeline derives cells from the front instead.
    std::string layout = "uniform";
    std::size_t n_cells = 2;
    std::int64_t atoms_per_cell = 20;
    double f = 0.5;
    double radius = 4.0;
    double r_in = 1.0;
    double r_out = 3.0;
    double f_peak = 0.5;
    std::size_t nodes_per_cell = 20;
    collapse::CollapseParams params = [] {
        collapse::CollapseParams p;
        p.dt = 0.1;
        p.t_max = 1e5;
        return p;
    }();

    collapse::ChannelSpec spec() const {
        if (amplitudes.empty()) return collapse::ChannelSpec::from_probabilities(probabilities);
        collapse::ChannelSpec c;
        for (const auto& a : amplitudes) c.amplitudes.emplace_back(a[0], a[1]);
        return c;
    }
};

struct CollapseSettings {
    std::size_t trials = 100;
    std::size_t covariance_samples = 0;
    std::size_t identity_draws = 0;
    /// Runs whose checkpoint trajectories are written out in full.
    std::size_t trace_runs = 5;
};

struct BornSettings {
    std::size_t trials = 1000;
};

struct FokkerPlanckSettings {
    collapse::FokkerPlanckConfig config;
    /// Two-channel Monte Carlo runs of the ensemble block for the cross-check.
    std::size_t monte_carlo_trials = 0;
};

struct TimescaleSettings {
    double tau = 1e-10;
    double L = 1.0;
    double n_a = 1e20;
    double lambda = 1e-5;
    double W = 0.1;
};

struct ScenarioConfig {
    Kind kind = Kind::front;
    std::string name;
    std::uint64_t master_seed = 1;
    std::string output_dir = "collapse-lab-out";
    std::vector<double> checkpoints;

    ExactSettings exact;
    FrontSettings front;
    WignerSettings wigner;
    EnsembleSettings ensemble;
    CollapseSettings collapse;
    BornSettings born;
    FokkerPlanckSettings fokker_planck;
    TimescaleSettings timescale;
};

/// Blocks read by each kind; the first one is mandatory.
inline std::vector<std::string> blocks_for(Kind k) {
    switch (k) {
        case Kind::exact: return {"exact"};
        case Kind::front: return {"front"};
        case Kind::wigner: return {"wigner"};
        case Kind::collapse: return {"collapse", "ensemble"};
        case Kind::born: return {"born", "ensemble"};
        case Kind::fokker_planck: return {"fokker_planck", "ensemble"};
        case Kind::timescale: return {"timescale"};
        case Kind::full_pipeline: return {"front", "ensemble", "collapse"};
    }
    return {};
}

// -------------------------------------------------------------------- binder

using Errors = std::vector<std::string>;

struct FieldDef {
    std::string key;
    json schema;
    std::function<void(const json&, const std::string&, Errors&)> read;
    std::function<json()> write;
};

namespace detail {

inline bool integral_value(const json& v) {
    if (v.is_number_integer()) return true;
    if (!v.is_number_float()) return false;
    const double d = v.get<double>();
    return std::isfinite(d) && std::floor(d) == d && std::abs(d) <= 9007199254740992.0;
}

inline std::optional<double> as_number(const json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "Infinity") return std::numeric_limits<double>::infinity();
    }
    return std::nullopt;
}

inline std::optional<std::uint64_t> as_unsigned(const json& v) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) return std::nullopt;  // negative
    if (integral_value(v) && v.get<double>() >= 0.0) return static_cast<std::uint64_t>(v.get<double>());
    return std::nullopt;
}

inline json number_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

}  // namespace detail

class Binder {
public:
    std::vector<FieldDef> fields;

    void number(const char* key, double& ref, const char* doc) {
        add(key, {{"type", "number"}, {"description", doc}, {"default", detail::number_json(ref)}},
            [&ref](const json& v, const std::string& path, Errors& errs) {
                if (auto d = detail::as_number(v)) ref = *d;
                else errs.push_back(path + ": expected a number");
            },
            [&ref] { return detail::number_json(ref); });
    }

    void count(const char* key, std::size_t& ref, const char* doc) {
        add(key, {{"type", "integer"}, {"minimum", 0}, {"description", doc}, {"default", ref}},
            [&ref](const json& v, const std::string& path, Errors& errs) {
                if (auto u = detail::as_unsigned(v)) ref = static_cast<std::size_t>(*u);
                else errs.push_back(path + ": expected a non-negative integer");
            },
            [&ref] { return json(ref); });
    }

    void integer(const char* key, std::int64_t& ref, const char* doc) {
        add(key, {{"type", "integer"}, {"description", doc}, {"default", ref}},
            [&ref](const json& v, const std::string& path, Errors& errs) {
                if (detail::integral_value(v)) ref = v.is_number_integer() ? v.get<std::int64_t>() : static_cast<std::int64_t>(v.get<double>());
                else errs.push_back(path + ": expected an integer");
            },
            [&ref] { return json(ref); });
    }

    void seed(const char* key, std::uint64_t& ref, const char* doc) {
        add(key, {{"type", "integer"}, {"minimum", 0}, {"maximum", std::numeric_limits<std::uint64_t>::max()}, {"description", doc}, {"default", ref}},
            [&ref](const json& v, const std::string& path, Errors& errs) {
                if (auto u = detail::as_unsigned(v)) ref = *u;
                else errs.push_back(path + ": expected an unsigned 64-bit integer");
            },
            [&ref] { return json(ref); });
    }

    void boolean(const char* key, bool& ref, const char* doc) {
        add(key, {{"type", "boolean"}, {"description", doc}, {"default", ref}},
            [&ref](const json& v, const std::string& path, Errors& errs) {
                if (v.is_boolean()) ref = v.get<bool>();
                else errs.push_back(path + ": expected true or false");
            },
            [&ref] { return json(ref); });
    }

    void text(const char* key, std::string& ref, const char* doc, std::vector<std::string> choices = {}) {
        json s{{"type", "string"}, {"description", doc}, {"default", ref}};
        if (!choices.empty()) s["enum"] = choices;
        add(key, std::move(s),
            [&ref, choices](const json& v, const std::string& path, Errors& errs) {
                if (!v.is_string()) {
                    errs.push_back(path + ": expected a string");
                    return;
                }
                const auto str = v.get<std::string>();
                if (!choices.empty() && std::find(choices.begin(), choices.end(), str) == choices.end()) {
                    std::string msg = path + ": '" + str + "' is not one of";
                    for (const auto& c : choices) msg += " '" + c + "'";
                    errs.push_back(msg);
                    return;
                }
                ref = str;
            },
            [&ref] { return json(ref); });
    }

    void numbers(const char* key, std::vector<double>& ref, const char* doc) {
        add(key, {{"type", "array"}, {"items", {{"type", "number"}}}, {"description", doc}, {"default", ref}},
            [&ref](const json& v, const std::string& path, Errors& errs) {
                if (!v.is_array()) {
                    errs.push_back(path + ": expected an array of numbers");
                    return;
                }
                std::vector<double> out;
                for (std::size_t i = 0; i < v.size(); ++i) {
                    if (auto d = detail::as_number(v[i])) out.push_back(*d);
                    else errs.push_back(path + "[" + std::to_string(i) + "]: expected a number");
                }
                ref = std::move(out);
            },
            [&ref] {
                json a = json::array();
                for (double d : ref) a.push_back(detail::number_json(d));
                return a;
            });
    }

    void counts(const char* key, std::vector<std::size_t>& ref, const char* doc) {
        add(key, {{"type", "array"}, {"items", {{"type", "integer"}, {"minimum", 0}}}, {"description", doc}, {"default", ref}},
            [&ref](const json& v, const std::string& path, Errors& errs) {
                if (!v.is_array()) {
                    errs.push_back(path + ": expected an array of non-negative integers");
                    return;
                }
                std::vector<std::size_t> out;
                for (std::size_t i = 0; i < v.size(); ++i) {
                    if (auto u = detail::as_unsigned(v[i])) out.push_back(static_cast<std::size_t>(*u));
                    else errs.push_back(path + "[" + std::to_string(i) + "]: expected a non-negative integer");
                }
                ref = std::move(out);
            },
            [&ref] { return json(ref); });
    }

    void add(const char* key, json schema, std::function<void(const json&, const std::string&, Errors&)> read,
             std::function<json()> write) {
        fields.push_back({key, std::move(schema), std::move(read), std::move(write)});
    }
};

/// Reads a JSON object into the bound fields. Missing keys keep their
/// defaults; unknown keys and type mismatches are reported with their path.
inline void read_object(const json& j, const std::string& path, const Binder& b, Errors& errs) {
    if (!j.is_object()) {
        errs.push_back(path + ": expected an object");
        return;
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto f = std::find_if(b.fields.begin(), b.fields.end(), [&](const FieldDef& d) { return d.key == it.key(); });
        const std::string where = path.empty() ? it.key() : path + "." + it.key();
        if (f == b.fields.end()) {
            errs.push_back(where + ": unknown key '" + it.key() + "'");
            continue;
        }
        f->read(it.value(), where, errs);
    }
}

inline json write_object(const Binder& b) {
    json o = json::object();
    for (const auto& f : b.fields) o[f.key] = f.write();
    return o;
}

inline json schema_object(const Binder& b, const std::string& description) {
    json props = json::object();
    for (const auto& f : b.fields) props[f.key] = f.schema;
    return {{"type", "object"}, {"description", description}, {"additionalProperties", false}, {"properties", props}};
}

// ------------------------------------------------------------ block bindings

inline void bind_exact(Binder& b, ExactSettings& s) {
    auto& m = s.model;
    b.count("n_sites", m.n_sites, "sites on the periodic ring");
    b.count("n_atoms", m.n_atoms, "number of atoms N");
    b.number("hop_atom", m.hop_atom, "atom hopping coefficient");
    b.number("hop_particle", m.hop_particle, "particle hopping coefficient");
    b.number("u_strength", m.u_strength, "particle-atom contact potential U");
    b.number("v_strength", m.v_strength, "atom-atom contact potential V");
    b.numbers("channel_scale", m.channel_scale, "per-channel multiplier of U; one entry means no internal label");
    b.boolean("symmetrize", m.symmetrize, "Bose-symmetrize the atom coordinates of the initial state");
    b.text("initial", s.initial, "initial state", {"random", "localized"});
    b.count("particle_site", s.particle_site, "particle site for a localized start");
    b.counts("atom_sites", s.atom_sites, "atom sites for a localized start; empty means (a + 1) mod n_sites");
    b.numbers("channel_amplitudes", s.channel_amplitudes, "real channel amplitudes for a localized start; empty means equal");
    b.number("t_final", s.t_final, "final time in natural units; checkpoints default to t_final alone");
    b.number("tol", s.tol, "integrator tolerance per unit time");
    b.count("random_models", s.random_models, "random models checked for directed flow and non-self-adjointness");
}

inline void bind_front(Binder& b, FrontSettings& s) {
    auto& c = s.config;
    b.number("diffusion", c.diffusion, "diffusion coefficient D (cm^2/s); non-positive means lambda^2/(6 tau)");
    b.number("tau", c.tau, "mean free time (s)");
    b.number("lambda", c.lambda, "mean free path (cm)");
    b.text("geometry", s.geometry, "radial geometry", {"planar", "planar-1D", "cylindrical", "spherical"});
    b.text("scheme", s.scheme, "explicit time stepping", {"euler", "rk4"});
    b.number("domain_length", c.domain_length, "domain length (cm)");
    b.number("dx", c.dx, "grid spacing (cm)");
    b.number("dt", c.dt, "time step (s); non-positive selects a stable step automatically");
    b.number("t_final", c.t_final, "final time (s)");
    b.add("sources",
          {{"type", "array"},
           {"description", "regions where f starts at 1; channel -1 means every channel"},
           {"items",
            {{"type", "object"},
             {"additionalProperties", false},
             {"properties", {{"lo", {{"type", "number"}}}, {"hi", {{"type", "number"}}}, {"channel", {{"type", "integer"}}}}}}},
           {"default", json::array({{{"lo", 0.0}, {"hi", 1.0}, {"channel", -1}}})}},
          [&c](const json& v, const std::string& path, Errors& errs) {
              if (!v.is_array()) {
                  errs.push_back(path + ": expected an array of {lo, hi, channel}");
                  return;
              }
              std::vector<front::SourceRegion> out;
              for (std::size_t i = 0; i < v.size(); ++i) {
                  front::SourceRegion r;
                  std::int64_t channel = -1;
                  Binder sb;
                  sb.number("lo", r.lo, "");
                  sb.number("hi", r.hi, "");
                  sb.integer("channel", channel, "");
                  read_object(v[i], path + "[" + std::to_string(i) + "]", sb, errs);
                  r.channel = static_cast<int>(channel);
                  out.push_back(r);
              }
              c.sources = std::move(out);
          },
          [&c] {
              json a = json::array();
              for (const auto& r : c.sources) a.push_back({{"lo", r.lo}, {"hi", r.hi}, {"channel", r.channel}});
              return a;
          });
    b.numbers("channel_probs", c.channel_probs, "channel probabilities p_j; empty means one channel");
    b.number("snapshot_interval", c.snapshot_interval, "time between stored profiles (s)");
    b.number("track_interval", c.track_interval, "time between front-position samples (s); non-positive means every snapshot");
    b.number("threshold", c.threshold, "f1 level defining the front position");
    b.numbers("fit_window", s.fit_window, "[t_lo, t_hi] for the speed fit; empty means the final half");
    b.numbers("behind_distances", s.behind_distances, "distances behind the front, in mean free paths, where f1 is reported");
    b.number("level", s.level, "f1 level whose distance behind the front is reported");
    b.count("profile_stride", s.profile_stride, "write every k-th grid node to the profile table");
}

inline void bind_wigner(Binder& b, WignerSettings& s) {
    b.count("n", s.n, "matrix dimension");
    b.count("samples", s.samples, "independent samples; sample k uses substream (master_seed, k)");
    b.text("ensemble", s.ensemble, "random-matrix ensemble", {"wigner", "exponential"});
    b.boolean("real_symmetric", s.real_symmetric, "real symmetric instead of complex Hermitian entries");
    b.boolean("traceless", s.traceless, "project onto the traceless part before splitting");
    b.count("histogram_bins", s.histogram_bins, "bins of the first sample's spectral histogram");
}

inline void bind_params(Binder& b, collapse::CollapseParams& p) {
    b.number("W", p.W, "incoherence probability in (0, 4/(3 pi)]");
    b.number("tau", p.tau, "mean free time (s)");
    b.number("n_a", p.n_a, "atom density (cm^-3)");
    b.number("lambda", p.lambda, "mean free path (cm)");
    b.number("dt", p.dt, "time step (s), at most tau/10");
    b.number("t_max", p.t_max, "time after which an undecided run is reported as a timeout (s)");
}

inline void bind_ensemble(Binder& b, EnsembleSettings& s) {
    b.numbers("probabilities", s.probabilities, "initial channel probabilities p_j(0)");
    b.add("amplitudes",
          {{"type", "array"},
           {"description", "complex channel amplitudes [re, im]; when given, p_j(0) = |c_j|^2"},
           {"items", {{"type", "array"}, {"items", {{"type", "number"}}}, {"minItems", 2}, {"maxItems", 2}}},
           {"default", json::array()}},
          [&s](const json& v, const std::string& path, Errors& errs) {
              if (!v.is_array()) {
                  errs.push_back(path + ": expected an array of [re, im] pairs");
                  return;
              }
              std::vector<std::array<double, 2>> out;
              for (std::size_t i = 0; i < v.size(); ++i) {
                  const auto& z = v[i];
                  if (!z.is_array() || z.size() != 2 || !z[0].is_number() || !z[1].is_number()) {
                      errs.push_back(path + "[" + std::to_string(i) + "]: expected [re, im]");
                      continue;
                  }
                  out.push_back({z[0].get<double>(), z[1].get<double>()});
              }
              s.amplitudes = std::move(out);
          },
          [&s] {
              json a = json::array();
              for (const auto& z : s.amplitudes) a.push_back({z[0], z[1]});
              return a;
          });
    b.text("layout", s.layout, "cell layout", {"uniform", "shell"});
    b.count("n_cells", s.n_cells, "number of cells");
    b.integer("atoms_per_cell", s.atoms_per_cell, "atoms per cell (uniform layout)");
    b.number("f", s.f, "local-entanglement probability of every channel (uniform layout)");
    b.number("radius", s.radius, "sphere radius (shell layout, cm)");
    b.number("r_in", s.r_in, "inner radius of the entangled shell (cm)");
    b.number("r_out", s.r_out, "outer radius of the entangled shell (cm)");
    b.number("f_peak", s.f_peak, "f inside the shell");
    b.count("nodes_per_cell", s.nodes_per_cell, "radial quadrature nodes per cell (shell layout)");
    b.add("params", {}, nullptr, nullptr);
    auto& params_field = b.fields.back();
    Binder pb;
    bind_params(pb, s.params);
    params_field.schema = schema_object(pb, "slip-process parameters");
    params_field.read = [&s](const json& v, const std::string& path, Errors& errs) {
        Binder inner;
        bind_params(inner, s.params);
        read_object(v, path, inner, errs);
    };
    params_field.write = [&s] {
        Binder inner;
        bind_params(inner, s.params);
        return write_object(inner);
    };
}

inline void bind_collapse(Binder& b, CollapseSettings& s) {
    b.count("trials", s.trials, "Monte Carlo runs to absorption");
    b.count("covariance_samples", s.covariance_samples, "single-step samples for the covariance check; 0 skips it");
    b.count("identity_draws", s.identity_draws, "random parameter draws for the slip conservation check; 0 skips it");
    b.count("trace_runs", s.trace_runs, "runs whose checkpoint trajectories are written in full");
}

inline void bind_born(Binder& b, BornSettings& s) {
    b.count("trials", s.trials, "Monte Carlo runs to absorption (at least 100)");
}

inline void bind_fokker_planck(Binder& b, FokkerPlanckSettings& s) {
    auto& c = s.config;
    b.number("p0", c.p0, "centre of the initial bump");
    b.number("kappa", c.kappa, "diffusion scale, a(p) = kappa p (1 - p)");
    b.count("intervals", c.intervals, "grid intervals on [0, 1]");
    b.number("t_final", c.t_final, "final time");
    b.number("bump_width", c.bump_width, "standard deviation of the initial bump");
    b.number("dt", c.dt, "time step; non-positive means 0.9 of 2 h^2 / kappa");
    b.number("record_interval", c.record_interval, "cadence of the absorbed-mass history; non-positive records start and end");
    b.count("monte_carlo_trials", s.monte_carlo_trials, "two-channel Monte Carlo runs of the ensemble block for comparison");
}

inline void bind_timescale(Binder& b, TimescaleSettings& s) {
    b.number("tau", s.tau, "mean free time (s)");
    b.number("L", s.L, "system size (cm)");
    b.number("n_a", s.n_a, "atom density (cm^-3)");
    b.number("lambda", s.lambda, "mean free path (cm)");
    b.number("W", s.W, "incoherence probability");
}

inline void bind_block(const std::string& name, Binder& b, ScenarioConfig& c) {
    if (name == "exact") bind_exact(b, c.exact);
    else if (name == "front") bind_front(b, c.front);
    else if (name == "wigner") bind_wigner(b, c.wigner);
    else if (name == "ensemble") bind_ensemble(b, c.ensemble);
    else if (name == "collapse") bind_collapse(b, c.collapse);
    else if (name == "born") bind_born(b, c.born);
    else if (name == "fokker_planck") bind_fokker_planck(b, c.fokker_planck);
    else if (name == "timescale") bind_timescale(b, c.timescale);
}

inline const std::vector<std::string>& all_blocks() {
    static const std::vector<std::string> names{"exact", "front", "wigner", "ensemble", "collapse", "born", "fokker_planck", "timescale"};
    return names;
}

inline void bind_top(Binder& b, ScenarioConfig& c) {
    b.text("name", c.name, "scenario label used in messages and the manifest");
    b.seed("master_seed", c.master_seed, "master seed of every random substream");
    b.text("output_dir", c.output_dir, "directory receiving CSV, SVG and manifest files");
    b.numbers("checkpoints", c.checkpoints, "times at which trajectories are sampled");
}

// ---------------------------------------------------------------- validation

namespace detail {

template <class F>
void collect(Errors& errs, const std::string& where, F&& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        for (const auto& m : e.errors()) errs.push_back(where + ": " + m);
    } catch (const std::exception& e) {
        errs.push_back(where + ": " + e.what());
    }
}

inline bool positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace detail

/// Resolves string-valued choices into the typed configs.
inline void resolve(ScenarioConfig& c) {
    if (auto g = front::parse_geometry(c.front.geometry)) c.front.config.geometry = *g;
    c.front.config.scheme = c.front.scheme == "rk4" ? front::TimeScheme::rk4 : front::TimeScheme::euler;
}

inline collapse::CellEnsemble build_ensemble(const EnsembleSettings& s) {
    const auto spec = s.spec();
    collapse::validate(spec);
    const auto p = spec.probabilities();
    if (s.layout == "shell")
        return collapse::shell_ensemble(p, s.n_cells, s.radius, s.r_in, s.r_out, s.f_peak, s.nodes_per_cell, s.params);
    if (s.atoms_per_cell <= 0) throw ValidationError("atoms_per_cell must be positive");
    if (!(s.f >= 0.0 && s.f <= 1.0)) throw ValidationError("f must lie in [0, 1]");
    return collapse::uniform_ensemble(p, s.n_cells, s.atoms_per_cell, s.f, s.params);
}

/// Semantic checks across all blocks the kind uses. Returns every problem.
inline Errors semantic_errors(const ScenarioConfig& c) {
    Errors errs;
    double prev = -std::numeric_limits<double>::infinity();
    for (double t : c.checkpoints) {
        if (!(std::isfinite(t) && t >= 0.0)) errs.push_back("checkpoints: times must be finite and non-negative");
        else if (t < prev) errs.push_back("checkpoints: times must be non-decreasing");
        prev = t;
    }
    if (c.output_dir.empty()) errs.push_back("output_dir: must not be empty");

    switch (c.kind) {
        case Kind::exact: {
            const auto& s = c.exact;
            detail::collect(errs, "exact", [&] { quantum::validate(s.model); });
            if (!(std::isfinite(s.t_final) && s.t_final >= 0.0)) errs.push_back("exact.t_final: must be non-negative");
            if (!detail::positive(s.tol)) errs.push_back("exact.tol: must be positive");
            for (double t : c.checkpoints)
                if (t > s.t_final) errs.push_back("checkpoints: time " + std::to_string(t) + " exceeds exact.t_final");
            if (s.initial == "localized") {
                if (s.particle_site >= s.model.n_sites) errs.push_back("exact.particle_site: out of range");
                if (!s.atom_sites.empty() && s.atom_sites.size() != s.model.n_atoms)
                    errs.push_back("exact.atom_sites: need one site per atom");
                for (auto a : s.atom_sites)
                    if (a >= s.model.n_sites) errs.push_back("exact.atom_sites: site out of range");
                if (!s.channel_amplitudes.empty() && s.channel_amplitudes.size() != s.model.n_channels())
                    errs.push_back("exact.channel_amplitudes: need one amplitude per channel");
            }
            break;
        }
        case Kind::front:
        case Kind::full_pipeline: {
            const auto& s = c.front;
            detail::collect(errs, "front", [&] { front::validate(s.config); });
            if (!s.fit_window.empty()) {
                if (s.fit_window.size() != 2) errs.push_back("front.fit_window: expected [t_lo, t_hi]");
                else if (!(s.fit_window[0] >= 0.0 && s.fit_window[0] < s.fit_window[1] && s.fit_window[1] <= s.config.t_final))
                    errs.push_back("front.fit_window: need 0 <= t_lo < t_hi <= t_final");
            }
            for (double d : s.behind_distances)
                if (!(std::isfinite(d) && d >= 0.0)) errs.push_back("front.behind_distances: must be non-negative");
            if (!(s.level > 0.0 && s.level < 1.0)) errs.push_back("front.level: must lie in (0, 1)");
            if (s.profile_stride < 1) errs.push_back("front.profile_stride: must be at least 1");
            if (c.kind == Kind::front) break;
            if (!s.config.channel_probs.empty())
                errs.push_back("front.channel_probs: taken from the ensemble block in a full pipeline; remove it");
            detail::collect(errs, "ensemble", [&] {
                const auto spec = c.ensemble.spec();
                collapse::validate(spec);
                collapse::validate(c.ensemble.params);
                if (c.ensemble.n_cells < 1) throw ValidationError("n_cells must be positive");
            });
            break;
        }
        case Kind::wigner: {
            const auto& s = c.wigner;
            if (s.n < 2 || s.n > 8192) errs.push_back("wigner.n: must lie in [2, 8192]");
            if (s.samples < 1) errs.push_back("wigner.samples: must be at least 1");
            if (s.histogram_bins < 1) errs.push_back("wigner.histogram_bins: must be at least 1");
            break;
        }
        case Kind::collapse:
        case Kind::born:
            detail::collect(errs, "ensemble", [&] { build_ensemble(c.ensemble); });
            if (c.kind == Kind::born && c.born.trials < 100) errs.push_back("born.trials: must be at least 100");
            break;
        case Kind::fokker_planck: {
            const auto& s = c.fokker_planck;
            if (!(std::isfinite(s.config.t_final) && s.config.t_final >= 0.0))
                errs.push_back("fokker_planck.t_final: must be non-negative");
            detail::collect(errs, "fokker_planck", [&] {
                auto probe = s.config;
                probe.t_final = 0.0;
                collapse::fokker_planck_2ch(probe);
            });
            if (s.monte_carlo_trials > 0)
                detail::collect(errs, "ensemble", [&] {
                    const auto e = build_ensemble(c.ensemble);
                    if (e.n_channels() != 2) throw ValidationError("the Monte Carlo cross-check needs exactly two channels");
                });
            break;
        }
        case Kind::timescale: {
            const auto& s = c.timescale;
            detail::collect(errs, "timescale", [&] { collapse::collapse_timescale(s.tau, s.L, s.n_a, s.lambda, s.W); });
            break;
        }
    }
    return errs;
}

// ------------------------------------------------------------------- parsing

/// Config with the defaults of a kind. full-pipeline starts from a small
/// spherical front so the derived cell ensemble stays desk-sized.
inline ScenarioConfig default_config(Kind k) {
    ScenarioConfig c;
    c.kind = k;
    c.name = to_string(k);
    c.output_dir = std::string("collapse-lab-out/") + to_string(k);
    if (k == Kind::full_pipeline) {
        c.front.geometry = "spherical";
        c.front.config.domain_length = 10.0;
        c.front.config.dx = 0.1;
        c.front.config.t_final = 6.0;
        c.front.config.sources = {front::SourceRegion{0.0, 1.0, -1}};
        c.ensemble.n_cells = 5;
        c.ensemble.params.n_a = 0.2;
        c.collapse.trials = 20;
    }
    resolve(c);
    return c;
}

/// Parses and validates a config document. Throws ConfigError listing every
/// problem: unknown keys, type mismatches, missing blocks, semantic errors.
inline ScenarioConfig from_json(const json& j, std::optional<Kind> expected_kind = std::nullopt) {
    Errors errs;
    if (!j.is_object()) throw ConfigError({"config: expected a JSON object at the top level"});
    std::optional<Kind> kind;
    if (auto it = j.find("kind"); it != j.end()) {
        if (!it->is_string()) errs.push_back("kind: expected a string");
        else if (!(kind = parse_kind(it->get<std::string>()))) {
            std::string msg = "kind: '" + it->get<std::string>() + "' is not one of";
            for (const auto& [k, name] : kind_names()) msg += std::string(" '") + name + "'";
            errs.push_back(msg);
        }
    } else if (expected_kind) {
        kind = expected_kind;
    } else {
        errs.push_back("kind: required");
    }
    if (kind && expected_kind && *kind != *expected_kind)
        errs.push_back(std::string("kind: config is '") + to_string(*kind) + "' but '" + to_string(*expected_kind) + "' was requested");
    if (!kind) throw ConfigError(errs);

    ScenarioConfig c = default_config(*kind);
    Binder top;
    bind_top(top, c);
    const auto used = blocks_for(*kind);
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& key = it.key();
        if (key == "kind") continue;
        if (std::find(all_blocks().begin(), all_blocks().end(), key) != all_blocks().end()) {
            if (std::find(used.begin(), used.end(), key) == used.end()) {
                errs.push_back(key + ": block not used by kind '" + std::string(to_string(*kind)) + "'");
                continue;
            }
            Binder b;
            bind_block(key, b, c);
            read_object(it.value(), key, b, errs);
            continue;
        }
        const auto f = std::find_if(top.fields.begin(), top.fields.end(), [&](const FieldDef& d) { return d.key == key; });
        if (f == top.fields.end()) errs.push_back(key + ": unknown key '" + key + "'");
        else f->read(it.value(), key, errs);
    }
    if (!j.contains(used.front())) errs.push_back(used.front() + ": block required for kind '" + std::string(to_string(*kind)) + "'");
    resolve(c);
    for (auto& e : semantic_errors(c)) errs.push_back(std::move(e));
    if (!errs.empty()) throw ConfigError(errs);
    return c;
}

inline ScenarioConfig parse_config_text(const std::string& text, std::optional<Kind> expected_kind = std::nullopt) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("malformed JSON: ") + e.what()});
    }
    return from_json(j, expected_kind);
}

inline ScenarioConfig parse_config(const std::filesystem::path& path, std::optional<Kind> expected_kind = std::nullopt) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) throw ConfigError({"config file not found: " + path.string()});
    return parse_config_text(io::read_file(path), expected_kind);
}

/// The effective configuration, defaults included, limited to the blocks the kind reads.
inline json to_json(const ScenarioConfig& cfg) {
    ScenarioConfig c = cfg;
    json out = json::object();
    out["kind"] = to_string(c.kind);
    Binder top;
    bind_top(top, c);
    for (const auto& f : top.fields) out[f.key] = f.write();
    for (const auto& name : blocks_for(c.kind)) {
        Binder b;
        bind_block(name, b, c);
        out[name] = write_object(b);
    }
    return out;
}

/// JSON Schema (draft 2020-12) of the config format.
inline json schema() {
    ScenarioConfig c = default_config(Kind::front);
    Binder top;
    bind_top(top, c);
    json props = json::object();
    std::vector<std::string> kinds;
    for (const auto& [k, name] : kind_names()) kinds.emplace_back(name);
    props["kind"] = {{"type", "string"}, {"enum", kinds}, {"description", "scenario kind; selects which blocks are read"}};
    for (const auto& f : top.fields) props[f.key] = f.schema;
    for (const auto& name : all_blocks()) {
        Binder b;
        bind_block(name, b, c);
        props[name] = schema_object(b, name + " block");
    }
    json all_of = json::array();
    for (const auto& [k, name] : kind_names()) {
        const auto used = blocks_for(k);
        json forbidden = json::array();
        for (const auto& blk : all_blocks())
            if (std::find(used.begin(), used.end(), blk) == used.end()) forbidden.push_back({{"required", {blk}}});
        all_of.push_back({{"if", {{"properties", {{"kind", {{"const", name}}}}}}},
                          {"then", {{"required", {used.front()}}, {"not", {{"anyOf", forbidden}}}}}});
    }
    return {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
            {"title", "collapse-lab scenario"},
            {"type", "object"},
            {"required", {"kind"}},
            {"additionalProperties", false},
            {"properties", props},
            {"allOf", all_of}};
}

}  // namespace collapse_lab::scenario
