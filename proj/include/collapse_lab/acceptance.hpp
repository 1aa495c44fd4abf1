#pragma once

// Acceptance criteria as named scenarios. Each criterion builds one or more
// scenario configs, executes them through the runner, and judges the
// manifest summaries against a tolerance and a runtime budget.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "collapse_lab/io/atomic_file.hpp"
#include "collapse_lab/runner.hpp"
#include "collapse_lab/scenario.hpp"

namespace collapse_lab::acceptance {

namespace fs = std::filesystem;
using scenario::json;
using scenario::Kind;
using scenario::ScenarioConfig;

struct Verdict {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string measured;
    std::string tolerance;
    /// Distance from the tolerance boundary; positive means inside.
    double margin = 0.0;
    double runtime_s = 0.0;
    double budget_s = 0.0;
    std::string detail{};

    json to_json() const {
        return {{"id", id},           {"name", name},           {"pass", pass},
                {"measured", measured}, {"tolerance", tolerance}, {"margin", margin},
                {"runtime_s", runtime_s}, {"budget_s", budget_s}, {"detail", detail}};
    }
};

struct Criterion {
    int id;
    std::string name;
    double budget_s;
    /// Scenarios the criterion runs; empty for the determinism check.
    std::vector<ScenarioConfig> scenarios;
    std::function<Verdict(const std::vector<runner::RunManifest>&)> judge;
};

namespace detail {

inline std::string num(double v) {
    char b[40];
    std::snprintf(b, sizeof b, "%.6g", v);
    return b;
}

inline double get(const json& j, const std::string& pointer) {
    const auto& v = j.at(json::json_pointer(pointer));
    if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
    return v.get<double>();
}

inline ScenarioConfig base(Kind k, const std::string& name, std::uint64_t seed) {
    auto c = scenario::default_config(k);
    c.name = name;
    c.master_seed = seed;
    return c;
}

inline ScenarioConfig two_channel_ensemble(Kind k, const std::string& name, std::uint64_t seed, std::vector<double> p) {
    auto c = base(k, name, seed);
    c.ensemble.probabilities = std::move(p);
    c.ensemble.layout = "uniform";
    c.ensemble.n_cells = 2;
    c.ensemble.atoms_per_cell = 20;
    c.ensemble.f = 0.5;
    c.ensemble.params.W = 0.4;
    c.ensemble.params.dt = 0.1;
    c.ensemble.params.t_max = 1e5;
    return c;
}

}  // namespace detail

/// The shipped criteria with their default seeds.
inline std::vector<Criterion> criteria() {
    using detail::get;
    using detail::num;
    std::vector<Criterion> list;

    {
        auto c = detail::base(Kind::exact, "equivalence", 11);
        c.exact.model.n_sites = 5;
        c.exact.model.n_atoms = 3;
        c.exact.model.u_strength = 1.0;
        c.exact.model.v_strength = 0.5;
        c.exact.initial = "random";
        c.exact.t_final = 10.0;
        c.exact.tol = 1e-11;
        for (int k = 1; k <= 20; ++k) c.checkpoints.push_back(0.5 * k);
        list.push_back({1, "equivalence", 60.0, {c}, [](const auto& m) {
                            const double d = get(m[0].summary, "/max_distance");
                            return Verdict{1, "", d < 1e-8, "max ||psi'' - psi|| = " + num(d), "< 1e-8", 1e-8 - d};
                        }});
    }
    {
        auto c = detail::base(Kind::exact, "directed-flow", 12);
        c.exact.model.n_sites = 3;
        c.exact.model.n_atoms = 2;
        c.exact.t_final = 0.0;
        c.exact.random_models = 50;
        list.push_back({2, "directed-flow", 10.0, {c}, [](const auto& m) {
                            const auto& s = m[0].summary;
                            const bool directed = s.at("all_directed").template get<bool>();
                            const bool witness = s.at("witness_whenever_u").template get<bool>();
                            const bool rule = s.at("witness_rule_holds").template get<bool>();
                            Verdict v{2, "", directed && witness,
                                      std::string("all directed: ") + (directed ? "yes" : "no") +
                                          ", witness whenever u != 0: " + (witness ? "yes" : "no"),
                                      "all 50 models", (directed && witness) ? 1.0 : -1.0};
                            v.detail = std::string("witness iff u != 0 or (v != 0 and N >= 2): ") + (rule ? "holds" : "violated");
                            return v;
                        }});
    }
    {
        auto c = detail::base(Kind::front, "front-profile", 13);
        c.front.config.domain_length = 60.0;
        c.front.config.dx = 0.05;
        c.front.config.t_final = 40.0;
        c.front.config.snapshot_interval = 10.0;
        c.front.config.track_interval = 0.5;
        c.front.behind_distances = {1.0, 2.0, 3.0, 4.0, 5.0};
        c.front.profile_stride = 2;
        list.push_back({3, "front-profile", 30.0, {c}, [](const auto& m) {
                            const double f = get(m[0].summary, "/f1_behind_front/0/f1");
                            const double d = get(m[0].summary, "/distance_to_level_lambda");
                            Verdict v{3, "", f > 0.99, "f1 one mean free path behind the 0.5-front = " + num(f), "> 0.99",
                                      f - 0.99};
                            v.detail = "f1 reaches 0.99 at " + num(d) + " mean free paths behind the front";
                            return v;
                        }});
    }
    {
        auto c = detail::base(Kind::front, "front-speed", 14);
        c.front.scheme = "rk4";
        c.front.config.scheme = front::TimeScheme::rk4;
        c.front.config.domain_length = 360.0;
        c.front.config.dx = 0.05;
        c.front.config.t_final = 400.0;
        c.front.config.snapshot_interval = 50.0;
        c.front.config.track_interval = 1.0;
        c.front.profile_stride = 20;
        list.push_back({4, "front-speed", 120.0, {c}, [](const auto& m) {
                            const auto& s = m[0].summary;
                            const double ratio = get(s, "/speed_over_pulled");
                            const double err = std::abs(ratio - 1.0);
                            Verdict v{4, "", err < 0.02, "speed / 2 sqrt(D/tau) = " + num(ratio), "within 2%", 0.02 - err};
                            v.detail = "speed " + num(get(s, "/speed")) + ", ratio to the claimed v/sqrt(3) = " +
                                       num(get(s, "/speed_over_claimed"));
                            return v;
                        }});
    }
    {
        auto c = detail::base(Kind::wigner, "semicircle", 15);
        c.wigner.n = 1024;
        c.wigner.samples = 1;
        c.wigner.traceless = false;
        list.push_back({5, "semicircle", 30.0, {c}, [](const auto& m) {
                            const double ks = get(m[0].summary, "/ks_first_sample");
                            return Verdict{5, "", ks < 0.05, "KS distance = " + num(ks), "< 0.05", 0.05 - ks};
                        }});
    }
    {
        auto c = detail::base(Kind::wigner, "incoherence-bound", 16);
        c.wigner.n = 512;
        c.wigner.samples = 20;
        c.wigner.traceless = true;
        list.push_back({6, "incoherence-bound", 120.0, {c}, [](const auto& m) {
                            const auto& s = m[0].summary;
                            const double rel = get(s, "/relative_error"), gap = get(s, "/max_gap");
                            Verdict v{6, "", rel < 0.02 && gap < 1e-10,
                                      "mean w+ = " + num(get(s, "/mean_w_plus")) + " (rel. error " + num(rel) +
                                          "), max |w+ - w-| = " + num(gap),
                                      "within 2% of 4/(3 pi); gap < 1e-10", std::min(0.02 - rel, 1e-10 - gap)};
                            v.detail = "standard error " + num(get(s, "/standard_error"));
                            return v;
                        }});
    }
    {
        auto c = detail::two_channel_ensemble(Kind::collapse, "slip-identity", 17, {0.5, 0.5});
        c.collapse.trials = 0;
        c.collapse.identity_draws = 1'000'000;
        list.push_back({7, "slip-identity", 10.0, {c}, [](const auto& m) {
                            const double nz = get(m[0].summary, "/slip_identity/nonzero_residuals");
                            const double worst = get(m[0].summary, "/slip_identity/max_abs_residual");
                            return Verdict{7, "", nz == 0.0,
                                           num(nz) + " nonzero residuals in 1e6 draws (max " + num(worst) + ")",
                                           "exactly 0", -nz};
                        }});
    }
    {
        auto c = detail::base(Kind::collapse, "covariance", 18);
        c.ensemble.probabilities = {0.5, 0.5};
        c.ensemble.n_cells = 1;
        c.ensemble.atoms_per_cell = 1000;
        c.ensemble.f = 0.5;
        c.ensemble.params.W = 0.4;
        c.ensemble.params.dt = 0.01;
        c.collapse.trials = 0;
        c.collapse.covariance_samples = 100'000;
        list.push_back({8, "covariance", 60.0, {c}, [](const auto& m) {
                            const auto& s = m[0].summary;
                            double worst = 0.0;
                            std::string ratios;
                            for (const auto& r : s.at(json::json_pointer("/covariance/variance_ratio"))) {
                                worst = std::max(worst, std::abs(r.template get<double>() - 1.0));
                                ratios += (ratios.empty() ? "" : ", ") + num(r.template get<double>());
                            }
                            Verdict v{8, "", worst < 0.05, "empirical / analytic variance = " + ratios, "within 5%",
                                      0.05 - worst};
                            v.detail = "analytic row sum (channel 0) = " + num(get(s, "/covariance/analytic_row_sums/0")) +
                                       " vs empirical " + num(get(s, "/covariance/empirical_row_sums/0"));
                            return v;
                        }});
    }
    {
        auto c = detail::two_channel_ensemble(Kind::collapse, "martingale", 19, {0.3, 0.7});
        c.collapse.trials = 10'000;
        c.checkpoints = {10.0, 50.0, 100.0, 200.0, 400.0};
        list.push_back({9, "martingale", 300.0, {c}, [](const auto& m) {
                            const auto& s = m[0].summary;
                            const double z = get(s, "/monte_carlo/max_abs_z");
                            Verdict v{9, "", z < 3.0, "max |mean p1(t) - 0.3| / se over 5 checkpoints = " + num(z), "< 3",
                                      3.0 - z};
                            v.detail = "timeouts " + num(get(s, "/monte_carlo/timeouts"));
                            return v;
                        }});
    }
    {
        auto two = detail::two_channel_ensemble(Kind::born, "born-two-channel", 20, {0.3, 0.7});
        two.born.trials = 10'000;
        auto three = detail::two_channel_ensemble(Kind::born, "born-three-channel", 21, {0.2, 0.3, 0.5});
        three.born.trials = 10'000;
        list.push_back({10, "born-rule", 600.0, {two, three}, [](const auto& m) {
                            bool pass = true;
                            std::string measured;
                            double margin = std::numeric_limits<double>::infinity();
                            for (const auto& run : m) {
                                const auto& s = run.summary;
                                pass = pass && s.at("all_within_band").template get<bool>() &&
                                       s.at("timeouts").template get<double>() == 0.0;
                                measured += measured.empty() ? "" : "; ";
                                for (const auto& ch : s.at("channels")) {
                                    const double k = ch.at("count").template get<double>();
                                    const double lo = ch.at("band")[0].template get<double>();
                                    const double hi = ch.at("band")[1].template get<double>();
                                    margin = std::min({margin, k - lo, hi - k});
                                    measured += num(ch.at("frequency").template get<double>()) + " ";
                                }
                            }
                            return Verdict{10, "", pass, "frequencies " + measured,
                                           "exact-binomial 3 sigma band of (0.3, 0.7) and (0.2, 0.3, 0.5)", margin};
                        }});
    }
    {
        auto c = detail::two_channel_ensemble(Kind::fokker_planck, "fokker-planck", 22, {0.3, 0.7});
        c.fokker_planck.config.p0 = 0.3;
        c.fokker_planck.config.kappa = 1.0;
        c.fokker_planck.config.t_final = 20.0;
        c.fokker_planck.config.record_interval = 0.5;
        c.fokker_planck.monte_carlo_trials = 100'000;
        list.push_back({11, "fokker-planck", 60.0, {c}, [](const auto& m) {
                            const auto& s = m[0].summary;
                            const double right = get(s, "/absorbed_right");
                            const double fp_err = std::abs(right - 0.3) / 0.3;
                            const double mc = get(s, "/monte_carlo/relative_difference");
                            Verdict v{11, "", fp_err < 0.01 && mc < 0.02,
                                      "absorbed at p = 1: " + num(right) + "; Monte Carlo " +
                                          num(get(s, "/monte_carlo/frequency")) + " (rel. difference " + num(mc) + ")",
                                      "0.3 within 1%; MC within 2%", std::min(0.01 - fp_err, 0.02 - mc)};
                            v.detail = "interior mass left " + num(get(s, "/interior_mass"));
                            return v;
                        }});
    }
    {
        auto c = detail::base(Kind::timescale, "timescale", 23);
        list.push_back({12, "timescale", 1.0, {c}, [](const auto& m) {
                            const auto& s = m[0].summary;
                            const double t = get(s, "/formula_seconds");
                            const double rel = std::abs(t - 1e-4) / 1e-4;
                            const bool flagged = s.at("discrepancy_flagged").template get<bool>();
                            Verdict v{12, "", rel < 1e-9 && flagged, "formula value " + num(t) + " s",
                                      "1e-4 s, quoted value flagged", 1e-9 - rel};
                            v.detail = "quoted value " + num(get(s, "/quoted_seconds")) +
                                       " s does not follow from the formula (ratio " + num(get(s, "/formula_over_quoted")) + ")";
                            return v;
                        }});
    }
    list.push_back({13, "determinism", 0.0, {}, nullptr});
    for (auto& c : list)
        for (auto& s : c.scenarios) s.output_dir = "";
    return list;
}

struct Report {
    std::vector<Verdict> verdicts;
    bool all_pass() const {
        for (const auto& v : verdicts)
            if (!v.pass) return false;
        return !verdicts.empty();
    }
    json to_json() const {
        json a = json::array();
        for (const auto& v : verdicts) a.push_back(v.to_json());
        return {{"all_pass", all_pass()}, {"criteria", a}};
    }
};

inline std::string format_line(const Verdict& v) {
    char rt[64];
    if (v.budget_s > 0.0) std::snprintf(rt, sizeof rt, "%.2f s / %.0f s", v.runtime_s, v.budget_s);
    else std::snprintf(rt, sizeof rt, "%.2f s", v.runtime_s);
    return std::string(v.pass ? "PASS" : "FAIL") + " [" + std::to_string(v.id) + "] " + v.name + ": " + v.measured +
           " | tolerance " + v.tolerance + " | margin " + detail::num(v.margin + 0.0) + " | " + rt +
           (v.detail.empty() ? "" : " | " + v.detail);
}

inline bool matches(const Criterion& c, const std::string& only) {
    return only.empty() || only == c.name || only == std::to_string(c.id);
}

/// Lists the CSV files under dir, relative, in sorted order.
inline std::vector<fs::path> csv_files(const fs::path& dir) {
    std::vector<fs::path> out;
    if (!fs::exists(dir)) return out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(fs::relative(e.path(), dir));
    std::sort(out.begin(), out.end());
    return out;
}

class Suite {
public:
    explicit Suite(fs::path out_dir) : out_(std::move(out_dir)) {}

    /// Runs every criterion matching `only` (name or id; empty runs all).
    /// `on_verdict` is called as each criterion finishes.
    Report run(const std::string& only = "", const std::function<void(const Verdict&)>& on_verdict = {}) {
        auto list = criteria();
        bool any = false;
        for (const auto& c : list) any = any || matches(c, only);
        if (!any) throw ValidationError("no acceptance criterion named '" + only + "'");
        Report rep;
        for (auto& c : list) {
            if (!matches(c, only)) continue;
            Verdict v = c.judge ? run_criterion(c) : determinism(list);
            v.id = c.id;
            v.name = c.name;
            v.budget_s = c.budget_s;
            if (c.budget_s > 0.0 && v.runtime_s > c.budget_s) {
                v.pass = false;
                v.detail += (v.detail.empty() ? "" : "; ") + std::string("runtime budget exceeded");
            }
            if (on_verdict) on_verdict(v);
            rep.verdicts.push_back(std::move(v));
        }
        io::write_atomic(out_ / "acceptance.json", rep.to_json().dump(2) + "\n");
        return rep;
    }

private:
    std::vector<runner::RunManifest> execute_all(const Criterion& c, const fs::path& root) {
        std::vector<runner::RunManifest> out;
        for (auto s : c.scenarios) {
            s.output_dir = (root / s.name).string();
            out.push_back(runner::execute(s));
        }
        return out;
    }

    Verdict run_criterion(const Criterion& c) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            const auto manifests = execute_all(c, out_ / "run-a");
            v = c.judge(manifests);
            done_.insert(c.id);
        } catch (const std::exception& e) {
            v.pass = false;
            v.measured = "error";
            v.tolerance = "-";
            v.margin = -1.0;
            v.detail = e.what();
        }
        v.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return v;
    }

    /// Reruns scenarios 1-12 (running the first pass too when it has not
    /// happened yet) and byte-compares every CSV file.
    Verdict determinism(const std::vector<Criterion>& list) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        std::size_t compared = 0;
        std::vector<std::string> differing;
        try {
            for (const auto& c : list) {
                if (!c.judge) continue;
                if (!done_.count(c.id)) execute_all(c, out_ / "run-a");
                execute_all(c, out_ / "run-b");
                for (const auto& s : c.scenarios) {
                    const auto a = out_ / "run-a" / s.name, b = out_ / "run-b" / s.name;
                    const auto files_a = csv_files(a), files_b = csv_files(b);
                    if (files_a != files_b) differing.push_back(s.name + " (file sets differ)");
                    for (const auto& f : files_a) {
                        ++compared;
                        if (!fs::exists(b / f) || io::read_file(a / f) != io::read_file(b / f))
                            differing.push_back((fs::path(s.name) / f).string());
                    }
                }
            }
            v.pass = differing.empty() && compared > 0;
            v.measured = std::to_string(compared - differing.size()) + " of " + std::to_string(compared) + " CSV files identical";
            v.tolerance = "all byte-identical";
            v.margin = -static_cast<double>(differing.size());
            for (const auto& d : differing) v.detail += (v.detail.empty() ? "differs: " : ", ") + d;
        } catch (const std::exception& e) {
            v.pass = false;
            v.measured = "error";
            v.tolerance = "all byte-identical";
            v.margin = -1.0;
            v.detail = e.what();
        }
        v.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return v;
    }

    fs::path out_;
    std::set<int> done_;
};

}  // namespace collapse_lab::acceptance
