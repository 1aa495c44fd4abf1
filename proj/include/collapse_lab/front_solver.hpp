#pragma once

// Explicit finite-difference solver for the local-entanglement diffusion
// equation  df_j/dt = D lap f_j + f_j f0 / tau,  f0 = 1 - sum_j p_j f_j.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "collapse_lab/error.hpp"

namespace collapse_lab::front {

enum class Geometry { planar, cylindrical, spherical };

inline int dimension(Geometry g) {
    switch (g) {
        case Geometry::planar: return 1;
        case Geometry::cylindrical: return 2;
        case Geometry::spherical: return 3;
    }
    return 1;
}

inline const char* to_string(Geometry g) {
    switch (g) {
        case Geometry::planar: return "planar";
        case Geometry::cylindrical: return "cylindrical";
        case Geometry::spherical: return "spherical";
    }
    return "planar";
}

inline std::optional<Geometry> parse_geometry(const std::string& s) {
    if (s == "planar" || s == "planar-1D") return Geometry::planar;
    if (s == "cylindrical") return Geometry::cylindrical;
    if (s == "spherical") return Geometry::spherical;
    return std::nullopt;
}

enum class TimeScheme { euler, rk4 };

/// Region where the source channels start fully entangled. channel < 0 means all channels.
struct SourceRegion {
    double lo = 0.0;
    double hi = 1.0;
    int channel = -1;
};

struct FrontConfig {
    /// Non-positive means the kinetic default lambda^2 / (6 tau).
    double diffusion = 0.0;
    double tau = 1.0;
    double lambda = 1.0;
    Geometry geometry = Geometry::planar;
    double domain_length = 60.0;
    double dx = 0.05;
    /// Non-positive means 0.9 of the stability limit, capped by monotone_limit.
    double dt = 0.0;
    double t_final = 40.0;
    std::vector<SourceRegion> sources{SourceRegion{}};
    /// Empty means a single channel with p = 1.
    std::vector<double> channel_probs;
    double snapshot_interval = 1.0;
    /// Cadence of front-position samples; non-positive means every snapshot.
    double track_interval = 0.0;
    double threshold = 0.5;
    TimeScheme scheme = TimeScheme::euler;
};

inline double effective_diffusion(const FrontConfig& c) {
    return c.diffusion > 0.0 ? c.diffusion : c.lambda * c.lambda / (6.0 * c.tau);
}

inline double stability_limit(const FrontConfig& c) {
    return c.dx * c.dx / (2.0 * dimension(c.geometry) * effective_diffusion(c));
}

/// Largest step keeping the explicit update order-preserving once the reaction
/// term is included: 1 - 2 dim D dt / dx^2 >= dt / tau.
inline double monotone_limit(const FrontConfig& c) {
    return 1.0 / (2.0 * dimension(c.geometry) * effective_diffusion(c) / (c.dx * c.dx) + 1.0 / c.tau);
}

inline double effective_dt(const FrontConfig& c) {
    return c.dt > 0.0 ? c.dt : std::min(0.9 * stability_limit(c), monotone_limit(c));
}

inline std::size_t n_channels(const FrontConfig& c) { return c.channel_probs.empty() ? 1 : c.channel_probs.size(); }

/// Pulled-front speed of the single-channel equation.
inline double pulled_speed(double diffusion, double tau) { return 2.0 * std::sqrt(diffusion / tau); }

/// The sound-speed value v / sqrt(3) with v = lambda / tau.
inline double sound_speed_claim(double lambda, double tau) { return lambda / (tau * std::sqrt(3.0)); }

/// Throws ValidationError on hard violations; returns advisory warnings.
inline std::vector<std::string> validate(const FrontConfig& c) {
    std::vector<std::string> errs, warns;
    auto positive = [&](double v, const char* name) {
        if (!(std::isfinite(v) && v > 0.0)) errs.push_back(std::string(name) + " must be positive and finite");
    };
    positive(c.tau, "tau");
    positive(c.lambda, "lambda");
    positive(c.dx, "dx");
    positive(c.domain_length, "domain_length");
    if (!std::isfinite(c.diffusion)) errs.push_back("diffusion must be finite");
    if (!(std::isfinite(c.t_final) && c.t_final >= 0.0)) errs.push_back("t_final must be non-negative");
    if (!(c.threshold > 0.0 && c.threshold < 1.0)) errs.push_back("threshold must lie in (0, 1)");
    if (!(std::isfinite(c.snapshot_interval) && c.snapshot_interval > 0.0)) errs.push_back("snapshot_interval must be positive");
    if (errs.empty()) {
        if (c.domain_length < 2.0 * c.dx) errs.push_back("domain_length must span at least two cells");
        const double limit = stability_limit(c);
        if (c.dt > 0.0 && c.dt > limit * (1.0 + 1e-12))
            errs.push_back("dt = " + std::to_string(c.dt) + " exceeds the stability limit dx^2/(2 dim D) = " + std::to_string(limit));
        if (c.dt > c.tau) errs.push_back("dt must not exceed tau");
        if (c.dx >= c.lambda) warns.push_back("dx >= lambda: the grid does not resolve a mean free path");
    }
    if (!c.channel_probs.empty()) {
        double sum = 0.0;
        for (double p : c.channel_probs) {
            if (!(p >= 0.0 && p <= 1.0)) errs.push_back("channel_probs entries must lie in [0, 1]");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) errs.push_back("channel_probs must sum to 1");
    }
    for (const auto& s : c.sources) {
        if (!(s.lo <= s.hi)) errs.push_back("source region lo must not exceed hi");
        if (s.channel >= static_cast<int>(n_channels(c))) errs.push_back("source channel out of range");
    }
    if (!errs.empty()) {
        std::string msg = "invalid front config:";
        for (const auto& e : errs) msg += "\n  " + e;
        throw ValidationError(msg);
    }
    return warns;
}

struct WaveField {
    double dx = 0.0;
    Geometry geometry = Geometry::planar;
    std::vector<double> probs{1.0};
    /// values[j][i] = f_j at x_i = i dx.
    std::vector<std::vector<double>> values;
    double time = 0.0;

    std::size_t size() const { return values.empty() ? 0 : values[0].size(); }
    double x(std::size_t i) const { return static_cast<double>(i) * dx; }
    double f0(std::size_t i) const {
        double s = 0.0;
        for (std::size_t j = 0; j < values.size(); ++j) s += probs[j] * values[j][i];
        return 1.0 - s;
    }
    /// Total local-entanglement probability, 1 - f0.
    double f1(std::size_t i) const { return values.size() == 1 ? values[0][i] : 1.0 - f0(i); }
    std::vector<double> f1_profile() const {
        std::vector<double> out(size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = f1(i);
        return out;
    }
};

inline WaveField initial_field(const FrontConfig& c) {
    validate(c);
    WaveField w;
    w.dx = c.dx;
    w.geometry = c.geometry;
    w.probs = c.channel_probs.empty() ? std::vector<double>{1.0} : c.channel_probs;
    const auto n = static_cast<std::size_t>(std::llround(c.domain_length / c.dx)) + 1;
    w.values.assign(w.probs.size(), std::vector<double>(n, 0.0));
    for (const auto& s : c.sources)
        for (std::size_t i = 0; i < n; ++i) {
            const double x = w.x(i);
            if (x < s.lo - 1e-12 * c.dx || x > s.hi + 1e-12 * c.dx) continue;
            for (std::size_t j = 0; j < w.values.size(); ++j)
                if (s.channel < 0 || static_cast<std::size_t>(s.channel) == j) w.values[j][i] = 1.0;
        }
    return w;
}

namespace detail {

using Channels = std::vector<std::vector<double>>;

/// Right-hand side D lap f_j + f_j f0 / tau with zero-flux walls. f0 is scratch.
inline void rhs(const Channels& f, const std::vector<double>& probs, double dx, int dim, double D, double tau, Channels& out,
                std::vector<double>& f0) {
    const std::size_t n = f[0].size();
    const double inv_dx2 = 1.0 / (dx * dx);
    f0.assign(n, 1.0);
    for (std::size_t j = 0; j < f.size(); ++j)
        for (std::size_t i = 0; i < n; ++i) f0[i] -= probs[j] * f[j][i];
    for (std::size_t j = 0; j < f.size(); ++j) {
        const auto& u = f[j];
        auto& r = out[j];
        r[0] = 2.0 * dim * (u[1] - u[0]) * inv_dx2;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            r[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * inv_dx2;
            if (dim > 1) r[i] += (dim - 1) * (u[i + 1] - u[i - 1]) * inv_dx2 / (2.0 * static_cast<double>(i));
        }
        const std::size_t m = n - 1;
        r[m] = 2.0 * (u[m - 1] - u[m]) * inv_dx2;
        for (std::size_t i = 0; i < n; ++i) r[i] = D * r[i] + u[i] * f0[i] / tau;
    }
}

inline void rhs(const Channels& f, const std::vector<double>& probs, double dx, int dim, double D, double tau, Channels& out) {
    std::vector<double> f0;
    rhs(f, probs, dx, dim, D, tau, out, f0);
}

inline void clamp_checked(Channels& f, double time) {
    for (auto& ch : f)
        for (double& v : ch) {
            if (!std::isfinite(v) || v < -1e-6 || v > 1.0 + 1e-6)
                throw RuntimeError("front field left [0, 1] beyond tolerance at t = " + std::to_string(time));
            v = std::clamp(v, 0.0, 1.0);
        }
}

}  // namespace detail

/// Advances a field in place, reusing scratch buffers between steps.
class Stepper {
public:
    explicit Stepper(const FrontConfig& c) : cfg_(c), D_(effective_diffusion(c)), limit_(stability_limit(c)) {}

    void advance(WaveField& w, double dt) {
        if (!(dt > 0.0) || dt > limit_ * (1.0 + 1e-12)) throw ValidationError("step size violates the stability limit");
        const int dim = dimension(w.geometry);
        resize(k1_, w);
        detail::rhs(w.values, w.probs, w.dx, dim, D_, cfg_.tau, k1_, f0_);
        if (cfg_.scheme == TimeScheme::euler) {
            for (std::size_t j = 0; j < k1_.size(); ++j)
                for (std::size_t i = 0; i < k1_[j].size(); ++i) w.values[j][i] += dt * k1_[j][i];
        } else {
            resize(k2_, w);
            resize(k3_, w);
            resize(k4_, w);
            resize(tmp_, w);
            auto stage = [&](const detail::Channels& k, double a, detail::Channels& dst) {
                for (std::size_t j = 0; j < k.size(); ++j)
                    for (std::size_t i = 0; i < k[j].size(); ++i) tmp_[j][i] = w.values[j][i] + a * dt * k[j][i];
                detail::rhs(tmp_, w.probs, w.dx, dim, D_, cfg_.tau, dst, f0_);
            };
            stage(k1_, 0.5, k2_);
            stage(k2_, 0.5, k3_);
            stage(k3_, 1.0, k4_);
            for (std::size_t j = 0; j < k1_.size(); ++j)
                for (std::size_t i = 0; i < k1_[j].size(); ++i)
                    w.values[j][i] += dt / 6.0 * (k1_[j][i] + 2.0 * k2_[j][i] + 2.0 * k3_[j][i] + k4_[j][i]);
        }
        w.time += dt;
        detail::clamp_checked(w.values, w.time);
    }

private:
    static void resize(detail::Channels& k, const WaveField& w) {
        k.resize(w.values.size());
        for (auto& ch : k) ch.resize(w.size());
    }

    FrontConfig cfg_;
    double D_;
    double limit_;
    detail::Channels k1_, k2_, k3_, k4_, tmp_;
    std::vector<double> f0_;
};

/// One explicit step of size dt (at most the stability limit).
inline WaveField step(const WaveField& field, const FrontConfig& c, double dt) {
    WaveField out = field;
    Stepper(c).advance(out, dt);
    return out;
}

inline WaveField step(const WaveField& field, const FrontConfig& c) { return step(field, c, effective_dt(c)); }

/// Outermost linearly interpolated crossing of f1 = threshold. A field at or
/// above threshold on the outer wall reports the wall position.
inline std::optional<double> front_position(const WaveField& w, double threshold = 0.5) {
    const std::size_t n = w.size();
    for (std::size_t i = n; i-- > 0;) {
        const double a = w.f1(i);
        if (a < threshold) continue;
        if (i + 1 == n) return w.x(i);
        const double b = w.f1(i + 1);
        return w.x(i) + (a - threshold) / (a - b) * w.dx;
    }
    return std::nullopt;
}

/// f1 interpolated at distance d behind the front; nullopt without a front or off-grid.
inline std::optional<double> f1_behind_front(const WaveField& w, double distance, double threshold = 0.5) {
    const auto pos = front_position(w, threshold);
    if (!pos) return std::nullopt;
    const double x = *pos - distance;
    if (x < 0.0) return std::nullopt;
    const auto i = static_cast<std::size_t>(std::floor(x / w.dx));
    if (i + 1 >= w.size()) return w.f1(w.size() - 1);
    const double t = x / w.dx - static_cast<double>(i);
    return (1.0 - t) * w.f1(i) + t * w.f1(i + 1);
}

/// Smallest distance behind the front at which f1 reaches level, scanning inward.
inline std::optional<double> distance_to_level(const WaveField& w, double level, double threshold = 0.5) {
    const auto pos = front_position(w, threshold);
    if (!pos) return std::nullopt;
    for (std::size_t i = static_cast<std::size_t>(std::floor(*pos / w.dx)) + 1; i-- > 0;) {
        if (i >= w.size()) continue;
        const double a = w.f1(i);
        if (a < level) continue;
        if (i + 1 < w.size() && w.f1(i + 1) < level) {
            const double b = w.f1(i + 1);
            return *pos - (w.x(i) + (a - level) / (a - b) * w.dx);
        }
        return *pos - w.x(i);
    }
    return std::nullopt;
}

/// Integral of f1 with the radial volume weight r^(dim-1), trapezoidal.
inline double mass(const WaveField& w) {
    const int dim = dimension(w.geometry);
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double r = w.x(i);
        const double weight = (i == 0 || i + 1 == w.size()) ? 0.5 : 1.0;
        s += weight * w.f1(i) * std::pow(r, dim - 1);
    }
    return s * w.dx;
}

struct FrontSample {
    double time = 0.0;
    std::optional<double> position;
};

struct Trajectory {
    std::vector<WaveField> snapshots;
    std::vector<FrontSample> front;
    double dt = 0.0;
    std::size_t steps = 0;
    std::vector<std::string> warnings;

    const WaveField& final_field() const { return snapshots.back(); }
};

namespace detail {

inline bool is_multiple(double big, double small) {
    const double r = big / small;
    return std::abs(r - std::round(r)) < 1e-9 * std::max(1.0, r);
}

}  // namespace detail

/// Integrates to t_final. The step is shrunk so that snapshot and tracking
/// times fall on step boundaries whenever t_final is a multiple of them.
inline Trajectory run(const FrontConfig& c) {
    Trajectory traj;
    traj.warnings = validate(c);
    WaveField w = initial_field(c);
    const double dt_max = effective_dt(c);
    const double track = c.track_interval > 0.0 ? c.track_interval : c.snapshot_interval;
    const double base = detail::is_multiple(c.snapshot_interval, track) ? track : c.snapshot_interval;
    const double span = (c.t_final > 0.0 && detail::is_multiple(c.t_final, base)) ? base : c.t_final;
    std::size_t n_steps = 0;
    double dt = dt_max;
    if (c.t_final > 0.0) {
        dt = span / std::ceil(span / dt_max - 1e-9);
        n_steps = static_cast<std::size_t>(std::llround(c.t_final / dt));
    }
    traj.dt = dt;
    traj.steps = n_steps;
    const auto every = [&](double interval) {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(interval / dt)));
    };
    const std::size_t snap_every = every(c.snapshot_interval);
    const std::size_t track_every = every(track);
    traj.snapshots.push_back(w);
    traj.front.push_back({w.time, front_position(w, c.threshold)});
    Stepper stepper(c);
    for (std::size_t k = 1; k <= n_steps; ++k) {
        stepper.advance(w, dt);
        w.time = k == n_steps ? c.t_final : static_cast<double>(k) * dt;
        if (k % snap_every == 0 || k == n_steps) traj.snapshots.push_back(w);
        if (k % track_every == 0 || k == n_steps) traj.front.push_back({w.time, front_position(w, c.threshold)});
    }
    return traj;
}

struct SpeedFit {
    double speed = 0.0;
    double standard_error = 0.0;
    double intercept = 0.0;
    std::size_t points = 0;
};

/// Least-squares slope of front position against time over [t_lo, t_hi].
inline SpeedFit front_speed(const std::vector<FrontSample>& samples, double t_lo, double t_hi) {
    if (!(t_lo < t_hi)) throw ValidationError("fit window must have t_lo < t_hi");
    if (samples.empty() || t_lo < samples.front().time - 1e-12 || t_hi > samples.back().time + 1e-12)
        throw ValidationError("fit window lies outside the trajectory");
    std::vector<double> ts, xs;
    for (const auto& s : samples) {
        if (s.time < t_lo - 1e-12 || s.time > t_hi + 1e-12) continue;
        if (!s.position) throw RuntimeError("no front at t = " + std::to_string(s.time) + " inside the fit window");
        ts.push_back(s.time);
        xs.push_back(*s.position);
    }
    if (ts.size() < 10) throw RuntimeError("speed fit needs at least 10 points, window has " + std::to_string(ts.size()));
    const auto n = static_cast<double>(ts.size());
    double mt = 0.0, mx = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) mt += ts[i], mx += xs[i];
    mt /= n;
    mx /= n;
    double stt = 0.0, stx = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        stt += (ts[i] - mt) * (ts[i] - mt);
        stx += (ts[i] - mt) * (xs[i] - mx);
    }
    SpeedFit fit;
    fit.points = ts.size();
    fit.speed = stx / stt;
    fit.intercept = mx - fit.speed * mt;
    double sse = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double e = xs[i] - (fit.intercept + fit.speed * ts[i]);
        sse += e * e;
    }
    fit.standard_error = std::sqrt(sse / (n - 2.0) / stt);
    return fit;
}

/// Fit over the final half of the trajectory.
inline SpeedFit front_speed(const Trajectory& traj) {
    const double t1 = traj.front.back().time;
    return front_speed(traj.front, 0.5 * t1, t1);
}

}  // namespace collapse_lab::front
