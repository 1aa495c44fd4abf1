#include <gtest/gtest.h>

#include <cmath>

#include "collapse_lab/front_solver.hpp"

using namespace collapse_lab;
using namespace collapse_lab::front;

namespace {

FrontConfig small_config() {
    FrontConfig c;
    c.domain_length = 20.0;
    c.dx = 0.1;
    c.t_final = 5.0;
    return c;
}

WaveField uniform(const FrontConfig& c, double value) {
    auto w = initial_field(c);
    for (auto& ch : w.values) std::fill(ch.begin(), ch.end(), value);
    return w;
}

WaveField profile(double dx, std::size_t n, auto fn) {
    WaveField w;
    w.dx = dx;
    w.values.assign(1, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) w.values[0][i] = fn(w.x(i));
    return w;
}

}  // namespace

TEST(FrontConfig, DefaultDiffusionIsKineticValue) {
    FrontConfig c;
    c.lambda = 2.0;
    c.tau = 0.5;
    EXPECT_DOUBLE_EQ(effective_diffusion(c), 4.0 / 3.0);
    EXPECT_DOUBLE_EQ(pulled_speed(1.0 / 6.0, 1.0), 2.0 / std::sqrt(6.0));
    EXPECT_DOUBLE_EQ(sound_speed_claim(1.0, 1.0), 1.0 / std::sqrt(3.0));
}

TEST(FrontConfig, Validation) {
    auto c = small_config();
    EXPECT_TRUE(validate(c).empty());
    c.dt = 1.01 * stability_limit(c);
    EXPECT_THROW(validate(c), ValidationError);
    c = small_config();
    c.geometry = Geometry::spherical;
    c.dt = stability_limit(small_config());  // planar limit is 3x the spherical one
    EXPECT_THROW(validate(c), ValidationError);
    c = small_config();
    c.channel_probs = {0.5, 0.6};
    EXPECT_THROW(validate(c), ValidationError);
    c = small_config();
    c.dx = 1.5;
    c.domain_length = 30.0;
    EXPECT_EQ(validate(c).size(), 1U);
    c = small_config();
    c.sources = {{3.0, 1.0, -1}};
    EXPECT_THROW(validate(c), ValidationError);
}

TEST(Step, FixedPointsArePreservedExactly) {
    for (auto g : {Geometry::planar, Geometry::cylindrical, Geometry::spherical})
        for (auto scheme : {TimeScheme::euler, TimeScheme::rk4}) {
            auto c = small_config();
            c.geometry = g;
            c.scheme = scheme;
            for (double v : {0.0, 1.0}) {
                auto w = uniform(c, v);
                for (int k = 0; k < 50; ++k) w = step(w, c);
                for (double f : w.values[0]) EXPECT_EQ(f, v);
            }
        }
}

TEST(Step, SmallUniformFieldGrowsLikeLinearizedOde) {
    auto c = small_config();
    c.scheme = TimeScheme::rk4;
    const double eps = 1e-8;
    auto w = uniform(c, eps);
    const double dt = 0.005;
    for (int k = 0; k < 20; ++k) w = step(w, c, dt);
    const double expect = eps * std::exp(0.1);
    for (double f : w.values[0]) EXPECT_NEAR(f / expect, 1.0, 1e-7);
}

TEST(Step, EulerConvergesToLogisticSolution) {
    // Uniform field: f' = f(1 - f), f(t) = a e^t / (1 - a + a e^t).
    auto c = small_config();
    const double a = 0.1, t = 1.0;
    const double exact = a * std::exp(t) / (1.0 - a + a * std::exp(t));
    double prev_err = 1.0;
    for (int n : {100, 200, 400}) {
        auto w = uniform(c, a);
        for (int k = 0; k < n; ++k) w = step(w, c, t / n);
        const double err = std::abs(w.values[0][5] - exact);
        EXPECT_LT(err, prev_err / 1.8);
        prev_err = err;
    }
    EXPECT_LT(prev_err, 1e-3);
}

TEST(Step, RadialLaplacianIsExactOnQuadratics) {
    // Central differences reproduce lap(r^2) = 2 dim, including the r = 0 node.
    for (int dim = 1; dim <= 3; ++dim) {
        const std::size_t n = 30;
        std::vector<std::vector<double>> f(1, std::vector<double>(n)), out = f;
        for (std::size_t i = 0; i < n; ++i) f[0][i] = 1e-9 * std::pow(0.1 * static_cast<double>(i), 2);
        detail::rhs(f, {1.0}, 0.1, dim, 1.0, 1e300, out);
        for (std::size_t i = 0; i + 1 < n; ++i) EXPECT_NEAR(out[0][i] / 1e-9, 2.0 * dim, 1e-6) << dim << " " << i;
    }
}

TEST(Step, ComparisonPrincipleHolds) {
    for (auto g : {Geometry::planar, Geometry::spherical}) {
        auto c = small_config();
        c.geometry = g;
        auto f = initial_field(c), h = f;
        for (std::size_t i = 0; i < f.size(); ++i) {
            f.values[0][i] = 0.4 * std::exp(-0.3 * f.x(i)) * (1.0 + 0.5 * std::sin(3.0 * f.x(i)));
            h.values[0][i] = std::min(1.0, f.values[0][i] + 0.05 * std::abs(std::cos(f.x(i))));
        }
        for (int k = 0; k < 400; ++k) {
            f = step(f, c);
            h = step(h, c);
        }
        for (std::size_t i = 0; i < f.size(); ++i) EXPECT_LE(f.values[0][i], h.values[0][i]);
    }
}

TEST(Step, TwoChannelIdentityHolds) {
    auto c = small_config();
    c.channel_probs = {0.3, 0.7};
    c.sources = {{0.0, 1.0, -1}, {5.0, 6.0, -1}};
    auto w = initial_field(c);
    for (int k = 0; k < 200; ++k) w = step(w, c);
    for (std::size_t i = 0; i < w.size(); ++i) {
        EXPECT_EQ(w.f0(i), 1.0 - (0.3 * w.values[0][i] + 0.7 * w.values[1][i]));
        EXPECT_GE(w.f0(i), 0.0);
        EXPECT_LE(w.f0(i), 1.0);
    }
}

TEST(Step, OrderPreservingOnlyBelowMonotoneLimit) {
    // At the bare diffusive limit the reaction term can push f past 1.
    auto c = small_config();
    c.dt = stability_limit(c);
    auto w = initial_field(c);
    w.values[0][5] = 0.5;  // dip surrounded by fully entangled nodes
    EXPECT_THROW(w = step(w, c), RuntimeError);
    c.dt = monotone_limit(c);
    EXPECT_NO_THROW(step(initial_field(c), c));
}

TEST(Step, SingleChannelSourceOvershootsAndIsRejected) {
    // With only channel 0 seeded, f0 = 1 - 0.3 f_0 stays positive at f_0 = 1,
    // so the shared-f0 reaction term drives f_0 past 1.
    auto c = small_config();
    c.channel_probs = {0.3, 0.7};
    c.sources = {{0.0, 1.0, 0}};
    auto w = initial_field(c);
    EXPECT_THROW(for (int k = 0; k < 200; ++k) w = step(w, c), RuntimeError);
}

TEST(Run, ZeroSourceGivesZeroTrajectory) {
    auto c = small_config();
    c.sources.clear();
    const auto traj = run(c);
    EXPECT_EQ(traj.final_field().time, c.t_final);
    for (const auto& snap : traj.snapshots)
        for (double f : snap.values[0]) EXPECT_EQ(f, 0.0);
    for (const auto& s : traj.front) EXPECT_FALSE(s.position.has_value());
}

TEST(Run, SymmetricTwoChannelRunKeepsChannelsEqual) {
    auto c = small_config();
    c.channel_probs = {0.5, 0.5};
    const auto traj = run(c);
    for (const auto& snap : traj.snapshots) EXPECT_EQ(snap.values[0], snap.values[1]);
    // Equal channels with p = 1/2 each reduce to the single-channel equation.
    auto single = small_config();
    const auto ref = run(single);
    for (std::size_t i = 0; i < ref.final_field().size(); ++i)
        EXPECT_NEAR(traj.final_field().f1(i), ref.final_field().f1(i), 1e-12);
}

TEST(Run, MassIsNondecreasing) {
    for (auto g : {Geometry::planar, Geometry::cylindrical, Geometry::spherical}) {
        auto c = small_config();
        c.geometry = g;
        c.snapshot_interval = 0.25;
        const auto traj = run(c);
        for (std::size_t k = 1; k < traj.snapshots.size(); ++k)
            EXPECT_GE(mass(traj.snapshots[k]), mass(traj.snapshots[k - 1]));
    }
}

TEST(Run, SnapshotCadenceAndFinalTime) {
    auto c = small_config();
    c.t_final = 2.0;
    c.snapshot_interval = 0.5;
    const auto traj = run(c);
    ASSERT_EQ(traj.snapshots.size(), 5U);
    EXPECT_EQ(traj.snapshots.back().time, 2.0);
    EXPECT_NEAR(traj.snapshots[2].time, 1.0, 1e-9);
}

TEST(FrontPosition, StepProfile) {
    const auto w = profile(0.1, 100, [](double x) { return x < 2.0 - 1e-9 ? 1.0 : 0.0; });
    const auto pos = front_position(w);
    ASSERT_TRUE(pos.has_value());
    EXPECT_NEAR(*pos, 2.0, 0.5 * w.dx + 1e-12);
    const auto mid = profile(0.1, 100, [](double x) { return x < 2.0 - 1e-9 ? 1.0 : (x < 2.0 + 1e-9 ? 0.5 : 0.0); });
    EXPECT_NEAR(*front_position(mid), 2.0, 1e-12);
}

TEST(FrontPosition, ZeroFieldHasNoFront) {
    EXPECT_FALSE(front_position(profile(0.1, 50, [](double) { return 0.0; })).has_value());
}

TEST(FrontPosition, SmoothProfileCrossingNearSteepestDescent) {
    const double x0 = 7.33;
    const auto w = profile(0.05, 400, [&](double x) { return 0.5 * (1.0 - std::tanh((x - x0) / 1.2)); });
    EXPECT_NEAR(*front_position(w), x0, w.dx);
    // Outermost crossing wins when the profile re-crosses the threshold.
    const auto two = profile(0.05, 400, [](double x) { return (x < 3.0 || (x > 8.0 && x < 12.0)) ? 1.0 : 0.0; });
    EXPECT_NEAR(*front_position(two), 12.0, 0.05);
}

TEST(FrontSpeed, StationaryProfileHasZeroSpeed) {
    std::vector<FrontSample> s;
    for (int k = 0; k <= 20; ++k) s.push_back({0.5 * k, 3.0});
    const auto fit = front_speed(s, 0.0, 10.0);
    EXPECT_EQ(fit.speed, 0.0);
    EXPECT_EQ(fit.standard_error, 0.0);
    EXPECT_EQ(fit.points, 21U);
}

TEST(FrontSpeed, ExactLinearMotionAndErrors) {
    std::vector<FrontSample> s;
    for (int k = 0; k <= 20; ++k) s.push_back({1.0 * k, 2.0 + 0.75 * k});
    EXPECT_NEAR(front_speed(s, 0.0, 20.0).speed, 0.75, 1e-14);
    EXPECT_THROW(front_speed(s, 0.0, 5.0), RuntimeError);
    EXPECT_THROW(front_speed(s, 5.0, 40.0), ValidationError);
    s[15].position.reset();
    EXPECT_THROW(front_speed(s, 10.0, 20.0), RuntimeError);
}

TEST(FrontSpeed, ApproachesPulledSpeed) {
    FrontConfig c;
    c.dx = 0.1;
    c.t_final = 120.0;
    c.domain_length = 110.0;
    c.track_interval = 0.5;
    c.snapshot_interval = 20.0;
    c.scheme = TimeScheme::rk4;
    const auto fit = front_speed(run(c));
    const double target = pulled_speed(effective_diffusion(c), c.tau);
    // Logarithmic relaxation from below: the window-averaged slope lags by about 0.85/t_final.
    EXPECT_LT(fit.speed, target);
    EXPECT_NEAR(fit.speed / target, 1.0, 0.02);
}

TEST(FrontSpeed, DiffusionTimesFourDoublesSpeed) {
    FrontConfig a;
    a.dx = 0.1;
    a.t_final = 60.0;
    a.domain_length = 60.0;
    a.track_interval = 0.5;
    a.snapshot_interval = 30.0;
    a.scheme = TimeScheme::rk4;
    auto b = a;
    b.diffusion = 4.0 * effective_diffusion(a);
    b.domain_length = 120.0;
    b.dx = 0.2;
    b.sources = {{0.0, 2.0, -1}};
    b.dt = a.dt = 0.9 * stability_limit(a);
    const auto fa = front_speed(run(a)), fb = front_speed(run(b));
    // Same grid in scaled units, so the ratio is 2 up to rounding.
    EXPECT_NEAR(fb.speed / fa.speed, 2.0, 1e-9);
    b.dx = 0.1;
    b.sources = {{0.0, 1.0, -1}};
    b.dt = 0.9 * stability_limit(b);
    const auto fc = front_speed(run(b));
    EXPECT_NEAR(fc.speed / fa.speed, 2.0, 2.0 * 0.01 + 3.0 * (fa.standard_error + fc.standard_error));
}

TEST(Profile, TailBehindFrontDecaysAtLinearizedRate) {
    // Near f = 1 the travelling wave obeys D g'' + c g' - g/tau = 0 for g = 1 - f,
    // so g ~ exp(-mu s) at distance s behind the front with
    // mu = (sqrt(c^2 + 4D/tau) - c) / (2D).
    FrontConfig c;
    c.dx = 0.05;
    c.t_final = 80.0;
    c.domain_length = 80.0;
    c.snapshot_interval = 80.0;
    const auto w = run(c).final_field();
    const double D = effective_diffusion(c), v = pulled_speed(D, c.tau);
    const double mu = (std::sqrt(v * v + 4.0 * D / c.tau) - v) / (2.0 * D);
    const double g3 = 1.0 - *f1_behind_front(w, 3.0), g6 = 1.0 - *f1_behind_front(w, 6.0);
    EXPECT_NEAR(std::log(g3 / g6) / 3.0, mu, 0.03 * mu);
    // One mean free path behind the front, f1 is well short of 0.99.
    const double at_one = *f1_behind_front(w, 1.0);
    EXPECT_GT(at_one, 0.7);
    EXPECT_LT(at_one, 0.8);
    EXPECT_GT(*distance_to_level(w, 0.99), 3.5);
}
