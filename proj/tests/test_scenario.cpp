#include <gtest/gtest.h>

#include <set>

#include "collapse_lab/scenario.hpp"

using namespace collapse_lab;
using namespace collapse_lab::scenario;

namespace {

Errors errors_of(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        return e.errors();
    }
    return {};
}

bool mentions(const Errors& errs, const std::string& needle) {
    for (const auto& e : errs)
        if (e.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST(ParseConfig, MinimalFrontConfigGetsDefaults) {
    const auto c = parse_config_text(R"({"kind": "front", "front": {}})");
    EXPECT_EQ(c.kind, Kind::front);
    EXPECT_EQ(c.master_seed, 1U);
    EXPECT_EQ(c.front.config.dx, 0.05);
    EXPECT_EQ(c.front.config.domain_length, 60.0);
    EXPECT_EQ(c.front.config.geometry, front::Geometry::planar);
    EXPECT_EQ(c.front.config.scheme, front::TimeScheme::euler);
    ASSERT_EQ(c.front.config.sources.size(), 1U);
    EXPECT_EQ(c.front.config.sources[0].channel, -1);
    EXPECT_TRUE(c.checkpoints.empty());
}

TEST(ParseConfig, ValuesAreRead) {
    const auto c = parse_config_text(R"({
        "kind": "front", "master_seed": 18446744073709551615, "output_dir": "o", "checkpoints": [1, 2.5],
        "front": {"geometry": "spherical", "scheme": "rk4", "dx": 0.1, "sources": [{"lo": 0, "hi": 2}],
                  "channel_probs": [0.5, 0.5], "fit_window": [5, 10], "t_final": 20}})");
    EXPECT_EQ(c.master_seed, 18446744073709551615ULL);
    EXPECT_EQ(c.output_dir, "o");
    EXPECT_EQ(c.checkpoints, (std::vector<double>{1.0, 2.5}));
    EXPECT_EQ(c.front.config.geometry, front::Geometry::spherical);
    EXPECT_EQ(c.front.config.scheme, front::TimeScheme::rk4);
    EXPECT_EQ(c.front.config.dx, 0.1);
    EXPECT_EQ(c.front.config.sources[0].hi, 2.0);
    EXPECT_EQ(c.front.config.sources[0].channel, -1);
    EXPECT_EQ(c.front.fit_window, (std::vector<double>{5.0, 10.0}));
}

TEST(ParseConfig, UnknownKeyIsNamed) {
    const auto errs = errors_of(R"({"kind": "front", "front": {"dxx": 0.1}})");
    ASSERT_EQ(errs.size(), 1U);
    EXPECT_NE(errs[0].find("front.dxx"), std::string::npos);
    EXPECT_NE(errs[0].find("'dxx'"), std::string::npos);
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "front", "front": {}, "seed": 3})"), "'seed'"));
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "front", "front": {"sources": [{"lo": 0, "width": 1}]}})"), "front.sources[0].width"));
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "born", "born": {}, "ensemble": {"params": {"w": 0.1}}})"), "ensemble.params.w"));
}

TEST(ParseConfig, SimplexViolationPrintsSum) {
    const auto errs = errors_of(R"({"kind": "born", "born": {}, "ensemble": {"probabilities": [0.3, 0.6]}})");
    ASSERT_FALSE(errs.empty());
    EXPECT_TRUE(mentions(errs, "0.9"));
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "front", "front": {"channel_probs": [0.2, 0.2]}})"), "sum to 1"));
}

TEST(ParseConfig, ReportsAllErrorsNotJustTheFirst) {
    const auto errs = errors_of(R"({
        "kind": "collapse", "bogus": 1, "checkpoints": [3, 1],
        "collapse": {"trials": -4, "trace_runs": 1.5},
        "ensemble": {"probabilities": [0.3, 0.6], "layout": "ring", "params": {"dt": "fast"}},
        "front": {}})");
    EXPECT_TRUE(mentions(errs, "'bogus'"));
    EXPECT_TRUE(mentions(errs, "non-decreasing"));
    EXPECT_TRUE(mentions(errs, "collapse.trials"));
    EXPECT_TRUE(mentions(errs, "collapse.trace_runs"));
    EXPECT_TRUE(mentions(errs, "ensemble.layout"));
    EXPECT_TRUE(mentions(errs, "ensemble.params.dt"));
    EXPECT_TRUE(mentions(errs, "front: block not used"));
    EXPECT_TRUE(mentions(errs, "0.9"));
    EXPECT_GE(errs.size(), 8U);
}

TEST(ParseConfig, StructuralErrors) {
    EXPECT_TRUE(mentions(errors_of(R"({"front": {}})"), "kind: required"));
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "sideways"})"), "'sideways' is not one of"));
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "front"})"), "front: block required"));
    EXPECT_TRUE(mentions(errors_of(R"([1, 2])"), "top level"));
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "front", "front": {)"), "malformed JSON"));
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "front", "front": 3})"), "front: expected an object"));
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "front", "front": {"dx": "small"}})"), "front.dx: expected a number"));
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "front", "front": {}, "master_seed": -1})"), "master_seed"));
    EXPECT_THROW(parse_config("/nonexistent/config.json"), ConfigError);
}

TEST(ParseConfig, IntegralFloatsAcceptedForCounts) {
    const auto c = parse_config_text(R"({"kind": "born", "born": {"trials": 1e4}, "ensemble": {}})");
    EXPECT_EQ(c.born.trials, 10000U);
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "born", "born": {"trials": 100.5}, "ensemble": {}})"), "born.trials"));
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "born", "born": {"trials": 10}, "ensemble": {}})"), "at least 100"));
}

TEST(ParseConfig, SemanticChecksPerKind) {
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "front", "front": {"dx": 0.5, "dt": 1.0}})"), "stability limit"));
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "exact", "exact": {"n_sites": 1}})"), "n_sites"));
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "exact", "exact": {"t_final": 1}, "checkpoints": [2]})"), "exceeds exact.t_final"));
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "wigner", "wigner": {"n": 1}})"), "wigner.n"));
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "collapse", "collapse": {}, "ensemble": {"params": {"W": 0.5}}})"), "W"));
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "fokker-planck", "fokker_planck": {"p0": 1.5}})"), "p0"));
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "fokker-planck", "fokker_planck": {"monte_carlo_trials": 10},
                                        "ensemble": {"probabilities": [0.2, 0.3, 0.5]}})"),
                         "two channels"));
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "timescale", "timescale": {"lambda": 0}})"), "positive"));
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "full-pipeline", "front": {"channel_probs": [1]}})"), "taken from the ensemble"));
}

TEST(ParseConfig, ExpectedKind) {
    EXPECT_EQ(parse_config_text(R"({"wigner": {"n": 8}})", Kind::wigner).wigner.n, 8U);
    const auto c = parse_config_text(R"({"kind": "wigner", "wigner": {}})", Kind::wigner);
    EXPECT_EQ(c.kind, Kind::wigner);
    try {
        parse_config_text(R"({"kind": "front", "front": {}})", Kind::wigner);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("'wigner' was requested"), std::string::npos);
    }
}

TEST(ParseConfig, AmplitudesDefineProbabilities) {
    const auto c = parse_config_text(R"({"kind": "born", "born": {}, "ensemble": {"amplitudes": [[0.6, 0], [0, 0.8]]}})");
    const auto p = c.ensemble.spec().probabilities();
    EXPECT_NEAR(p[0], 0.36, 1e-15);
    EXPECT_NEAR(p[1], 0.64, 1e-15);
    EXPECT_TRUE(mentions(errors_of(R"({"kind": "born", "born": {}, "ensemble": {"amplitudes": [[0.6]]}})"), "[re, im]"));
}

TEST(EffectiveConfig, RoundTripsForEveryKind) {
    for (const auto& [kind, name] : kind_names()) {
        const auto c = default_config(kind);
        const auto j = to_json(c);
        const auto back = from_json(j);
        EXPECT_EQ(to_json(back).dump(), j.dump()) << name;
        EXPECT_EQ(j.at("kind"), name);
        for (const auto& blk : blocks_for(kind)) EXPECT_TRUE(j.contains(blk)) << name << " " << blk;
    }
}

TEST(Schema, CoversEveryKeyAndForbidsExtras) {
    const auto s = schema();
    EXPECT_EQ(s.at("additionalProperties"), false);
    ScenarioConfig c;
    for (const auto& blk : all_blocks()) {
        const auto& props = s.at("properties").at(blk);
        EXPECT_EQ(props.at("additionalProperties"), false) << blk;
        Binder b;
        bind_block(blk, b, c);
        std::set<std::string> keys;
        for (const auto& f : b.fields) keys.insert(f.key);
        std::set<std::string> listed;
        for (auto it = props.at("properties").begin(); it != props.at("properties").end(); ++it) listed.insert(it.key());
        EXPECT_EQ(keys, listed) << blk;
    }
    EXPECT_EQ(s.at("properties").at("kind").at("enum").size(), kind_names().size());
    EXPECT_EQ(s.at("properties").at("ensemble").at("properties").at("params").at("properties").size(), 6U);
}
