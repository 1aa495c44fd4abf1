#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "collapse_lab/quantum_lattice.hpp"
#include "oracles/dense_lattice.hpp"

using namespace collapse_lab;
using namespace collapse_lab::quantum;

namespace {

LatticeModel model(std::size_t sites, std::size_t atoms, double u, double v) {
    LatticeModel m;
    m.n_sites = sites;
    m.n_atoms = atoms;
    m.u_strength = u;
    m.v_strength = v;
    m.hop_atom = 1.0;
    m.hop_particle = 0.7;
    return m;
}

oracle::DenseModel dense(const LatticeModel& m) {
    return {m.n_sites, m.n_atoms, m.hop_atom, m.hop_particle, m.u_strength, m.v_strength};
}

oracle::Mat to_dense(const SparseOperator& op) {
    const auto n = static_cast<Eigen::Index>(op.dimension());
    oracle::Mat d = oracle::Mat::Zero(n, n);
    op.for_each([&](std::size_t r, std::size_t c, double v) { d(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v; });
    return d;
}

}  // namespace

TEST(LatticeModel, RejectsInvalidModels) {
    EXPECT_THROW(validate(model(1, 1, 1, 0)), ValidationError);
    EXPECT_THROW(validate(model(3, 0, 1, 0)), ValidationError);
    EXPECT_THROW(validate(model(3, 1, std::nan(""), 0)), ValidationError);
    EXPECT_THROW(validate(model(3, 2, 1, INFINITY)), ValidationError);
    auto big = model(10, 6, 1, 1);  // 10^7 * 64 amplitudes
    EXPECT_THROW(validate(big), ValidationError);
    EXPECT_THROW(build_indexed_generator(big), ValidationError);
    big.dimension_cap = 1'000'000'000;
    EXPECT_NO_THROW(validate(big));
}

TEST(IndexedGenerator, FreeGeneratorIsBlockDiagonalKinetic) {
    const auto m = model(3, 2, 0.0, 0.0);
    const auto gen = build_indexed_generator(m);
    const auto& L = gen.layout();
    const oracle::Mat h = to_dense(build_standard_hamiltonian(m));
    gen.op().for_each([&](std::size_t r, std::size_t c, double v) {
        ASSERT_EQ(L.string_of(r), L.string_of(c));
        EXPECT_EQ(v, h(static_cast<Eigen::Index>(L.config_of(r)), static_cast<Eigen::Index>(L.config_of(c))));
    });
    EXPECT_EQ(gen.op().non_zeros(), L.n_strings * build_standard_hamiltonian(m).non_zeros());
    EXPECT_FALSE(gen.flags().particle_atom);
    EXPECT_FALSE(gen.flags().atom_atom);
    EXPECT_TRUE(check_directed_flow(gen).directed);
}

TEST(IndexedGenerator, OneAtomTwoSitesMatchesHandBuiltMatrix) {
    // 2 strings x 4 configurations. config = x_A + 2 x_a.
    const double u = 1.3, ha = 1.0, hp = 0.7;
    const auto m = model(2, 1, u, 0.0);
    oracle::Mat hand = oracle::Mat::Zero(8, 8);
    for (int s = 0; s < 2; ++s)
        for (int c = 0; c < 4; ++c) {
            hand(s * 4 + (c ^ 1), s * 4 + c) += -hp;
            hand(s * 4 + (c ^ 2), s * 4 + c) += -ha;
            if (c == 0 || c == 3) hand(4 + c, s * 4 + c) += u;  // contact lands on string 1
        }
    const oracle::Mat built = to_dense(build_indexed_generator(m).op());
    EXPECT_EQ((built - hand).cwiseAbs().maxCoeff(), 0.0);
    // The 0 -> 1 block is exactly the contact term.
    const oracle::Mat block = built.block(4, 0, 4, 4);
    EXPECT_EQ(block(0, 0), u);
    EXPECT_EQ(block(3, 3), u);
    EXPECT_EQ(block.cwiseAbs().sum(), 2 * u);
}

TEST(IndexedGenerator, TwoAtomContagionBlockIsAtomAtomContact) {
    const double v = 0.9;
    auto m = model(2, 2, 0.0, v);
    const auto gen = build_indexed_generator(m);
    const oracle::Mat built = to_dense(gen.op());
    const auto& L = gen.layout();
    // string bits: atom 0 -> bit 0. (1,0) = 0b01, (1,1) = 0b11.
    const auto ns = static_cast<Eigen::Index>(L.n_space);
    const oracle::Mat block = built.block(3 * ns, 1 * ns, ns, ns);
    for (Eigen::Index x = 0; x < ns; ++x)
        for (Eigen::Index y = 0; y < ns; ++y) {
            const auto xs = static_cast<std::size_t>(x);
            const bool same = oracle::digit(xs, 1, 2) == oracle::digit(xs, 2, 2);
            EXPECT_EQ(block(x, y), (x == y && same) ? v : 0.0) << x << "," << y;
        }
    // With a particle coupling, the same block also picks up U on atom 1.
    m.u_strength = 0.4;
    const oracle::Mat with_u = to_dense(build_indexed_generator(m).op()).block(3 * ns, 1 * ns, ns, ns);
    for (Eigen::Index x = 0; x < ns; ++x) {
        const auto xs = static_cast<std::size_t>(x);
        double expect = 0.0;
        if (oracle::digit(xs, 1, 2) == oracle::digit(xs, 2, 2)) expect += v;
        if (oracle::digit(xs, 0, 2) == oracle::digit(xs, 2, 2)) expect += 0.4;
        EXPECT_EQ(with_u(x, x), expect);
    }
}

TEST(IndexedGenerator, MatchesKroneckerReference) {
    for (auto [sites, atoms] : {std::pair{2, 2}, {3, 2}, {3, 3}, {4, 1}}) {
        const auto m = model(static_cast<std::size_t>(sites), static_cast<std::size_t>(atoms), 1.1, -0.6);
        const oracle::Mat built = to_dense(build_indexed_generator(m).op());
        const oracle::Mat ref = oracle::indexed_generator(dense(m));
        EXPECT_LT((built - ref).cwiseAbs().maxCoeff(), 1e-15) << sites << " sites, " << atoms << " atoms";
        const oracle::Mat hs = to_dense(build_standard_hamiltonian(m));
        EXPECT_LT((hs - oracle::standard_hamiltonian(dense(m))).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(IndexedGenerator, ColumnSumsOverStringsReproduceStandardHamiltonian) {
    // sum_s' H'[(s',x'),(s,x)] = H[x',x] for every source string s.
    const auto m = model(3, 3, 0.8, 1.7);
    const auto gen = build_indexed_generator(m);
    const oracle::Mat h = to_dense(build_standard_hamiltonian(m));
    const auto& L = gen.layout();
    const auto ns = static_cast<Eigen::Index>(L.n_space);
    const oracle::Mat d = to_dense(gen.op());
    for (std::size_t s = 0; s < L.n_strings; ++s) {
        oracle::Mat acc = oracle::Mat::Zero(ns, ns);
        for (std::size_t t = 0; t < L.n_strings; ++t)
            acc += d.block(static_cast<Eigen::Index>(t) * ns, static_cast<Eigen::Index>(s) * ns, ns, ns);
        EXPECT_LT((acc - h).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(DirectedFlow, BuiltGeneratorsAreDirected) {
    EXPECT_TRUE(check_directed_flow(build_indexed_generator(model(3, 3, 1.0, 1.0))).directed);
    EXPECT_TRUE(check_directed_flow(build_indexed_generator(model(4, 2, 0.0, 0.0))).directed);
}

TEST(DirectedFlow, InjectedAdjointShiftIsDetected) {
    const auto gen = build_indexed_generator(model(2, 1, 1.0, 0.0));
    const auto& L = gen.layout();
    // S^dagger: string 1 -> string 0 at the contact configuration.
    const auto bad = gen.with_extra_entries({{L.index(0, 0, 0), L.index(0, 1, 0), 1.0}});
    const auto rep = check_directed_flow(bad);
    EXPECT_FALSE(rep.directed);
    EXPECT_EQ(rep.violations, 1U);
    ASSERT_TRUE(rep.first_violation.has_value());
    EXPECT_EQ(L.string_of(rep.first_violation->row), 0U);
    EXPECT_EQ(L.string_of(rep.first_violation->col), 1U);
}

TEST(NonSelfAdjoint, WitnessExistsIffCouplingsActive) {
    auto w = find_adjoint_witness(build_indexed_generator(model(3, 2, 0.5, 0.0)));
    ASSERT_TRUE(w.has_value());
    EXPECT_GT(w->gap(), 1e-12);
    EXPECT_TRUE(find_adjoint_witness(build_indexed_generator(model(3, 2, 0.0, 0.7))).has_value());
    EXPECT_FALSE(find_adjoint_witness(build_indexed_generator(model(3, 2, 0.0, 0.0))).has_value());
    // A single atom has no atom-atom term, so v alone leaves H' self-adjoint.
    EXPECT_FALSE(find_adjoint_witness(build_indexed_generator(model(3, 1, 0.0, 0.7))).has_value());
}

TEST(NonSelfAdjoint, WitnessHoldsForTheVectorPair) {
    const auto gen = build_indexed_generator(model(3, 2, 0.5, 0.3));
    const auto w = find_adjoint_witness(gen);
    ASSERT_TRUE(w.has_value());
    Amplitudes phi(gen.layout().size()), psi(gen.layout().size());
    phi[w->phi_index] = 1.0;
    psi[w->psi_index] = 1.0;
    EXPECT_NEAR(std::abs(adjoint_gap(gen.op(), phi, psi)), w->gap(), 1e-15);
    // The standard Hamiltonian is symmetric for any vectors.
    const auto m = model(3, 2, 0.5, 0.3);
    const auto h = build_standard_hamiltonian(m);
    const auto a = random_state(m, 1), b = random_state(m, 2);
    EXPECT_LT(std::abs(adjoint_gap(h, a, b)), 1e-14);
}

TEST(EvolveIndexed, ZeroDurationIsIdentity) {
    const auto m = model(3, 2, 1.0, 1.0);
    const auto st = initial_indexed_state(m, random_state(m, 3));
    const auto out = evolve_indexed(st, build_indexed_generator(m), 0.0);
    EXPECT_EQ(out.amplitudes, st.amplitudes);
    EXPECT_EQ(out.time, 0.0);
}

TEST(EvolveIndexed, FreeEvolutionStaysOnAllZeroString) {
    const auto m = model(3, 2, 0.0, 0.0);
    const auto out = evolve_indexed(initial_indexed_state(m, random_state(m, 4)), build_indexed_generator(m), 3.0);
    for (std::size_t s = 1; s < out.layout.n_strings; ++s)
        for (auto z : out.component(0, s)) EXPECT_EQ(z, Complex(0.0, 0.0));
    EXPECT_NEAR(norm(out.component(0, 0)), 1.0, 1e-9);
    EXPECT_EQ(out.time, 3.0);
}

TEST(EvolveIndexed, AgreesWithDenseExponentialOneAtom) {
    const auto m = model(2, 1, 1.5, 0.0);
    const auto psi0 = random_state(m, 5);
    const auto st0 = initial_indexed_state(m, psi0);
    const auto gen = build_indexed_generator(m);
    const oracle::Mat ref = oracle::indexed_generator(dense(m));
    for (double t : {0.5, 2.0, 7.0}) {
        const auto out = evolve_indexed(st0, gen, t, 1e-12);
        const auto expect = oracle::propagate(ref, oracle::to_eigen(st0.amplitudes), t);
        EXPECT_LT((oracle::to_eigen(out.amplitudes) - expect).norm(), 1e-9) << "t = " << t;
    }
}

TEST(EvolveIndexed, RejectsBadArguments) {
    const auto m = model(3, 1, 1.0, 0.0);
    auto st = initial_indexed_state(m, random_state(m, 6));
    const auto gen = build_indexed_generator(m);
    EXPECT_THROW(evolve_indexed(st, gen, 1.0, 0.0), ValidationError);
    st.time = 2.0;
    EXPECT_THROW(evolve_indexed(st, gen, 1.0), ValidationError);
    EXPECT_THROW(initial_indexed_state(m, Amplitudes(3)), ValidationError);
}

TEST(EvolveStandard, ZeroTimeAndUnitarity) {
    const auto m = model(3, 2, 1.0, 1.0);
    const auto psi0 = random_state(m, 7);
    EXPECT_EQ(evolve_standard(psi0, m, 0.0), psi0);
    EXPECT_NEAR(norm(evolve_standard(psi0, m, 10.0)), 1.0, 1e-9);
}

TEST(EvolveStandard, AgreesWithDenseExponentialTwoAtoms) {
    const auto m = model(3, 2, 1.2, 0.8);
    const auto psi0 = random_state(m, 8);
    const oracle::Mat h = oracle::standard_hamiltonian(dense(m));
    for (double t : {1.0, 5.0}) {
        const auto out = evolve_standard(psi0, m, t, 1e-12);
        EXPECT_LT((oracle::to_eigen(out) - oracle::propagate(h, oracle::to_eigen(psi0), t)).norm(), 1e-9);
    }
}

TEST(StringSum, Basics) {
    const auto m = model(2, 1, 1.0, 0.0);
    const auto psi0 = random_state(m, 9);
    auto st = initial_indexed_state(m, psi0);
    EXPECT_EQ(string_sum(st), psi0);
    // Opposite equal components cancel.
    for (std::size_t x = 0; x < st.layout.n_space; ++x)
        st.amplitudes[st.layout.index(0, 1, x)] = -st.amplitudes[st.layout.index(0, 0, x)];
    for (auto z : string_sum(st)) EXPECT_EQ(z, Complex(0.0, 0.0));
}

TEST(StringSum, EquivalenceWithStandardEvolution) {
    const auto m = model(3, 3, 1.4, 1.1);
    const auto psi0 = random_state(m, 10);
    const double tol = 1e-10;
    const auto out = evolve_indexed(initial_indexed_state(m, psi0), build_indexed_generator(m), 4.0, tol);
    const auto ref = evolve_standard(psi0, m, 4.0, tol);
    EXPECT_LT(distance(string_sum(out), ref), 10 * tol * 4.0);
}

TEST(StringSum, AllZeroStringDecouplesFromParticle) {
    auto m = model(3, 2, 1.4, 1.1);
    const auto psi0 = random_state(m, 11);
    const auto out = evolve_indexed(initial_indexed_state(m, psi0), build_indexed_generator(m), 3.0, 1e-11);
    m.u_strength = 0.0;
    const auto ref = evolve_standard(psi0, m, 3.0, 1e-11);
    const auto s0 = out.component(0, 0);
    EXPECT_LT(distance(s0, ref), 1e-9);
}

TEST(StringSum, ComponentsDependOnlyOnTheirDownSet) {
    // Zero every initial component outside the down-set of s; the s component
    // at time t must not change.
    const auto m = model(3, 2, 0.9, 1.3);
    const auto gen = build_indexed_generator(m);
    const auto& L = gen.layout();
    IndexedWaveState full{L, Amplitudes(L.size()), 0.0};
    Rng rng(12);
    std::normal_distribution<double> g;
    for (auto& z : full.amplitudes) z = {g(rng), g(rng)};
    const std::size_t target = 0b01;
    auto reduced = full;
    for (std::size_t i = 0; i < L.size(); ++i)
        if ((L.string_of(i) & target) != L.string_of(i)) reduced.amplitudes[i] = 0.0;
    const auto a = evolve_indexed(full, gen, 2.0, 1e-11);
    const auto b = evolve_indexed(reduced, gen, 2.0, 1e-11);
    EXPECT_LT(distance(a.component(0, target), b.component(0, target)), 1e-12);
    // ... while strings above the target do see the removed amplitudes.
    EXPECT_GT(distance(a.component(0, 0b11), b.component(0, 0b11)), 1e-3);
}

TEST(Fractions, InitialStateIsUnentangledEverywhere) {
    const auto m = model(4, 2, 1.0, 1.0);
    const auto st = initial_indexed_state(m, random_state(m, 13));
    const auto rep = entanglement_fractions(m, st, {{0, 1}, {2, 3}});
    ASSERT_EQ(rep.cells.size(), 2U);
    for (const auto& c : rep.cells) {
        ASSERT_TRUE(c.defined);
        EXPECT_EQ(c.f0, 1.0);
        EXPECT_EQ(c.f1, 0.0);
    }
    EXPECT_NEAR(rep.sum_norm_sq, 1.0, 1e-12);
}

TEST(Fractions, EmptyCellIsUndefinedNotACrash) {
    const auto m = model(3, 1, 1.0, 0.0);
    const std::array<std::size_t, 1> atoms{0};
    const std::array<Complex, 1> amp{Complex{1.0, 0.0}};
    const auto st = initial_indexed_state(m, localized_state(m, 1, atoms, amp));
    const auto rep = entanglement_fractions(m, st, site_cells(3));
    EXPECT_TRUE(rep.cells[0].defined);
    EXPECT_FALSE(rep.cells[1].defined);
    EXPECT_TRUE(std::isnan(rep.cells[1].f1));
    EXPECT_THROW(entanglement_fractions(m, st, {{0, 1}}), ValidationError);
    EXPECT_THROW(entanglement_fractions(m, st, {{0, 1}, {1, 2}}), ValidationError);
}

TEST(Fractions, NormalizationHoldsAfterEvolution) {
    auto m = model(4, 2, 1.5, 1.5);
    m.channel_scale = {1.0, 0.4};
    const std::array<std::size_t, 2> atoms{1, 2};
    const std::array<Complex, 2> amp{Complex{0.6, 0.0}, Complex{0.0, 0.8}};
    const auto st = evolve_indexed(initial_indexed_state(m, localized_state(m, 0, atoms, amp)),
                                   build_indexed_generator(m), 3.0);
    const auto rep = entanglement_fractions(m, st, {{0, 1}, {2, 3}});
    for (const auto& c : rep.cells) {
        ASSERT_TRUE(c.defined);
        EXPECT_NEAR(c.f1 + c.f0, 1.0, 1e-9);
        double mix = 0.0;
        for (std::size_t j = 0; j < 2; ++j) mix += rep.channel_probs[j] * c.f_channel[j];
        EXPECT_NEAR(c.f0, 1.0 - mix, 1e-9);
        EXPECT_GT(c.f1, 0.0);
    }
    EXPECT_NEAR(rep.channel_probs[0], 0.36, 1e-8);
}

TEST(Fractions, EqualChannelCouplingsGiveEqualChannelFractions) {
    auto m = model(3, 2, 1.0, 1.0);
    m.channel_scale = {1.0, 1.0};
    const std::array<std::size_t, 2> atoms{1, 2};
    const double r = 1.0 / std::sqrt(2.0);
    const std::array<Complex, 2> amp{Complex{r, 0.0}, Complex{r, 0.0}};
    const auto st = evolve_indexed(initial_indexed_state(m, localized_state(m, 0, atoms, amp)),
                                   build_indexed_generator(m), 2.5);
    const auto rep = entanglement_fractions(m, st, site_cells(3));
    for (const auto& c : rep.cells) {
        if (!c.defined) continue;
        EXPECT_NEAR(c.f_channel[0], c.f_channel[1], 1e-12);
    }
}

TEST(Fractions, LongRunContagionSaturatesBelowOne) {
    // With |psi''|^2-normalized component weights the all-zero string keeps
    // weight 1 under its own self-adjoint block, so global f1 is bounded by
    // 1 - 1/W where W is the total component weight.
    const auto m = model(3, 3, 2.0, 2.0);
    const auto gen = build_indexed_generator(m);
    auto st = initial_indexed_state(m, random_state(m, 14));
    double previous = 0.0;
    for (double t : {1.0, 2.0, 4.0}) {
        st = evolve_indexed(std::move(st), gen, t);
        const auto rep = entanglement_fractions(m, st, site_cells(3));
        EXPECT_GT(rep.global.f1, previous);
        previous = rep.global.f1;
    }
    st = evolve_indexed(std::move(st), gen, 60.0);
    const auto rep = entanglement_fractions(m, st, site_cells(3));
    double total_weight = 0.0;
    for (auto z : st.amplitudes) total_weight += std::norm(z);
    total_weight /= rep.sum_norm_sq;
    EXPECT_NEAR(std::pow(norm(st.component(0, 0)), 2), 1.0, 1e-8);
    EXPECT_LE(rep.global.f1, 1.0 - 1.0 / total_weight + 1e-12);
    EXPECT_GT(rep.global.f1, 0.7);
}

TEST(Symmetry, BoseSymmetrizedDataStaysExchangeSymmetric) {
    auto m = model(3, 3, 1.0, 1.2);
    m.symmetrize = true;
    const auto psi0 = symmetrize_atoms(m, random_state(m, 15));
    EXPECT_NEAR(norm(psi0), 1.0, 1e-12);
    const auto st = evolve_indexed(initial_indexed_state(m, psi0), build_indexed_generator(m), 2.0, 1e-11);
    EXPECT_LT(exchange_symmetry_defect(m, st), 1e-9);
    const auto raw = evolve_indexed(initial_indexed_state(m, random_state(m, 15)), build_indexed_generator(m), 2.0);
    EXPECT_GT(exchange_symmetry_defect(m, raw), 1e-3);
}
