#include <gtest/gtest.h>

#include <numbers>

#include "oracle/dense_oracle.hpp"
#include "sptc/exact.hpp"

using namespace sptc;
using std::numbers::pi;

namespace {

const double kLn2 = std::log(2.0);

ModelParams ideal(int L, double delta = 0.0) {
    ModelParams p;
    p.L = L;
    p.delta = delta;
    return p;
}

ModelParams generic(int L, double delta = 0.1) {
    ModelParams p = ideal(L, delta);
    p.V = 0.3;
    p.dV = 0.2;
    p.h = 0.25;
    p.dh = 0.2;
    return p;
}

StateVector random_state(int L, std::uint64_t seed) {
    CounterRng rng(seed);
    Eigen::VectorXcd a(StateVector::dim_of(L));
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
    a.normalize();
    return StateVector(L, a);
}

PauliString z(int site) { return PauliString(1.0, {{site, Axis::Z}}); }

} // namespace

TEST(PauliExp, ZeroAngleIsIdentity) {
    const auto s = random_state(4, 1);
    const auto t = apply_pauli_exp(s, PauliString(1.0, {{2, Axis::Y}, {3, Axis::X}}), 0.0);
    EXPECT_LT((s.amplitudes() - t.amplitudes()).norm(), 1e-15);
}

TEST(PauliExp, SingleXQuarterTurn) {
    const auto t = apply_pauli_exp(StateVector(2), PauliString(1.0, {{1, Axis::X}}), pi / 2);
    EXPECT_NEAR(std::abs(t[1] - cplx(0, 1)), 0, 1e-15);
    EXPECT_NEAR(std::abs(t[0]), 0, 1e-15);
}

TEST(PauliExp, StabilizerOnAllOnes) {
    const double th = 0.37;
    const auto t = apply_pauli_exp(StateVector::basis(3, 7), stabilizer(3, 2, Boundary::Periodic), th);
    EXPECT_NEAR(std::abs(t[7] - std::cos(th)), 0, 1e-15);
    EXPECT_NEAR(std::abs(t[5] - cplx(0, std::sin(th))), 0, 1e-15);
}

TEST(PauliExp, MatchesDenseExponential) {
    const int L = 6;
    CounterRng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<PauliFactor> f;
        for (int s = 1; s <= L; ++s) {
            const auto a = rng.below(4);
            if (a < 3) f.push_back({s, static_cast<Axis>(a)});
        }
        const PauliString p(rng.uniform(-2, 2), f);
        const double th = rng.uniform(-3, 3);
        const auto s = random_state(L, 100 + trial);
        const auto got = apply_pauli_exp(s, p, th);
        const oracle::Vec want = oracle::expm_herm(oracle::dense(L, p), -th) * s.amplitudes();
        EXPECT_LT((got.amplitudes() - want).norm(), 1e-12);
        EXPECT_NEAR(got.norm(), 1.0, 1e-12);
    }
}

TEST(PauliExp, OutOfRangeSite) {
    EXPECT_THROW(apply_pauli_exp(StateVector(3), PauliString(1.0, {{4, Axis::X}}), 0.1), IndexError);
}

TEST(U1, PerfectFlip) {
    const int L = 5;
    const auto t = evolve_u1(StateVector(L), 0.0);
    const cplx phase = std::pow(cplx(0, -1), L);
    EXPECT_NEAR(std::abs(t[(1 << L) - 1] - phase), 0, 1e-14);
    const auto s = random_state(L, 9);
    const auto u = evolve_u1(s, 0.0);
    for (int j = 1; j <= L; ++j) EXPECT_NEAR(pauli_expectation(u, z(j)), -pauli_expectation(s, z(j)), 1e-12);
}

TEST(U1, MatchesDense) {
    const auto s = random_state(4, 2);
    const auto t = evolve_u1(s, 0.3);
    EXPECT_LT((t.amplitudes() - oracle::u1(4, 0.3) * s.amplitudes()).norm(), 1e-12);
}

TEST(U2, IdealLimitTrotterEqualsKrylov) {
    const auto r = sample_realization(ideal(8), 21);
    const auto terms = build_grouped_terms(r);
    const auto s = random_state(8, 5);
    const auto k = evolve_u2(s, terms, 1.0, Krylov{1e-12, 30});
    for (double dt : {1.0, 0.5, 0.05, 0.3}) {
        if (dt == 0.3) {
            // not a divisor, but the ideal limit takes one exact step anyway
            const auto t = evolve_u2(s, terms, 1.0, Trotter{dt});
            EXPECT_LT((t.amplitudes() - k.amplitudes()).norm(), 1e-8);
            continue;
        }
        const auto t = evolve_u2(s, terms, 1.0, Trotter{dt});
        EXPECT_LT((t.amplitudes() - k.amplitudes()).norm(), 1e-8) << dt;
    }
}

TEST(U2, KrylovMatchesDense) {
    const auto r = sample_realization(generic(6), 4);
    const auto s = random_state(6, 7);
    KrylovStats st;
    const auto all = build_grouped_terms(r).all();
    auto apply_h = [&](const Eigen::VectorXcd& in, Eigen::VectorXcd& out) { apply_terms(all, in, out); };
    const auto got = expm_multiply_hermitian(apply_h, s.amplitudes(), 2.5, 1e-10, 30, &st);
    const oracle::Vec want = oracle::expm_herm(oracle::h2(r), 2.5) * s.amplitudes();
    EXPECT_LT((got - want).norm(), 1e-9);
    EXPECT_GT(st.steps, 0);
    // restart path with a tiny subspace
    const auto small = expm_multiply_hermitian(apply_h, s.amplitudes(), 2.5, 1e-10, 6);
    EXPECT_LT((small - want).norm(), 1e-9);
}

TEST(U2, TrotterFirstOrderScaling) {
    const auto r = sample_realization(generic(6), 8);
    const auto terms = build_grouped_terms(r);
    const auto s = random_state(6, 12);
    const auto ref = evolve_u2(s, terms, 1.0, Krylov{1e-12, 30});
    auto err = [&](double dt) {
        return (evolve_u2(s, terms, 1.0, Trotter{dt}).amplitudes() - ref.amplitudes()).norm();
    };
    const double e1 = err(0.02), e2 = err(0.01);
    EXPECT_NEAR(e1 / e2, 2.0, 0.4);
    // disorder near a typical working point (V, h ~ 0.1)
    auto pw = generic(6);
    pw.V = pw.h = 0.1;
    pw.dV = pw.dh = 0.05;
    const auto rw = sample_realization(pw, 8);
    const auto tw = build_grouped_terms(rw);
    const double ew = (evolve_u2(s, tw, 1.0, Trotter{0.01}).amplitudes() -
                       evolve_u2(s, tw, 1.0, Krylov{1e-10, 30}).amplitudes()).norm();
    EXPECT_LT(ew, 5e-3);
    // the product formula is the documented one: D C B A applied per substep
    const auto one = evolve_u2(s, terms, 1.0, Trotter{1.0});
    oracle::Mat step = oracle::Mat::Identity(64, 64);
    for (const auto* g : {&terms.A, &terms.B, &terms.C, &terms.D})
        step = oracle::expm_herm(oracle::dense_sum(6, *g), 1.0) * step;
    EXPECT_LT((one.amplitudes() - step * s.amplitudes()).norm(), 1e-12);
}

TEST(U2, ZeroDurationAndBadStep) {
    const auto r = sample_realization(generic(5), 1);
    const auto terms = build_grouped_terms(r);
    const auto s = random_state(5, 1);
    EXPECT_EQ(evolve_u2(s, terms, 0.0, Trotter{}).amplitudes(), s.amplitudes());
    EXPECT_THROW(evolve_u2(s, terms, 1.0, Trotter{0.3}), ParamError);
    EXPECT_THROW(evolve_u2(s, terms, 1.0, Krylov{0.0, 30}), ParamError);
}

TEST(Floquet, EdgeAlternatesInIdealLimit) {
    const auto r = sample_realization(ideal(8), 3);
    StateVector s(8);
    for (int n = 1; n <= 12; ++n) {
        s = floquet_step(std::move(s), r, Trotter{});
        EXPECT_NEAR(pauli_expectation(s, z(1)), n % 2 ? -1.0 : 1.0, 1e-12);
        EXPECT_NEAR(pauli_expectation(s, z(8)), n % 2 ? -1.0 : 1.0, 1e-12);
    }
}

TEST(Floquet, MidChainSingleStabilizerRotation) {
    // all ones, one period: U1 flips to all zeros, then only S_j rotates Z_j,
    // so <Z_j> = cos(2 J_j) for a bulk site
    auto r = sample_realization(ideal(6), 1);
    r.J[2] = pi / 4;
    const auto s = floquet_step(StateVector::basis(6, 63), r, Trotter{});
    EXPECT_NEAR(pauli_expectation(s, z(3)), 0.0, 1e-12);
    for (int j = 2; j <= 5; ++j) {
        const auto t = floquet_step(StateVector::basis(6, 63), r, Trotter{});
        EXPECT_NEAR(pauli_expectation(t, z(j)), std::cos(2 * r.J[j - 1]), 1e-12) << j;
    }
}

TEST(Floquet, MatchesDenseFloquetOperator) {
    const auto r = sample_realization(generic(6, 0.2), 6);
    const auto s = random_state(6, 3);
    const auto got = floquet_step(s, r, Krylov{1e-12, 30});
    EXPECT_LT((got.amplitudes() - oracle::floquet(r) * s.amplitudes()).norm(), 1e-10);
}

TEST(Floquet, ParitiesConserved) {
    const auto r = sample_realization(generic(6, 0.37), 2);
    auto s = random_state(6, 4);
    const auto pe = sublattice_parity(6, 0), po = sublattice_parity(6, 1);
    const double e0 = pauli_expectation(s, pe), o0 = pauli_expectation(s, po);
    for (int n = 0; n < 5; ++n) {
        s = floquet_step(std::move(s), r, Trotter{});
        EXPECT_NEAR(s.norm(), 1.0, 1e-10);
        EXPECT_NEAR(pauli_expectation(s, pe), e0, 1e-8);
        EXPECT_NEAR(pauli_expectation(s, po), o0, 1e-8);
    }
}

TEST(Floquet, ThermalProfileIsZeroMeanNoise) {
    // delta = 0.8: after 10 periods the ensemble mean of every <Z_j> is within
    // 3 standard errors of zero, plus a 0.05 allowance for the finite ensemble.
    auto p = generic(8, 0.8);
    p.V = p.h = 0.05;
    p.dV = p.dh = 0.05;
    const int R = 30;
    std::vector<std::vector<double>> vals(8);
    for (int i = 0; i < R; ++i) {
        const auto r = sample_realization(p, derive_seed(77, i));
        const auto terms = hamiltonian_terms(r);
        StateVector s(8);
        for (int n = 0; n < 10; ++n) s = floquet_step(std::move(s), p, terms, Trotter{});
        for (int j = 1; j <= 8; ++j) vals[j - 1].push_back(pauli_expectation(s, z(j)));
    }
    for (int j = 0; j < 8; ++j) {
        double m = 0, v = 0;
        for (double x : vals[j]) m += x / R;
        for (double x : vals[j]) v += (x - m) * (x - m) / (R - 1);
        EXPECT_LT(std::abs(m), 3 * std::sqrt(v / R) + 0.05) << "site " << j + 1;
    }
}

TEST(Spectrum, IdealPairingAndDegeneracy) {
    const auto r = sample_realization(ideal(6), 10);
    const auto rep = floquet_spectrum(r, Trotter{});
    EXPECT_EQ(rep.quasienergies.size(), 64u);
    EXPECT_LT(rep.pairing_defect, 1e-8);
    EXPECT_EQ(rep.min_multiplicity, 2);
    EXPECT_EQ(rep.degeneracy.size(), 1u);
    EXPECT_TRUE(std::is_sorted(rep.quasienergies.begin(), rep.quasienergies.end()));
    for (double q : rep.quasienergies) {
        EXPECT_GT(q, -pi);
        EXPECT_LE(q, pi);
    }
}

TEST(Spectrum, ThermalBreaksPairing) {
    auto p = generic(6, 0.8);
    p.V = p.h = 0.2;
    p.dV = p.dh = 0.0;
    const auto rep = floquet_spectrum(sample_realization(p, 1), Krylov{});
    EXPECT_GT(rep.pairing_defect, 0.1);
}

TEST(Spectrum, EigenvectorsReproduceDynamics) {
    const auto r = sample_realization(generic(6, 0.15), 3);
    const auto es = floquet_eigensystem(r, Trotter{});
    StateVector direct(6);
    const Eigen::VectorXcd c = es.eigenvectors.adjoint() * direct.amplitudes();
    for (int n = 1; n <= 6; ++n) {
        direct = floquet_step(std::move(direct), r, Trotter{});
        Eigen::VectorXcd cn(c.size());
        for (Eigen::Index i = 0; i < c.size(); ++i) cn[i] = c[i] * std::exp(cplx(0, -n * es.quasienergies[i]));
        const StateVector spectral(6, es.eigenvectors * cn);
        EXPECT_NEAR(pauli_expectation(spectral, z(1)), pauli_expectation(direct, z(1)), 1e-8);
    }
}

TEST(Spectrum, CapacityAndAnalysis) {
    EXPECT_THROW(floquet_spectrum(sample_realization(ideal(11), 0), Trotter{}), CapacityError);
    const auto paired = analyze_quasienergies({0.3, 0.3 - pi + 1e-10, -0.2, pi - 0.2});
    EXPECT_NEAR(paired.pairing_defect, 1e-10, 1e-12);
    EXPECT_EQ(paired.degeneracy.at(1), 4);
    // clusters merge across the branch cut
    const auto wrapped = analyze_quasienergies({-pi + 1e-10, pi, 0.1, 0.1});
    EXPECT_EQ(wrapped.degeneracy.size(), 1u);
    EXPECT_EQ(wrapped.degeneracy.at(2), 2);
}

TEST(Density, ProductBellCluster) {
    const auto prod = StateVector::basis(4, 0b0110);
    const auto rho = reduced_density(prod, {2, 4});
    EXPECT_NEAR((rho * rho - rho).norm(), 0, 1e-14);
    EXPECT_NEAR(rho.trace().real(), 1.0, 1e-14);

    Eigen::VectorXcd bell = Eigen::VectorXcd::Zero(4);
    bell[0] = bell[3] = 1 / std::sqrt(2.0);
    const auto rb = reduced_density(StateVector(2, bell), {1});
    EXPECT_LT((rb - 0.5 * Eigen::MatrixXcd::Identity(2, 2)).norm(), 1e-14);

    const auto rc = reduced_density(cluster_state(6), {1, 2, 3});
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rc);
    const auto& ev = es.eigenvalues();
    EXPECT_NEAR(ev[7], 0.5, 1e-12);
    EXPECT_NEAR(ev[6], 0.5, 1e-12);
    EXPECT_NEAR(ev.head(6).cwiseAbs().maxCoeff(), 0, 1e-12);
    EXPECT_GT(ev.minCoeff(), -1e-12);

    EXPECT_THROW(reduced_density(prod, {}), ContractError);
    EXPECT_THROW(reduced_density(prod, {1, 2, 3, 4}), ContractError);
    EXPECT_THROW(reduced_density(prod, {5}), IndexError);
}

TEST(Density, MatchesExplicitPartialTrace) {
    const auto s = random_state(6, 44);
    const auto rho = reduced_density(s, {1, 2, 3});
    EXPECT_LT((rho - oracle::rho_left(s.amplitudes(), 6, 3)).norm(), 1e-12);
}

TEST(Entanglement, Spectra) {
    const auto prod = entanglement_spectrum(StateVector(6), 3);
    ASSERT_EQ(prod.size(), 1u);
    EXPECT_NEAR(prod[0], 0, 1e-12);

    const auto obc = entanglement_spectrum(cluster_state(6), 3);
    ASSERT_EQ(obc.size(), 2u);
    for (double e : obc) EXPECT_NEAR(e, kLn2, 1e-8);

    const auto pbc = entanglement_spectrum(cluster_state(6, Boundary::Periodic), 3);
    ASSERT_EQ(pbc.size(), 4u);
    for (double e : pbc) EXPECT_NEAR(e, 2 * kLn2, 1e-8);
}

TEST(Entanglement, ClusterStateStabilizers) {
    for (auto b : {Boundary::Open, Boundary::Periodic}) {
        const auto s = cluster_state(6, b);
        const int first = b == Boundary::Open ? 2 : 1, last = b == Boundary::Open ? 5 : 6;
        for (int k = first; k <= last; ++k) EXPECT_NEAR(pauli_expectation(s, stabilizer(6, k, b)), 1.0, 1e-12);
    }
    const auto s = cluster_state(6);
    EXPECT_NEAR(pauli_expectation(s, stabilizer(6, 1)), 1.0, 1e-12);
    EXPECT_NEAR(pauli_expectation(s, stabilizer(6, 6)), 1.0, 1e-12);
}

TEST(MutualInformation, Basics) {
    EXPECT_NEAR(mutual_information(StateVector(4), 1, 4), 0, 1e-12);
    Eigen::VectorXcd bell = Eigen::VectorXcd::Zero(8);
    bell[0] = bell[5] = 1 / std::sqrt(2.0); // sites 1 and 3
    EXPECT_NEAR(mutual_information(StateVector(3, bell), 1, 3), 2 * kLn2, 1e-12);
    const auto s = random_state(6, 8);
    EXPECT_GT(mutual_information(s, 2, 5), -1e-10);
}

TEST(MutualInformation, FloquetEigenstateBoundaries) {
    // Edge cat states: the boundary qubits of the ideal drive are each carried
    // by two sites (X1 Z2 and Z1), so the edge blocks share 2 ln 2 while the
    // outermost single sites share only their classical Z correlation, ln 2.
    const int L = 6;
    const auto r = sample_realization(ideal(L), 12);
    auto es = floquet_eigensystem(r, Trotter{});
    resolve_degeneracies(es, L, PauliString(1.0, {{1, Axis::Z}, {L, Axis::Z}}));
    const int left[2] = {1, 2}, right[2] = {L - 1, L};
    for (Eigen::Index i = 0; i < es.eigenvectors.cols(); ++i) {
        const StateVector v(L, es.eigenvectors.col(i));
        EXPECT_NEAR(mutual_information(v, left, right), 2 * kLn2, 1e-6);
        EXPECT_NEAR(mutual_information(v, 1, L), kLn2, 1e-6);
    }
}

TEST(Expectation, Basics) {
    EXPECT_DOUBLE_EQ(pauli_expectation(StateVector(1), z(1)), 1.0);
    Eigen::VectorXcd plus(2);
    plus << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
    EXPECT_NEAR(pauli_expectation(StateVector(1, plus), z(1)), 0, 1e-15);
    const auto s = random_state(5, 3);
    const PauliString p(0.7, {{1, Axis::Y}, {3, Axis::X}, {4, Axis::Z}});
    EXPECT_NEAR(pauli_expectation(s, p), oracle::expect(oracle::dense(5, p), s.amplitudes()), 1e-12);
}
