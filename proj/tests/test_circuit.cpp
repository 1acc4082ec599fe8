#include <gtest/gtest.h>

#include <numbers>

#include "oracle/dense_oracle.hpp"
#include "sptc/circuit.hpp"
#include "sptc/exact.hpp"

using namespace sptc;
using std::numbers::pi;
using oracle::Mat;

namespace {

const cplx I(0, 1);

/// Gate matrices rebuilt from Pauli algebra, independent of apply_gate.
Mat dense_gate(int L, const Gate& g) {
    const Mat id = Mat::Identity(2, 2);
    auto P = [](Axis a) { return oracle::pauli(a); };
    auto rot = [&](Axis a, double t) -> Mat { return std::cos(t / 2) * id - I * std::sin(t / 2) * P(a); };
    switch (g.kind) {
    case GateKind::X: return oracle::single(L, g.a, rot(Axis::X, g.angle));
    case GateKind::Y: return oracle::single(L, g.a, rot(Axis::Y, g.angle));
    case GateKind::Z: return oracle::single(L, g.a, rot(Axis::Z, g.angle));
    case GateKind::H: return oracle::single(L, g.a, (P(Axis::X) + P(Axis::Z)) / std::sqrt(2.0));
    case GateKind::CZ: {
        const Mat za = oracle::single(L, g.a, P(Axis::Z)), zb = oracle::single(L, g.b, P(Axis::Z));
        const Mat one = Mat::Identity(za.rows(), za.cols());
        return 0.5 * (one + za + zb - za * zb);
    }
    case GateKind::CRz: {
        const Mat p0 = oracle::single(L, g.a, 0.5 * (id + P(Axis::Z)));
        const Mat p1 = oracle::single(L, g.a, 0.5 * (id - P(Axis::Z)));
        return p0 + p1 * oracle::single(L, g.b, rot(Axis::Z, g.angle));
    }
    }
    return {};
}

Mat dense_circuit(const Circuit& c) {
    const Eigen::Index d = Eigen::Index{1} << c.L();
    Mat U = Mat::Identity(d, d);
    for (const auto& g : c.gates()) U = dense_gate(c.L(), g) * U;
    return U;
}

Circuit random_circuit(int L, int gates, std::uint64_t seed) {
    CounterRng rng(seed);
    Circuit c(L);
    for (int n = 0; n < gates; ++n) {
        const auto k = static_cast<GateKind>(rng.below(6));
        const double t = rng.uniform(-pi, pi);
        if (is_two_qubit(k)) {
            const int a = 1 + static_cast<int>(rng.below(L - 1));
            const double th = k == GateKind::CRz ? t : 0.0;
            c.add(rng.below(2) ? Gate{k, a, a + 1, th} : Gate{k, a + 1, a, th});
        } else {
            c.add(Gate{k, 1 + static_cast<int>(rng.below(L)), 0, is_rotation(k) ? t : 0.0});
        }
    }
    return c;
}

StateVector random_state(int L, std::uint64_t seed) {
    CounterRng rng(seed);
    Eigen::VectorXcd a(Eigen::Index{1} << L);
    for (auto& v : a) v = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
    return StateVector(L, a / a.norm());
}

ModelParams ideal(int L, double delta = 0.0) {
    ModelParams p;
    p.L = L;
    p.delta = delta;
    return p;
}

double fidelity(const StateVector& a, const StateVector& b) {
    return std::norm(a.amplitudes().dot(b.amplitudes()));
}

} // namespace

TEST(Gates, SingleXMatchesConvention) {
    Circuit c(1);
    c.add(Gate::x(1, 0.7));
    const auto U = circuit_unitary(c);
    EXPECT_NEAR(std::abs(U(0, 0) - std::cos(0.35)), 0, 1e-15);
    EXPECT_NEAR(std::abs(U(0, 1) + I * std::sin(0.35)), 0, 1e-15);
    EXPECT_NEAR(std::abs(U(1, 0) + I * std::sin(0.35)), 0, 1e-15);
    EXPECT_NEAR(std::abs(U(1, 1) - std::cos(0.35)), 0, 1e-15);
}

TEST(Gates, CzFlipsSignOfOneOne) {
    Circuit c(2);
    c.add(Gate::cz(1, 2));
    const auto s = run_circuit(StateVector::basis(2, 3), c);
    EXPECT_NEAR(std::abs(s[3] + 1.0), 0, 1e-15);
}

TEST(Gates, CrzPiIsCzUpToLocalZ) {
    // CRz(pi) = e^{-i pi/4} CZ Z_control(-pi/2)
    Circuit a(2), b(2);
    a.add(Gate::crz(1, 2, pi));
    b.add(Gate::z(1, -pi / 2)).add(Gate::cz(1, 2));
    EXPECT_NEAR(operator_fidelity(circuit_unitary(a), circuit_unitary(b)), 1.0, 1e-14);
    const Mat want = std::exp(-I * (pi / 4)) * circuit_unitary(b);
    EXPECT_LT((circuit_unitary(a) - want).norm(), 1e-14);
}

TEST(Gates, EveryKindMatchesPauliAlgebra) {
    for (int k = 0; k < 6; ++k) {
        const auto kind = static_cast<GateKind>(k);
        Circuit c(3);
        c.add(is_two_qubit(kind) ? Gate{kind, 3, 2, 0.9} : Gate{kind, 2, 0, is_rotation(kind) ? 0.9 : 0.0});
        EXPECT_LT((circuit_unitary(c) - dense_circuit(c)).norm(), 1e-13) << gate_name(kind);
    }
}

TEST(CircuitUnitary, EmptyIsIdentity) {
    EXPECT_LT((circuit_unitary(Circuit(3)) - Mat::Identity(8, 8)).norm(), 1e-15);
}

TEST(CircuitUnitary, RandomCircuitsUnitaryAndMatchDense) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto c = random_circuit(4, 30, seed);
        const auto U = circuit_unitary(c);
        EXPECT_LT((U.adjoint() * U - Mat::Identity(16, 16)).norm(), 1e-10);
        EXPECT_LT((U - dense_circuit(c)).norm(), 1e-12);
    }
}

TEST(CircuitUnitary, AgreesWithRunCircuit) {
    const auto c = random_circuit(6, 40, 9);
    const auto U = circuit_unitary(c);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto in = random_state(6, 100 + s);
        const auto out = run_circuit(in, c);
        EXPECT_LT((U * in.amplitudes() - out.amplitudes()).norm(), 1e-10);
    }
}

TEST(CircuitUnitary, CapacityLimit) { EXPECT_THROW(circuit_unitary(Circuit(9)), CapacityError); }

TEST(Structure, Rejections) {
    Circuit c(4);
    EXPECT_THROW(c.add(Gate::cz(1, 3)), ContractError);
    EXPECT_THROW(c.add(Gate::x(5, 0.1)), IndexError);
    EXPECT_THROW(c.add_layer({Gate::x(2, 0.1), Gate::cz(2, 3)}), ContractError);
    EXPECT_THROW(run_circuit(StateVector(3), c), ContractError);
    EXPECT_THROW(spt_prep_circuit(4, {5}), IndexError);
    EXPECT_THROW(run_circuit(StateVector(4), c, NoiseModel{1.0, 0.0, 1}), ParamError);
}

TEST(Structure, ModelCircuitsAreNearestNeighbour) {
    const auto r = sample_realization(ideal(7), 3);
    for (const auto& c : {floquet_period_circuit(r, 0.1), spt_prep_circuit(7, {2, 5}), echo_circuit(floquet_period_circuit(r, 0.1), 2)})
        for (const auto& g : c.gates()) {
            if (is_two_qubit(g.kind)) { EXPECT_EQ(std::abs(g.a - g.b), 1); }
        }
}

TEST(U1Layer, FlipsAtZeroDelta) {
    const auto s = run_circuit(StateVector(5), u1_layer(5, 0.0));
    EXPECT_NEAR(std::abs(s[31]), 1.0, 1e-14);
    EXPECT_EQ(u1_layer(5, 0.0).layers(), 1);
}

TEST(U1Layer, MatchesDenseExponential) {
    EXPECT_NEAR(operator_fidelity(circuit_unitary(u1_layer(4, 0.3)), oracle::u1(4, 0.3)), 1.0, 1e-10);
}

TEST(ClusterU2, MatchesDenseExponentialL8) {
    const auto r = sample_realization(ideal(8), 21);
    const Mat want = oracle::expm_herm(oracle::h2(r), 1.0);
    EXPECT_GE(operator_fidelity(circuit_unitary(cluster_u2_circuit(r)), want), 1 - 1e-10);
}

TEST(ClusterU2, BoundaryStabilizersEnterEdges) {
    auto p = ideal(6);
    p.boundary_stabilizers = BoundaryStabilizers{0.4, -0.7};
    const auto r = sample_realization(p, 4);
    Mat H = oracle::h2(r);
    H -= 0.4 * oracle::dense(6, stabilizer(6, 1)) - 0.7 * oracle::dense(6, stabilizer(6, 6));
    EXPECT_GE(operator_fidelity(circuit_unitary(cluster_u2_circuit(r)), oracle::expm_herm(H, 1.0)), 1 - 1e-10);
}

TEST(ClusterU2, ZeroCouplingsGiveIdentity) {
    auto p = ideal(5);
    p.J = p.dJ = 0.0;
    const auto c = cluster_u2_circuit(sample_realization(p, 1));
    for (const auto& g : c.gates()) {
        if (g.kind == GateKind::Z) { EXPECT_EQ(g.angle, 0.0); }
    }
    EXPECT_NEAR(operator_fidelity(circuit_unitary(c), Mat::Identity(32, 32)), 1.0, 1e-12);
}

TEST(ClusterU2, RejectsFieldsAndBonds) {
    auto p = ideal(5);
    p.h = 0.1;
    EXPECT_THROW(cluster_u2_circuit(sample_realization(p, 1)), ContractError);
}

TEST(ClusterU2, FrameMapsVacuumToStabilizerState) {
    const auto s = run_circuit(StateVector(6), cluster_frame(6));
    for (int k = 2; k <= 5; ++k) {
        const Mat S = oracle::dense(6, stabilizer(6, k));
        EXPECT_NEAR(oracle::expect(S, s.amplitudes()), 1.0, 1e-12);
    }
}

TEST(FloquetCircuit, TwoPeriodsMatchExactEngine) {
    const auto r = sample_realization(ideal(6), 8);
    const auto c = repeat(floquet_period_circuit(r, 0.0), 2);
    StateVector s(6);
    for (int n = 0; n < 2; ++n) s = floquet_step(std::move(s), r, Trotter{});
    EXPECT_NEAR(fidelity(run_circuit(StateVector(6), c), s), 1.0, 1e-8);
}

TEST(FloquetCircuit, GeneralDeltaMatchesExactEngine) {
    const auto r = sample_realization(ideal(6, 0.13), 8);
    const auto c = repeat(floquet_period_circuit(r), 3);
    const auto in = random_state(6, 2);
    StateVector s = in;
    for (int n = 0; n < 3; ++n) s = floquet_step(std::move(s), r, Trotter{});
    EXPECT_NEAR(fidelity(run_circuit(in, c), s), 1.0, 1e-10);
}

TEST(FloquetCircuit, EdgeFlipsAtL14) {
    const auto r = sample_realization(ideal(14, 0.01), 5);
    const auto s = run_circuit(StateVector(14), floquet_period_circuit(r));
    const PauliString z1(1.0, {{1, Axis::Z}});
    EXPECT_LT(pauli_expectation(s, z1), -0.9);
}

TEST(FloquetCircuit, FusedDepthSixPerPeriod) {
    const auto r = sample_realization(ideal(8), 1);
    const auto period = floquet_period_circuit(r, 0.02);
    for (int n : {1, 3, 10}) EXPECT_EQ(fused_depth(repeat(period, n)), 6 * n);
    EXPECT_EQ(fused_depth(Circuit(3)), 0);
}

TEST(SptPrep, GroundStateOfBoundaryHamiltonian) {
    const auto s = run_circuit(StateVector(6), spt_prep_circuit(6));
    for (int k = 1; k <= 6; ++k) EXPECT_NEAR(pauli_expectation(s, stabilizer(6, k)), 1.0, 1e-12) << k;
}

TEST(SptPrep, ExcitationFlipsOneStabilizer) {
    for (int j : {1, 3, 6}) {
        const auto s = run_circuit(StateVector(6), spt_prep_circuit(6, {j}));
        for (int k = 1; k <= 6; ++k)
            EXPECT_NEAR(pauli_expectation(s, stabilizer(6, k)), k == j ? -1.0 : 1.0, 1e-12) << j << ' ' << k;
    }
}

TEST(SptPrep, MidCutSpectrumTwoFold) {
    const auto s = run_circuit(StateVector(8), spt_prep_circuit(8, {3}));
    const auto es = entanglement_spectrum(s, 4);
    ASSERT_EQ(es.size(), 2u);
    EXPECT_NEAR(es[0], std::log(2.0), 1e-10);
    EXPECT_NEAR(es[1], std::log(2.0), 1e-10);
}

TEST(Echo, EmptyAtZero) { EXPECT_TRUE(echo_circuit(u1_layer(4, 0.1), 0).empty()); }

TEST(Echo, NoiselessIdentity) {
    const auto r = sample_realization(ideal(6, 0.07), 2);
    const auto in = random_state(6, 44);
    const auto out = run_circuit(in, echo_circuit(floquet_period_circuit(r), 5));
    EXPECT_NEAR(fidelity(in, out), 1.0, 1e-8);
}

TEST(Echo, NoisySurvivalDecreases) {
    const auto r = sample_realization(ideal(6, 0.05), 2);
    const auto period = floquet_period_circuit(r);
    double prev = 1.0;
    for (int n = 1; n <= 6; ++n) {
        const auto c = echo_circuit(period, n);
        double mean = 0;
        for (int t = 0; t < 200; ++t)
            mean += std::norm(run_circuit(StateVector(6), c, NoiseModel{0.0, 0.01, derive_seed(7, t)})[0]);
        mean /= 200;
        EXPECT_LT(mean, prev) << n;
        prev = mean;
    }
}

TEST(Noise, SameSeedSameTrajectory) {
    const auto c = random_circuit(5, 60, 3);
    const NoiseModel nm{0.05, 0.05, 99};
    const auto a = run_circuit(StateVector(5), c, nm), b = run_circuit(StateVector(5), c, nm);
    EXPECT_EQ(a.amplitudes(), b.amplitudes());
    EXPECT_NEAR(a.norm(), 1.0, 1e-12);
}

TEST(Text, RoundTripBitExact) {
    auto c = random_circuit(5, 50, 12);
    c.append(spt_prep_circuit(5, {2}));
    const auto back = circuit_from_text(to_text(c));
    EXPECT_EQ(back.gates(), c.gates());
    EXPECT_EQ(back.layers(), c.layers());
    EXPECT_EQ(to_text(back), to_text(c));
}

TEST(Text, ParseErrors) {
    EXPECT_THROW(circuit_from_text(""), ParamError);
    EXPECT_THROW(circuit_from_text("L 3\nQ 1\n"), ParamError);
    EXPECT_THROW(circuit_from_text("L 3\nX 1\n"), ParamError);
    EXPECT_THROW(circuit_from_text("L 3\nCZ 1\n"), ParamError);
    EXPECT_THROW(circuit_from_text("L 3\nX 1 0.5x\n"), ParamError);
    EXPECT_THROW(circuit_from_text("L 3\nCZ 1,3\n"), ContractError);
    const auto c = circuit_from_text("# comment\nL 2\nH 1\nH 2\n\nCZ 1,2\n");
    EXPECT_EQ(c.layers(), 2);
}
