#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "sptc/errors.hpp"
#include "sptc/krylov.hpp"
#include "sptc/model.hpp"
#include "sptc/statevector.hpp"

namespace sptc {

// ---------------------------------------------------------------------------
// Evolution methods

/// First-order splitting exp(-i dt D) exp(-i dt C) exp(-i dt B) exp(-i dt A)
/// per substep. The interval must be an integer number of substeps.
struct Trotter {
    double dt = 0.05;
};

/// Restarted Lanczos; `tolerance` bounds the 2-norm error of the final state.
struct Krylov {
    double tolerance = 1e-10;
    int max_dim = 30;
};

using EvolutionMethod = std::variant<Trotter, Krylov>;

/// Number of Trotter substeps covering `duration`; throws if dt does not divide it.
inline int trotter_substeps(double duration, double dt) {
    if (dt <= 0) throw ParamError("trotter step must be positive");
    const double q = duration / dt;
    const double n = std::round(q);
    if (n < 1 || std::abs(q - n) > 1e-9 * std::max(1.0, q))
        throw ParamError("trotter step must divide the interval evenly");
    return static_cast<int>(n);
}

/// H psi for a list of Pauli terms.
inline void apply_terms(const std::vector<PauliString>& terms, const Eigen::VectorXcd& in, Eigen::VectorXcd& out) {
    out.setZero(in.size());
    Eigen::VectorXcd tmp(in.size());
    for (const auto& p : terms) {
        detail::apply_pauli_mask(PauliMask(p), in, tmp);
        out += p.coefficient() * tmp;
    }
}

namespace detail {

inline void apply_group(const std::vector<PauliString>& group, double dt, Eigen::VectorXcd& psi) {
    for (const auto& p : group) pauli_rotation_inplace(PauliMask(p), -dt * p.coefficient(), psi);
}

inline void check_terms(const GroupedTerms& terms, int L) {
    for (const auto* g : {&terms.A, &terms.B, &terms.C, &terms.D})
        for (const auto& p : *g) p.check_sites(L);
}

} // namespace detail

/// exp(-i (lambda - delta) sum_k X_k * duration), lambda = pi/2.
inline StateVector evolve_u1(StateVector state, double delta, double duration = 1.0) {
    detail::x_rotation_all_inplace(state.L(), (std::numbers::pi / 2 - delta) * duration, state.amplitudes());
    return state;
}

/// exp(-i duration H) for H = A + B + C + D.
inline StateVector evolve_u2(StateVector state, const GroupedTerms& terms, double duration,
                             const EvolutionMethod& method) {
    if (duration < 0) throw ParamError("duration must be non-negative");
    if (duration == 0.0) return state;
    detail::check_terms(terms, state.L());
    auto& psi = state.amplitudes();
    if (const auto* tr = std::get_if<Trotter>(&method)) {
        // A alone is a sum of commuting strings: one exact step covers the interval.
        if (terms.only_stabilizers()) {
            detail::apply_group(terms.A, duration, psi);
            return state;
        }
        const int n = trotter_substeps(duration, tr->dt);
        const double dt = duration / n;
        for (int s = 0; s < n; ++s) {
            detail::apply_group(terms.A, dt, psi);
            detail::apply_group(terms.B, dt, psi);
            detail::apply_group(terms.C, dt, psi);
            detail::apply_group(terms.D, dt, psi);
        }
        return state;
    }
    const auto& kr = std::get<Krylov>(method);
    const auto all = terms.all();
    auto apply_h = [&all](const Eigen::VectorXcd& in, Eigen::VectorXcd& out) { apply_terms(all, in, out); };
    psi = expm_multiply_hermitian(apply_h, std::move(psi), duration, kr.tolerance, kr.max_dim);
    return state;
}

/// One drive period: U1 for T1, then U2 for T - T1.
inline StateVector floquet_step(StateVector state, const ModelParams& params, const GroupedTerms& terms,
                                const EvolutionMethod& method) {
    state = evolve_u1(std::move(state), params.delta, params.T1);
    return evolve_u2(std::move(state), terms, params.second_interval(), method);
}

inline StateVector floquet_step(StateVector state, const DisorderRealization& r, const EvolutionMethod& method) {
    return floquet_step(std::move(state), r.params, hamiltonian_terms(r), method);
}

// ---------------------------------------------------------------------------
// Floquet operator spectra

inline constexpr int kMaxDenseFloquetSites = 10;

/// Dense U_F assembled column by column from floquet_step on basis states.
inline Eigen::MatrixXcd floquet_unitary(const DisorderRealization& r, const EvolutionMethod& method) {
    const int L = r.L();
    if (L > kMaxDenseFloquetSites)
        throw CapacityError("dense Floquet operator supports L <= " + std::to_string(kMaxDenseFloquetSites));
    const auto terms = hamiltonian_terms(r);
    const Eigen::Index d = StateVector::dim_of(L);
    Eigen::MatrixXcd U(d, d);
    for (Eigen::Index c = 0; c < d; ++c)
        U.col(c) = floquet_step(StateVector::basis(L, static_cast<std::uint64_t>(c)), r.params, terms, method).amplitudes();
    return U;
}

struct FloquetEigensystem {
    Eigen::VectorXd quasienergies;  // -arg(eigenvalue), in (-pi, pi]
    Eigen::MatrixXcd eigenvectors;  // orthonormal columns
};

/// Eigen-decomposition of a unitary via complex Schur. A normal matrix has a
/// diagonal Schur form, so the Schur vectors are orthonormal eigenvectors even
/// inside degenerate subspaces.
inline FloquetEigensystem diagonalize_unitary(const Eigen::MatrixXcd& U) {
    Eigen::ComplexSchur<Eigen::MatrixXcd> schur(U);
    if (schur.info() != Eigen::Success) throw ConvergenceError("complex Schur decomposition failed", 0.0);
    FloquetEigensystem es;
    const auto& T = schur.matrixT();
    es.quasienergies.resize(T.rows());
    for (Eigen::Index i = 0; i < T.rows(); ++i) {
        double q = -std::arg(T(i, i));
        if (q <= -std::numbers::pi) q += 2 * std::numbers::pi;
        es.quasienergies[i] = q;
    }
    es.eigenvectors = schur.matrixU();
    return es;
}

inline FloquetEigensystem floquet_eigensystem(const DisorderRealization& r, const EvolutionMethod& method) {
    return diagonalize_unitary(floquet_unitary(r, method));
}

/// Inside every cluster of quasienergies closer than `tol`, rotate the
/// eigenvectors onto eigenvectors of `symmetry` (a Hermitian Pauli string
/// commuting with U_F). Degenerate eigenvectors are otherwise an arbitrary
/// basis of their subspace, and quantities such as boundary mutual information
/// depend on the choice. Z_1 Z_L picks the edge cat states.
inline void resolve_degeneracies(FloquetEigensystem& es, int L, const PauliString& symmetry, double tol = 1e-8) {
    symmetry.check_sites(L);
    const Eigen::Index n = es.quasienergies.size();
    std::vector<Eigen::Index> order(n);
    for (Eigen::Index i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return es.quasienergies[a] < es.quasienergies[b]; });
    const PauliMask mask(symmetry);
    Eigen::VectorXcd tmp(es.eigenvectors.rows());
    std::size_t start = 0;
    while (start < order.size()) {
        std::size_t stop = start + 1;
        while (stop < order.size() &&
               es.quasienergies[order[stop]] - es.quasienergies[order[stop - 1]] < tol)
            ++stop;
        const auto k = static_cast<Eigen::Index>(stop - start);
        if (k > 1) {
            Eigen::MatrixXcd V(es.eigenvectors.rows(), k);
            for (Eigen::Index c = 0; c < k; ++c) V.col(c) = es.eigenvectors.col(order[start + c]);
            Eigen::MatrixXcd PV(V.rows(), k);
            for (Eigen::Index c = 0; c < k; ++c) {
                detail::apply_pauli_mask(mask, V.col(c), tmp);
                PV.col(c) = tmp;
            }
            const Eigen::MatrixXcd M = V.adjoint() * PV;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(0.5 * (M + M.adjoint()));
            const Eigen::MatrixXcd W = V * eig.eigenvectors();
            for (Eigen::Index c = 0; c < k; ++c) es.eigenvectors.col(order[start + c]) = W.col(c);
        }
        start = stop;
    }
}

struct QuasienergyReport {
    std::vector<double> quasienergies; // sorted ascending, in (-pi, pi]
    double pairing_defect = 0.0;       // max over states of distance to nearest pi-shifted partner
    std::map<int, int> degeneracy;     // multiplicity -> number of clusters
    int min_multiplicity = 0;
};

/// Distance on the circle of phases.
inline double phase_distance(double a, double b) {
    double d = std::fmod(std::abs(a - b), 2 * std::numbers::pi);
    return std::min(d, 2 * std::numbers::pi - d);
}

/// Pairing defect and degeneracy clusters (tolerance `tol`) of a quasienergy list.
inline QuasienergyReport analyze_quasienergies(std::vector<double> q, double tol = 1e-8) {
    QuasienergyReport rep;
    std::sort(q.begin(), q.end());
    const std::size_t n = q.size();
    rep.quasienergies = q;
    if (n == 0) return rep;

    for (std::size_t a = 0; a < n; ++a) {
        double target = q[a] + std::numbers::pi;
        if (target > std::numbers::pi) target -= 2 * std::numbers::pi;
        const auto it = std::lower_bound(q.begin(), q.end(), target);
        double best = std::numeric_limits<double>::infinity();
        for (auto cand : {it, it == q.begin() ? q.end() - 1 : it - 1, it == q.end() ? q.begin() : it})
            if (cand != q.end()) best = std::min(best, phase_distance(*cand, target));
        best = std::min({best, phase_distance(q.front(), target), phase_distance(q.back(), target)});
        rep.pairing_defect = std::max(rep.pairing_defect, best);
    }

    // Cluster consecutive levels closer than tol; the first and last cluster
    // merge if they meet across the branch cut.
    std::vector<int> sizes{1};
    for (std::size_t i = 1; i < n; ++i) {
        if (q[i] - q[i - 1] < tol) ++sizes.back();
        else sizes.push_back(1);
    }
    if (sizes.size() > 1 && phase_distance(q.front(), q.back()) < tol) {
        sizes.front() += sizes.back();
        sizes.pop_back();
    }
    for (int s : sizes) ++rep.degeneracy[s];
    rep.min_multiplicity = rep.degeneracy.begin()->first;
    return rep;
}

inline QuasienergyReport floquet_spectrum(const DisorderRealization& r, const EvolutionMethod& method,
                                          double tol = 1e-8) {
    const auto es = floquet_eigensystem(r, method);
    return analyze_quasienergies(std::vector<double>(es.quasienergies.begin(), es.quasienergies.end()), tol);
}

/// Realization copy with a different drive imperfection.
inline DisorderRealization with_delta(DisorderRealization r, double delta) {
    r.params.delta = delta;
    return r;
}

inline QuasienergyReport floquet_spectrum(const DisorderRealization& r, double delta, const EvolutionMethod& method,
                                          double tol = 1e-8) {
    return floquet_spectrum(with_delta(r, delta), method, tol);
}

// ---------------------------------------------------------------------------
// Convenience states

/// Cluster state: H on every site, then CZ on every bond (including (L,1) for
/// a periodic chain). +1 eigenstate of every stabilizer.
inline StateVector cluster_state(int L, Boundary boundary = Boundary::Open) {
    const Eigen::Index d = StateVector::dim_of(L);
    Eigen::VectorXcd a(d);
    const double amp = 1.0 / std::sqrt(static_cast<double>(d));
    const int bonds = boundary == Boundary::Open ? L - 1 : L;
    for (Eigen::Index i = 0; i < d; ++i) {
        int parity = 0;
        for (int k = 0; k < bonds; ++k) {
            const int k2 = (k + 1) % L;
            parity ^= static_cast<int>((i >> k) & (i >> k2) & 1);
        }
        a[i] = parity ? -amp : amp;
    }
    return StateVector(L, std::move(a));
}

} // namespace sptc
