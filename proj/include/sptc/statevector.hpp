#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sptc/errors.hpp"
#include "sptc/pauli.hpp"

namespace sptc {

/// Dense amplitudes over 2^L computational basis states. Site 1 is the least
/// significant bit of the basis index; bit value 0 is the sigma^z = +1 state.
class StateVector {
public:
    static constexpr int kMaxSites = 26;

    StateVector() = default;

    /// |0...0>
    explicit StateVector(int L) : L_(check_size(L)), amps_(Eigen::VectorXcd::Zero(dim_of(L))) {
        amps_[0] = 1.0;
    }

    StateVector(int L, Eigen::VectorXcd amplitudes) : L_(check_size(L)), amps_(std::move(amplitudes)) {
        if (amps_.size() != dim_of(L)) throw ContractError("amplitude count must be 2^L");
    }

    static StateVector basis(int L, std::uint64_t index) {
        StateVector s(L);
        if (index >= static_cast<std::uint64_t>(s.dim())) throw IndexError("basis index out of range");
        s.amps_[0] = 0.0;
        s.amps_[static_cast<Eigen::Index>(index)] = 1.0;
        return s;
    }

    /// Product state from per-site bits, bits[0] is site 1.
    static StateVector from_bits(std::span<const int> bits) {
        std::uint64_t idx = 0;
        for (std::size_t k = 0; k < bits.size(); ++k) {
            if (bits[k] != 0 && bits[k] != 1) throw ContractError("bits must be 0 or 1");
            idx |= static_cast<std::uint64_t>(bits[k]) << k;
        }
        return basis(static_cast<int>(bits.size()), idx);
    }

    int L() const noexcept { return L_; }
    Eigen::Index dim() const noexcept { return amps_.size(); }
    const Eigen::VectorXcd& amplitudes() const noexcept { return amps_; }
    Eigen::VectorXcd& amplitudes() noexcept { return amps_; }
    cplx operator[](Eigen::Index i) const { return amps_[i]; }

    double norm() const { return amps_.norm(); }

    static Eigen::Index dim_of(int L) { return Eigen::Index{1} << L; }

private:
    static int check_size(int L) {
        if (L < 1 || L > kMaxSites)
            throw CapacityError("statevector supports 1.." + std::to_string(kMaxSites) + " sites");
        return L;
    }

    int L_ = 0;
    Eigen::VectorXcd amps_;
};

namespace detail {

/// out = P in (bare Pauli product, coefficient ignored).
inline void apply_pauli_mask(const PauliMask& m, const Eigen::VectorXcd& in, Eigen::VectorXcd& out) {
    const auto n = static_cast<std::uint64_t>(in.size());
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint64_t j = i ^ m.flip;
        out[static_cast<Eigen::Index>(i)] = m.phase(j) * in[static_cast<Eigen::Index>(j)];
    }
}

/// psi <- exp(i a P) psi for a bare Pauli product P (P^2 = 1).
inline void pauli_rotation_inplace(const PauliMask& m, double a, Eigen::VectorXcd& psi) {
    const double c = std::cos(a);
    const cplx is(0.0, std::sin(a));
    const auto n = static_cast<std::uint64_t>(psi.size());
    if (m.flip == 0) {
        for (std::uint64_t i = 0; i < n; ++i) psi[static_cast<Eigen::Index>(i)] *= c + is * m.phase(i);
        return;
    }
    const std::uint64_t top = std::uint64_t{1} << (63 - std::countl_zero(m.flip));
    for (std::uint64_t i = 0; i < n; ++i) {
        if (i & top) continue;
        const std::uint64_t j = i ^ m.flip;
        const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
        const cplx a_i = psi[ii], a_j = psi[jj];
        // (P psi)[i] = phase(j) psi[j], (P psi)[j] = phase(i) psi[i]
        psi[ii] = c * a_i + is * m.phase(j) * a_j;
        psi[jj] = c * a_j + is * m.phase(i) * a_i;
    }
}

/// Single-qubit x rotation exp(-i a X_site) on every site, in place.
inline void x_rotation_all_inplace(int L, double a, Eigen::VectorXcd& psi) {
    const double c = std::cos(a);
    const cplx mis(0.0, -std::sin(a));
    const auto n = static_cast<std::uint64_t>(psi.size());
    for (int s = 0; s < L; ++s) {
        const std::uint64_t bit = std::uint64_t{1} << s;
        for (std::uint64_t i = 0; i < n; ++i) {
            if (i & bit) continue;
            const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(i | bit);
            const cplx a0 = psi[ii], a1 = psi[jj];
            psi[ii] = c * a0 + mis * a1;
            psi[jj] = c * a1 + mis * a0;
        }
    }
}

} // namespace detail

/// P|psi> including the string's coefficient.
inline StateVector apply_pauli(const StateVector& state, const PauliString& p) {
    p.check_sites(state.L());
    Eigen::VectorXcd out(state.dim());
    detail::apply_pauli_mask(PauliMask(p), state.amplitudes(), out);
    out *= p.coefficient();
    return StateVector(state.L(), std::move(out));
}

/// exp(i theta c P)|psi>, c the string's coefficient. Uses exp(i a P) = cos a + i sin a P.
inline StateVector apply_pauli_exp(StateVector state, const PauliString& p, double theta) {
    p.check_sites(state.L());
    detail::pauli_rotation_inplace(PauliMask(p), theta * p.coefficient(), state.amplitudes());
    return state;
}

/// Re <psi|P|psi> for the bare string times its coefficient. Hermitian strings
/// have a vanishing imaginary part; that is checked to 1e-10 relative to the norm.
inline double pauli_expectation(const StateVector& state, const PauliString& p) {
    p.check_sites(state.L());
    const PauliMask m(p);
    const auto& a = state.amplitudes();
    cplx acc = 0.0;
    const auto n = static_cast<std::uint64_t>(a.size());
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint64_t j = i ^ m.flip;
        acc += std::conj(a[static_cast<Eigen::Index>(i)]) * m.phase(j) * a[static_cast<Eigen::Index>(j)];
    }
    if (std::abs(acc.imag()) > 1e-10 * std::max(1.0, a.squaredNorm()))
        throw ContractError("pauli expectation has an imaginary part; string not Hermitian?");
    return p.coefficient() * acc.real();
}

/// <a|P|b> with P including its coefficient.
inline cplx pauli_matrix_element(const StateVector& a, const PauliString& p, const StateVector& b) {
    p.check_sites(a.L());
    const PauliMask m(p);
    cplx acc = 0.0;
    const auto n = static_cast<std::uint64_t>(a.dim());
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint64_t j = i ^ m.flip;
        acc += std::conj(a[static_cast<Eigen::Index>(i)]) * m.phase(j) * b[static_cast<Eigen::Index>(j)];
    }
    return p.coefficient() * acc;
}

// ---------------------------------------------------------------------------
// Entanglement

namespace detail {

inline std::vector<int> normalize_subset(int L, std::span<const int> sites) {
    std::vector<int> s(sites.begin(), sites.end());
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    if (s.empty()) throw ContractError("subsystem must be non-empty");
    if (static_cast<int>(s.size()) == L) throw ContractError("subsystem must be a proper subset");
    for (int site : s)
        if (site < 1 || site > L) throw IndexError("subsystem site " + std::to_string(site) + " out of range");
    return s;
}

/// Amplitudes reshaped to (subsystem index) x (environment index). Subsystem
/// sites are ordered ascending, the first one as the lowest bit.
inline Eigen::MatrixXcd bipartition_matrix(const StateVector& state, const std::vector<int>& sub) {
    const int L = state.L();
    std::uint64_t sub_mask = 0;
    for (int s : sub) sub_mask |= std::uint64_t{1} << (s - 1);
    const int k = static_cast<int>(sub.size());
    Eigen::MatrixXcd M(Eigen::Index{1} << k, Eigen::Index{1} << (L - k));
    const auto n = static_cast<std::uint64_t>(state.dim());
    for (std::uint64_t i = 0; i < n; ++i) {
        std::uint64_t a = 0, b = 0;
        int ia = 0, ib = 0;
        for (int s = 0; s < L; ++s) {
            const std::uint64_t bit = (i >> s) & 1;
            if (sub_mask >> s & 1) a |= bit << ia++;
            else b |= bit << ib++;
        }
        M(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = state[static_cast<Eigen::Index>(i)];
    }
    return M;
}

inline double entropy_from_weights(const Eigen::VectorXd& w) {
    double S = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (w[i] > 1e-12) S -= w[i] * std::log(w[i]);
    return S;
}

} // namespace detail

/// Reduced density matrix of the listed (1-based) sites.
inline Eigen::MatrixXcd reduced_density(const StateVector& state, std::span<const int> sites) {
    const auto sub = detail::normalize_subset(state.L(), sites);
    const Eigen::MatrixXcd M = detail::bipartition_matrix(state, sub);
    return M * M.adjoint();
}

inline Eigen::MatrixXcd reduced_density(const StateVector& state, std::initializer_list<int> sites) {
    return reduced_density(state, std::span<const int>(sites.begin(), sites.size()));
}

/// Von Neumann entropy (nats) of the listed sites.
inline double entanglement_entropy(const StateVector& state, std::span<const int> sites) {
    const auto sub = detail::normalize_subset(state.L(), sites);
    const Eigen::MatrixXcd M = detail::bipartition_matrix(state, sub);
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(M);
    const Eigen::VectorXd w = svd.singularValues().array().square();
    return detail::entropy_from_weights(w);
}

/// -ln v for the Schmidt weights v > 1e-12 of the cut between sites `cut` and
/// `cut + 1`, ascending.
inline std::vector<double> entanglement_spectrum(const StateVector& state, int cut) {
    const int L = state.L();
    if (cut < 1 || cut >= L) throw ContractError("cut must satisfy 1 <= cut < L");
    Eigen::Map<const Eigen::MatrixXcd> M(state.amplitudes().data(), Eigen::Index{1} << cut,
                                         Eigen::Index{1} << (L - cut));
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(M);
    std::vector<double> out;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
        const double v = svd.singularValues()[i] * svd.singularValues()[i];
        if (v > 1e-12) out.push_back(-std::log(v));
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// I(A:B) = S(A) + S(B) - S(AB) in nats for disjoint site sets.
inline double mutual_information(const StateVector& state, std::span<const int> region_a,
                                 std::span<const int> region_b) {
    std::vector<int> ab(region_a.begin(), region_a.end());
    for (int s : region_b) {
        if (std::find(region_a.begin(), region_a.end(), s) != region_a.end())
            throw ContractError("mutual information regions must be disjoint");
        ab.push_back(s);
    }
    const double sa = entanglement_entropy(state, region_a);
    const double sb = entanglement_entropy(state, region_b);
    // A pure state has S(AB) = S(complement), and zero when AB is everything.
    const double sab = static_cast<int>(ab.size()) == state.L() ? 0.0 : entanglement_entropy(state, ab);
    return sa + sb - sab;
}

inline double mutual_information(const StateVector& state, int site_a, int site_b) {
    if (site_a == site_b) throw ContractError("mutual information needs two distinct sites");
    const int a[1] = {site_a}, b[1] = {site_b};
    return mutual_information(state, a, b);
}

} // namespace sptc
