#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "sptc/errors.hpp"
#include "sptc/pauli.hpp"
#include "sptc/rng.hpp"

namespace sptc {

enum class Boundary { Open, Periodic };

struct BoundaryStabilizers {
    double J1 = 0.0;
    double JL = 0.0;
};

/// Couplings are centers and half-widths of uniform distributions. The drive
/// schedule is fixed to T1 = 1, T = 2.
struct ModelParams {
    int L = 8;
    double J = 1.0, dJ = 1.0;
    double V = 0.0, dV = 0.0;
    double h = 0.0, dh = 0.0;
    double delta = 0.0;
    double lambda = std::numbers::pi / 2;
    double T1 = 1.0;
    double T = 2.0;
    Boundary boundary = Boundary::Open;
    std::optional<BoundaryStabilizers> boundary_stabilizers;

    double second_interval() const noexcept { return T - T1; }

    void validate() const {
        if (L < 3) throw ParamError("L must be >= 3, got " + std::to_string(L));
        if (L > 62) throw ParamError("L must be <= 62");
        if (dJ < 0 || dV < 0 || dh < 0) throw ParamError("disorder half-widths must be >= 0");
        if (!std::isfinite(J) || !std::isfinite(V) || !std::isfinite(h) || !std::isfinite(delta))
            throw ParamError("couplings must be finite");
        if (T1 != 1.0 || T != 2.0) throw ParamError("the drive schedule is fixed to T = 2 T1 = 2");
        if (boundary_stabilizers && boundary != Boundary::Open)
            throw ParamError("boundary stabilizers require an open chain");
    }
};

/// One disorder sample. Arrays are indexed by 0-based site; J[k] belongs to the
/// stabilizer centred on site k+1, V[k] to the bond (k+1, k+2) and h[k] to site
/// k+1. On an open chain J[0], J[L-1] and V[L-1] are unused and zero.
struct DisorderRealization {
    ModelParams params;
    std::vector<double> J, V, h;
    std::uint64_t seed = 0;

    int L() const noexcept { return params.L; }

    friend bool operator==(const DisorderRealization& a, const DisorderRealization& b) {
        return a.J == b.J && a.V == b.V && a.h == b.h && a.seed == b.seed;
    }
};

/// Site ranges used by the open chain. Periodic chains use every site/bond.
struct TermRange {
    int first, last; // 1-based inclusive
};

inline TermRange stabilizer_range(const ModelParams& p) {
    return p.boundary == Boundary::Open ? TermRange{2, p.L - 1} : TermRange{1, p.L};
}
inline TermRange bond_range(const ModelParams& p) {
    return p.boundary == Boundary::Open ? TermRange{1, p.L - 1} : TermRange{1, p.L};
}

inline int wrap_site(int site, int L) { return ((site - 1) % L + L) % L + 1; }

/// Draws J, V, h in that order from one counter stream keyed by `seed`.
inline DisorderRealization sample_realization(const ModelParams& params, std::uint64_t seed) {
    params.validate();
    DisorderRealization r;
    r.params = params;
    r.seed = seed;
    const int L = params.L;
    r.J.assign(L, 0.0);
    r.V.assign(L, 0.0);
    r.h.assign(L, 0.0);
    CounterRng rng(seed);
    auto draw = [&](double c, double w) { return rng.uniform(c - w, c + w); };
    const auto sr = stabilizer_range(params);
    for (int k = sr.first; k <= sr.last; ++k) r.J[k - 1] = draw(params.J, params.dJ);
    const auto br = bond_range(params);
    for (int k = br.first; k <= br.last; ++k) r.V[k - 1] = draw(params.V, params.dV);
    for (int k = 1; k <= L; ++k) r.h[k - 1] = draw(params.h, params.dh);
    return r;
}

/// sigma^z_{k-1} sigma^x_k sigma^z_{k+1} with unit coefficient. On an open chain
/// the end stabilizers are the boundary forms X1 Z2 and Z_{L-1} X_L.
inline PauliString stabilizer(int L, int k, Boundary boundary = Boundary::Open) {
    if (k < 1 || k > L) throw IndexError("stabilizer index " + std::to_string(k) + " out of range");
    if (boundary == Boundary::Open) {
        if (k == 1) return PauliString(1.0, {{1, Axis::X}, {2, Axis::Z}});
        if (k == L) return PauliString(1.0, {{L - 1, Axis::Z}, {L, Axis::X}});
    }
    return PauliString(1.0, {{wrap_site(k - 1, L), Axis::Z}, {k, Axis::X}, {wrap_site(k + 1, L), Axis::Z}});
}

/// Product of sigma^x over even (parity = 0) or odd (parity = 1) sites.
inline PauliString sublattice_parity(int L, int parity) {
    std::vector<PauliFactor> f;
    for (int k = 1; k <= L; ++k)
        if (k % 2 == (parity == 0 ? 0 : 1)) f.push_back({k, Axis::X});
    return PauliString(1.0, std::move(f));
}

/// H2 split into mutually commuting groups:
/// A stabilizers, B bonds starting on even sites, C bonds starting on odd
/// sites, D fields. Zero-coefficient terms are omitted.
struct GroupedTerms {
    int L = 0;
    std::vector<PauliString> A, B, C, D;

    std::vector<PauliString> all() const {
        std::vector<PauliString> out;
        out.reserve(A.size() + B.size() + C.size() + D.size());
        for (const auto* g : {&A, &B, &C, &D}) out.insert(out.end(), g->begin(), g->end());
        return out;
    }

    bool only_stabilizers() const noexcept { return B.empty() && C.empty() && D.empty(); }
};

inline GroupedTerms build_grouped_terms(const DisorderRealization& r) {
    const auto& p = r.params;
    const int L = p.L;
    GroupedTerms g;
    g.L = L;
    const auto sr = stabilizer_range(p);
    for (int k = sr.first; k <= sr.last; ++k)
        if (r.J[k - 1] != 0.0) g.A.push_back(stabilizer(L, k, p.boundary).with_coefficient(-r.J[k - 1]));
    const auto br = bond_range(p);
    for (int k = br.first; k <= br.last; ++k) {
        if (r.V[k - 1] == 0.0) continue;
        PauliString xx(-r.V[k - 1], {{k, Axis::X}, {wrap_site(k + 1, L), Axis::X}});
        (k % 2 == 0 ? g.B : g.C).push_back(std::move(xx));
    }
    for (int k = 1; k <= L; ++k)
        if (r.h[k - 1] != 0.0) g.D.push_back(PauliString(-r.h[k - 1], {{k, Axis::X}}));
    return g;
}

/// H2' = H2 - J1 X1 Z2 - JL Z_{L-1} X_L; the boundary terms join group A.
inline GroupedTerms h2_prime_terms(const DisorderRealization& r, double J1, double JL) {
    if (r.params.boundary != Boundary::Open)
        throw ContractError("boundary stabilizer terms need an open chain");
    GroupedTerms g = build_grouped_terms(r);
    const int L = r.L();
    if (J1 != 0.0) g.A.push_back(stabilizer(L, 1).with_coefficient(-J1));
    if (JL != 0.0) g.A.push_back(stabilizer(L, L).with_coefficient(-JL));
    return g;
}

/// Terms of the Hamiltonian the realization describes: H2, or H2' when the
/// params carry boundary stabilizer couplings.
inline GroupedTerms hamiltonian_terms(const DisorderRealization& r) {
    if (r.params.boundary_stabilizers)
        return h2_prime_terms(r, r.params.boundary_stabilizers->J1, r.params.boundary_stabilizers->JL);
    return build_grouped_terms(r);
}

} // namespace sptc
