#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sptc/errors.hpp"
#include "sptc/exact.hpp"
#include "sptc/model.hpp"
#include "sptc/pauli.hpp"
#include "sptc/statevector.hpp"

namespace sptc {

struct TruncationPolicy {
    int chi_max = 64;
    double svd_cutoff = 1e-10; // largest discarded weight per split
};

/// Open-boundary MPS with one orthogonality center. Site i (0-based) holds
/// m[s] of shape (left bond) x (right bond) for physical state s.
class MatrixProductState {
public:
    struct Site {
        std::array<Eigen::MatrixXcd, 2> m;
        Eigen::Index left() const { return m[0].rows(); }
        Eigen::Index right() const { return m[0].cols(); }
    };

    MatrixProductState() = default;
    MatrixProductState(std::vector<Site> sites, int center, TruncationPolicy policy)
        : sites_(std::move(sites)), center_(center), policy_(policy), bond_discarded_(sites_.size(), 0.0) {}

    int L() const noexcept { return static_cast<int>(sites_.size()); }
    int center() const noexcept { return center_; }
    const TruncationPolicy& policy() const noexcept { return policy_; }
    void set_policy(TruncationPolicy p) { policy_ = p; }
    const Site& site(int i) const { return sites_[i]; }

    /// Sum of discarded weights over all truncations so far.
    double discarded_weight() const noexcept { return discarded_; }
    /// 1 - prod(1 - w) over all truncations. Exact for a single truncation; over
    /// many truncations the errors add coherently and this underestimates the
    /// infidelity to the untruncated run (see truncation_error_bound).
    double truncation_infidelity() const noexcept { return 1.0 - kept_fidelity_; }
    /// Rigorous bound on 1 - |<exact|truncated>|^2: each truncation moves the
    /// normalized state by d = sqrt(2 - 2 sqrt(1 - w)), unitaries preserve
    /// distances, and 1 - |<a|b>|^2 <= |a - b|^2 for unit vectors.
    double truncation_error_bound() const noexcept { return std::min(1.0, distance_sum_ * distance_sum_); }
    /// Cumulative discarded weight per bond (bond b sits right of site b, 0-based).
    const std::vector<double>& bond_discarded() const noexcept { return bond_discarded_; }

    int max_bond() const {
        Eigen::Index chi = 1;
        for (const auto& s : sites_) chi = std::max(chi, s.right());
        return static_cast<int>(chi);
    }

    std::vector<int> bond_dimensions() const {
        std::vector<int> d;
        for (int i = 0; i + 1 < L(); ++i) d.push_back(static_cast<int>(sites_[i].right()));
        return d;
    }

    /// Move the orthogonality center to site `target` by QR sweeps.
    void move_center(int target) {
        if (target < 0 || target >= L()) throw IndexError("center target out of range");
        while (center_ < target) shift_right();
        while (center_ > target) shift_left();
    }

    /// Apply a 2^k x 2^k gate to sites first..first+k-1 (0-based); the first
    /// site is the least significant bit of the gate's index. One-site gates
    /// need no truncation. Multi-site blocks are split by SVDs, sweeping left
    /// to right (center ends on the last site) or right to left.
    void apply_gate(int first, int k, const Eigen::MatrixXcd& G, bool sweep_right = true) {
        if (k < 1 || k > 3) throw ContractError("gates act on 1 to 3 contiguous sites");
        if (first < 0 || first + k > L()) throw IndexError("gate outside the chain");
        if (G.rows() != (1 << k) || G.cols() != (1 << k)) throw ContractError("gate size does not match support");
        if (k == 1) {
            auto& s = sites_[first];
            const Eigen::MatrixXcd a0 = s.m[0], a1 = s.m[1];
            s.m[0] = G(0, 0) * a0 + G(0, 1) * a1;
            s.m[1] = G(1, 0) * a0 + G(1, 1) * a1;
            return;
        }
        // bring the center into the block
        if (center_ < first) move_center(first);
        else if (center_ > first + k - 1) move_center(first + k - 1);

        const int n = 1 << k;
        std::vector<Eigen::MatrixXcd> theta(n);
        for (int c = 0; c < n; ++c) {
            Eigen::MatrixXcd t = sites_[first].m[c & 1];
            for (int j = 1; j < k; ++j) t = t * sites_[first + j].m[(c >> j) & 1];
            theta[c] = std::move(t);
        }
        std::vector<Eigen::MatrixXcd> out(n, Eigen::MatrixXcd::Zero(theta[0].rows(), theta[0].cols()));
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                if (G(r, c) != cplx(0.0)) out[r] += G(r, c) * theta[c];
        if (sweep_right) split_right(first, k, std::move(out));
        else split_left(first, k, std::move(out));
    }

    /// Full amplitude vector (L <= 20).
    StateVector to_statevector() const {
        if (L() > 20) throw CapacityError("MPS to statevector supports L <= 20");
        const Eigen::Index d = Eigen::Index{1} << L();
        Eigen::VectorXcd a(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            Eigen::MatrixXcd t = sites_[0].m[i & 1];
            for (int j = 1; j < L(); ++j) t = t * sites_[j].m[(i >> j) & 1];
            a[i] = t(0, 0);
        }
        return StateVector(L(), std::move(a));
    }

    double norm() const {
        Eigen::MatrixXcd E = Eigen::MatrixXcd::Identity(1, 1);
        for (const auto& s : sites_) E = s.m[0].adjoint() * E * s.m[0] + s.m[1].adjoint() * E * s.m[1];
        return std::sqrt(std::abs(E(0, 0)));
    }

    /// Largest deviation from the isometry conditions on either side of the center.
    double canonical_error() const {
        double err = 0.0;
        for (int i = 0; i < center_; ++i) {
            const auto& s = sites_[i];
            const Eigen::MatrixXcd I = s.m[0].adjoint() * s.m[0] + s.m[1].adjoint() * s.m[1];
            err = std::max(err, (I - Eigen::MatrixXcd::Identity(I.rows(), I.cols())).norm());
        }
        for (int i = center_ + 1; i < L(); ++i) {
            const auto& s = sites_[i];
            const Eigen::MatrixXcd I = s.m[0] * s.m[0].adjoint() + s.m[1] * s.m[1].adjoint();
            err = std::max(err, (I - Eigen::MatrixXcd::Identity(I.rows(), I.cols())).norm());
        }
        return err;
    }

    /// Schmidt values across the bond right of site `bond` (0-based); moves the center.
    Eigen::VectorXd schmidt_values(int bond) {
        if (bond < 0 || bond + 1 >= L()) throw ContractError("bond index out of range");
        move_center(bond);
        const auto& s = sites_[bond];
        Eigen::MatrixXcd M(2 * s.left(), s.right());
        M << s.m[0], s.m[1];
        Eigen::BDCSVD<Eigen::MatrixXcd> svd(M);
        return svd.singularValues();
    }

private:
    void shift_right() {
        auto& s = sites_[center_];
        const Eigen::Index dl = s.left(), dr = s.right();
        Eigen::MatrixXcd M(2 * dl, dr);
        M << s.m[0], s.m[1];
        Eigen::HouseholderQR<Eigen::MatrixXcd> qr(M);
        const Eigen::Index k = std::min(2 * dl, dr);
        const Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(2 * dl, k);
        const Eigen::MatrixXcd R = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
        s.m[0] = Q.topRows(dl);
        s.m[1] = Q.bottomRows(dl);
        auto& nx = sites_[center_ + 1];
        nx.m[0] = R * nx.m[0];
        nx.m[1] = R * nx.m[1];
        ++center_;
    }

    void shift_left() {
        auto& s = sites_[center_];
        const Eigen::Index dl = s.left(), dr = s.right();
        Eigen::MatrixXcd M(dl, 2 * dr);
        M << s.m[0], s.m[1];
        // M = L Q via QR of M^dagger
        Eigen::HouseholderQR<Eigen::MatrixXcd> qr(M.adjoint());
        const Eigen::Index k = std::min(dl, 2 * dr);
        const Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(2 * dr, k);
        const Eigen::MatrixXcd R = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
        const Eigen::MatrixXcd Qd = Q.adjoint(); // k x 2dr
        s.m[0] = Qd.leftCols(dr);
        s.m[1] = Qd.rightCols(dr);
        const Eigen::MatrixXcd Lm = R.adjoint(); // dl x k
        auto& pv = sites_[center_ - 1];
        pv.m[0] = pv.m[0] * Lm;
        pv.m[1] = pv.m[1] * Lm;
        --center_;
    }

    /// Dominant eigenvectors of the Gram matrix G (M M^dagger or M^dagger M),
    /// i.e. the left or right singular vectors of M, truncated per policy. The
    /// Gram route needs no division by singular values and its weights carry an
    /// absolute error near 1e-16, well below any cutoff in use.
    Eigen::MatrixXcd truncated_basis(const Eigen::MatrixXcd& G, int bond) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(G);
        const Eigen::VectorXd& ev = eig.eigenvalues(); // ascending
        const Eigen::Index n = ev.size();
        const double total = ev.cwiseMax(0.0).sum();
        Eigen::Index keep = n;
        double tail = 0.0;
        while (keep > 1) {
            const double w = std::max(0.0, ev[n - keep]) / total;
            if (keep > policy_.chi_max || tail + w <= policy_.svd_cutoff) {
                tail += w;
                --keep;
            } else {
                break;
            }
        }
        if (tail > 0.0) {
            discarded_ += tail;
            kept_fidelity_ *= 1.0 - tail;
            distance_sum_ += std::sqrt(std::max(0.0, 2.0 - 2.0 * std::sqrt(1.0 - tail)));
            bond_discarded_[bond] += tail;
        }
        // descending order
        return eig.eigenvectors().rightCols(keep).rowwise().reverse();
    }

    // theta[c] for configurations c of k sites (bit j = site first + j).
    void split_right(int first, int k, std::vector<Eigen::MatrixXcd> theta) {
        for (int j = 0; j + 1 < k; ++j) {
            const int rest = k - j - 1;
            const Eigen::Index dl = theta[0].rows(), dr = theta[0].cols();
            Eigen::MatrixXcd M(2 * dl, (Eigen::Index{1} << rest) * dr);
            for (int c = 0; c < (1 << (rest + 1)); ++c)
                M.block((c & 1) * dl, (c >> 1) * dr, dl, dr) = theta[c];
            const Eigen::MatrixXcd G = M * M.adjoint();
            const Eigen::MatrixXcd U = truncated_basis(G, first + j);
            sites_[first + j].m[0] = U.topRows(dl);
            sites_[first + j].m[1] = U.bottomRows(dl);
            Eigen::MatrixXcd R = U.adjoint() * M;
            R /= R.norm();
            std::vector<Eigen::MatrixXcd> next(1 << rest);
            for (int c = 0; c < (1 << rest); ++c) next[c] = R.middleCols(c * dr, dr);
            theta = std::move(next);
        }
        sites_[first + k - 1].m[0] = theta[0];
        sites_[first + k - 1].m[1] = theta[1];
        center_ = first + k - 1;
    }

    void split_left(int first, int k, std::vector<Eigen::MatrixXcd> theta) {
        for (int j = k - 1; j > 0; --j) {
            // theta indexed by the bits of sites first..first+j
            const int rest = j;
            const Eigen::Index dl = theta[0].rows(), dr = theta[0].cols();
            Eigen::MatrixXcd M((Eigen::Index{1} << rest) * dl, 2 * dr);
            for (int c = 0; c < (1 << (rest + 1)); ++c) {
                const int lo = c & ((1 << rest) - 1), top = c >> rest;
                M.block(lo * dl, top * dr, dl, dr) = theta[c];
            }
            const Eigen::MatrixXcd G = M.adjoint() * M;
            const Eigen::MatrixXcd V = truncated_basis(G, first + j - 1);
            const Eigen::MatrixXcd Vd = V.adjoint();
            sites_[first + j].m[0] = Vd.leftCols(dr);
            sites_[first + j].m[1] = Vd.rightCols(dr);
            Eigen::MatrixXcd R = M * V;
            R /= R.norm();
            std::vector<Eigen::MatrixXcd> next(1 << rest);
            for (int c = 0; c < (1 << rest); ++c) next[c] = R.middleRows(c * dl, dl);
            theta = std::move(next);
        }
        sites_[first].m[0] = theta[0];
        sites_[first].m[1] = theta[1];
        center_ = first;
    }

    std::vector<Site> sites_;
    int center_ = 0;
    TruncationPolicy policy_;
    double discarded_ = 0.0;
    double kept_fidelity_ = 1.0;
    double distance_sum_ = 0.0;
    std::vector<double> bond_discarded_;
};

/// Product state from per-site bits (bits[0] is site 1); all bonds 1.
inline MatrixProductState product_state_mps(std::span<const int> bits, TruncationPolicy policy = {}) {
    if (bits.empty()) throw ContractError("product state needs at least one site");
    std::vector<MatrixProductState::Site> sites(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] != 0 && bits[i] != 1) throw ContractError("bits must be 0 or 1");
        sites[i].m[0] = Eigen::MatrixXcd::Constant(1, 1, bits[i] == 0 ? 1.0 : 0.0);
        sites[i].m[1] = Eigen::MatrixXcd::Constant(1, 1, bits[i] == 1 ? 1.0 : 0.0);
    }
    return MatrixProductState(std::move(sites), 0, policy);
}

inline MatrixProductState product_state_mps(int L, int bit = 0, TruncationPolicy policy = {}) {
    std::vector<int> bits(L, bit);
    return product_state_mps(bits, policy);
}

inline void check_contiguous(const PauliString& p, int L) {
    p.check_sites(L);
    if (p.is_identity()) throw ContractError("identity string has no support");
    const int span = p.max_site() - p.min_site() + 1;
    if (span > 3) throw ContractError("MPS terms must be supported on at most 3 contiguous sites");
}

/// Dense exp(i theta c P) on the contiguous block min_site..max_site.
inline Eigen::MatrixXcd pauli_block_exp(const PauliString& p, double theta) {
    const int k = p.max_site() - p.min_site() + 1;
    const PauliMask mask(p, p.min_site());
    const int n = 1 << k;
    const double a = theta * p.coefficient();
    Eigen::MatrixXcd G = std::cos(a) * Eigen::MatrixXcd::Identity(n, n);
    // P|c> = phase(c) |c ^ flip>
    for (int c = 0; c < n; ++c) G(c ^ static_cast<int>(mask.flip), c) += cplx(0, std::sin(a)) * mask.phase(c);
    return G;
}

/// exp(i theta c P) for a string on 1-3 contiguous sites.
inline MatrixProductState apply_term_exp(MatrixProductState mps, const PauliString& p, double theta,
                                         bool sweep_right = true) {
    check_contiguous(p, mps.L());
    const int k = p.max_site() - p.min_site() + 1;
    mps.apply_gate(p.min_site() - 1, k, pauli_block_exp(p, theta), sweep_right);
    return mps;
}

namespace detail {

inline void apply_layer(MatrixProductState& mps, std::vector<const PauliString*> layer, double dt, bool& right) {
    std::sort(layer.begin(), layer.end(),
              [](const PauliString* a, const PauliString* b) { return a->min_site() < b->min_site(); });
    if (!right) std::reverse(layer.begin(), layer.end());
    for (const auto* p : layer) {
        const int k = p->max_site() - p->min_site() + 1;
        mps.apply_gate(p->min_site() - 1, k, pauli_block_exp(*p, -dt), right);
    }
    right = !right;
}

/// Stabilizer-type strings sorted into three non-overlapping sublayers by the
/// position of their X factor mod 3.
inline std::array<std::vector<const PauliString*>, 3> stabilizer_sublayers(const std::vector<PauliString>& A) {
    std::array<std::vector<const PauliString*>, 3> out;
    for (const auto& p : A) {
        int centre = p.min_site();
        for (const auto& f : p.factors())
            if (f.axis == Axis::X) centre = f.site;
        out[centre % 3].push_back(&p);
    }
    return out;
}

} // namespace detail

/// One drive period: the U1 single-site layer, then (T - T1)/dt substeps of
/// the A sublayers (stabilizer centres k = 0, 1, 2 mod 3), B, C and D. The
/// ideal limit (only stabilizers) takes one exact step. Consecutive layers
/// sweep in alternating directions so the center never travels back empty.
inline MatrixProductState tebd_floquet_period(MatrixProductState mps, const DisorderRealization& r, double delta,
                                              double dt, const GroupedTerms& terms) {
    if (r.params.boundary != Boundary::Open) throw ContractError("TEBD supports open chains only");
    if (r.L() != mps.L()) throw ContractError("realization and MPS sizes differ");
    for (const auto* g : {&terms.A, &terms.B, &terms.C, &terms.D})
        for (const auto& p : *g) check_contiguous(p, mps.L());

    const double a = std::numbers::pi / 2 - delta;
    Eigen::MatrixXcd x(2, 2);
    x << std::cos(a), cplx(0, -std::sin(a)), cplx(0, -std::sin(a)), std::cos(a);
    for (int i = 0; i < mps.L(); ++i) mps.apply_gate(i, 1, x);

    const double dur = r.params.second_interval();
    const int n = terms.only_stabilizers() ? 1 : trotter_substeps(dur, dt);
    const double step = dur / n;
    const auto sub = detail::stabilizer_sublayers(terms.A);
    auto ptrs = [](const std::vector<PauliString>& g) {
        std::vector<const PauliString*> v;
        for (const auto& p : g) v.push_back(&p);
        return v;
    };
    bool right = mps.center() < mps.L() / 2;
    for (int s = 0; s < n; ++s) {
        for (const auto& layer : sub)
            if (!layer.empty()) detail::apply_layer(mps, layer, step, right);
        if (!terms.B.empty()) detail::apply_layer(mps, ptrs(terms.B), step, right);
        if (!terms.C.empty()) detail::apply_layer(mps, ptrs(terms.C), step, right);
        for (const auto& p : terms.D) mps.apply_gate(p.min_site() - 1, 1, pauli_block_exp(p, -step));
    }
    return mps;
}

inline MatrixProductState tebd_floquet_period(MatrixProductState mps, const DisorderRealization& r, double delta,
                                              double dt) {
    return tebd_floquet_period(std::move(mps), r, delta, dt, hamiltonian_terms(r));
}

inline double entropy_of_schmidt(const Eigen::VectorXd& s) {
    const Eigen::VectorXd w = s.array().square() / s.squaredNorm();
    return detail::entropy_from_weights(w);
}

/// Von Neumann entropy (nats) across the central bond, between sites L/2 and L/2 + 1.
inline double half_chain_entropy(MatrixProductState& mps) {
    return entropy_of_schmidt(mps.schmidt_values(mps.L() / 2 - 1));
}

inline double half_chain_entropy(const MatrixProductState& mps) {
    MatrixProductState copy = mps;
    return half_chain_entropy(copy);
}

/// <psi|P|psi> by contraction over the sites between the support and the
/// center; tensors outside that window are isometries and contract to identity.
inline double mps_expectation(const MatrixProductState& mps, const PauliString& p) {
    p.check_sites(mps.L());
    const int c = mps.center();
    const int lo = p.is_identity() ? c : std::min(p.min_site() - 1, c);
    const int hi = p.is_identity() ? c : std::max(p.max_site() - 1, c);
    std::vector<Axis> op(mps.L(), Axis::X);
    std::vector<bool> has(mps.L(), false);
    for (const auto& f : p.factors()) {
        op[f.site - 1] = f.axis;
        has[f.site - 1] = true;
    }
    const auto& s0 = mps.site(lo);
    Eigen::MatrixXcd E = Eigen::MatrixXcd::Identity(s0.left(), s0.left());
    for (int i = lo; i <= hi; ++i) {
        const auto& s = mps.site(i);
        if (!has[i]) {
            E = s.m[0].adjoint() * E * s.m[0] + s.m[1].adjoint() * E * s.m[1];
            continue;
        }
        switch (op[i]) {
        case Axis::Z: E = s.m[0].adjoint() * E * s.m[0] - s.m[1].adjoint() * E * s.m[1]; break;
        case Axis::X: E = s.m[0].adjoint() * E * s.m[1] + s.m[1].adjoint() * E * s.m[0]; break;
        case Axis::Y:
            // Y|0> = i|1>, Y|1> = -i|0>
            E = cplx(0, 1) * s.m[1].adjoint() * E * s.m[0] - cplx(0, 1) * s.m[0].adjoint() * E * s.m[1];
            break;
        }
    }
    const cplx v = E.trace();
    if (std::abs(v.imag()) > 1e-9) throw ContractError("pauli expectation has an imaginary part");
    return p.coefficient() * v.real();
}

/// <Z_j> for every site, in one center sweep on a copy.
inline std::vector<double> mps_magnetizations(MatrixProductState mps) {
    std::vector<double> out(mps.L());
    mps.move_center(0);
    for (int i = 0; i < mps.L(); ++i) {
        mps.move_center(i);
        const auto& s = mps.site(i);
        out[i] = s.m[0].squaredNorm() - s.m[1].squaredNorm();
    }
    return out;
}

/// <mps|state> for L <= 20.
inline cplx mps_overlap(const MatrixProductState& mps, const StateVector& state) {
    if (mps.L() != state.L()) throw ContractError("sizes differ");
    return mps.to_statevector().amplitudes().dot(state.amplitudes());
}

/// Cluster state as an MPS: H on every site then CZ on every bond.
inline MatrixProductState cluster_state_mps(int L, TruncationPolicy policy = {}) {
    auto mps = product_state_mps(L, 0, policy);
    Eigen::MatrixXcd h(2, 2);
    h << 1, 1, 1, -1;
    h /= std::sqrt(2.0);
    for (int i = 0; i < L; ++i) mps.apply_gate(i, 1, h);
    const Eigen::MatrixXcd cz = Eigen::Vector4cd(1, 1, 1, -1).asDiagonal();
    for (int i = 0; i + 1 < L; ++i) mps.apply_gate(i, 2, cz);
    return mps;
}

} // namespace sptc
