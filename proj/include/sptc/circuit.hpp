#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sptc/errors.hpp"
#include "sptc/model.hpp"
#include "sptc/rng.hpp"
#include "sptc/statevector.hpp"

namespace sptc {

enum class GateKind : std::uint8_t { X, Y, Z, H, CZ, CRz };

inline const char* gate_name(GateKind k) {
    switch (k) {
    case GateKind::X: return "X";
    case GateKind::Y: return "Y";
    case GateKind::Z: return "Z";
    case GateKind::H: return "H";
    case GateKind::CZ: return "CZ";
    case GateKind::CRz: return "CRz";
    }
    return "?";
}

inline bool is_two_qubit(GateKind k) { return k == GateKind::CZ || k == GateKind::CRz; }
inline bool is_rotation(GateKind k) {
    return k == GateKind::X || k == GateKind::Y || k == GateKind::Z || k == GateKind::CRz;
}

/// X(t) = exp(-i t/2 sigma^x), likewise Y, Z. CRz(t) rotates `b` by Z(t) when
/// `a` is |1>. Sites are 1-based; b = 0 for single-qubit gates.
struct Gate {
    GateKind kind = GateKind::H;
    int a = 1;
    int b = 0;
    double angle = 0.0;

    friend bool operator==(const Gate&, const Gate&) = default;

    static Gate x(int s, double t) { return {GateKind::X, s, 0, t}; }
    static Gate y(int s, double t) { return {GateKind::Y, s, 0, t}; }
    static Gate z(int s, double t) { return {GateKind::Z, s, 0, t}; }
    static Gate h(int s) { return {GateKind::H, s, 0, 0.0}; }
    static Gate cz(int s, int t) { return {GateKind::CZ, s, t, 0.0}; }
    static Gate crz(int c, int t, double th) { return {GateKind::CRz, c, t, th}; }

    Gate inverse() const {
        Gate g = *this;
        if (is_rotation(kind)) g.angle = -angle;
        return g;
    }
};

/// Ordered gate list grouped into layers. layer_end[i] is one past the last
/// gate of layer i.
class Circuit {
public:
    Circuit() = default;
    explicit Circuit(int L) : L_(L) {
        if (L < 1) throw ParamError("circuit needs at least one site");
    }

    int L() const noexcept { return L_; }
    const std::vector<Gate>& gates() const noexcept { return gates_; }
    std::size_t size() const noexcept { return gates_.size(); }
    bool empty() const noexcept { return gates_.empty(); }
    int layers() const noexcept { return static_cast<int>(layer_end_.size()); }

    /// Gates of layer i.
    std::vector<Gate> layer(int i) const {
        const std::size_t lo = i == 0 ? 0 : layer_end_[i - 1];
        return {gates_.begin() + static_cast<std::ptrdiff_t>(lo),
                gates_.begin() + static_cast<std::ptrdiff_t>(layer_end_[i])};
    }

    /// Appends one layer. Gates inside a layer must act on disjoint sites.
    Circuit& add_layer(const std::vector<Gate>& layer) {
        if (layer.empty()) return *this;
        std::set<int> used;
        for (const auto& g : layer) {
            check(g);
            for (int s : {g.a, g.b}) {
                if (s == 0) continue;
                if (!used.insert(s).second)
                    throw ContractError("two gates of one layer act on site " + std::to_string(s));
            }
        }
        gates_.insert(gates_.end(), layer.begin(), layer.end());
        layer_end_.push_back(gates_.size());
        return *this;
    }

    /// A gate in a layer of its own.
    Circuit& add(const Gate& g) { return add_layer({g}); }

    Circuit& append(const Circuit& other) {
        if (other.L_ != L_) throw ContractError("circuit site counts differ");
        const std::size_t off = gates_.size();
        gates_.insert(gates_.end(), other.gates_.begin(), other.gates_.end());
        for (auto e : other.layer_end_) layer_end_.push_back(off + e);
        return *this;
    }

    /// Exact inverse: layers reversed, gates inverted.
    Circuit inverse() const {
        Circuit c(L_);
        for (int i = layers() - 1; i >= 0; --i) {
            auto l = layer(i);
            for (auto& g : l) g = g.inverse();
            c.add_layer(l);
        }
        return c;
    }

    /// Same skeleton with rotation angles replaced, in gate order.
    Circuit with_angles(const std::vector<double>& angles) const {
        Circuit c = *this;
        std::size_t k = 0;
        for (auto& g : c.gates_)
            if (is_rotation(g.kind)) {
                if (k >= angles.size()) throw ContractError("too few angles for circuit");
                g.angle = angles[k++];
            }
        if (k != angles.size()) throw ContractError("too many angles for circuit");
        return c;
    }

    void check(const Gate& g) const {
        auto in_range = [&](int s) { return s >= 1 && s <= L_; };
        if (!in_range(g.a)) throw IndexError("gate site " + std::to_string(g.a) + " out of range");
        if (is_two_qubit(g.kind)) {
            if (!in_range(g.b)) throw IndexError("gate site " + std::to_string(g.b) + " out of range");
            if (std::abs(g.a - g.b) != 1)
                throw ContractError("two-qubit gate on non-neighbouring sites " + std::to_string(g.a) + "," +
                                    std::to_string(g.b));
        } else if (g.b != 0) {
            throw ContractError("single-qubit gate with a second site");
        }
    }

private:
    int L_ = 0;
    std::vector<Gate> gates_;
    std::vector<std::size_t> layer_end_;
};

/// Layer count after merging runs of consecutive single-qubit layers.
inline int fused_depth(const Circuit& c) {
    int depth = 0;
    bool prev_single = false;
    for (int i = 0; i < c.layers(); ++i) {
        const auto l = c.layer(i);
        bool single = true;
        for (const auto& g : l) single = single && !is_two_qubit(g.kind);
        if (!(single && prev_single)) ++depth;
        prev_single = single;
    }
    return depth;
}

// ---------------------------------------------------------------------------
// Gate application

inline Eigen::Matrix2cd single_qubit_matrix(const Gate& g) {
    const double c = std::cos(g.angle / 2), s = std::sin(g.angle / 2);
    const cplx i(0, 1);
    Eigen::Matrix2cd m;
    switch (g.kind) {
    case GateKind::X: m << c, -i * s, -i * s, c; break;
    case GateKind::Y: m << c, -s, s, c; break;
    case GateKind::Z: m << std::exp(-i * (g.angle / 2)), 0, 0, std::exp(i * (g.angle / 2)); break;
    case GateKind::H: m << 1, 1, 1, -1; m /= std::numbers::sqrt2; break;
    default: throw ContractError("not a single-qubit gate");
    }
    return m;
}

/// Applies g to every column of `m` (rows index the 2^L basis).
template <class Mat>
void apply_gate(const Gate& g, Mat& m) {
    const auto n = static_cast<std::uint64_t>(m.rows());
    const Eigen::Index cols = m.cols();
    const std::uint64_t ba = std::uint64_t{1} << (g.a - 1);
    if (g.kind == GateKind::CZ) {
        const std::uint64_t both = ba | (std::uint64_t{1} << (g.b - 1));
        for (std::uint64_t i = 0; i < n; ++i)
            if ((i & both) == both) m.row(static_cast<Eigen::Index>(i)) *= -1.0;
        return;
    }
    if (g.kind == GateKind::CRz) {
        const std::uint64_t bb = std::uint64_t{1} << (g.b - 1);
        const cplx p0 = std::exp(cplx(0, -g.angle / 2)), p1 = std::conj(p0);
        for (std::uint64_t i = 0; i < n; ++i)
            if (i & ba) m.row(static_cast<Eigen::Index>(i)) *= (i & bb) ? p1 : p0;
        return;
    }
    const Eigen::Matrix2cd u = single_qubit_matrix(g);
    for (std::uint64_t i = 0; i < n; ++i) {
        if (i & ba) continue;
        const auto i0 = static_cast<Eigen::Index>(i), i1 = static_cast<Eigen::Index>(i | ba);
        for (Eigen::Index c = 0; c < cols; ++c) {
            const cplx a0 = m(i0, c), a1 = m(i1, c);
            m(i0, c) = u(0, 0) * a0 + u(0, 1) * a1;
            m(i1, c) = u(1, 0) * a0 + u(1, 1) * a1;
        }
    }
}

/// Depolarizing trajectory noise: after each gate, with probability p1 (p2)
/// a uniformly chosen non-identity Pauli on the gate's support is inserted.
struct NoiseModel {
    double p1 = 0.0;
    double p2 = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (p1 < 0 || p1 >= 1 || p2 < 0 || p2 >= 1)
            throw ParamError("depolarizing probabilities must lie in [0, 1)");
    }
};

namespace detail {

inline void apply_pauli_on(int site, int which, Eigen::VectorXcd& psi) {
    if (which == 0) return;
    const Axis ax = which == 1 ? Axis::X : (which == 2 ? Axis::Y : Axis::Z);
    const PauliMask m(PauliString(1.0, {{site, ax}}));
    Eigen::VectorXcd out(psi.size());
    apply_pauli_mask(m, psi, out);
    psi.swap(out);
}

} // namespace detail

inline StateVector run_circuit(StateVector state, const Circuit& c, const std::optional<NoiseModel>& noise = {}) {
    if (state.L() != c.L())
        throw ContractError("circuit has " + std::to_string(c.L()) + " sites, state has " + std::to_string(state.L()));
    auto& psi = state.amplitudes();
    if (!noise) {
        for (const auto& g : c.gates()) apply_gate(g, psi);
        return state;
    }
    noise->validate();
    CounterRng rng(noise->seed);
    for (const auto& g : c.gates()) {
        apply_gate(g, psi);
        if (is_two_qubit(g.kind)) {
            if (noise->p2 > 0 && rng.uniform() < noise->p2) {
                const int w = 1 + static_cast<int>(rng.below(15));
                detail::apply_pauli_on(g.a, w % 4, psi);
                detail::apply_pauli_on(g.b, w / 4, psi);
            }
        } else if (noise->p1 > 0 && rng.uniform() < noise->p1) {
            detail::apply_pauli_on(g.a, 1 + static_cast<int>(rng.below(3)), psi);
        }
    }
    return state;
}

inline constexpr int kMaxUnitarySites = 8;

inline Eigen::MatrixXcd circuit_unitary(const Circuit& c) {
    if (c.L() > kMaxUnitarySites)
        throw CapacityError("circuit_unitary supports L <= " + std::to_string(kMaxUnitarySites));
    const Eigen::Index d = StateVector::dim_of(c.L());
    Eigen::MatrixXcd U = Eigen::MatrixXcd::Identity(d, d);
    for (const auto& g : c.gates()) apply_gate(g, U);
    return U;
}

/// |Tr(A^dag B)| / d, the phase-free operator fidelity.
inline double operator_fidelity(const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& B) {
    if (A.rows() != B.rows() || A.cols() != B.cols()) throw ContractError("operator dimensions differ");
    return std::abs((A.adjoint() * B).trace()) / static_cast<double>(A.rows());
}

// ---------------------------------------------------------------------------
// Model circuits

/// X(pi - 2 delta) on every site: exp(-i (pi/2 - delta) sum X).
inline Circuit u1_layer(int L, double delta) {
    Circuit c(L);
    std::vector<Gate> l;
    for (int s = 1; s <= L; ++s) l.push_back(Gate::x(s, std::numbers::pi - 2 * delta));
    return c.add_layer(l);
}

/// W = CZ(even bonds) CZ(odd bonds) H(all): maps Z_k to the stabilizer of site k.
inline Circuit cluster_frame(int L) {
    Circuit c(L);
    std::vector<Gate> hs, odd, even;
    for (int s = 1; s <= L; ++s) hs.push_back(Gate::h(s));
    for (int s = 1; s < L; ++s) (s % 2 ? odd : even).push_back(Gate::cz(s, s + 1));
    return c.add_layer(hs).add_layer(odd).add_layer(even);
}

/// exp(-i (T - T1) H2) for a stabilizer-only realization as W D W^dag, with D
/// a layer of Z rotations. Boundary stabilizer couplings enter D on the edges.
inline Circuit cluster_u2_circuit(const DisorderRealization& r) {
    const auto& p = r.params;
    if (p.boundary != Boundary::Open) throw ContractError("cluster_u2_circuit needs an open chain");
    for (int k = 0; k < r.L(); ++k)
        if (r.V[k] != 0.0 || r.h[k] != 0.0)
            throw ContractError("cluster_u2_circuit needs V = h = 0; compile the general case instead");
    const int L = r.L();
    const double t = p.second_interval();
    std::vector<double> J = r.J;
    if (p.boundary_stabilizers) {
        J[0] = p.boundary_stabilizers->J1;
        J[L - 1] = p.boundary_stabilizers->JL;
    }
    const Circuit W = cluster_frame(L);
    Circuit c = W.inverse();
    std::vector<Gate> d;
    // exp(i J t Z) = Z(-2 J t)
    for (int s = 1; s <= L; ++s) d.push_back(Gate::z(s, -2.0 * J[s - 1] * t));
    c.add_layer(d);
    return c.append(W);
}

inline Circuit floquet_period_circuit(const DisorderRealization& r, double delta) {
    Circuit c = u1_layer(r.L(), delta);
    return c.append(cluster_u2_circuit(r));
}

inline Circuit floquet_period_circuit(const DisorderRealization& r) {
    return floquet_period_circuit(r, r.params.delta);
}

/// Period with a caller-supplied U2 circuit (e.g. a compiled one).
inline Circuit floquet_period_circuit(int L, double delta, const Circuit& u2) {
    Circuit c = u1_layer(L, delta);
    return c.append(u2);
}

inline Circuit repeat(const Circuit& period, int n) {
    if (n < 0) throw ParamError("repeat count must be >= 0");
    Circuit c(period.L());
    for (int i = 0; i < n; ++i) c.append(period);
    return c;
}

/// Cluster state preparation followed by Z(pi) on each excitation site, which
/// flips the stabilizer centred there.
inline Circuit spt_prep_circuit(int L, const std::vector<int>& excitations = {}) {
    Circuit c = cluster_frame(L);
    std::vector<Gate> z;
    std::set<int> seen;
    for (int s : excitations) {
        if (s < 1 || s > L) throw IndexError("excitation site " + std::to_string(s) + " out of range");
        if (seen.insert(s).second) z.push_back(Gate::z(s, std::numbers::pi));
    }
    return c.add_layer(z);
}

/// period^n followed by its exact inverse.
inline Circuit echo_circuit(const Circuit& period, int n) {
    const Circuit fwd = repeat(period, n);
    Circuit c = fwd;
    return c.append(fwd.inverse());
}

// ---------------------------------------------------------------------------
// Text format: one gate per line, `KIND site[,site] [angle]`, blank line
// between layers, `#` comments, first line `L <n>`. Angles are written with
// 17 significant digits so parsing returns the same double.

inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string to_text(const Circuit& c) {
    std::ostringstream os;
    os << "L " << c.L() << '\n';
    for (int i = 0; i < c.layers(); ++i) {
        if (i > 0) os << '\n';
        for (const auto& g : c.layer(i)) {
            os << gate_name(g.kind) << ' ' << g.a;
            if (is_two_qubit(g.kind)) os << ',' << g.b;
            if (is_rotation(g.kind)) os << ' ' << format_double(g.angle);
            os << '\n';
        }
    }
    return os.str();
}

inline Circuit circuit_from_text(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    std::optional<Circuit> c;
    std::vector<Gate> layer;
    auto fail = [&](const std::string& why) {
        throw ParamError("circuit text line " + std::to_string(lineno) + ": " + why);
    };
    auto flush = [&] {
        if (!layer.empty()) c->add_layer(layer);
        layer.clear();
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        std::istringstream ls(line);
        std::string kind;
        if (!(ls >> kind)) {
            if (c) flush();
            continue;
        }
        if (!c) {
            int L = 0;
            if (kind != "L" || !(ls >> L)) fail("expected header `L <sites>`");
            c.emplace(L);
            continue;
        }
        Gate g;
        const char* names[] = {"X", "Y", "Z", "H", "CZ", "CRz"};
        int k = 0;
        while (k < 6 && kind != names[k]) ++k;
        if (k == 6) fail("unknown gate `" + kind + "`");
        g.kind = static_cast<GateKind>(k);
        std::string sites;
        if (!(ls >> sites)) fail("missing site");
        if (is_two_qubit(g.kind)) {
            const auto comma = sites.find(',');
            if (comma == std::string::npos) fail("two-qubit gate needs `a,b`");
            g.a = std::stoi(sites.substr(0, comma));
            g.b = std::stoi(sites.substr(comma + 1));
        } else {
            g.a = std::stoi(sites);
        }
        if (is_rotation(g.kind)) {
            std::string a;
            if (!(ls >> a)) fail("missing angle");
            const auto res = std::from_chars(a.data(), a.data() + a.size(), g.angle);
            if (res.ec != std::errc() || res.ptr != a.data() + a.size()) fail("bad angle `" + a + "`");
        }
        layer.push_back(g);
    }
    if (!c) throw ParamError("circuit text is empty");
    flush();
    return *c;
}

} // namespace sptc
