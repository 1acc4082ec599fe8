#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sptc/errors.hpp"
#include "sptc/exact.hpp"
#include "sptc/model.hpp"
#include "sptc/observables.hpp"
#include "sptc/parallel.hpp"
#include "sptc/rng.hpp"

namespace sptc {

// Edge-spin lifetime from the spectral decomposition of U_F.
//
// U_F commutes with the sublattice parities P_e = prod X_even and
// P_o = prod X_odd, so it is block diagonal over the four character sectors.
// Each orbit {x, x^e, x^o, x^eo} of the parity flips has exactly one member
// with bits of sites 1 and 2 clear; that member labels the sector basis
// vector v = (|x> + c_e|x^e> + c_o|x^o> + c_e c_o|x^eo>) / 2. Z_1 maps the
// vector labelled x in sector (c_e, c_o) onto the one labelled x in sector
// (c_e, -c_o), so <0|Z_1(n)|0> is a sum of sector overlaps.

inline constexpr int kMaxLifetimeSites = 12;

class SectorFloquet {
public:
    explicit SectorFloquet(const DisorderRealization& r, const EvolutionMethod& method = Trotter{}) : L_(r.L()) {
        if (L_ > kMaxLifetimeSites)
            throw CapacityError("sector Floquet decomposition supports L <= " + std::to_string(kMaxLifetimeSites));
        if (r.params.boundary != Boundary::Open || r.params.boundary_stabilizers)
            throw ContractError("sector decomposition needs an open chain without boundary stabilizers");
        const std::uint64_t D = std::uint64_t{1} << L_, n = D / 4;
        std::uint64_t me = 0, mo = 0;
        for (int k = 1; k <= L_; ++k) (k % 2 ? mo : me) |= std::uint64_t{1} << (k - 1);

        std::array<Eigen::MatrixXcd, 4> B;
        for (auto& b : B) b.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        const auto terms = hamiltonian_terms(r);
        for (std::uint64_t x = 0; x < n; ++x) {
            const auto psi = floquet_step(StateVector::basis(L_, x << 2), r.params, terms, method).amplitudes();
            for (std::uint64_t y = 0; y < n; ++y) {
                const std::uint64_t b = y << 2;
                const cplx p0 = psi[b], pe = psi[b ^ me], po = psi[b ^ mo], peo = psi[b ^ me ^ mo];
                for (int s = 0; s < 4; ++s) {
                    const double ce = s & 2 ? -1.0 : 1.0, co = s & 1 ? -1.0 : 1.0;
                    B[s](static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) = p0 + ce * pe + co * po + ce * co * peo;
                }
            }
        }
        for (int s = 0; s < 4; ++s) {
            Eigen::ComplexSchur<Eigen::MatrixXcd> schur(B[s]);
            if (schur.info() != Eigen::Success) throw ConvergenceError("complex Schur decomposition failed", 0.0);
            E_[s] = schur.matrixU();
            phase_[s].resize(static_cast<Eigen::Index>(n));
            for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) phase_[s][i] = std::arg(schur.matrixT()(i, i));
            // |0...0> has component 1/2 on the x = 0 vector of every sector.
            a_[s] = 0.5 * E_[s].row(0).adjoint();
        }
    }

    int L() const noexcept { return L_; }

    /// <0...0| Z_1(nT) |0...0> for each period in `periods`.
    std::vector<double> edge_magnetization(const std::vector<long long>& periods) const {
        const auto K = static_cast<Eigen::Index>(periods.size());
        std::array<Eigen::MatrixXcd, 4> c;
        for (int s = 0; s < 4; ++s) {
            Eigen::MatrixXcd A(a_[s].size(), K);
            for (Eigen::Index k = 0; k < K; ++k)
                for (Eigen::Index i = 0; i < a_[s].size(); ++i)
                    A(i, k) = a_[s][i] * std::polar(1.0, std::fmod(static_cast<double>(periods[k]) * phase_[s][i], 2 * std::numbers::pi));
            c[s].noalias() = E_[s] * A;
        }
        std::vector<double> out(periods.size());
        for (Eigen::Index k = 0; k < K; ++k) {
            // sectors 0/1 and 2/3 differ in the odd character
            const cplx v = c[0].col(k).dot(c[1].col(k)) + c[2].col(k).dot(c[3].col(k));
            out[k] = 2.0 * v.real();
        }
        return out;
    }

private:
    int L_;
    std::array<Eigen::MatrixXcd, 4> E_;
    std::array<Eigen::VectorXd, 4> phase_;
    std::array<Eigen::VectorXcd, 4> a_;
};

/// Periods 0..dense_until one by one, then a geometric grid with the given
/// ratio up to max_period.
inline std::vector<long long> lifetime_grid(long long dense_until, long long max_period, double ratio) {
    if (dense_until < 1 || max_period < dense_until || ratio <= 1.0) throw ParamError("invalid lifetime grid");
    std::vector<long long> g;
    for (long long n = 0; n <= dense_until; ++n) g.push_back(n);
    double x = static_cast<double>(dense_until);
    for (;;) {
        x *= ratio;
        const auto n = static_cast<long long>(std::llround(x));
        if (n > max_period) break;
        if (n > g.back()) g.push_back(n);
    }
    return g;
}

struct LifetimeOptions {
    int realizations = 200;
    std::uint64_t seed = 1;
    long long dense_until = 1000;
    long long max_period = 1000000;
    double ratio = 1.01;
    EvolutionMethod method = Trotter{};
    int workers = 1;
};

struct LifetimeResult {
    int L = 0;
    int realizations = 0;
    std::vector<long long> periods;
    std::vector<double> envelope;                 // disorder mean of (-1)^n <Z_1(nT)>
    std::vector<std::vector<double>> per_realization;
    std::optional<double> tau;
};

/// Disorder-averaged edge envelope from |0...0> and its first 1/2 crossing.
/// Realization i uses derive_seed(seed, i).
inline LifetimeResult edge_lifetime(const ModelParams& params, const LifetimeOptions& opt = {}) {
    params.validate();
    if (opt.realizations < 1) throw ParamError("need at least one realization");
    LifetimeResult res;
    res.L = params.L;
    res.realizations = opt.realizations;
    res.periods = lifetime_grid(opt.dense_until, opt.max_period, opt.ratio);
    res.per_realization.resize(opt.realizations);
    parallel_for(res.per_realization.size(), opt.workers, [&](std::size_t i) {
        const SectorFloquet sf(sample_realization(params, derive_seed(opt.seed, i)), opt.method);
        auto v = sf.edge_magnetization(res.periods);
        for (std::size_t k = 0; k < v.size(); ++k)
            if (res.periods[k] % 2) v[k] = -v[k];
        res.per_realization[i] = std::move(v);
    });
    res.envelope.resize(res.periods.size());
    std::vector<double> col(opt.realizations);
    for (std::size_t k = 0; k < res.periods.size(); ++k) {
        for (int i = 0; i < opt.realizations; ++i) col[i] = res.per_realization[i][k];
        res.envelope[k] = ensemble_mean(col);
    }
    std::vector<double> t(res.periods.begin(), res.periods.end());
    res.tau = tau_star(t, res.envelope);
    return res;
}

} // namespace sptc
