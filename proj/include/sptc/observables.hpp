#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sptc/circuit.hpp"
#include "sptc/errors.hpp"
#include "sptc/exact.hpp"
#include "sptc/model.hpp"
#include "sptc/mps.hpp"
#include "sptc/parallel.hpp"
#include "sptc/rng.hpp"
#include "sptc/statevector.hpp"

namespace sptc {

// ---------------------------------------------------------------------------
// Engines, initial states, channels

struct ExactEngine {
    EvolutionMethod method = Trotter{};
};

struct MpsEngine {
    TruncationPolicy policy{};
    double dt = 0.05;
};

/// Gate-level engine. Without a compiled U2 the cluster-frame circuit is used,
/// which requires V = h = 0.
struct CircuitEngine {
    std::optional<NoiseModel> noise;
    std::optional<Circuit> u2;
};

using EngineSpec = std::variant<ExactEngine, MpsEngine, CircuitEngine>;

inline const char* engine_name(const EngineSpec& e) {
    switch (e.index()) {
    case 0: return "exact";
    case 1: return "mps";
    default: return "circuit";
    }
}

struct InitialState {
    enum class Kind { Bitstring, RandomProduct, Spt };
    Kind kind = Kind::Bitstring;
    std::vector<int> bits;        // bitstring; empty means all zeros
    std::vector<int> excitations; // spt: sites whose stabilizer starts at -1
    bool random_excitations = false;

    static InitialState zeros() { return {}; }
    static InitialState bitstring(std::vector<int> b) { return {Kind::Bitstring, std::move(b), {}, false}; }
    static InitialState random_product() { return {Kind::RandomProduct, {}, {}, false}; }
    static InitialState spt(std::vector<int> exc = {}) { return {Kind::Spt, {}, std::move(exc), false}; }
    static InitialState random_spt() { return {Kind::Spt, {}, {}, true}; }

    bool z_product() const noexcept { return kind != Kind::Spt; }
};

struct Channels {
    bool magnetization = true;
    bool stabilizer = false;
    bool entropy = false;
    bool autocorrelator = false;
};

/// Initial-state draws use their own stream so they never shift the disorder.
inline std::uint64_t initial_state_seed(std::uint64_t realization_seed) {
    return derive_seed(realization_seed ^ 0x5ca1ab1eULL, 1);
}

struct ResolvedInitialState {
    std::vector<int> bits;        // z-product inputs
    std::vector<int> excitations; // spt inputs
};

inline ResolvedInitialState resolve_initial_state(const InitialState& init, int L, std::uint64_t seed) {
    ResolvedInitialState out;
    CounterRng rng(seed);
    switch (init.kind) {
    case InitialState::Kind::Bitstring:
        out.bits = init.bits.empty() ? std::vector<int>(L, 0) : init.bits;
        if (static_cast<int>(out.bits.size()) != L)
            throw ParamError("bitstring has " + std::to_string(out.bits.size()) + " sites, expected " +
                             std::to_string(L));
        for (int b : out.bits)
            if (b != 0 && b != 1) throw ParamError("bitstring entries must be 0 or 1");
        break;
    case InitialState::Kind::RandomProduct:
        out.bits.resize(L);
        for (auto& b : out.bits) b = static_cast<int>(rng.below(2));
        break;
    case InitialState::Kind::Spt:
        if (init.random_excitations) {
            for (int k = 1; k <= L; ++k)
                if (rng.below(2)) out.excitations.push_back(k);
        } else {
            out.excitations = init.excitations;
            for (int k : out.excitations)
                if (k < 1 || k > L) throw IndexError("excitation site " + std::to_string(k) + " out of range");
        }
        break;
    }
    return out;
}

inline std::uint64_t bits_to_index(const std::vector<int>& bits) {
    std::uint64_t x = 0;
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) x |= std::uint64_t{1} << i;
    return x;
}

// ---------------------------------------------------------------------------
// Time series

/// Per-channel records at t_n = nT, n = 0..periods. Outer index is the site
/// (or stabilizer) minus one; channels that were not requested are empty.
struct ObservableSeries {
    std::uint64_t seed = 0;
    int L = 0;
    int periods = 0;
    std::vector<int> initial_bits;
    std::vector<int> initial_excitations;
    std::vector<std::vector<double>> magnetization;
    std::vector<std::vector<double>> stabilizer;
    std::vector<double> entropy;
    std::vector<std::vector<double>> autocorrelator;
};

namespace detail {

inline std::vector<int> left_half(int L) {
    std::vector<int> s(L / 2);
    std::iota(s.begin(), s.end(), 1);
    return s;
}

inline PauliString z_at(int j) { return PauliString(1.0, {{j, Axis::Z}}); }

class Recorder {
public:
    Recorder(ObservableSeries& s, const Channels& ch, int L, int N) : s_(s), ch_(ch) {
        const auto rows = [&](bool on) {
            return on ? std::vector<std::vector<double>>(L, std::vector<double>(N + 1, 0.0))
                      : std::vector<std::vector<double>>{};
        };
        s_.magnetization = rows(ch.magnetization);
        s_.stabilizer = rows(ch.stabilizer);
        s_.autocorrelator = rows(ch.autocorrelator);
        if (ch.entropy) s_.entropy.assign(N + 1, 0.0);
    }

    void record(int n, const StateVector& psi, const std::vector<StateVector>& flipped, Boundary boundary) {
        const int L = psi.L();
        if (ch_.magnetization)
            for (int j = 1; j <= L; ++j) s_.magnetization[j - 1][n] = pauli_expectation(psi, z_at(j));
        if (ch_.stabilizer)
            for (int k = 1; k <= L; ++k) s_.stabilizer[k - 1][n] = pauli_expectation(psi, stabilizer(L, k, boundary));
        if (ch_.entropy) s_.entropy[n] = entanglement_entropy(psi, left_half(L));
        if (ch_.autocorrelator)
            for (int j = 1; j <= L; ++j)
                s_.autocorrelator[j - 1][n] = pauli_matrix_element(psi, z_at(j), flipped[j - 1]).real();
    }

    void record(int n, const MatrixProductState& mps, const std::vector<int>& bits) {
        const int L = mps.L();
        std::vector<double> m;
        if (ch_.magnetization || ch_.autocorrelator) m = mps_magnetizations(mps);
        if (ch_.magnetization)
            for (int j = 0; j < L; ++j) s_.magnetization[j][n] = m[j];
        if (ch_.stabilizer)
            for (int k = 1; k <= L; ++k) s_.stabilizer[k - 1][n] = mps_expectation(mps, stabilizer(L, k));
        if (ch_.entropy) s_.entropy[n] = half_chain_entropy(mps);
        if (ch_.autocorrelator)
            for (int j = 0; j < L; ++j) s_.autocorrelator[j][n] = (bits[j] ? -1.0 : 1.0) * m[j];
    }

private:
    ObservableSeries& s_;
    const Channels& ch_;
};

inline StateVector prepare_state(int L, const ResolvedInitialState& init, bool spt) {
    if (spt) return run_circuit(StateVector(L), spt_prep_circuit(L, init.excitations));
    return StateVector::basis(L, bits_to_index(init.bits));
}

inline MatrixProductState prepare_mps(int L, const ResolvedInitialState& init, bool spt, TruncationPolicy policy) {
    if (!spt) return product_state_mps(std::span<const int>(init.bits), policy);
    auto mps = cluster_state_mps(L, policy);
    Eigen::MatrixXcd z(2, 2);
    z << 1, 0, 0, -1;
    for (int k : init.excitations) mps.apply_gate(k - 1, 1, z);
    return mps;
}

} // namespace detail

/// Evolves one realization for N periods and records the requested channels
/// at every period boundary. The autocorrelator evolves |psi0> and
/// sigma^z_j|psi0> side by side and takes Re <psi(t)|Z_j|phi_j(t)>; the MPS
/// engine supports it only for z-product inputs, where it equals
/// s_j(0) <Z_j(t)>.
inline ObservableSeries evolve_and_record(const EngineSpec& engine, const DisorderRealization& r,
                                          const InitialState& init, const Channels& channels, int N) {
    if (N < 0) throw ParamError("period count must be >= 0");
    const int L = r.L();
    const auto resolved = resolve_initial_state(init, L, initial_state_seed(r.seed));
    const bool spt = init.kind == InitialState::Kind::Spt;
    ObservableSeries s;
    s.seed = r.seed;
    s.L = L;
    s.periods = N;
    s.initial_bits = resolved.bits;
    s.initial_excitations = resolved.excitations;
    detail::Recorder rec(s, channels, L, N);

    if (const auto* mp = std::get_if<MpsEngine>(&engine)) {
        if (channels.autocorrelator && spt)
            throw ContractError("the mps engine supports the autocorrelator only for z-product inputs");
        const auto terms = hamiltonian_terms(r);
        auto mps = detail::prepare_mps(L, resolved, spt, mp->policy);
        rec.record(0, mps, resolved.bits);
        for (int n = 1; n <= N; ++n) {
            mps = tebd_floquet_period(std::move(mps), r, r.params.delta, mp->dt, terms);
            rec.record(n, mps, resolved.bits);
        }
        return s;
    }

    StateVector psi = detail::prepare_state(L, resolved, spt);
    std::vector<StateVector> flipped;
    if (channels.autocorrelator)
        for (int j = 1; j <= L; ++j) flipped.push_back(apply_pauli(psi, detail::z_at(j)));
    rec.record(0, psi, flipped, r.params.boundary);

    if (const auto* ex = std::get_if<ExactEngine>(&engine)) {
        const auto terms = hamiltonian_terms(r);
        for (int n = 1; n <= N; ++n) {
            psi = floquet_step(std::move(psi), r.params, terms, ex->method);
            for (auto& f : flipped) f = floquet_step(std::move(f), r.params, terms, ex->method);
            rec.record(n, psi, flipped, r.params.boundary);
        }
        return s;
    }

    const auto& ce = std::get<CircuitEngine>(engine);
    if (ce.noise) ce.noise->validate();
    const Circuit period =
        ce.u2 ? floquet_period_circuit(L, r.params.delta, *ce.u2) : floquet_period_circuit(r, r.params.delta);
    for (int n = 1; n <= N; ++n) {
        // All copies share one trajectory: the error draws depend only on the seed.
        std::optional<NoiseModel> noise = ce.noise;
        if (noise) noise->seed = derive_seed(noise->seed, static_cast<std::uint64_t>(n));
        psi = run_circuit(std::move(psi), period, noise);
        for (auto& f : flipped) f = run_circuit(std::move(f), period, noise);
        rec.record(n, psi, flipped, r.params.boundary);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Ensemble statistics

struct EnsembleStats {
    double mean = 0.0;
    double std = 0.0; // unbiased
    double sem = 0.0;
    std::size_t count = 0;
};

namespace detail {

/// Sum of sorted values, so the result does not depend on input order.
inline double ordered_sum(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

} // namespace detail

inline double ensemble_mean(std::span<const double> values) {
    if (values.empty()) throw ContractError("mean of an empty ensemble");
    return detail::ordered_sum({values.begin(), values.end()}) / static_cast<double>(values.size());
}

inline EnsembleStats ensemble_stats(std::span<const double> values) {
    if (values.size() < 2) throw ContractError("standard deviation needs at least 2 realizations");
    EnsembleStats st;
    st.count = values.size();
    st.mean = ensemble_mean(values);
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - st.mean) * (values[i] - st.mean);
    st.std = std::sqrt(detail::ordered_sum(std::move(sq)) / static_cast<double>(values.size() - 1));
    st.sem = st.std / std::sqrt(static_cast<double>(values.size()));
    return st;
}

/// Pointwise ensemble mean of equally long records.
inline std::vector<double> mean_record(const std::vector<const std::vector<double>*>& records) {
    if (records.empty()) throw ContractError("no records to average");
    const std::size_t n = records.front()->size();
    std::vector<double> out(n), col(records.size());
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (records[i]->size() != n) throw ContractError("records have different lengths");
            col[i] = (*records[i])[t];
        }
        out[t] = ensemble_mean(col);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fourier analysis

struct SpectrumResult {
    int N = 0;
    std::vector<double> frequency; // omega_m / omega_0 = m / N, m = 0..N-1
    std::vector<double> amplitude;
    double peak = 0.0;             // amplitude at omega_0 / 2

    /// Median amplitude over the one-sided bins m = 0..N/2.
    double median_amplitude() const {
        std::vector<double> a(amplitude.begin(), amplitude.begin() + N / 2 + 1);
        std::sort(a.begin(), a.end());
        const std::size_t k = a.size();
        return k % 2 ? a[k / 2] : 0.5 * (a[k / 2 - 1] + a[k / 2]);
    }
};

/// amplitude(m) = |(1/N) sum_n s_n exp(-2 pi i m n / N)| over the N samples given.
inline SpectrumResult fourier_spectrum(std::span<const double> s) {
    const int N = static_cast<int>(s.size());
    if (N < 4 || N % 2) throw ContractError("fourier_spectrum needs an even sample count >= 4, got " + std::to_string(N));
    SpectrumResult r;
    r.N = N;
    r.frequency.resize(N);
    r.amplitude.resize(N);
    for (int m = 0; m < N; ++m) {
        std::complex<double> acc = 0.0;
        for (int n = 0; n < N; ++n) {
            // Reduce m n mod N first so the phase stays exact for large N.
            const double ph = -2.0 * std::numbers::pi * static_cast<double>((static_cast<long long>(m) * n) % N) / N;
            acc += s[n] * std::complex<double>(std::cos(ph), std::sin(ph));
        }
        r.frequency[m] = static_cast<double>(m) / N;
        r.amplitude[m] = std::abs(acc) / N;
    }
    r.peak = r.amplitude[N / 2];
    return r;
}

/// Spectrum of a recorded series over periods n = 0..N-1, where the record
/// holds N + 1 samples.
inline SpectrumResult series_spectrum(const std::vector<double>& record) {
    if (record.empty()) throw ContractError("empty record");
    return fourier_spectrum(std::span<const double>(record.data(), record.size() - 1));
}

/// First crossing of 1/2, linearly interpolated between the bracketing
/// periods. Returns nothing if the envelope never reaches 1/2.
inline std::optional<double> tau_star(std::span<const double> envelope) {
    for (std::size_t n = 0; n < envelope.size(); ++n) {
        if (envelope[n] > 0.5) continue;
        if (n == 0) return 0.0;
        const double a = envelope[n - 1], b = envelope[n];
        return static_cast<double>(n - 1) + (a - 0.5) / (a - b);
    }
    return std::nullopt;
}

/// Same, for an envelope sampled at increasing periods.
inline std::optional<double> tau_star(std::span<const double> periods, std::span<const double> envelope) {
    if (periods.size() != envelope.size()) throw ContractError("period and envelope lengths differ");
    for (std::size_t i = 0; i < envelope.size(); ++i) {
        if (envelope[i] > 0.5) continue;
        if (i == 0) return periods[0];
        const double a = envelope[i - 1], b = envelope[i];
        return periods[i - 1] + (periods[i] - periods[i - 1]) * (a - 0.5) / (a - b);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// String order

/// sigma^z_l sigma^y_{l+1} (prod_{k=l+2}^{j-2} sigma^x_k) sigma^y_{j-1} sigma^z_j.
inline PauliString string_operator(int L, int l, int j) {
    if (l < 1 || j > L || j - l < 3)
        throw IndexError("string order needs 1 <= l, j <= L, j - l >= 3; got (" + std::to_string(l) + ", " +
                         std::to_string(j) + ")");
    std::vector<PauliFactor> f{{l, Axis::Z}, {l + 1, Axis::Y}};
    for (int k = l + 2; k <= j - 2; ++k) f.push_back({k, Axis::X});
    f.push_back({j - 1, Axis::Y});
    f.push_back({j, Axis::Z});
    return PauliString(1.0, std::move(f));
}

inline double string_order(const StateVector& state, int l, int j) {
    return pauli_expectation(state, string_operator(state.L(), l, j));
}

enum class PairPolicy { Interior, All };

/// Interior: l >= 2, j <= L - 1, j - l >= 4. All: every pair with j - l >= 3.
inline std::vector<std::pair<int, int>> string_pairs(int L, PairPolicy policy) {
    std::vector<std::pair<int, int>> out;
    const int lo = policy == PairPolicy::Interior ? 2 : 1;
    const int hi = policy == PairPolicy::Interior ? L - 1 : L;
    const int gap = policy == PairPolicy::Interior ? 4 : 3;
    for (int l = lo; l <= hi; ++l)
        for (int j = l + gap; j <= hi; ++j) out.emplace_back(l, j);
    return out;
}

inline constexpr int kMaxStringOrderSites = 8;

/// Mean of O_st^2 over all U_F eigenstates and admissible pairs of one
/// realization.
inline double mean_squared_string_order(const DisorderRealization& r, PairPolicy policy,
                                        const EvolutionMethod& method = Trotter{}) {
    const int L = r.L();
    if (L > kMaxStringOrderSites)
        throw CapacityError("string order parameter supports L <= " + std::to_string(kMaxStringOrderSites));
    const auto pairs = string_pairs(L, policy);
    if (pairs.empty()) throw ContractError("no admissible string-order pairs at L = " + std::to_string(L));
    std::vector<PauliString> ops;
    for (auto [l, j] : pairs) ops.push_back(string_operator(L, l, j));
    const auto es = floquet_eigensystem(r, method);
    std::vector<double> vals;
    vals.reserve(es.eigenvectors.cols() * ops.size());
    for (Eigen::Index c = 0; c < es.eigenvectors.cols(); ++c) {
        const StateVector v(L, es.eigenvectors.col(c));
        for (const auto& op : ops) {
            const double o = pauli_expectation(v, op);
            vals.push_back(o * o);
        }
    }
    return ensemble_mean(vals);
}

/// O_sg: mean over realizations derive_seed(seed, i) of the per-realization
/// mean of O_st^2. Realizations run on the worker pool.
inline double o_sg(const ModelParams& params, int realizations, std::uint64_t seed,
                   PairPolicy policy = PairPolicy::Interior, const EvolutionMethod& method = Trotter{},
                   int workers = 1) {
    if (params.L > kMaxStringOrderSites)
        throw CapacityError("string order parameter supports L <= " + std::to_string(kMaxStringOrderSites));
    if (realizations < 1) throw ParamError("need at least one realization");
    std::vector<double> per(realizations);
    parallel_for(per.size(), workers, [&](std::size_t i) {
        per[i] = mean_squared_string_order(sample_realization(params, derive_seed(seed, i)), policy, method);
    });
    return ensemble_mean(per);
}

// ---------------------------------------------------------------------------
// Phase-diagram scans

enum class ScanStatistic { MeanPeak, PeakStd, Osg };

inline const char* statistic_name(ScanStatistic s) {
    switch (s) {
    case ScanStatistic::MeanPeak: return "mean_peak";
    case ScanStatistic::PeakStd: return "peak_std";
    case ScanStatistic::Osg: return "o_sg";
    }
    return "?";
}

struct ScanOptions {
    int realizations = 20;
    int periods = 20;
    std::uint64_t seed = 1;
    ScanStatistic statistic = ScanStatistic::PeakStd;
    EngineSpec engine = ExactEngine{};
    InitialState init = InitialState::zeros();
    int site = 1;
    PairPolicy pairs = PairPolicy::Interior;
    int workers = 1;
};

/// Per-cell results. Peak statistics come from the per-realization peak
/// heights at omega_0/2 of the chosen site; averaged_peak is the peak of the
/// disorder-averaged series.
struct PhaseDiagramGrid {
    std::vector<double> deltas, Vs;
    ScanStatistic statistic = ScanStatistic::PeakStd;
    int realizations = 0;
    // [delta index][V index]
    std::vector<std::vector<double>> mean_peak, peak_std, peak_sem, averaged_peak, osg;

    const std::vector<std::vector<double>>& values() const {
        switch (statistic) {
        case ScanStatistic::MeanPeak: return mean_peak;
        case ScanStatistic::PeakStd: return peak_std;
        case ScanStatistic::Osg: return osg;
        }
        return peak_std;
    }

    /// Per-delta argmax of the statistic over V (the boundary estimate).
    std::vector<double> boundary_over_V() const {
        std::vector<double> out;
        for (const auto& row : values())
            out.push_back(Vs[std::max_element(row.begin(), row.end()) - row.begin()]);
        return out;
    }

    /// Per-V argmax of the statistic over delta.
    std::vector<double> boundary_over_delta() const {
        std::vector<double> out;
        for (std::size_t v = 0; v < Vs.size(); ++v) {
            std::size_t best = 0;
            for (std::size_t d = 1; d < deltas.size(); ++d)
                if (values()[d][v] > values()[best][v]) best = d;
            out.push_back(deltas[best]);
        }
        return out;
    }
};

/// Seed of realization i in cell c.
inline std::uint64_t cell_seed(std::uint64_t base, std::size_t cell, std::size_t i) {
    return derive_seed(derive_seed(base, cell), i);
}

/// Peak height of one realization's series at the chosen site.
inline double realization_peak(const EngineSpec& engine, const DisorderRealization& r, const InitialState& init,
                               int periods, int site) {
    const auto s = evolve_and_record(engine, r, init, Channels{}, periods);
    return series_spectrum(s.magnetization.at(site - 1)).peak;
}

/// Scans a (delta, V) grid. Every cell draws `realizations` independent
/// disorder samples with V set to the cell value and all other widths from
/// `base`. All (cell, realization) tasks share one worker pool.
inline PhaseDiagramGrid phase_diagram_scan(const std::vector<double>& deltas, const std::vector<double>& Vs,
                                           const ModelParams& base, const ScanOptions& opt) {
    if (deltas.empty() || Vs.empty()) throw ParamError("scan grids must be non-empty");
    if (opt.statistic != ScanStatistic::Osg && opt.realizations < 2)
        throw ParamError("peak statistics need at least 2 realizations");
    if (opt.site < 1 || opt.site > base.L) throw IndexError("scan site out of range");
    PhaseDiagramGrid g;
    g.deltas = deltas;
    g.Vs = Vs;
    g.statistic = opt.statistic;
    g.realizations = opt.realizations;
    const std::size_t nd = deltas.size(), nv = Vs.size(), R = static_cast<std::size_t>(opt.realizations);
    auto cell_params = [&](std::size_t d, std::size_t v) {
        ModelParams p = base;
        p.delta = deltas[d];
        p.V = Vs[v];
        p.validate();
        return p;
    };
    const auto grid = [&] { return std::vector<std::vector<double>>(nd, std::vector<double>(nv, 0.0)); };

    if (opt.statistic == ScanStatistic::Osg) {
        std::vector<double> per(nd * nv * R);
        const auto method = std::holds_alternative<ExactEngine>(opt.engine) ? std::get<ExactEngine>(opt.engine).method
                                                                             : EvolutionMethod{Trotter{}};
        parallel_for(per.size(), opt.workers, [&](std::size_t t) {
            const std::size_t cell = t / R, i = t % R;
            const auto r = sample_realization(cell_params(cell / nv, cell % nv), cell_seed(opt.seed, cell, i));
            per[t] = mean_squared_string_order(r, opt.pairs, method);
        });
        g.osg = grid();
        for (std::size_t c = 0; c < nd * nv; ++c)
            g.osg[c / nv][c % nv] = ensemble_mean(std::span<const double>(per.data() + c * R, R));
        return g;
    }

    std::vector<std::vector<double>> records(nd * nv * R);
    parallel_for(records.size(), opt.workers, [&](std::size_t t) {
        const std::size_t cell = t / R, i = t % R;
        const auto r = sample_realization(cell_params(cell / nv, cell % nv), cell_seed(opt.seed, cell, i));
        records[t] = evolve_and_record(opt.engine, r, opt.init, Channels{}, opt.periods).magnetization.at(opt.site - 1);
    });
    g.mean_peak = grid();
    g.peak_std = grid();
    g.peak_sem = grid();
    g.averaged_peak = grid();
    for (std::size_t c = 0; c < nd * nv; ++c) {
        std::vector<double> peaks(R);
        std::vector<const std::vector<double>*> recs(R);
        for (std::size_t i = 0; i < R; ++i) {
            peaks[i] = series_spectrum(records[c * R + i]).peak;
            recs[i] = &records[c * R + i];
        }
        const auto st = ensemble_stats(peaks);
        g.mean_peak[c / nv][c % nv] = st.mean;
        g.peak_std[c / nv][c % nv] = st.std;
        g.peak_sem[c / nv][c % nv] = st.sem;
        g.averaged_peak[c / nv][c % nv] = series_spectrum(mean_record(recs)).peak;
    }
    return g;
}

} // namespace sptc
