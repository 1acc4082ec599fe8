#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sptc/circuit.hpp"
#include "sptc/errors.hpp"
#include "sptc/exact.hpp"
#include "sptc/rng.hpp"

namespace sptc {

/// A circuit skeleton plus one parameter per rotation gate, in gate order.
struct ParamCircuit {
    Circuit skeleton;
    std::vector<double> theta;

    ParamCircuit() = default;
    explicit ParamCircuit(Circuit c) : skeleton(std::move(c)) {
        for (const auto& g : skeleton.gates())
            if (is_rotation(g.kind)) theta.push_back(g.angle);
    }

    int L() const noexcept { return skeleton.L(); }
    std::size_t parameter_count() const noexcept { return theta.size(); }
    Circuit circuit() const { return skeleton.with_angles(theta); }
};

namespace detail {

inline void check_target(const ParamCircuit& pc, const Eigen::MatrixXcd& target) {
    if (pc.L() > kMaxUnitarySites)
        throw CapacityError("compilation supports L <= " + std::to_string(kMaxUnitarySites));
    const Eigen::Index d = StateVector::dim_of(pc.L());
    if (target.rows() != d || target.cols() != d)
        throw ContractError("target is " + std::to_string(target.rows()) + "x" + std::to_string(target.cols()) +
                            ", circuit needs " + std::to_string(d) + "x" + std::to_string(d));
}

/// out = G m for the generator G of a rotation gate (gate = exp(-i t/2 G)).
inline Eigen::MatrixXcd apply_generator(const Gate& g, const Eigen::MatrixXcd& m) {
    Eigen::MatrixXcd out(m.rows(), m.cols());
    if (g.kind == GateKind::CRz) {
        const std::uint64_t ba = std::uint64_t{1} << (g.a - 1), bb = std::uint64_t{1} << (g.b - 1);
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const auto u = static_cast<std::uint64_t>(i);
            if (!(u & ba)) out.row(i).setZero();
            else out.row(i) = ((u & bb) ? -1.0 : 1.0) * m.row(i);
        }
        return out;
    }
    const Axis ax = g.kind == GateKind::X ? Axis::X : (g.kind == GateKind::Y ? Axis::Y : Axis::Z);
    const PauliMask pm(PauliString(1.0, {{g.a, ax}}));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const auto j = static_cast<std::uint64_t>(i) ^ pm.flip;
        out.row(i) = pm.phase(j) * m.row(static_cast<Eigen::Index>(j));
    }
    return out;
}

} // namespace detail

/// 1 - |Tr(target^dag U)| / d.
inline double fidelity_loss(const ParamCircuit& pc, const Eigen::MatrixXcd& target) {
    detail::check_target(pc, target);
    return 1.0 - operator_fidelity(target, circuit_unitary(pc.circuit()));
}

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> gradient;
};

/// Analytic gradient by one backward sweep: with R = g_k..g_1 and
/// C = g_{k+1}^dag..g_m^dag target, dTr/dtheta_k = -i/2 Tr(C^dag G_k R).
inline LossAndGradient loss_and_gradient(const ParamCircuit& pc, const Eigen::MatrixXcd& target) {
    detail::check_target(pc, target);
    const Circuit c = pc.circuit();
    const double d = static_cast<double>(target.rows());
    Eigen::MatrixXcd R = circuit_unitary(c);
    Eigen::MatrixXcd C = target;
    const cplx tr = (C.adjoint() * R).trace();
    const double atr = std::abs(tr);
    LossAndGradient out;
    out.loss = 1.0 - atr / d;
    out.gradient.assign(pc.parameter_count(), 0.0);
    const auto& gates = c.gates();
    std::size_t slot = pc.parameter_count();
    for (std::size_t k = gates.size(); k-- > 0;) {
        const Gate& g = gates[k];
        if (is_rotation(g.kind)) {
            --slot;
            if (atr > 0) {
                const cplx dtr = cplx(0, -0.5) * C.conjugate().cwiseProduct(detail::apply_generator(g, R)).sum();
                out.gradient[slot] = -(std::conj(tr) * dtr).real() / (atr * d);
            }
        }
        const Gate inv = g.inverse();
        apply_gate(inv, R);
        apply_gate(inv, C);
    }
    return out;
}

inline std::vector<double> loss_gradient(const ParamCircuit& pc, const Eigen::MatrixXcd& target) {
    return loss_and_gradient(pc, target).gradient;
}

struct OptimizeOptions {
    double alpha = 0.01;
    double threshold = 1e-3;
    int max_iterations = 5000;
    /// Halve the step (for that iteration only) when a full step would raise the loss.
    bool step_halving = true;
};

struct OptimizeResult {
    std::vector<double> theta;
    std::vector<double> losses; // loss before each iteration, then the final loss
    double loss = 1.0;
    int iterations = 0;
    bool converged = false;
};

/// Gradient descent theta <- theta - alpha grad until loss <= threshold or the
/// iteration cap. Non-convergence is reported, not thrown.
inline OptimizeResult optimize(const ParamCircuit& pc, const Eigen::MatrixXcd& target, const OptimizeOptions& opt = {}) {
    if (opt.alpha < 0) throw ParamError("learning rate must be >= 0");
    if (opt.threshold <= 0) throw ParamError("loss threshold must be positive");
    ParamCircuit cur = pc;
    auto lg = loss_and_gradient(cur, target);
    OptimizeResult res;
    res.losses.push_back(lg.loss);
    while (lg.loss > opt.threshold && res.iterations < opt.max_iterations) {
        ParamCircuit next = cur;
        double step = opt.alpha;
        double next_loss = lg.loss;
        for (int halvings = 0; halvings <= 40; ++halvings) {
            for (std::size_t i = 0; i < next.theta.size(); ++i) next.theta[i] = cur.theta[i] - step * lg.gradient[i];
            next_loss = fidelity_loss(next, target);
            if (!opt.step_halving || next_loss <= lg.loss) break;
            step /= 2;
        }
        ++res.iterations;
        if (opt.step_halving && next_loss > lg.loss) break; // stationary to machine precision
        cur = std::move(next);
        lg = loss_and_gradient(cur, target);
        res.losses.push_back(lg.loss);
    }
    res.theta = cur.theta;
    res.loss = lg.loss;
    res.converged = lg.loss <= opt.threshold;
    return res;
}

inline void randomize(ParamCircuit& pc, CounterRng& rng) {
    for (auto& t : pc.theta) t = std::numbers::pi - 2 * std::numbers::pi * rng.uniform(); // (-pi, pi]
}

// ---------------------------------------------------------------------------
// Ansatz graph and neuroevolution search

/// Layer templates. Rotation = Z Y Z on every site; the entangling templates
/// put CRz on the odd or even bonds.
enum class LayerTemplate : std::uint8_t { Rotation, EntangleOdd, EntangleEven };

inline void append_template(Circuit& c, LayerTemplate t) {
    const int L = c.L();
    std::vector<Gate> l;
    switch (t) {
    case LayerTemplate::Rotation:
        for (GateKind k : {GateKind::Z, GateKind::Y, GateKind::Z}) {
            l.clear();
            for (int s = 1; s <= L; ++s) l.push_back({k, s, 0, 0.0});
            c.add_layer(l);
        }
        return;
    case LayerTemplate::EntangleOdd:
    case LayerTemplate::EntangleEven:
        for (int s = t == LayerTemplate::EntangleOdd ? 1 : 2; s < L; s += 2) l.push_back(Gate::crz(s, s + 1, 0.0));
        c.add_layer(l);
        return;
    }
}

inline int template_parameters(LayerTemplate t, int L) {
    switch (t) {
    case LayerTemplate::Rotation: return 3 * L;
    case LayerTemplate::EntangleOdd: return L / 2;
    case LayerTemplate::EntangleEven: return (L - 1) / 2;
    }
    return 0;
}

/// Directed graph over layer templates: a circuit is a path. Two entangling
/// layers may follow each other only if they cover different bonds.
struct AnsatzGraph {
    int L = 4;

    static std::vector<LayerTemplate> successors(LayerTemplate t) {
        switch (t) {
        case LayerTemplate::Rotation: return {LayerTemplate::EntangleOdd, LayerTemplate::EntangleEven};
        case LayerTemplate::EntangleOdd: return {LayerTemplate::Rotation, LayerTemplate::EntangleEven};
        case LayerTemplate::EntangleEven: return {LayerTemplate::Rotation, LayerTemplate::EntangleOdd};
        }
        return {};
    }
    /// The graph is symmetric, so predecessors equal successors.
    static std::vector<LayerTemplate> predecessors(LayerTemplate t) { return successors(t); }

    static bool valid(const std::vector<LayerTemplate>& path) {
        for (std::size_t i = 1; i < path.size(); ++i) {
            const auto s = successors(path[i - 1]);
            if (std::find(s.begin(), s.end(), path[i]) == s.end()) return false;
        }
        return true;
    }

    std::vector<LayerTemplate> random_path(int length, CounterRng& rng) const {
        std::vector<LayerTemplate> p{static_cast<LayerTemplate>(rng.below(3))};
        while (static_cast<int>(p.size()) < length) {
            const auto s = successors(p.back());
            p.push_back(s[rng.below(s.size())]);
        }
        return p;
    }

    ParamCircuit decode(const std::vector<LayerTemplate>& path) const {
        if (!valid(path)) throw ContractError("path is not a walk on the ansatz graph");
        Circuit c(L);
        for (auto t : path) append_template(c, t);
        return ParamCircuit(std::move(c));
    }
};

struct SearchOptions {
    int population = 8;
    int initial_length = 4;
    int survivors = 2;
    int max_generations = 50;
    OptimizeOptions optimizer{0.3, 1e-3, 300, true};
    std::uint64_t seed = 1;
};

struct SearchMember {
    std::vector<LayerTemplate> path;
    ParamCircuit circuit;
    double loss = 1.0;
};

struct SearchResult {
    SearchMember best;
    int generations = 0; // generations evaluated, generation 0 included
    bool converged = false;
    std::vector<int> min_length_per_generation;
    std::vector<double> best_loss_per_generation;
};

/// Algorithm: a population of random fixed-length paths is optimized; while
/// the best loss exceeds beta, the best `survivors` are extended by one layer
/// at either end and the children are optimized again. Every optimization
/// starts from fresh random angles in (-pi, pi], except member 0 of
/// generation 0, which starts from zero angles.
inline SearchResult neuroevolution_search(const Eigen::MatrixXcd& target, int L, double beta,
                                          const SearchOptions& opt = {}) {
    if (beta <= 0) throw ParamError("search threshold must be positive");
    if (opt.population < 1 || opt.survivors < 1 || opt.initial_length < 1)
        throw ParamError("search population, survivors and initial length must be >= 1");
    const AnsatzGraph graph{L};
    OptimizeOptions oo = opt.optimizer;
    oo.threshold = beta;

    std::vector<SearchMember> pop;
    for (int m = 0; m < opt.population; ++m) {
        CounterRng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(m)));
        SearchMember s;
        s.path = graph.random_path(opt.initial_length, rng);
        s.circuit = graph.decode(s.path);
        pop.push_back(std::move(s));
    }

    SearchResult res;
    res.best.loss = 2.0;
    for (int gen = 0;; ++gen) {
        int min_len = 1 << 30;
        for (std::size_t m = 0; m < pop.size(); ++m) {
            auto& s = pop[m];
            if (gen > 0 || m > 0) {
                CounterRng rng(derive_seed(derive_seed(opt.seed, static_cast<std::uint64_t>(gen) + 1), m));
                randomize(s.circuit, rng);
            }
            const auto r = optimize(s.circuit, target, oo);
            s.circuit.theta = r.theta;
            s.loss = r.loss;
            min_len = std::min(min_len, static_cast<int>(s.path.size()));
        }
        std::stable_sort(pop.begin(), pop.end(), [](const auto& a, const auto& b) { return a.loss < b.loss; });
        if (pop.front().loss < res.best.loss) res.best = pop.front();
        res.generations = gen + 1;
        res.min_length_per_generation.push_back(min_len);
        res.best_loss_per_generation.push_back(pop.front().loss);
        if (res.best.loss <= beta) {
            res.converged = true;
            break;
        }
        if (gen + 1 >= opt.max_generations) break;

        // children in a fixed order per parent: append successors, then prepend predecessors
        std::vector<SearchMember> next;
        const int keep = std::min<int>(opt.survivors, static_cast<int>(pop.size()));
        for (int round = 0; static_cast<int>(next.size()) < opt.population; ++round) {
            bool grew = false;
            for (int i = 0; i < keep && static_cast<int>(next.size()) < opt.population; ++i) {
                const auto& parent = pop[i];
                std::vector<std::pair<bool, LayerTemplate>> moves;
                for (auto t : AnsatzGraph::successors(parent.path.back())) moves.push_back({true, t});
                for (auto t : AnsatzGraph::predecessors(parent.path.front())) moves.push_back({false, t});
                if (round >= static_cast<int>(moves.size())) continue;
                const auto [at_end, t] = moves[round];
                SearchMember child;
                child.path = parent.path;
                child.path.insert(at_end ? child.path.end() : child.path.begin(), t);
                child.circuit = graph.decode(child.path);
                next.push_back(std::move(child));
                grew = true;
            }
            if (!grew) break;
        }
        pop = std::move(next);
    }
    return res;
}

/// Dense exp(-i dt H) for the realization's H2 (or H2'), column by column.
inline Eigen::MatrixXcd u2_target(const DisorderRealization& r, double dt, const EvolutionMethod& method = Krylov{1e-13, 30}) {
    if (r.L() > kMaxUnitarySites) throw CapacityError("compilation targets support L <= " + std::to_string(kMaxUnitarySites));
    const auto terms = hamiltonian_terms(r);
    const Eigen::Index d = StateVector::dim_of(r.L());
    Eigen::MatrixXcd U(d, d);
    for (Eigen::Index c = 0; c < d; ++c)
        U.col(c) = evolve_u2(StateVector::basis(r.L(), static_cast<std::uint64_t>(c)), terms, dt, method).amplitudes();
    return U;
}

// ---------------------------------------------------------------------------
// Sandwich ansatz for U2 deep in the topological regime

/// W^dag [inner] W with W the cluster frame (H, CZ odd, CZ even). The inner
/// block holds `inner_layers` alternations of a Z-Y-Z rotation layer and a
/// CRz layer, closed by a final rotation layer. Only the inner block carries
/// parameters; all start at zero.
inline ParamCircuit sandwich_ansatz(int L, int inner_layers = 0) {
    Circuit c = cluster_frame(L).inverse();
    for (int i = 0; i < inner_layers; ++i) {
        append_template(c, LayerTemplate::Rotation);
        append_template(c, i % 2 ? LayerTemplate::EntangleEven : LayerTemplate::EntangleOdd);
    }
    append_template(c, LayerTemplate::Rotation);
    c.append(cluster_frame(L));
    return ParamCircuit(std::move(c));
}

/// Angles of sandwich_ansatz(L, 0) that are exact for the stabilizer part of
/// H2 over `duration`: the Z-Y-Z block on site k is Z(-2 J_k t) Y(0) Z(0).
inline std::vector<double> sandwich_ideal_angles(const DisorderRealization& r, double duration) {
    std::vector<double> th;
    const double t = duration;
    for (int k = 0; k < r.L(); ++k) th.push_back(-2.0 * r.J[k] * t);
    for (int k = 0; k < 2 * r.L(); ++k) th.push_back(0.0);
    return th;
}

} // namespace sptc
