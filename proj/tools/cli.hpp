#pragma once

// Job layer of the sptc command-line tool: JSON configs, ensemble runs, CSV
// and manifest output, SVG plots. tools/sptc.cpp only forwards to run_cli.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sptc/circuit.hpp"
#include "sptc/compiler.hpp"
#include "sptc/errors.hpp"
#include "sptc/exact.hpp"
#include "sptc/lifetime.hpp"
#include "sptc/model.hpp"
#include "sptc/mps.hpp"
#include "sptc/observables.hpp"
#include "sptc/parallel.hpp"
#include "sptc/rng.hpp"

namespace sptc::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode { kOk = 0, kFailure = 1, kSchema = 2, kCapacity = 3, kNonConvergence = 4 };

/// Invalid configuration; `path` names the offending field, e.g. "model.L".
class SchemaError : public ParamError {
public:
    SchemaError(std::string path, const std::string& msg) : ParamError(path + ": " + msg), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// ---------------------------------------------------------------------------
// Schema helpers

namespace detail {

inline std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

inline void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw SchemaError(path.empty() ? "<root>" : path, "expected an object");
    for (const auto& [k, v] : j.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
            throw SchemaError(join(path, k), "unknown field");
    }
}

inline const json* find(const json& j, const char* key) {
    const auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

inline double number(const json& j, const std::string& path, const char* key, double def,
                     std::optional<double> lo = {}, std::optional<double> hi = {}) {
    const json* v = find(j, key);
    if (!v) return def;
    if (!v->is_number()) throw SchemaError(join(path, key), "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) throw SchemaError(join(path, key), "must be finite");
    if (lo && x < *lo) throw SchemaError(join(path, key), "must be >= " + format_double(*lo));
    if (hi && x > *hi) throw SchemaError(join(path, key), "must be <= " + format_double(*hi));
    return x;
}

inline long long integer(const json& j, const std::string& path, const char* key, long long def,
                         std::optional<long long> lo = {}, std::optional<long long> hi = {}) {
    const json* v = find(j, key);
    if (!v) return def;
    if (!v->is_number_integer()) throw SchemaError(join(path, key), "expected an integer");
    const long long x = v->get<long long>();
    if (lo && x < *lo) throw SchemaError(join(path, key), "must be >= " + std::to_string(*lo));
    if (hi && x > *hi) throw SchemaError(join(path, key), "must be <= " + std::to_string(*hi));
    return x;
}

inline std::uint64_t unsigned_integer(const json& j, const std::string& path, const char* key, std::uint64_t def) {
    const json* v = find(j, key);
    if (!v) return def;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
        throw SchemaError(join(path, key), "expected a non-negative integer");
    return v->get<std::uint64_t>();
}

inline std::string string(const json& j, const std::string& path, const char* key, const std::string& def,
                          std::initializer_list<const char*> choices = {}) {
    const json* v = find(j, key);
    if (!v) return def;
    if (!v->is_string()) throw SchemaError(join(path, key), "expected a string");
    const auto s = v->get<std::string>();
    if (choices.size() && std::none_of(choices.begin(), choices.end(), [&](const char* c) { return s == c; })) {
        std::string list;
        for (const char* c : choices) list += std::string(list.empty() ? "" : ", ") + c;
        throw SchemaError(join(path, key), "must be one of " + list);
    }
    return s;
}

inline bool boolean(const json& j, const std::string& path, const char* key, bool def) {
    const json* v = find(j, key);
    if (!v) return def;
    if (!v->is_boolean()) throw SchemaError(join(path, key), "expected true or false");
    return v->get<bool>();
}

inline std::vector<double> numbers(const json& j, const std::string& path, const char* key, std::vector<double> def) {
    const json* v = find(j, key);
    if (!v) return def;
    if (!v->is_array() || v->empty()) throw SchemaError(join(path, key), "expected a non-empty array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number()) throw SchemaError(join(path, key) + "[" + std::to_string(i) + "]", "expected a number");
        out.push_back((*v)[i].get<double>());
    }
    return out;
}

inline std::vector<int> integers(const json& j, const std::string& path, const char* key, std::vector<int> def) {
    const json* v = find(j, key);
    if (!v) return def;
    if (!v->is_array()) throw SchemaError(join(path, key), "expected an array of integers");
    std::vector<int> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number_integer())
            throw SchemaError(join(path, key) + "[" + std::to_string(i) + "]", "expected an integer");
        out.push_back((*v)[i].get<int>());
    }
    return out;
}

inline const json& object_or_empty(const json& j, const char* key) {
    static const json empty = json::object();
    const json* v = find(j, key);
    return v ? *v : empty;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Job configuration

struct ScanConfig {
    std::vector<double> deltas{0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
    std::vector<double> Vs{0.0};
    ScanStatistic statistic = ScanStatistic::PeakStd;
    int site = 1;
    PairPolicy pairs = PairPolicy::Interior;
};

struct LifetimeConfig {
    std::vector<int> sizes; // empty: model.L only
    long long dense_until = 1000;
    long long max_period = 1000000;
    double ratio = 1.01;
};

struct EchoConfig {
    int max_n = 10;
    int trajectories = 200;
    double p1 = 0.0, p2 = 0.01;
    std::uint64_t noise_seed = 1;
    bool compiled = false;
};

struct CompileConfig {
    std::string strategy = "sandwich"; // or "search"
    double dt = 1.0;                   // U2 slice compiled; repeated (T - T1) / dt times
    double alpha = 0.01;
    double threshold = 1e-3;
    int max_iterations = 5000;
    int inner_layers = 0;
    int starts = 3;
    double beta = 1e-3;
};

struct JobConfig {
    ModelParams model;
    std::string engine_type = "exact";
    EngineSpec engine = ExactEngine{};
    std::string u2 = "ideal"; // circuit engine: ideal or compiled
    InitialState init;
    Channels channels;
    int periods = 20;
    int realizations = 20;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    bool want_std = true;
    std::optional<int> workers;
    ScanConfig scan;
    LifetimeConfig lifetime;
    EchoConfig echo;
    CompileConfig compile;
};

inline JobConfig parse_config(const json& j) {
    using namespace detail;
    allow_keys(j, "", {"model", "engine", "initial_state", "channels", "periods", "realizations", "seed", "output_dir",
                       "statistics", "workers", "scan", "lifetime", "echo", "compile"});
    JobConfig c;

    const json& m = object_or_empty(j, "model");
    allow_keys(m, "model", {"L", "J", "dJ", "V", "dV", "h", "dh", "delta", "boundary", "boundary_stabilizers"});
    c.model.L = static_cast<int>(integer(m, "model", "L", 8, 3, 62));
    c.model.J = number(m, "model", "J", 1.0);
    c.model.dJ = number(m, "model", "dJ", 1.0, 0.0);
    c.model.V = number(m, "model", "V", 0.0);
    c.model.dV = number(m, "model", "dV", 0.0, 0.0);
    c.model.h = number(m, "model", "h", 0.0);
    c.model.dh = number(m, "model", "dh", 0.0, 0.0);
    c.model.delta = number(m, "model", "delta", 0.0);
    c.model.boundary = string(m, "model", "boundary", "open", {"open", "periodic"}) == "open" ? Boundary::Open
                                                                                           : Boundary::Periodic;
    if (const json* bs = find(m, "boundary_stabilizers")) {
        allow_keys(*bs, "model.boundary_stabilizers", {"J1", "JL"});
        if (c.model.boundary != Boundary::Open)
            throw SchemaError("model.boundary_stabilizers", "requires an open chain");
        c.model.boundary_stabilizers = BoundaryStabilizers{number(*bs, "model.boundary_stabilizers", "J1", 0.0),
                                                           number(*bs, "model.boundary_stabilizers", "JL", 0.0)};
    }

    const json& e = object_or_empty(j, "engine");
    c.engine_type = string(e, "engine", "type", "exact", {"exact", "mps", "circuit"});
    if (c.engine_type == "exact") {
        allow_keys(e, "engine", {"type", "method"});
        const json& me = object_or_empty(e, "method");
        const auto kind = string(me, "engine.method", "type", "trotter", {"trotter", "krylov"});
        if (kind == "trotter") {
            allow_keys(me, "engine.method", {"type", "dt"});
            c.engine = ExactEngine{Trotter{number(me, "engine.method", "dt", 0.05, 1e-6, 1.0)}};
        } else {
            allow_keys(me, "engine.method", {"type", "tolerance", "max_dim"});
            c.engine = ExactEngine{Krylov{number(me, "engine.method", "tolerance", 1e-10, 1e-15, 1e-2),
                                          static_cast<int>(integer(me, "engine.method", "max_dim", 30, 4, 200))}};
        }
    } else if (c.engine_type == "mps") {
        allow_keys(e, "engine", {"type", "chi_max", "cutoff", "dt"});
        c.engine = MpsEngine{TruncationPolicy{static_cast<int>(integer(e, "engine", "chi_max", 64, 1, 4096)),
                                              number(e, "engine", "cutoff", 1e-10, 0.0, 1.0)},
                             number(e, "engine", "dt", 0.05, 1e-6, 1.0)};
    } else {
        allow_keys(e, "engine", {"type", "noise", "u2"});
        CircuitEngine ce;
        if (const json* n = find(e, "noise")) {
            allow_keys(*n, "engine.noise", {"p1", "p2", "seed"});
            ce.noise = NoiseModel{number(*n, "engine.noise", "p1", 0.0, 0.0, 0.999),
                                  number(*n, "engine.noise", "p2", 0.0, 0.0, 0.999),
                                  unsigned_integer(*n, "engine.noise", "seed", 1)};
        }
        c.u2 = string(e, "engine", "u2", "ideal", {"ideal", "compiled"});
        c.engine = ce;
    }

    const json& is = object_or_empty(j, "initial_state");
    const auto ik = string(is, "initial_state", "type", "bitstring", {"bitstring", "random_product", "spt"});
    if (ik == "bitstring") {
        allow_keys(is, "initial_state", {"type", "bits"});
        const auto bits = string(is, "initial_state", "bits", "");
        std::vector<int> b;
        for (char ch : bits) {
            if (ch != '0' && ch != '1') throw SchemaError("initial_state.bits", "only 0 and 1 allowed");
            b.push_back(ch - '0');
        }
        if (!b.empty() && static_cast<int>(b.size()) != c.model.L)
            throw SchemaError("initial_state.bits", "length must equal model.L");
        c.init = InitialState::bitstring(b);
    } else if (ik == "random_product") {
        allow_keys(is, "initial_state", {"type"});
        c.init = InitialState::random_product();
    } else {
        allow_keys(is, "initial_state", {"type", "excitations", "random"});
        const auto exc = integers(is, "initial_state", "excitations", {});
        for (int k : exc)
            if (k < 1 || k > c.model.L) throw SchemaError("initial_state.excitations", "site out of range");
        c.init = boolean(is, "initial_state", "random", false) ? InitialState::random_spt() : InitialState::spt(exc);
    }

    c.channels = Channels{false, false, false, false};
    if (const json* ch = find(j, "channels")) {
        if (!ch->is_array() || ch->empty()) throw SchemaError("channels", "expected a non-empty array");
        for (std::size_t i = 0; i < ch->size(); ++i) {
            const std::string p = "channels[" + std::to_string(i) + "]";
            if (!(*ch)[i].is_string()) throw SchemaError(p, "expected a string");
            const auto name = (*ch)[i].get<std::string>();
            if (name == "magnetization") c.channels.magnetization = true;
            else if (name == "stabilizer") c.channels.stabilizer = true;
            else if (name == "entropy") c.channels.entropy = true;
            else if (name == "autocorrelator") c.channels.autocorrelator = true;
            else throw SchemaError(p, "unknown channel '" + name + "'");
        }
    } else {
        c.channels.magnetization = true;
    }
    if (c.channels.autocorrelator && c.engine_type == "mps" && !c.init.z_product())
        throw SchemaError("channels", "the mps engine supports the autocorrelator only for z-product initial states");

    c.periods = static_cast<int>(integer(j, "", "periods", 20, 0, 1000000));
    c.realizations = static_cast<int>(integer(j, "", "realizations", 20, 1, 10000000));
    c.seed = unsigned_integer(j, "", "seed", 1);
    c.output_dir = string(j, "", "output_dir", "out");
    if (const json* st = find(j, "statistics")) {
        if (!st->is_array()) throw SchemaError("statistics", "expected an array");
        c.want_std = false;
        for (std::size_t i = 0; i < st->size(); ++i) {
            const auto s = (*st)[i].is_string() ? (*st)[i].get<std::string>() : std::string{};
            if (s == "std") c.want_std = true;
            else if (s != "mean") throw SchemaError("statistics[" + std::to_string(i) + "]", "expected \"mean\" or \"std\"");
        }
    }
    if (const json* w = find(j, "workers")) {
        (void)w;
        c.workers = static_cast<int>(integer(j, "", "workers", 1, 1, 1024));
    }

    const json& sc = object_or_empty(j, "scan");
    allow_keys(sc, "scan", {"deltas", "Vs", "statistic", "site", "pairs"});
    c.scan.deltas = numbers(sc, "scan", "deltas", c.scan.deltas);
    c.scan.Vs = numbers(sc, "scan", "Vs", c.scan.Vs);
    const auto stat = string(sc, "scan", "statistic", "peak_std", {"mean_peak", "peak_std", "o_sg"});
    c.scan.statistic = stat == "mean_peak" ? ScanStatistic::MeanPeak
                       : stat == "peak_std" ? ScanStatistic::PeakStd
                                            : ScanStatistic::Osg;
    c.scan.site = static_cast<int>(integer(sc, "scan", "site", 1, 1, c.model.L));
    c.scan.pairs = string(sc, "scan", "pairs", "interior", {"interior", "all"}) == "all" ? PairPolicy::All
                                                                                        : PairPolicy::Interior;

    const json& lt = object_or_empty(j, "lifetime");
    allow_keys(lt, "lifetime", {"sizes", "dense_until", "max_period", "ratio"});
    c.lifetime.sizes = integers(lt, "lifetime", "sizes", {});
    for (std::size_t i = 0; i < c.lifetime.sizes.size(); ++i)
        if (c.lifetime.sizes[i] < 3) throw SchemaError("lifetime.sizes[" + std::to_string(i) + "]", "must be >= 3");
    c.lifetime.dense_until = integer(lt, "lifetime", "dense_until", 1000, 1);
    c.lifetime.max_period = integer(lt, "lifetime", "max_period", 1000000, c.lifetime.dense_until);
    c.lifetime.ratio = number(lt, "lifetime", "ratio", 1.01, 1.0001, 10.0);

    const json& ec = object_or_empty(j, "echo");
    allow_keys(ec, "echo", {"max_n", "trajectories", "p1", "p2", "noise_seed", "compiled"});
    c.echo.max_n = static_cast<int>(integer(ec, "echo", "max_n", 10, 0, 10000));
    c.echo.trajectories = static_cast<int>(integer(ec, "echo", "trajectories", 200, 1));
    c.echo.p1 = number(ec, "echo", "p1", 0.0, 0.0, 0.999);
    c.echo.p2 = number(ec, "echo", "p2", 0.01, 0.0, 0.999);
    c.echo.noise_seed = unsigned_integer(ec, "echo", "noise_seed", 1);
    c.echo.compiled = boolean(ec, "echo", "compiled", false);

    const json& cc = object_or_empty(j, "compile");
    allow_keys(cc, "compile", {"strategy", "dt", "alpha", "threshold", "max_iterations", "inner_layers", "starts", "beta"});
    c.compile.strategy = string(cc, "compile", "strategy", "sandwich", {"sandwich", "search"});
    c.compile.dt = number(cc, "compile", "dt", 1.0, 1e-6, 1.0);
    c.compile.alpha = number(cc, "compile", "alpha", 0.01, 0.0);
    c.compile.threshold = number(cc, "compile", "threshold", 1e-3, 1e-15, 1.0);
    c.compile.max_iterations = static_cast<int>(integer(cc, "compile", "max_iterations", 5000, 0));
    c.compile.inner_layers = static_cast<int>(integer(cc, "compile", "inner_layers", 0, 0, 64));
    c.compile.starts = static_cast<int>(integer(cc, "compile", "starts", 3, 1, 1000));
    c.compile.beta = number(cc, "compile", "beta", 1e-3, 1e-15, 1.0);
    const double reps = c.model.second_interval() / c.compile.dt;
    if (std::abs(reps - std::round(reps)) > 1e-9)
        throw SchemaError("compile.dt", "must divide the second drive interval");

    if (c.want_std && c.realizations < 2)
        throw SchemaError("realizations", "the std statistic needs at least 2 realizations");
    try {
        c.model.validate();
    } catch (const ParamError& err) {
        throw SchemaError("model", err.what());
    }
    return c;
}

/// The configuration with every default filled in. Parsing it again gives
/// the same JobConfig.
inline json resolved_config(const JobConfig& c) {
    json j;
    json m;
    m["L"] = c.model.L;
    m["J"] = c.model.J;
    m["dJ"] = c.model.dJ;
    m["V"] = c.model.V;
    m["dV"] = c.model.dV;
    m["h"] = c.model.h;
    m["dh"] = c.model.dh;
    m["delta"] = c.model.delta;
    m["boundary"] = c.model.boundary == Boundary::Open ? "open" : "periodic";
    if (c.model.boundary_stabilizers)
        m["boundary_stabilizers"] = {{"J1", c.model.boundary_stabilizers->J1}, {"JL", c.model.boundary_stabilizers->JL}};
    j["model"] = m;

    json e;
    e["type"] = c.engine_type;
    if (const auto* ex = std::get_if<ExactEngine>(&c.engine)) {
        if (const auto* t = std::get_if<Trotter>(&ex->method)) e["method"] = {{"type", "trotter"}, {"dt", t->dt}};
        else {
            const auto& k = std::get<Krylov>(ex->method);
            e["method"] = {{"type", "krylov"}, {"tolerance", k.tolerance}, {"max_dim", k.max_dim}};
        }
    } else if (const auto* mp = std::get_if<MpsEngine>(&c.engine)) {
        e["chi_max"] = mp->policy.chi_max;
        e["cutoff"] = mp->policy.svd_cutoff;
        e["dt"] = mp->dt;
    } else {
        const auto& ce = std::get<CircuitEngine>(c.engine);
        if (ce.noise) e["noise"] = {{"p1", ce.noise->p1}, {"p2", ce.noise->p2}, {"seed", ce.noise->seed}};
        e["u2"] = c.u2;
    }
    j["engine"] = e;

    json is;
    switch (c.init.kind) {
    case InitialState::Kind::Bitstring: {
        is["type"] = "bitstring";
        std::string b;
        for (int x : c.init.bits) b += static_cast<char>('0' + x);
        if (b.empty()) b.assign(c.model.L, '0');
        is["bits"] = b;
        break;
    }
    case InitialState::Kind::RandomProduct: is["type"] = "random_product"; break;
    case InitialState::Kind::Spt:
        is["type"] = "spt";
        is["excitations"] = c.init.excitations;
        is["random"] = c.init.random_excitations;
        break;
    }
    j["initial_state"] = is;

    json ch = json::array();
    if (c.channels.magnetization) ch.push_back("magnetization");
    if (c.channels.stabilizer) ch.push_back("stabilizer");
    if (c.channels.entropy) ch.push_back("entropy");
    if (c.channels.autocorrelator) ch.push_back("autocorrelator");
    j["channels"] = ch;
    j["periods"] = c.periods;
    j["realizations"] = c.realizations;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["statistics"] = c.want_std ? json::array({"mean", "std"}) : json::array({"mean"});
    if (c.workers) j["workers"] = *c.workers;
    j["scan"] = {{"deltas", c.scan.deltas},
                 {"Vs", c.scan.Vs},
                 {"statistic", statistic_name(c.scan.statistic)},
                 {"site", c.scan.site},
                 {"pairs", c.scan.pairs == PairPolicy::All ? "all" : "interior"}};
    j["lifetime"] = {{"sizes", c.lifetime.sizes},
                     {"dense_until", c.lifetime.dense_until},
                     {"max_period", c.lifetime.max_period},
                     {"ratio", c.lifetime.ratio}};
    j["echo"] = {{"max_n", c.echo.max_n}, {"trajectories", c.echo.trajectories}, {"p1", c.echo.p1},
                 {"p2", c.echo.p2},       {"noise_seed", c.echo.noise_seed},     {"compiled", c.echo.compiled}};
    j["compile"] = {{"strategy", c.compile.strategy}, {"dt", c.compile.dt},
                    {"alpha", c.compile.alpha},       {"threshold", c.compile.threshold},
                    {"max_iterations", c.compile.max_iterations}, {"inner_layers", c.compile.inner_layers},
                    {"starts", c.compile.starts},     {"beta", c.compile.beta}};
    return j;
}

inline json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("<config>", "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError("<config>", std::string("malformed JSON: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Output

/// Full-precision, locale-independent number formatting.
inline std::string fmt(double v) { return format_double(v); }
inline std::string fmt(long long v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(std::size_t v) { return std::to_string(v); }
inline std::string fmt(std::uint64_t v, int) { return std::to_string(v); }
inline std::string fmt(const std::string& s) { return s; }
inline std::string fmt(const char* s) { return s; }

class CsvWriter {
public:
    CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
        if (!out_) throw Error("cannot write " + path.string());
        row_strings(header);
    }

    template <class... T>
    void row(const T&... v) {
        row_strings({fmt(v)...});
    }

    void row_strings(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

/// FNV-1a over the bytes of a file, for fixture comparison.
inline std::uint64_t file_hash(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char ch;
    while (in.get(ch)) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    return h;
}

struct RunContext {
    std::string command;
    JobConfig config;
    fs::path out;
    int workers = 1;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    std::string started_at;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> files;
    json results = json::object();
    std::string status = "complete";
    std::string error;
    std::exception_ptr failure; // first failed realization, rethrown after partial output

    fs::path file(const std::string& name) {
        files.push_back(name);
        return out / name;
    }
};

inline std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Everything except the "runtime" block is a function of the config.
inline void write_manifest(const RunContext& ctx) {
    json m;
    m["tool"] = "sptc";
    m["version"] = kToolVersion;
    m["command"] = ctx.command;
    m["status"] = ctx.status;
    if (!ctx.error.empty()) m["error"] = ctx.error;
    m["config"] = resolved_config(ctx.config);
    m["seeds"] = ctx.seeds;
    m["files"] = ctx.files;
    m["results"] = ctx.results;
    m["runtime"] = {{"started_at", ctx.started_at},
                    {"wall_time_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - ctx.start).count()},
                    {"workers", ctx.workers}};
    std::ofstream out(ctx.out / "manifest.json");
    out << m.dump(2) << '\n';
    if (ctx.status == "partial") std::ofstream(ctx.out / "PARTIAL") << ctx.error << '\n';
}

// ---------------------------------------------------------------------------
// Per-realization task runner

/// Runs fn(i) for every realization; a failed realization keeps its error and
/// the others still complete. Returns the lowest-index error, if any.
template <class Fn>
std::optional<std::pair<std::size_t, std::exception_ptr>> run_tasks(std::size_t n, int workers, Fn&& fn) {
    std::vector<std::exception_ptr> errs(n);
    parallel_for(n, workers, [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            errs[i] = std::current_exception();
        }
    });
    for (std::size_t i = 0; i < n; ++i)
        if (errs[i]) return std::make_pair(i, errs[i]);
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Commands

inline std::vector<DisorderRealization> realizations_of(RunContext& ctx) {
    std::vector<DisorderRealization> rs;
    for (int i = 0; i < ctx.config.realizations; ++i) {
        const auto s = derive_seed(ctx.config.seed, static_cast<std::uint64_t>(i));
        ctx.seeds.push_back(s);
        rs.push_back(sample_realization(ctx.config.model, s));
    }
    return rs;
}

inline OptimizeOptions optimizer_of(const CompileConfig& c) {
    return {c.alpha, c.threshold, c.max_iterations, true};
}

struct CompiledU2 {
    ParamCircuit circuit;
    double loss = 1.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> start_losses;
};

/// Compiles one dt-slice of U2. The sandwich strategy tries the ideal-limit
/// angles first and then random starts, keeping the best result.
inline CompiledU2 compile_u2(const DisorderRealization& r, const CompileConfig& c) {
    const auto target = u2_target(r, c.dt);
    CompiledU2 best;
    if (c.strategy == "search") {
        SearchOptions so;
        so.seed = derive_seed(r.seed, 99);
        const auto res = neuroevolution_search(target, r.L(), c.beta, so);
        best.circuit = res.best.circuit;
        best.loss = res.best.loss;
        best.iterations = res.generations;
        best.converged = res.converged;
        best.start_losses.push_back(res.best.loss);
        return best;
    }
    for (int s = 0; s < c.starts; ++s) {
        auto pc = sandwich_ansatz(r.L(), c.inner_layers);
        if (s == 0 && c.inner_layers == 0) {
            pc.theta = sandwich_ideal_angles(r, c.dt);
        } else {
            CounterRng rng(derive_seed(r.seed, static_cast<std::uint64_t>(s)));
            randomize(pc, rng);
        }
        const auto res = optimize(pc, target, optimizer_of(c));
        best.start_losses.push_back(res.loss);
        if (res.loss < best.loss || s == 0) {
            pc.theta = res.theta;
            best.circuit = pc;
            best.loss = res.loss;
            best.iterations = res.iterations;
            best.converged = res.converged;
        }
        if (best.converged) break;
    }
    return best;
}

inline Circuit compiled_u2_circuit(const CompiledU2& cu, const DisorderRealization& r, double dt) {
    return repeat(cu.circuit.circuit(), static_cast<int>(std::lround(r.params.second_interval() / dt)));
}

inline EngineSpec engine_for(const JobConfig& c, const DisorderRealization& r) {
    if (c.engine_type != "circuit" || c.u2 != "compiled") return c.engine;
    const auto cu = compile_u2(r, c.compile);
    if (!cu.converged) throw ConvergenceError("U2 compilation did not reach the loss threshold", cu.loss);
    CircuitEngine ce = std::get<CircuitEngine>(c.engine);
    ce.u2 = compiled_u2_circuit(cu, r, c.compile.dt);
    return ce;
}

inline std::vector<ObservableSeries> run_ensemble(RunContext& ctx, std::vector<bool>& ok) {
    auto rs = realizations_of(ctx);
    std::vector<ObservableSeries> series(rs.size());
    ok.assign(rs.size(), false);
    const auto& c = ctx.config;
    const auto failure = run_tasks(rs.size(), ctx.workers, [&](std::size_t i) {
        EngineSpec e = engine_for(c, rs[i]);
        if (std::holds_alternative<CircuitEngine>(e)) {
            auto& ce = std::get<CircuitEngine>(e);
            if (ce.noise) ce.noise->seed = derive_seed(ce.noise->seed, i);
        }
        series[i] = evolve_and_record(e, rs[i], c.init, c.channels, c.periods);
        ok[i] = true;
    });
    if (failure) {
        ctx.status = "partial";
        ctx.failure = failure->second;
        try {
            std::rethrow_exception(failure->second);
        } catch (const std::exception& e) {
            ctx.error = "realization " + std::to_string(failure->first) + ": " + e.what();
        }
    }
    return series;
}

struct ChannelRows {
    const char* name;
    std::vector<std::vector<double>> ObservableSeries::*rows;
};

inline constexpr ChannelRows kSiteChannels[] = {{"magnetization", &ObservableSeries::magnetization},
                                                {"stabilizer", &ObservableSeries::stabilizer},
                                                {"autocorrelator", &ObservableSeries::autocorrelator}};

/// Disorder-averaged record per (channel, site); entropy uses site 0.
inline std::map<std::pair<std::string, int>, std::vector<EnsembleStats>>
aggregate(const std::vector<ObservableSeries>& series, const std::vector<bool>& ok, bool want_std) {
    std::map<std::pair<std::string, int>, std::vector<EnsembleStats>> out;
    std::vector<const ObservableSeries*> good;
    for (std::size_t i = 0; i < series.size(); ++i)
        if (ok[i]) good.push_back(&series[i]);
    if (good.empty()) return out;
    const int N = good.front()->periods, L = good.front()->L;
    auto reduce = [&](auto get) {
        std::vector<EnsembleStats> col(N + 1);
        std::vector<double> v(good.size());
        for (int n = 0; n <= N; ++n) {
            for (std::size_t i = 0; i < good.size(); ++i) v[i] = get(*good[i], n);
            if (want_std && v.size() >= 2) col[n] = ensemble_stats(v);
            else col[n] = EnsembleStats{ensemble_mean(v), std::nan(""), std::nan(""), v.size()};
        }
        return col;
    };
    for (const auto& ch : kSiteChannels) {
        if ((good.front()->*ch.rows).empty()) continue;
        for (int j = 0; j < L; ++j)
            out[{ch.name, j + 1}] = reduce([&](const ObservableSeries& s, int n) { return (s.*ch.rows)[j][n]; });
    }
    if (!good.front()->entropy.empty())
        out[{"entropy", 0}] = reduce([](const ObservableSeries& s, int n) { return s.entropy[n]; });
    return out;
}

inline void write_series(RunContext& ctx, const std::vector<ObservableSeries>& series, const std::vector<bool>& ok) {
    CsvWriter w(ctx.file("series.csv"), {"realization", "period", "site", "channel", "value"});
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (!ok[i]) continue;
        const auto& s = series[i];
        for (const auto& ch : kSiteChannels)
            for (std::size_t j = 0; j < (s.*ch.rows).size(); ++j)
                for (int n = 0; n <= s.periods; ++n) w.row(i, n, j + 1, ch.name, (s.*ch.rows)[j][n]);
        for (int n = 0; n < static_cast<int>(s.entropy.size()); ++n) w.row(i, n, 0, "entropy", s.entropy[n]);
    }
}

inline void write_aggregate(RunContext& ctx, const std::map<std::pair<std::string, int>, std::vector<EnsembleStats>>& agg) {
    CsvWriter w(ctx.file("aggregate.csv"), {"period", "site", "channel", "mean", "std"});
    for (const auto& [key, col] : agg)
        for (std::size_t n = 0; n < col.size(); ++n)
            w.row_strings({fmt(n), fmt(key.second), key.first, fmt(col[n].mean),
                           std::isnan(col[n].std) ? std::string{} : fmt(col[n].std)});
}

/// Spectra of the disorder-averaged records, plus per-site peak summaries.
inline void write_spectra(RunContext& ctx, const std::map<std::pair<std::string, int>, std::vector<EnsembleStats>>& agg,
                          const std::vector<ObservableSeries>& series, const std::vector<bool>& ok) {
    const int N = ctx.config.periods;
    if (N < 4 || N % 2) {
        ctx.results["spectra"] = "skipped: periods must be even and >= 4";
        return;
    }
    CsvWriter w(ctx.file("spectra.csv"), {"site", "channel", "m", "frequency", "amplitude"});
    CsvWriter p(ctx.file("peaks.csv"), {"site", "channel", "peak", "median", "mean_peak", "std_peak"});
    for (const auto& [key, col] : agg) {
        if (key.first == "entropy") continue;
        std::vector<double> mean(col.size());
        for (std::size_t n = 0; n < col.size(); ++n) mean[n] = col[n].mean;
        const auto sp = series_spectrum(mean);
        for (int m = 0; m < sp.N; ++m) w.row(key.second, key.first, m, sp.frequency[m], sp.amplitude[m]);
        std::vector<double> peaks;
        for (std::size_t i = 0; i < series.size(); ++i) {
            if (!ok[i]) continue;
            for (const auto& ch : kSiteChannels)
                if (key.first == ch.name) peaks.push_back(series_spectrum((series[i].*ch.rows)[key.second - 1]).peak);
        }
        const bool two = ctx.config.want_std && peaks.size() >= 2;
        const auto st = two ? ensemble_stats(peaks) : EnsembleStats{ensemble_mean(peaks), std::nan(""), 0, peaks.size()};
        p.row_strings({fmt(key.second), key.first, fmt(sp.peak), fmt(sp.median_amplitude()), fmt(st.mean),
                       std::isnan(st.std) ? std::string{} : fmt(st.std)});
    }
}

inline void cmd_evolve(RunContext& ctx, bool spectra_only) {
    std::vector<bool> ok;
    const auto series = run_ensemble(ctx, ok);
    const auto agg = aggregate(series, ok, ctx.config.want_std);
    if (!spectra_only) {
        write_series(ctx, series, ok);
        write_aggregate(ctx, agg);
    }
    write_spectra(ctx, agg, series, ok);
    ctx.results["completed_realizations"] = std::count(ok.begin(), ok.end(), true);
    if (ctx.failure) std::rethrow_exception(ctx.failure);
}

inline void cmd_scan(RunContext& ctx) {
    const auto& c = ctx.config;
    ScanOptions opt;
    opt.realizations = c.realizations;
    opt.periods = c.periods;
    opt.seed = c.seed;
    opt.statistic = c.scan.statistic;
    opt.engine = c.engine;
    opt.init = c.init;
    opt.site = c.scan.site;
    opt.pairs = c.scan.pairs;
    opt.workers = ctx.workers;
    if (c.scan.statistic != ScanStatistic::Osg && (c.periods < 4 || c.periods % 2))
        throw SchemaError("periods", "peak statistics need an even period count >= 4");
    for (std::size_t cell = 0; cell < c.scan.deltas.size() * c.scan.Vs.size(); ++cell)
        for (int i = 0; i < c.realizations; ++i) ctx.seeds.push_back(cell_seed(c.seed, cell, i));
    const auto g = phase_diagram_scan(c.scan.deltas, c.scan.Vs, c.model, opt);
    CsvWriter w(ctx.file("grid.csv"), {"delta", "V", "statistic", "value", "mean_peak", "peak_std", "peak_sem", "averaged_peak"});
    const bool osg = c.scan.statistic == ScanStatistic::Osg;
    for (std::size_t d = 0; d < g.deltas.size(); ++d)
        for (std::size_t v = 0; v < g.Vs.size(); ++v) {
            if (osg) {
                w.row_strings({fmt(g.deltas[d]), fmt(g.Vs[v]), "o_sg", fmt(g.osg[d][v]), "", "", "", ""});
            } else {
                w.row(g.deltas[d], g.Vs[v], statistic_name(g.statistic), g.values()[d][v], g.mean_peak[d][v],
                      g.peak_std[d][v], g.peak_sem[d][v], g.averaged_peak[d][v]);
            }
        }
    CsvWriter b(ctx.file("boundary.csv"), {"axis", "fixed", "argmax"});
    const auto over_v = g.boundary_over_V();
    for (std::size_t d = 0; d < g.deltas.size(); ++d) b.row("delta", g.deltas[d], over_v[d]);
    const auto over_d = g.boundary_over_delta();
    for (std::size_t v = 0; v < g.Vs.size(); ++v) b.row("V", g.Vs[v], over_d[v]);
    ctx.results["argmax_delta_per_V"] = over_d;
    ctx.results["argmax_V_per_delta"] = over_v;
}

inline void cmd_lifetime(RunContext& ctx) {
    const auto& c = ctx.config;
    auto sizes = c.lifetime.sizes;
    if (sizes.empty()) sizes.push_back(c.model.L);
    CsvWriter w(ctx.file("lifetime.csv"), {"L", "period", "envelope"});
    CsvWriter t(ctx.file("tau.csv"), {"L", "tau", "realizations"});
    for (int i = 0; i < c.realizations; ++i) ctx.seeds.push_back(derive_seed(c.seed, static_cast<std::uint64_t>(i)));
    json taus = json::object();
    for (int L : sizes) {
        ModelParams p = c.model;
        p.L = L;
        LifetimeOptions opt;
        opt.realizations = c.realizations;
        opt.seed = c.seed;
        opt.dense_until = c.lifetime.dense_until;
        opt.max_period = c.lifetime.max_period;
        opt.ratio = c.lifetime.ratio;
        if (const auto* ex = std::get_if<ExactEngine>(&c.engine)) opt.method = ex->method;
        opt.workers = ctx.workers;
        const auto res = edge_lifetime(p, opt);
        for (std::size_t k = 0; k < res.periods.size(); ++k) w.row(L, res.periods[k], res.envelope[k]);
        t.row_strings({fmt(L), res.tau ? fmt(*res.tau) : std::string{}, fmt(c.realizations)});
        taus[std::to_string(L)] = res.tau ? json(*res.tau) : json(nullptr);
    }
    ctx.results["tau"] = taus;
}

inline void cmd_floquet_spectrum(RunContext& ctx) {
    const auto rs = realizations_of(ctx);
    const auto method = std::holds_alternative<ExactEngine>(ctx.config.engine)
                            ? std::get<ExactEngine>(ctx.config.engine).method
                            : EvolutionMethod{Trotter{}};
    std::vector<QuasienergyReport> reps(rs.size());
    parallel_for(rs.size(), ctx.workers, [&](std::size_t i) { reps[i] = floquet_spectrum(rs[i], method); });
    CsvWriter q(ctx.file("quasienergies.csv"), {"realization", "index", "quasienergy"});
    CsvWriter s(ctx.file("spectrum_summary.csv"), {"realization", "pairing_defect", "min_multiplicity"});
    double worst = 0;
    int min_mult = 1 << 30;
    for (std::size_t i = 0; i < reps.size(); ++i) {
        for (std::size_t k = 0; k < reps[i].quasienergies.size(); ++k) q.row(i, k, reps[i].quasienergies[k]);
        s.row(i, reps[i].pairing_defect, reps[i].min_multiplicity);
        worst = std::max(worst, reps[i].pairing_defect);
        min_mult = std::min(min_mult, reps[i].min_multiplicity);
    }
    ctx.results["max_pairing_defect"] = worst;
    ctx.results["min_multiplicity"] = min_mult;
}

inline void cmd_prep_spt(RunContext& ctx) {
    const auto& c = ctx.config;
    const int L = c.model.L;
    if (c.init.kind != InitialState::Kind::Spt && !c.init.bits.empty())
        throw SchemaError("initial_state.type", "prep-spt needs an spt initial state");
    const auto resolved = resolve_initial_state(c.init.kind == InitialState::Kind::Spt ? c.init : InitialState::spt(),
                                                L, initial_state_seed(c.seed));
    const Circuit prep = spt_prep_circuit(L, resolved.excitations);
    std::ofstream(ctx.file("spt_circuit.txt")) << to_text(prep);
    if (L > StateVector::kMaxSites) throw CapacityError("state preparation check supports L <= 26");
    const StateVector s = run_circuit(StateVector(L), prep);
    CsvWriter w(ctx.file("spt_stabilizers.csv"), {"k", "stabilizer"});
    for (int k = 1; k <= L; ++k) w.row(k, pauli_expectation(s, stabilizer(L, k)));
    CsvWriter e(ctx.file("entanglement_spectrum.csv"), {"cut", "index", "value"});
    for (int cut = 1; cut < L; ++cut) {
        const auto es = entanglement_spectrum(s, cut);
        for (std::size_t i = 0; i < es.size(); ++i) e.row(cut, i, es[i]);
    }
    ctx.results["excitations"] = resolved.excitations;
    ctx.results["fused_depth"] = fused_depth(prep);
}

inline void cmd_echo(RunContext& ctx) {
    const auto& c = ctx.config;
    const int T = c.echo.trajectories;
    std::vector<std::vector<double>> surv(T, std::vector<double>(c.echo.max_n + 1, 0.0));
    for (int t = 0; t < T; ++t) ctx.seeds.push_back(derive_seed(c.seed, static_cast<std::uint64_t>(t)));
    const std::optional<NoiseModel> base =
        (c.echo.p1 > 0 || c.echo.p2 > 0) ? std::optional<NoiseModel>(NoiseModel{c.echo.p1, c.echo.p2, c.echo.noise_seed})
                                         : std::nullopt;
    const auto failure = run_tasks(static_cast<std::size_t>(T), ctx.workers, [&](std::size_t t) {
        const auto r = sample_realization(c.model, ctx.seeds[t]);
        Circuit period = c.echo.compiled ? floquet_period_circuit(r.L(), r.params.delta,
                                                                  compiled_u2_circuit(compile_u2(r, c.compile), r, c.compile.dt))
                                         : floquet_period_circuit(r, r.params.delta);
        const auto resolved = resolve_initial_state(c.init, r.L(), initial_state_seed(r.seed));
        const StateVector psi0 = sptc::detail::prepare_state(r.L(), resolved, c.init.kind == InitialState::Kind::Spt);
        for (int n = 0; n <= c.echo.max_n; ++n) {
            std::optional<NoiseModel> noise = base;
            if (noise) noise->seed = derive_seed(base->seed, t); // same stream for every n
            const StateVector out = run_circuit(psi0, echo_circuit(period, n), noise);
            surv[t][n] = std::norm(psi0.amplitudes().dot(out.amplitudes()));
        }
    });
    if (failure) std::rethrow_exception(failure->second);
    CsvWriter w(ctx.file("echo.csv"), {"n", "mean", "std", "sem"});
    json means = json::array();
    for (int n = 0; n <= c.echo.max_n; ++n) {
        std::vector<double> v(T);
        for (int t = 0; t < T; ++t) v[t] = surv[t][n];
        if (T >= 2) {
            const auto st = ensemble_stats(v);
            w.row(n, st.mean, st.std, st.sem);
            means.push_back(st.mean);
        } else {
            w.row_strings({fmt(n), fmt(v[0]), "", ""});
            means.push_back(v[0]);
        }
    }
    ctx.results["mean_survival"] = means;
}

inline void cmd_compile(RunContext& ctx) {
    const auto rs = realizations_of(ctx);
    std::vector<CompiledU2> out(rs.size());
    const auto failure = run_tasks(rs.size(), ctx.workers, [&](std::size_t i) { out[i] = compile_u2(rs[i], ctx.config.compile); });
    if (failure) std::rethrow_exception(failure->second);
    fs::create_directories(ctx.out / "circuits");
    CsvWriter w(ctx.file("compile.csv"), {"realization", "seed", "loss", "iterations", "converged", "parameters",
                                          "fused_depth", "start_losses"});
    int bad = 0;
    for (std::size_t i = 0; i < rs.size(); ++i) {
        const std::string name = "circuits/u2_" + std::to_string(i) + ".txt";
        std::ofstream(ctx.file(name)) << to_text(out[i].circuit.circuit());
        std::string starts;
        for (double l : out[i].start_losses) starts += (starts.empty() ? "" : ";") + fmt(l);
        w.row_strings({fmt(i), fmt(rs[i].seed, 0), fmt(out[i].loss), fmt(out[i].iterations), out[i].converged ? "1" : "0",
                       fmt(out[i].circuit.parameter_count()), fmt(fused_depth(out[i].circuit.circuit())), starts});
        bad += !out[i].converged;
    }
    ctx.results["nonconverged"] = bad;
    if (bad) {
        ctx.status = "nonconverged";
        throw ConvergenceError(std::to_string(bad) + " realization(s) did not reach the loss threshold", 0.0);
    }
}

inline void cmd_tebd_bench(RunContext& ctx) {
    const auto& c = ctx.config;
    const MpsEngine mp = std::holds_alternative<MpsEngine>(c.engine) ? std::get<MpsEngine>(c.engine) : MpsEngine{};
    const auto rs = realizations_of(ctx);
    struct Row {
        std::vector<double> edge, entropy, discarded;
        std::vector<int> bond;
        double seconds = 0;
    };
    std::vector<Row> rows(rs.size());
    const auto failure = run_tasks(rs.size(), ctx.workers, [&](std::size_t i) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto terms = hamiltonian_terms(rs[i]);
        const auto resolved = resolve_initial_state(c.init, rs[i].L(), initial_state_seed(rs[i].seed));
        auto mps = sptc::detail::prepare_mps(rs[i].L(), resolved, c.init.kind == InitialState::Kind::Spt, mp.policy);
        auto& r = rows[i];
        for (int n = 0; n <= c.periods; ++n) {
            if (n) mps = tebd_floquet_period(std::move(mps), rs[i], rs[i].params.delta, mp.dt, terms);
            r.edge.push_back(mps_expectation(mps, PauliString(1.0, {{1, Axis::Z}})));
            r.entropy.push_back(half_chain_entropy(mps));
            r.bond.push_back(mps.max_bond());
            r.discarded.push_back(mps.discarded_weight());
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });
    if (failure) std::rethrow_exception(failure->second);
    CsvWriter w(ctx.file("tebd.csv"), {"realization", "period", "edge_z", "entropy", "max_bond", "discarded_weight"});
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (int n = 0; n <= c.periods; ++n)
            w.row(i, n, rows[i].edge[n], rows[i].entropy[n], rows[i].bond[n], rows[i].discarded[n]);
    // Timing lives in the runtime block of the manifest so the CSVs stay deterministic.
    double total = 0;
    for (const auto& r : rows) total += r.seconds;
    ctx.results["mean_seconds_per_realization_nondeterministic"] = rows.empty() ? 0.0 : total / rows.size();
}

// ---------------------------------------------------------------------------
// SVG plots

namespace svg {

inline std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(std::move(cells));
    }
    return rows;
}

inline double num(const std::string& s) { return s.empty() ? std::nan("") : std::strtod(s.c_str(), nullptr); }

/// Blue (-1) through white (0) to red (+1).
inline std::string diverging(double v) {
    v = std::clamp(std::isnan(v) ? 0.0 : v, -1.0, 1.0);
    const int a = static_cast<int>(255 * (1 - std::abs(v)));
    char buf[16];
    if (v >= 0) std::snprintf(buf, sizeof buf, "#ff%02x%02x", a, a);
    else std::snprintf(buf, sizeof buf, "#%02x%02xff", a, a);
    return buf;
}

inline std::string sequential(double v, double lo, double hi) {
    const double t = hi > lo ? std::clamp((v - lo) / (hi - lo), 0.0, 1.0) : 0.0;
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(255 * t), static_cast<int>(64 + 100 * t),
                  static_cast<int>(255 * (1 - t)));
    return buf;
}

inline void header(std::ostream& o, int w, int h, const std::string& title) {
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"10\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
}

inline bool magnetization_heatmap(const fs::path& dir) {
    const auto rows = read_csv(dir / "aggregate.csv");
    std::map<std::pair<int, int>, double> v;
    int N = 0, L = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() < 4 || rows[i][2] != "magnetization") continue;
        const int n = std::stoi(rows[i][0]), j = std::stoi(rows[i][1]);
        v[{n, j}] = num(rows[i][3]);
        N = std::max(N, n);
        L = std::max(L, j);
    }
    if (v.empty()) return false;
    const int cw = std::max(4, 600 / (N + 1)), ch = std::max(8, 300 / L);
    std::ofstream o(dir / "magnetization.svg");
    header(o, 60 + cw * (N + 1), 40 + ch * L, "disorder-averaged magnetization (site vs period)");
    for (const auto& [k, val] : v)
        o << "<rect x=\"" << 50 + cw * k.first << "\" y=\"" << 30 + ch * (k.second - 1) << "\" width=\"" << cw
          << "\" height=\"" << ch << "\" fill=\"" << diverging(val) << "\"/>\n";
    o << "</svg>\n";
    return true;
}

inline bool spectra_plot(const fs::path& dir) {
    const auto rows = read_csv(dir / "spectra.csv");
    std::map<int, std::vector<std::pair<double, double>>> lines;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() < 5 || rows[i][1] != "magnetization") continue;
        const double f = num(rows[i][3]);
        if (f <= 0.5) lines[std::stoi(rows[i][0])].emplace_back(f, num(rows[i][4]));
    }
    if (lines.empty()) return false;
    std::ofstream o(dir / "spectra.svg");
    header(o, 520, 340, "magnetization spectra (site 1 red, bulk grey)");
    for (const auto& [site, pts] : lines) {
        o << "<polyline fill=\"none\" stroke=\"" << (site == 1 || site == static_cast<int>(lines.size()) ? "#d62728" : "#999999")
          << "\" points=\"";
        for (auto [f, a] : pts) o << 40 + 900 * f << ',' << 320 - 280 * std::min(a, 1.0) << ' ';
        o << "\"/>\n";
    }
    o << "</svg>\n";
    return true;
}

inline bool grid_plot(const fs::path& dir) {
    const auto rows = read_csv(dir / "grid.csv");
    std::vector<double> ds, vs;
    std::map<std::pair<double, double>, double> val;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() < 4) continue;
        const double d = num(rows[i][0]), v = num(rows[i][1]);
        if (std::find(ds.begin(), ds.end(), d) == ds.end()) ds.push_back(d);
        if (std::find(vs.begin(), vs.end(), v) == vs.end()) vs.push_back(v);
        val[{d, v}] = num(rows[i][3]);
    }
    if (val.empty()) return false;
    double lo = 1e300, hi = -1e300;
    for (const auto& [k, x] : val) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    const int cw = 40, ch = 30;
    std::ofstream o(dir / "grid.svg");
    header(o, 60 + cw * static_cast<int>(ds.size()), 50 + ch * static_cast<int>(vs.size()), "scan statistic (delta across, V down)");
    for (std::size_t a = 0; a < ds.size(); ++a)
        for (std::size_t b = 0; b < vs.size(); ++b)
            o << "<rect x=\"" << 50 + cw * a << "\" y=\"" << 30 + ch * b << "\" width=\"" << cw << "\" height=\"" << ch
              << "\" fill=\"" << sequential(val[{ds[a], vs[b]}], lo, hi) << "\"/>\n";
    o << "</svg>\n";
    return true;
}

} // namespace svg

inline int cmd_plot(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        std::cerr << "plot: " << dir << " is not a directory\n";
        return kSchema;
    }
    int made = svg::magnetization_heatmap(dir) + svg::spectra_plot(dir) + svg::grid_plot(dir);
    std::cout << "wrote " << made << " plot(s) to " << dir.string() << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------
// Entry point

struct Overrides {
    std::optional<int> L, realizations, periods, workers;
    std::optional<double> delta, V;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;
};

inline void apply_overrides(json& j, const Overrides& o) {
    if (o.L) j["model"]["L"] = *o.L;
    if (o.delta) j["model"]["delta"] = *o.delta;
    if (o.V) j["model"]["V"] = *o.V;
    if (o.realizations) j["realizations"] = *o.realizations;
    if (o.periods) j["periods"] = *o.periods;
    if (o.seed) j["seed"] = *o.seed;
}

// A partial run keeps its status and realization-tagged message.
inline void note_failure(RunContext& ctx, const char* status, const char* what) {
    if (ctx.status == "partial" && ctx.failure) return;
    if (ctx.status == "complete") ctx.status = status;
    ctx.error = what;
}

/// Runs one command with a parsed config. Returns the exit code.
inline int run_command(const std::string& command, const json& raw, const Overrides& ov, std::ostream& err = std::cerr) {
    RunContext ctx;
    ctx.command = command;
    ctx.started_at = utc_now();
    try {
        json j = raw;
        apply_overrides(j, ov);
        ctx.config = parse_config(j);
        std::string out = ctx.config.output_dir;
        if (const char* env = std::getenv("SPTC_OUTPUT_DIR"); env && *env) out = env;
        if (ov.output) out = *ov.output;
        ctx.config.output_dir = out;
        ctx.out = out;
        ctx.workers = ctx.config.workers.value_or(1);
        if (const char* env = std::getenv("SPTC_WORKERS"); env && *env) ctx.workers = default_workers();
        if (ov.workers) ctx.workers = *ov.workers;
        fs::create_directories(ctx.out);
    } catch (const SchemaError& e) {
        err << "schema error: " << e.what() << '\n';
        return kSchema;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kSchema;
    }

    int code = kOk;
    try {
        if (command == "evolve") cmd_evolve(ctx, false);
        else if (command == "spectrum") {
            if (ctx.config.periods < 4 || ctx.config.periods % 2)
                throw SchemaError("periods", "spectra need an even period count >= 4");
            cmd_evolve(ctx, true);
        } else if (command == "scan") cmd_scan(ctx);
        else if (command == "lifetime") cmd_lifetime(ctx);
        else if (command == "floquet-spectrum") cmd_floquet_spectrum(ctx);
        else if (command == "prep-spt") cmd_prep_spt(ctx);
        else if (command == "echo") cmd_echo(ctx);
        else if (command == "compile") cmd_compile(ctx);
        else if (command == "tebd-bench") cmd_tebd_bench(ctx);
        else throw SchemaError("<command>", "unknown command " + command);
    } catch (const SchemaError& e) {
        note_failure(ctx, "failed", e.what());
        code = kSchema;
    } catch (const ParamError& e) {
        note_failure(ctx, "failed", e.what());
        code = kSchema;
    } catch (const CapacityError& e) {
        note_failure(ctx, "partial", e.what());
        code = kCapacity;
    } catch (const ConvergenceError& e) {
        note_failure(ctx, "nonconverged", e.what());
        code = kNonConvergence;
    } catch (const std::exception& e) {
        note_failure(ctx, "failed", e.what());
        code = kFailure;
    }
    if (code != kOk) err << (ctx.status == "partial" ? "partial results: " : "error: ") << ctx.error << '\n';
    write_manifest(ctx);
    return code;
}

inline int run_cli(int argc, char** argv) {
    CLI::App app{"sptc: Floquet SPT time-crystal simulation toolkit"};
    app.require_subcommand(1);
    std::string config_path;
    Overrides ov;
    const std::vector<std::string> job_commands{"evolve", "spectrum", "scan", "lifetime", "floquet-spectrum",
                                                "prep-spt", "echo", "compile", "tebd-bench"};
    for (const auto& name : job_commands) {
        auto* sub = app.add_subcommand(name, "run a " + name + " job");
        sub->add_option("-c,--config", config_path, "JSON job config")->required();
        sub->add_option("-o,--output", ov.output, "output directory");
        sub->add_option("-w,--workers", ov.workers, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--seed", ov.seed, "base seed");
        sub->add_option("--realizations", ov.realizations, "realization count");
        sub->add_option("--periods", ov.periods, "drive periods");
        sub->add_option("--L", ov.L, "chain length");
        sub->add_option("--delta", ov.delta, "drive imperfection");
        sub->add_option("--V", ov.V, "mean bond coupling");
    }
    std::string plot_dir;
    auto* plot = app.add_subcommand("plot", "emit SVG plots from a job's CSVs");
    plot->add_option("-i,--input", plot_dir, "job output directory")->required();
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kSchema;
    }
    if (plot->parsed()) return cmd_plot(plot_dir);
    for (const auto& name : job_commands) {
        if (!app.got_subcommand(name)) continue;
        json raw;
        try {
            raw = load_json(config_path);
        } catch (const SchemaError& e) {
            std::cerr << "schema error: " << e.what() << '\n';
            return kSchema;
        }
        return run_command(name, raw, ov);
    }
    return kSchema;
}

} // namespace sptc::cli
