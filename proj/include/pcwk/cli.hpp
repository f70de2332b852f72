#ifndef PCWK_CLI_HPP
#define PCWK_CLI_HPP

/// @file
/// Batch front-end: JSON problem specifications, dispatch to the solvers and
/// CSV reports. Requires the vendored json.hpp and CLI11.hpp on the include path.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "error.hpp"
#include "estimators.hpp"
#include "factorization.hpp"
#include "io.hpp"
#include "lift.hpp"
#include "minimax.hpp"
#include "oracle.hpp"
#include "spectral.hpp"

namespace pcwk::cli {

inline constexpr const char* version = "1.0.0";

using json = nlohmann::json;

enum class TaskKind {
    interpolate,
    extrapolate,
    extrapolate_finite,
    filter,
    factorize,
    minimax_y,
    minimax_interp_dm,
    minimax_extrap_d01,
    minimax_filter_d0eps,
    oracle_check,
    simulate,
};

inline const std::vector<std::pair<std::string, TaskKind>>& task_names() {
    static const std::vector<std::pair<std::string, TaskKind>> names = {
        {"interpolate", TaskKind::interpolate},
        {"extrapolate", TaskKind::extrapolate},
        {"extrapolate-finite", TaskKind::extrapolate_finite},
        {"filter", TaskKind::filter},
        {"factorize", TaskKind::factorize},
        {"minimax-y", TaskKind::minimax_y},
        {"minimax-interp-dm", TaskKind::minimax_interp_dm},
        {"minimax-extrap-d01", TaskKind::minimax_extrap_d01},
        {"minimax-filter-d0eps", TaskKind::minimax_filter_d0eps},
        {"oracle-check", TaskKind::oracle_check},
        {"simulate", TaskKind::simulate},
    };
    return names;
}

inline std::string to_string(TaskKind t) {
    for (const auto& [name, kind] : task_names())
        if (kind == t) return name;
    return "unknown";
}

inline const std::vector<std::pair<std::string, Horizon>>& horizon_names() {
    static const std::vector<std::pair<std::string, Horizon>> names = {
        {"interpolation", Horizon::interpolation},
        {"extrapolation", Horizon::extrapolation},
        {"extrapolation-finite", Horizon::extrapolation_finite},
        {"filtering", Horizon::filtering},
    };
    return names;
}

inline std::string horizon_name(Horizon h) {
    for (const auto& [name, kind] : horizon_names())
        if (kind == h) return name;
    return "unknown";
}

struct Numerics {
    int grid = default_grid_size;
    int truncation = 0;
    double tolerance = 1e-10;
    double cond_threshold = default_cond_threshold;
    std::uint64_t seed = 0;
    int max_iter = 100;
};

struct ClassParams {
    double p_zeta = 1.0;
    double p_theta = 0.0;
    double eps = 1.0;
    std::vector<Mat> p_moments;       // P(0..M) for D_M^-
    Mat p;                            // K x K power matrix for D_0^1
    std::optional<std::string> g2;
    int samples = 100;
    int sample_order = 1;
};

struct ProblemSpec {
    TaskKind task = TaskKind::interpolate;
    std::filesystem::path base_dir;
    LiftConfig lift;
    std::optional<std::string> f_path;
    std::optional<std::string> g_path;
    std::vector<Vec> inline_blocks;
    std::optional<std::string> weights_csv;
    int weights_count = 0;           // J+1 blocks computed from the CSV function
    Horizon horizon = Horizon::extrapolation;
    Numerics numerics;
    ClassParams cls;
    int n_blocks = 1000;             // simulate

    std::filesystem::path resolve(const std::string& p) const {
        const std::filesystem::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    }
};

struct ParseResult {
    std::optional<ProblemSpec> spec;
    std::vector<std::string> errors;

    bool ok() const { return errors.empty() && spec.has_value(); }
};

namespace detail {

inline Horizon default_horizon(TaskKind t) {
    switch (t) {
    case TaskKind::interpolate:
    case TaskKind::minimax_interp_dm: return Horizon::interpolation;
    case TaskKind::extrapolate_finite: return Horizon::extrapolation_finite;
    case TaskKind::filter:
    case TaskKind::minimax_filter_d0eps: return Horizon::filtering;
    default: return Horizon::extrapolation;
    }
}

inline bool needs_weights(TaskKind t) { return t != TaskKind::factorize && t != TaskKind::simulate; }

inline bool needs_density(TaskKind t) {
    switch (t) {
    case TaskKind::minimax_y:
    case TaskKind::minimax_interp_dm:
    case TaskKind::minimax_extrap_d01:
    case TaskKind::minimax_filter_d0eps: return false;
    default: return true;
    }
}

inline bool accepts_noise(TaskKind t) {
    switch (t) {
    case TaskKind::interpolate:
    case TaskKind::extrapolate:
    case TaskKind::extrapolate_finite:
    case TaskKind::filter:
    case TaskKind::oracle_check: return true;
    default: return false;
    }
}

inline std::set<std::string> class_keys(TaskKind t) {
    switch (t) {
    case TaskKind::minimax_y: return {"P_zeta", "samples", "sample_order"};
    case TaskKind::minimax_interp_dm: return {"P"};
    case TaskKind::minimax_extrap_d01: return {"P", "samples", "sample_order"};
    case TaskKind::minimax_filter_d0eps:
        return {"P_zeta", "P_theta", "eps", "g2", "samples", "sample_order"};
    default: return {};
    }
}

/// Collects every validation error instead of stopping at the first.
class Checker {
public:
    std::vector<std::string> errors;

    void error(const std::string& msg) { errors.push_back(msg); }

    bool object(const json& j, const std::string& where) {
        if (j.is_object()) return true;
        error(where + " must be an object");
        return false;
    }

    void keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!allowed.count(it.key())) error("unknown key '" + it.key() + "' in " + where);
    }

    std::optional<double> number(const json& j, const std::string& key, const std::string& where) {
        if (!j.contains(key)) return std::nullopt;
        if (!j[key].is_number()) {
            error(where + "." + key + " must be a number");
            return std::nullopt;
        }
        return j[key].get<double>();
    }

    std::optional<long long> integer(const json& j, const std::string& key, const std::string& where) {
        const auto v = number(j, key, where);
        if (!v) return std::nullopt;
        if (*v != static_cast<double>(static_cast<long long>(*v))) {
            error(where + "." + key + " must be an integer");
            return std::nullopt;
        }
        return static_cast<long long>(*v);
    }

    std::optional<std::string> string(const json& j, const std::string& key, const std::string& where) {
        if (!j.contains(key)) return std::nullopt;
        if (!j[key].is_string()) {
            error(where + "." + key + " must be a string");
            return std::nullopt;
        }
        return j[key].get<std::string>();
    }

    std::optional<cplx> complex(const json& j, const std::string& where) {
        if (j.is_number()) return cplx(j.get<double>(), 0.0);
        if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
            return cplx(j[0].get<double>(), j[1].get<double>());
        error(where + " must be a number or a [re, im] pair");
        return std::nullopt;
    }

    std::optional<Mat> matrix(const json& j, int k, const std::string& where) {
        if (!j.is_array() || static_cast<int>(j.size()) != k) {
            error(where + " must be a " + std::to_string(k) + " x " + std::to_string(k) + " matrix");
            return std::nullopt;
        }
        Mat m = Mat::Zero(k, k);
        bool good = true;
        for (int r = 0; r < k; ++r) {
            if (!j[r].is_array() || static_cast<int>(j[r].size()) != k) {
                error(where + " row " + std::to_string(r) + " must have " + std::to_string(k) + " entries");
                return std::nullopt;
            }
            for (int c = 0; c < k; ++c) {
                const auto v = complex(j[r][c], where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
                if (v) m(r, c) = *v;
                else good = false;
            }
        }
        if (!good) return std::nullopt;
        return m;
    }
};

} // namespace detail

/// Validates a parsed JSON document; relative paths resolve against base_dir.
inline ParseResult parse_spec_json(const json& doc, const std::filesystem::path& base_dir) {
    detail::Checker ck;
    ParseResult out;
    if (!ck.object(doc, "spec")) {
        out.errors = ck.errors;
        return out;
    }
    ck.keys(doc, {"task", "lift", "densities", "weights", "horizon", "numerics", "class", "simulation"}, "spec");
    ProblemSpec s;
    s.base_dir = base_dir;

    bool task_ok = false;
    if (const auto t = ck.string(doc, "task", "spec")) {
        for (const auto& [name, kind] : task_names())
            if (name == *t) {
                s.task = kind;
                task_ok = true;
            }
        if (!task_ok) ck.error("unknown task '" + *t + "'");
    } else if (!doc.contains("task")) {
        ck.error("missing required field 'task'");
    }
    s.horizon = detail::default_horizon(s.task);
    if (s.task == TaskKind::minimax_filter_d0eps) s.numerics.max_iter = 3000;

    // lift
    bool k_ok = false;
    if (!doc.contains("lift")) {
        ck.error("missing required field 'lift'");
    } else if (ck.object(doc["lift"], "lift")) {
        const auto& l = doc["lift"];
        ck.keys(l, {"K", "period", "quadrature_points"}, "lift");
        if (const auto k = ck.integer(l, "K", "lift")) {
            if (*k < 1) ck.error("K must be ≥ 1");
            else {
                s.lift.harmonics = static_cast<int>(*k);
                k_ok = true;
            }
        } else if (!l.contains("K")) {
            ck.error("missing required field 'lift.K'");
        }
        if (const auto p = ck.number(l, "period", "lift")) {
            if (!(*p > 0.0)) ck.error("lift.period must be positive");
            else s.lift.period = *p;
        }
        if (const auto q = ck.integer(l, "quadrature_points", "lift")) {
            if (*q < 1) ck.error("lift.quadrature_points must be ≥ 1");
            else s.lift.quadrature_points = static_cast<int>(*q);
        }
    }
    const int k = s.lift.harmonics;

    // numerics
    if (doc.contains("numerics") && ck.object(doc["numerics"], "numerics")) {
        const auto& n = doc["numerics"];
        ck.keys(n, {"grid", "truncation", "tolerance", "cond_threshold", "seed", "max_iter"}, "numerics");
        if (const auto g = ck.integer(n, "grid", "numerics")) {
            if (*g < 16 || *g % 2 != 0) ck.error("numerics.grid must be an even integer ≥ 16");
            else s.numerics.grid = static_cast<int>(*g);
        }
        if (const auto t = ck.integer(n, "truncation", "numerics")) {
            if (*t < 0) ck.error("numerics.truncation must be ≥ 0 (0 = automatic)");
            else s.numerics.truncation = static_cast<int>(*t);
        }
        if (const auto t = ck.number(n, "tolerance", "numerics")) {
            if (!(*t > 0.0)) ck.error("numerics.tolerance must be positive");
            else s.numerics.tolerance = *t;
        }
        if (const auto c = ck.number(n, "cond_threshold", "numerics")) {
            if (!(*c > 1.0)) ck.error("numerics.cond_threshold must exceed 1");
            else s.numerics.cond_threshold = *c;
        }
        if (n.contains("seed")) {
            if (n["seed"].is_number_unsigned()) s.numerics.seed = n["seed"].get<std::uint64_t>();
            else ck.error("numerics.seed must be a nonnegative integer");
        }
        if (const auto m = ck.integer(n, "max_iter", "numerics")) {
            if (*m < 1) ck.error("numerics.max_iter must be ≥ 1");
            else s.numerics.max_iter = static_cast<int>(*m);
        }
    }

    // densities
    if (doc.contains("densities")) {
        if (task_ok && !detail::needs_density(s.task)) {
            ck.error("densities are not used by task " + to_string(s.task));
        } else if (ck.object(doc["densities"], "densities")) {
            const auto& d = doc["densities"];
            ck.keys(d, {"f", "g"}, "densities");
            s.f_path = ck.string(d, "f", "densities");
            s.g_path = ck.string(d, "g", "densities");
            if (s.g_path && task_ok && !detail::accepts_noise(s.task))
                ck.error("densities.g is not used by task " + to_string(s.task));
        }
    }
    if (task_ok && detail::needs_density(s.task) && !s.f_path) ck.error("missing required field 'densities.f'");
    for (const auto* p : {&s.f_path, &s.g_path})
        if (*p && !std::filesystem::exists(s.resolve(**p))) ck.error("file not found: " + s.resolve(**p).string());

    // horizon
    if (doc.contains("horizon")) {
        if (const auto h = ck.string(doc, "horizon", "spec")) {
            bool found = false;
            for (const auto& [name, kind] : horizon_names())
                if (name == *h) {
                    s.horizon = kind;
                    found = true;
                }
            if (!found) ck.error("unknown horizon '" + *h + "'");
            else if (task_ok && s.task != TaskKind::oracle_check && s.task != TaskKind::minimax_y &&
                     s.horizon != detail::default_horizon(s.task))
                ck.error("horizon '" + *h + "' does not match task " + to_string(s.task));
        }
    }

    // weights
    if (doc.contains("weights")) {
        if (task_ok && !detail::needs_weights(s.task)) {
            ck.error("weights are not used by task " + to_string(s.task));
        } else if (ck.object(doc["weights"], "weights")) {
            const auto& w = doc["weights"];
            ck.keys(w, {"blocks", "csv", "count"}, "weights");
            const bool has_blocks = w.contains("blocks");
            const bool has_csv = w.contains("csv");
            if (has_blocks && has_csv) ck.error("weights doubly specified");
            else if (!has_blocks && !has_csv) ck.error("weights need 'blocks' or 'csv'");
            if (has_blocks && !has_csv) {
                if (w.contains("count")) ck.error("weights.count applies only to weights.csv");
                const auto& b = w["blocks"];
                if (!b.is_array() || b.empty()) {
                    ck.error("weights.blocks must be a nonempty array");
                } else if (k_ok) {
                    for (std::size_t j = 0; j < b.size(); ++j) {
                        const std::string where = "weights.blocks[" + std::to_string(j) + "]";
                        if (!b[j].is_array() || static_cast<int>(b[j].size()) != k) {
                            ck.error(where + " must have K=" + std::to_string(k) + " entries");
                            continue;
                        }
                        Vec v = Vec::Zero(k);
                        for (int i = 0; i < k; ++i)
                            if (const auto c = ck.complex(b[j][i], where + "[" + std::to_string(i) + "]")) v[i] = *c;
                        s.inline_blocks.push_back(v);
                    }
                }
            }
            if (has_csv && !has_blocks) {
                s.weights_csv = ck.string(w, "csv", "weights");
                if (s.weights_csv && !std::filesystem::exists(s.resolve(*s.weights_csv)))
                    ck.error("file not found: " + s.resolve(*s.weights_csv).string());
                if (const auto c = ck.integer(w, "count", "weights")) {
                    if (*c < 1) ck.error("weights.count must be ≥ 1");
                    else s.weights_count = static_cast<int>(*c);
                } else if (!w.contains("count")) {
                    ck.error("missing required field 'weights.count' (number of period blocks)");
                }
            }
        }
    } else if (task_ok && detail::needs_weights(s.task)) {
        ck.error("missing required field 'weights'");
    }

    // class parameters
    const auto allowed = detail::class_keys(s.task);
    if (doc.contains("class")) {
        if (task_ok && allowed.empty()) {
            ck.error("class parameters are not used by task " + to_string(s.task));
        } else if (ck.object(doc["class"], "class")) {
            const auto& c = doc["class"];
            ck.keys(c, allowed, "class");
            auto& cl = s.cls;
            if (allowed.count("P_zeta"))
                if (const auto v = ck.number(c, "P_zeta", "class")) {
                    if (!(*v > 0.0)) ck.error("class.P_zeta must be positive");
                    cl.p_zeta = *v;
                }
            if (allowed.count("P_theta"))
                if (const auto v = ck.number(c, "P_theta", "class")) {
                    if (!(*v >= 0.0)) ck.error("class.P_theta must be nonnegative");
                    cl.p_theta = *v;
                }
            if (allowed.count("eps"))
                if (const auto v = ck.number(c, "eps", "class")) {
                    if (!(*v >= 0.0 && *v <= 1.0)) ck.error("class.eps must lie in [0, 1]");
                    cl.eps = *v;
                }
            if (allowed.count("samples"))
                if (const auto v = ck.integer(c, "samples", "class")) {
                    if (*v < 0) ck.error("class.samples must be ≥ 0");
                    cl.samples = static_cast<int>(*v);
                }
            if (allowed.count("sample_order"))
                if (const auto v = ck.integer(c, "sample_order", "class")) {
                    if (*v < 0) ck.error("class.sample_order must be ≥ 0");
                    cl.sample_order = static_cast<int>(*v);
                }
            if (allowed.count("g2")) {
                cl.g2 = ck.string(c, "g2", "class");
                if (cl.g2 && !std::filesystem::exists(s.resolve(*cl.g2)))
                    ck.error("file not found: " + s.resolve(*cl.g2).string());
            }
            if (allowed.count("P") && c.contains("P") && k_ok) {
                if (s.task == TaskKind::minimax_interp_dm) {
                    if (!c["P"].is_array() || c["P"].empty()) {
                        ck.error("class.P must be a nonempty list of K x K matrices P(0..M)");
                    } else {
                        for (std::size_t m = 0; m < c["P"].size(); ++m)
                            if (auto v = ck.matrix(c["P"][m], k, "class.P[" + std::to_string(m) + "]"))
                                cl.p_moments.push_back(*v);
                    }
                } else if (auto v = ck.matrix(c["P"], k, "class.P")) {
                    cl.p = *v;
                }
            }
        }
    }
    if (task_ok) {
        const json empty = json::object();
        const json& c = doc.contains("class") && doc["class"].is_object() ? doc["class"] : empty;
        if (s.task == TaskKind::minimax_y && !c.contains("P_zeta")) ck.error("missing required field 'class.P_zeta'");
        if ((s.task == TaskKind::minimax_interp_dm || s.task == TaskKind::minimax_extrap_d01) && !c.contains("P"))
            ck.error("missing required field 'class.P'");
        if (s.task == TaskKind::minimax_filter_d0eps)
            for (const char* key : {"P_zeta", "P_theta", "eps", "g2"})
                if (!c.contains(key)) ck.error(std::string("missing required field 'class.") + key + "'");
        if (s.task == TaskKind::minimax_filter_d0eps && k_ok && k != 1)
            ck.error("minimax-filter-d0eps supports K = 1 only");
    }

    // simulation
    if (doc.contains("simulation")) {
        if (task_ok && s.task != TaskKind::simulate) {
            ck.error("simulation parameters are not used by task " + to_string(s.task));
        } else if (ck.object(doc["simulation"], "simulation")) {
            ck.keys(doc["simulation"], {"n_blocks"}, "simulation");
            if (const auto n = ck.integer(doc["simulation"], "n_blocks", "simulation")) {
                if (*n < 1) ck.error("simulation.n_blocks must be ≥ 1");
                else s.n_blocks = static_cast<int>(*n);
            }
        }
    }

    out.errors = ck.errors;
    if (out.errors.empty()) out.spec = std::move(s);
    return out;
}

inline ParseResult parse_spec(const std::filesystem::path& path) {
    ParseResult out;
    std::ifstream in(path);
    if (!in) {
        out.errors.push_back("cannot open spec file " + path.string());
        return out;
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        out.errors.push_back(std::string("spec is not valid JSON: ") + e.what());
        return out;
    }
    return parse_spec_json(doc, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

/// Resolved numerics and task settings as JSON (the --dry-run output).
inline json resolved_json(const ProblemSpec& s) {
    json j;
    j["task"] = to_string(s.task);
    j["lift"] = {{"K", s.lift.harmonics}, {"period", s.lift.period},
                 {"quadrature_points", s.lift.quadrature_points}};
    j["horizon"] = horizon_name(s.horizon);
    j["numerics"] = {{"grid", s.numerics.grid},
                     {"truncation", s.numerics.truncation},
                     {"tolerance", s.numerics.tolerance},
                     {"cond_threshold", s.numerics.cond_threshold},
                     {"seed", s.numerics.seed},
                     {"max_iter", s.numerics.max_iter}};
    if (s.f_path) j["densities"]["f"] = s.resolve(*s.f_path).string();
    if (s.g_path) j["densities"]["g"] = s.resolve(*s.g_path).string();
    if (!s.inline_blocks.empty()) j["weights"]["blocks"] = static_cast<int>(s.inline_blocks.size());
    if (s.weights_csv) {
        j["weights"]["csv"] = s.resolve(*s.weights_csv).string();
        j["weights"]["count"] = s.weights_count;
    }
    if (s.task == TaskKind::simulate) j["simulation"]["n_blocks"] = s.n_blocks;
    return j;
}

enum class LogLevel { error = 0, info = 1, debug = 2 };

struct Logger {
    LogLevel level = LogLevel::info;
    std::ostream* out = &std::cerr;

    static Logger from_env() {
        Logger l;
        if (const char* v = std::getenv("PCWK_LOG")) {
            const std::string s(v);
            if (s == "error") l.level = LogLevel::error;
            else if (s == "debug") l.level = LogLevel::debug;
        }
        return l;
    }

    void error(const std::string& msg) const { *out << "pcwk: error: " << msg << '\n'; }
    void info(const std::string& msg) const {
        if (level >= LogLevel::info) *out << "pcwk: " << msg << '\n';
    }
    void debug(const std::string& msg) const {
        if (level >= LogLevel::debug) *out << "pcwk: debug: " << msg << '\n';
    }
};

/// Ordered key/value report written to summary.csv and echoed to stderr.
class Summary {
public:
    void add(const std::string& key, const std::string& value) { rows_.emplace_back(key, value); }
    void add(const std::string& key, double value) { add(key, fmt(value)); }
    void add(const std::string& key, int value) { add(key, std::to_string(value)); }
    void add(const std::string& key, bool value) { add(key, std::string(value ? "true" : "false")); }
    void add(const std::string& key, std::uint64_t value) { add(key, std::to_string(value)); }

    std::optional<std::string> get(const std::string& key) const {
        for (const auto& [k, v] : rows_)
            if (k == key) return v;
        return std::nullopt;
    }

    void write_csv(std::ostream& out) const {
        out << "key,value\n";
        for (const auto& [k, v] : rows_) out << k << ',' << v << '\n';
    }

    void write_block(std::ostream& out) const {
        out << "---- pcwk summary ----\n";
        for (const auto& [k, v] : rows_) out << "  " << k << ": " << v << '\n';
        out << "----------------------\n";
    }

private:
    std::vector<std::pair<std::string, std::string>> rows_;
};

struct RunResult {
    int exit_code = 0;
    Summary summary;
    std::vector<std::string> files;   // written report files, relative to out dir
};

namespace detail {

inline void write_file(const std::filesystem::path& dir, const std::string& name, RunResult& res,
                       const std::function<void(std::ostream&)>& body) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) fail(ErrorKind::invalid_input, "cannot write " + (dir / name).string());
    body(out);
    res.files.push_back(name);
}

inline SpectralDensity load_density(const ProblemSpec& s, const std::string& path, const std::string& label,
                                    const Logger& log) {
    auto r = read_density_csv(s.resolve(path).string(), s.lift.harmonics, s.numerics.grid);
    for (const auto& w : r.warnings) log.info("warning: " + w);
    const auto report = validate_density(r.density);
    if (!report.ok()) {
        const std::string msg = "density " + label + ": " + report.issues.front();
        if (!report.psd) fail(ErrorKind::singular_density, msg);
        fail(ErrorKind::invalid_input, msg);
    }
    return std::move(r.density);
}

inline FunctionalWeights load_weights(const ProblemSpec& s, const Logger& log) {
    FunctionalWeights w;
    w.horizon = s.horizon;
    if (s.weights_csv) {
        const auto a = read_weight_function_csv(s.resolve(*s.weights_csv).string());
        w = compute_weights([&](double t) { return a(t); }, s.lift, s.weights_count - 1, s.horizon);
    } else {
        w.blocks = s.inline_blocks;
    }
    w.validate();
    if (s.horizon == Horizon::extrapolation || s.horizon == Horizon::filtering) {
        const auto rep = check_weight_summability(w);
        if (!rep.pass) log.info("warning: " + rep.message);
    }
    return w;
}

inline void add_solution(Summary& sum, const EstimateSolution& sol, const FunctionalWeights& w) {
    sum.add("mse", sol.mse);
    sum.add("truncation", sol.truncation);
    sum.add("truncation_converged", sol.truncation_converged);
    sum.add("solve_rcond", sol.solve.rcond);
    sum.add("solve_residual", sol.solve.residual);
    sum.add("forbidden_lag_violation", forbidden_lag_violation(sol, w));
}

inline void write_solution(const std::filesystem::path& dir, RunResult& res, const EstimateSolution& sol) {
    write_file(dir, "h.csv", res, [&](std::ostream& o) { write_characteristic_csv(o, sol); });
    write_file(dir, "solved.csv", res,
               [&](std::ostream& o) { write_blocks_csv(o, sol.solved_blocks, sol.solved_first); });
}

inline void require_minimality(const SpectralDensity& f, const std::optional<SpectralDensity>& g,
                               double cond) {
    const auto m = check_minimality(f, g, cond);
    if (!m.pass) fail(ErrorKind::singular_density, m.message);
}

inline EstimateSolution estimate(Horizon h, const SpectralDensity& f, const std::optional<SpectralDensity>& g,
                                 const FunctionalWeights& w, const SolverOptions& opt) {
    switch (h) {
    case Horizon::interpolation: return interpolate(f, g, w, opt);
    case Horizon::extrapolation: return extrapolate(f, g, w, opt);
    case Horizon::extrapolation_finite:
        if (!g) return extrapolate_factorized_finite(f, w);
        return extrapolate(f, g, w, opt);
    case Horizon::filtering: return filter(f, g, w, opt);
    }
    fail(ErrorKind::invalid_argument, "unknown horizon");
}

inline Task task_for(Horizon h) {
    switch (h) {
    case Horizon::interpolation: return Task::interpolation;
    case Horizon::extrapolation: return Task::extrapolation;
    case Horizon::extrapolation_finite: return Task::extrapolation_finite;
    case Horizon::filtering: return Task::filtering;
    }
    return Task::extrapolation;
}

inline void add_result(Summary& sum, const LeastFavorableResult& r) {
    sum.add("class", r.class_name);
    sum.add("minimax_mse", r.minimax_mse);
    sum.add("certified", r.certified);
    sum.add("iterations", r.iterations);
    for (const auto& [k, v] : r.diagnostics) sum.add(k, v);
}

inline void add_saddle(Summary& sum, const SaddleReport& rep, int requested, std::uint64_t seed) {
    sum.add("saddle_samples", requested);
    sum.add("saddle_accepted", rep.accepted);
    sum.add("saddle_rejected", rep.rejected);
    sum.add("min_saddle_margin", rep.min_margin);
    sum.add("saddle_seed", seed);
}

inline void write_minimax(const std::filesystem::path& dir, RunResult& res, const LeastFavorableResult& r) {
    write_file(dir, "f0.csv", res, [&](std::ostream& o) { write_density_csv(o, r.f0); });
    if (r.g0) write_file(dir, "g0.csv", res, [&](std::ostream& o) { write_density_csv(o, *r.g0); });
    if (r.h0) write_file(dir, "h.csv", res, [&](std::ostream& o) { write_characteristic_csv(o, *r.h0); });
}

} // namespace detail

/// Executes a validated spec, writing CSV reports into out_dir. Module errors
/// propagate as pcwk::Error.
inline RunResult execute(const ProblemSpec& s, const std::filesystem::path& out_dir, const Logger& log) {
    RunResult res;
    auto& sum = res.summary;
    const auto& num = s.numerics;
    sum.add("task", to_string(s.task));
    sum.add("version", std::string("pcwk ") + version);
    sum.add("eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                         std::to_string(EIGEN_MINOR_VERSION));
    sum.add("K", s.lift.harmonics);
    sum.add("grid", num.grid);
    sum.add("seed", num.seed);

    std::optional<SpectralDensity> f, g;
    if (s.f_path) f = detail::load_density(s, *s.f_path, "f", log);
    if (s.g_path) g = detail::load_density(s, *s.g_path, "g", log);
    std::optional<FunctionalWeights> w;
    if (detail::needs_weights(s.task)) {
        w = detail::load_weights(s, log);
        sum.add("horizon", horizon_name(w->horizon));
        sum.add("blocks", w->size());
    }
    SolverOptions opt;
    opt.cond_threshold = num.cond_threshold;
    opt.truncation = num.truncation;
    FactorizationOptions fopt;
    fopt.tol = num.tolerance;
    fopt.max_iter = num.max_iter;
    fopt.cond_threshold = num.cond_threshold;

    std::filesystem::create_directories(out_dir);
    log.debug("writing reports to " + out_dir.string());

    switch (s.task) {
    case TaskKind::interpolate:
    case TaskKind::extrapolate:
    case TaskKind::extrapolate_finite:
    case TaskKind::filter: {
        detail::require_minimality(*f, g, num.cond_threshold);
        const auto sol = detail::estimate(w->horizon, *f, g, *w, opt);
        detail::add_solution(sum, sol, *w);
        detail::write_solution(out_dir, res, sol);
        break;
    }
    case TaskKind::factorize: {
        const auto p = spectral_factorize(*f, fopt);
        sum.add("residual", p.residual);
        sum.add("iterations", p.iterations);
        sum.add("max_lag", p.max_lag());
        detail::write_file(out_dir, "factor.csv", res, [&](std::ostream& o) { write_factor_csv(o, p.d); });
        break;
    }
    case TaskKind::simulate: {
        const auto p = spectral_factorize(*f, fopt);
        const auto path = simulate_sequence(p, s.n_blocks, num.seed);
        sum.add("n_blocks", s.n_blocks);
        sum.add("factor_residual", p.residual);
        detail::write_file(out_dir, "path.csv", res, [&](std::ostream& o) { write_blocks_csv(o, path, 0); });
        break;
    }
    case TaskKind::oracle_check: {
        detail::require_minimality(*f, g, num.cond_threshold);
        const auto sol = detail::estimate(w->horizon, *f, g, *w, opt);
        const Task task = detail::task_for(w->horizon);
        const auto oracle = converged_projection(task, *f, g, *w);
        const auto cmp = compare_report(sol, oracle.result.mse);
        sum.add("mse", sol.mse);
        sum.add("oracle_mse", oracle.result.mse);
        sum.add("rel_diff", cmp.rel_diff);
        sum.add("window", oracle.result.window);
        sum.add("oracle_converged", oracle.converged);
        detail::write_file(out_dir, "oracle.csv", res, [&](std::ostream& o) {
            o << "task,spectral_mse,oracle_mse,rel_diff,window\n";
            o << pcwk::to_string(task) << ',' << fmt(sol.mse) << ',' << fmt(oracle.result.mse) << ','
              << fmt(cmp.rel_diff) << ',' << oracle.result.window << '\n';
        });
        if (!oracle.converged) log.info("warning: oracle window did not converge");
        break;
    }
    case TaskKind::minimax_y: {
        const auto r = least_favorable_class_y(*w, s.cls.p_zeta, -1, num.grid);
        detail::add_result(sum, r);
        if (r.h0 && s.cls.samples > 0) {
            ClassSpec cs;
            cs.kind = ClassSpec::Kind::y;
            cs.p_zeta = s.cls.p_zeta;
            const auto samples =
                sample_class_y(s.lift.harmonics, s.cls.sample_order, s.cls.p_zeta, s.cls.samples, num.seed, num.grid);
            detail::add_saddle(sum, saddle_point_check(*r.h0, r.f0_grid, std::nullopt, *w, samples, cs),
                               s.cls.samples, num.seed);
        }
        detail::write_minimax(out_dir, res, r);
        break;
    }
    case TaskKind::minimax_extrap_d01: {
        const auto r = least_favorable_d01_extrapolation(*w, s.cls.p, -1, num.grid);
        detail::add_result(sum, r);
        if (r.h0 && s.cls.samples > 0) {
            ClassSpec cs;
            cs.kind = ClassSpec::Kind::d01;
            cs.p = s.cls.p;
            const auto samples = sample_class_d01(s.cls.p, s.cls.sample_order, s.cls.samples, num.seed, num.grid);
            detail::add_saddle(sum, saddle_point_check(*r.h0, r.f0_grid, std::nullopt, *w, samples, cs),
                               s.cls.samples, num.seed);
        }
        detail::write_minimax(out_dir, res, r);
        break;
    }
    case TaskKind::minimax_interp_dm: {
        const auto r = least_favorable_dm_interpolation(s.cls.p_moments, *w, num.grid, num.cond_threshold);
        detail::add_result(sum, r);
        detail::write_minimax(out_dir, res, r);
        break;
    }
    case TaskKind::minimax_filter_d0eps: {
        const auto g2 = detail::load_density(s, *s.cls.g2, "g2", log);
        FilteringMinimaxOptions fo;
        fo.tol = num.tolerance;
        fo.max_iter = num.max_iter;
        fo.solver = opt;
        const auto r = least_favorable_d0eps_filtering_scalar(*w, s.cls.p_zeta, s.cls.p_theta, s.cls.eps, g2, fo);
        detail::add_result(sum, r);
        sum.add("alpha2", r.alpha2);
        sum.add("beta2", r.beta2);
        if (r.h0 && r.certified && s.cls.samples > 0) {
            ClassSpec cs;
            cs.kind = ClassSpec::Kind::d0eps;
            cs.p_zeta = s.cls.p_zeta;
            cs.p_theta = s.cls.p_theta;
            cs.eps = s.cls.eps;
            cs.g2 = evaluate_on_grid(g2);
            const auto samples = sample_class_d0eps(s.cls.p_zeta, s.cls.p_theta, s.cls.eps, g2,
                                                    s.cls.sample_order, s.cls.samples, num.seed);
            detail::add_saddle(sum, saddle_point_check(*r.h0, r.f0_grid, r.g0_grid, *w, samples, cs),
                               s.cls.samples, num.seed);
        }
        detail::write_minimax(out_dir, res, r);
        if (!r.certified) {
            log.error("least favorable pair not certified: iteration did not converge after " +
                      std::to_string(r.iterations) + " iterations");
            res.exit_code = 2;
        }
        break;
    }
    }
    sum.add("exit_status", res.exit_code);
    detail::write_file(out_dir, "summary.csv", res, [&](std::ostream& o) { sum.write_csv(o); });
    return res;
}

inline int exit_code_for(const Error& e) { return is_numerical(e.kind()) ? 2 : 1; }

/// Command-line entry point: --spec, --out, --dry-run, --seed, --grid.
inline int main_entry(int argc, char** argv, std::ostream& out = std::cout) {
    CLI::App app{"Optimal and minimax-robust linear estimation for periodically correlated processes"};
    std::string spec_path;
    std::string out_dir = "./out";
    bool dry_run = false;
    std::optional<std::uint64_t> seed;
    std::optional<int> grid;
    app.add_option("--spec", spec_path, "problem specification (JSON)")->required();
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_flag("--dry-run", dry_run, "validate and print the resolved numerics without computing");
    app.add_option("--seed", seed, "override numerics.seed");
    app.add_option("--grid", grid, "override numerics.grid");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    const Logger log = Logger::from_env();

    auto parsed = parse_spec(spec_path);
    if (grid && (*grid < 16 || *grid % 2 != 0)) parsed.errors.push_back("--grid must be an even integer ≥ 16");
    if (!parsed.ok()) {
        for (const auto& e : parsed.errors) log.error(e);
        return 1;
    }
    ProblemSpec s = std::move(*parsed.spec);
    if (seed) s.numerics.seed = *seed;
    if (grid) s.numerics.grid = *grid;

    if (dry_run) {
        out << resolved_json(s).dump(2) << '\n';
        return 0;
    }
    try {
        const auto res = execute(s, out_dir, log);
        if (log.level >= LogLevel::info) res.summary.write_block(std::cerr);
        return res.exit_code;
    } catch (const Error& e) {
        log.error(std::string(pcwk::to_string(e.kind())) + ": " + e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        log.error(e.what());
        return 1;
    }
}

} // namespace pcwk::cli

#endif // PCWK_CLI_HPP
