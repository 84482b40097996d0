#pragma once

// intmaps command line: validate, partition, distortion, exactness,
// diffusion and density. Settings come from a key = value config file,
// overridden by flags.
//
// Exit codes: 0 success; 2 failed validation or out-of-range parameter;
// 3 numerical failure (root finding, non-convergence); 64 malformed config,
// unknown key or bad flag; 74 file I/O error.

#include "intmaps/distortion.hpp"
#include "intmaps/ergodic_stats.hpp"
#include "intmaps/exactness.hpp"
#include "intmaps/io.hpp"
#include "intmaps/map_core.hpp"
#include "intmaps/partition.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <functional>
#include <iostream>
#include <map>
#include <set>

namespace intmaps::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
    kOk = 0,
    kFailed = 2,
    kNumerical = 3,
    kUsage = 64,
    kIoError = 74,
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string map = "pm:s=1";
    FamilyParams family{};
    int kmax = 10000;
    int depth = 20;
    std::int64_t ensemble = 10000;
    std::optional<std::int64_t> nmax;
    double epsilon = 0.1;
    int grid = 4096;
    std::uint64_t seed = 1;
    std::string out = "out";
    std::int64_t cap = 1000000;
    std::int64_t trials = 1000;
    std::int64_t samples = 20000;
    std::int64_t pairs = 1000;
    int young_j = 200;
    std::string set = "0.6:0.61";
    int jbar = 1;
    double tol = 1e-12;
    double dhat = 0.0; // 0: estimate from sampled cylinders
    std::string displacement = "alternating";
    int power_iters = 200000;
    int bootstrap = 200;
    std::string word;

    std::map<std::string, std::string> echo; // resolved settings, as text
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        return intmaps::detail::parse_decimal(key, v);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

inline std::int64_t to_integer(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d != std::floor(d) || std::abs(d) > 9.0e15) throw ConfigError("'" + key + "' must be an integer, got '" + v + "'");
    return static_cast<std::int64_t>(d);
}

inline int to_int(const std::string& key, const std::string& v) {
    const std::int64_t i = to_integer(key, v);
    if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max())
        throw ConfigError("'" + key + "' is out of integer range");
    return static_cast<int>(i);
}

inline std::uint64_t to_seed(const std::string& v) {
    std::uint64_t s = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty())
        throw ConfigError("seed must be a non-negative integer, got '" + v + "'");
    return s;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"map", [](RunConfig& c, const std::string& v) {
             try {
                 c.family = parse_map_descriptor(v);
             } catch (const Error& e) {
                 throw ConfigError(e.what());
             }
             c.map = v;
         }},
        {"kmax", [](RunConfig& c, const std::string& v) { c.kmax = to_int("kmax", v); }},
        {"depth", [](RunConfig& c, const std::string& v) { c.depth = to_int("depth", v); }},
        {"ensemble", [](RunConfig& c, const std::string& v) { c.ensemble = to_integer("ensemble", v); }},
        {"nmax", [](RunConfig& c, const std::string& v) { c.nmax = to_integer("nmax", v); }},
        {"epsilon", [](RunConfig& c, const std::string& v) { c.epsilon = to_double("epsilon", v); }},
        {"grid", [](RunConfig& c, const std::string& v) { c.grid = to_int("grid", v); }},
        {"seed", [](RunConfig& c, const std::string& v) { c.seed = to_seed(v); }},
        {"out", [](RunConfig& c, const std::string& v) {
             if (v.empty()) throw ConfigError("out must not be empty");
             c.out = v;
         }},
        {"cap", [](RunConfig& c, const std::string& v) { c.cap = to_integer("cap", v); }},
        {"trials", [](RunConfig& c, const std::string& v) { c.trials = to_integer("trials", v); }},
        {"samples", [](RunConfig& c, const std::string& v) { c.samples = to_integer("samples", v); }},
        {"pairs", [](RunConfig& c, const std::string& v) { c.pairs = to_integer("pairs", v); }},
        {"young_j", [](RunConfig& c, const std::string& v) { c.young_j = to_int("young_j", v); }},
        {"set", [](RunConfig& c, const std::string& v) { c.set = v; }},
        {"jbar", [](RunConfig& c, const std::string& v) { c.jbar = to_int("jbar", v); }},
        {"tol", [](RunConfig& c, const std::string& v) { c.tol = to_double("tol", v); }},
        {"dhat", [](RunConfig& c, const std::string& v) { c.dhat = to_double("dhat", v); }},
        {"displacement", [](RunConfig& c, const std::string& v) {
             static const std::set<std::string> ok{"alternating", "halves", "zero", "one"};
             if (!ok.count(v)) throw ConfigError("displacement must be alternating, halves, zero or one");
             c.displacement = v;
         }},
        {"power_iters", [](RunConfig& c, const std::string& v) { c.power_iters = to_int("power_iters", v); }},
        {"bootstrap", [](RunConfig& c, const std::string& v) { c.bootstrap = to_int("bootstrap", v); }},
        {"word", [](RunConfig& c, const std::string& v) { c.word = v; }},
    };
    return table;
}

inline std::string echo_value(const RunConfig& c, const std::string& key) {
    using io::format_double;
    if (key == "map") return c.map;
    if (key == "kmax") return std::to_string(c.kmax);
    if (key == "depth") return std::to_string(c.depth);
    if (key == "ensemble") return std::to_string(c.ensemble);
    if (key == "nmax") return c.nmax ? std::to_string(*c.nmax) : "default";
    if (key == "epsilon") return format_double(c.epsilon);
    if (key == "grid") return std::to_string(c.grid);
    if (key == "seed") return std::to_string(c.seed);
    if (key == "out") return c.out;
    if (key == "cap") return std::to_string(c.cap);
    if (key == "trials") return std::to_string(c.trials);
    if (key == "samples") return std::to_string(c.samples);
    if (key == "pairs") return std::to_string(c.pairs);
    if (key == "young_j") return std::to_string(c.young_j);
    if (key == "set") return c.set;
    if (key == "jbar") return std::to_string(c.jbar);
    if (key == "tol") return format_double(c.tol);
    if (key == "dhat") return format_double(c.dhat);
    if (key == "displacement") return c.displacement;
    if (key == "power_iters") return std::to_string(c.power_iters);
    if (key == "bootstrap") return std::to_string(c.bootstrap);
    if (key == "word") return c.word;
    return "";
}

} // namespace detail

/// key = value lines; '#' starts a comment.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = detail::trim(line.substr(0, eq));
        std::string val = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        out.emplace_back(std::move(key), std::move(val));
    }
    return out;
}

/// Apply settings in order; later ones win.
inline RunConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& settings) {
    RunConfig c;
    c.family = parse_map_descriptor(c.map);
    const auto& table = detail::setters();
    for (const auto& [key, val] : settings) {
        auto it = table.find(key);
        if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
        it->second(c, val);
    }
    for (const auto& [key, _] : table) c.echo[key] = detail::echo_value(c, key);
    return c;
}

// ---------------------------------------------------------------------------
// Argument parsing helpers shared by the commands

/// "lo:hi;lo:hi", "unit", or a partition element "I<j>" / "I-<k>".
inline IntervalSet parse_set(const std::string& text, const RefinedPartition& part) {
    if (text == "unit") return IntervalSet::unit();
    if (!text.empty() && text[0] == 'I') {
        const int s = detail::to_int("set", text.substr(1));
        INTMAPS_REQUIRE(part.is_symbol(s), ErrorCode::InvalidArgument, "set names no element of the partition: " + text);
        return IntervalSet{part.element(s)};
    }
    std::vector<Interval> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("set pieces must be lo:hi, got '" + item + "'");
        const double lo = detail::to_double("set", detail::trim(item.substr(0, colon)));
        const double hi = detail::to_double("set", detail::trim(item.substr(colon + 1)));
        INTMAPS_REQUIRE(0.0 <= lo && lo < hi && hi <= 1.0, ErrorCode::InvalidArgument,
                        "set pieces must satisfy 0 <= lo < hi <= 1");
        parts.push_back({lo, hi});
    }
    if (parts.empty()) throw ConfigError("empty set");
    return IntervalSet(std::move(parts));
}

inline Word parse_word(const std::string& text) {
    Word w;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) w.push_back(detail::to_int("word", detail::trim(item)));
    return w;
}

inline std::string word_text(const Word& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) s += (i ? " " : "") + std::to_string(w[i]);
    return s;
}

inline LiftSpec make_lift(const MapSpec& map, const std::string& kind) {
    if (kind == "alternating") return LiftSpec::alternating(map);
    if (kind == "halves") return LiftSpec::symmetric_halves(map);
    if (kind == "zero") return LiftSpec::constant(map, 0);
    return LiftSpec::constant(map, 1);
}

inline void require_range(bool ok, const std::string& msg) { INTMAPS_REQUIRE(ok, ErrorCode::InvalidArgument, msg); }

// ---------------------------------------------------------------------------
// Commands

using json = nlohmann::ordered_json;

struct CommandContext {
    const RunConfig& cfg;
    std::ostream& out;
    std::vector<std::string> outputs;
    json summary = json::object();

    io::fs::path path(const std::string& name) const { return io::fs::path(cfg.out) / name; }

    void write(const std::string& name, const std::string& content) {
        io::write_atomic(path(name), content);
        outputs.push_back(name);
    }
    void write_csv(const std::string& name, const io::CsvTable& t) { write(name, t.str()); }
    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
};

inline json to_json(const ValidationReport& r) {
    return json{
        {"max_endpoint_residual", r.max_endpoint_residual},
        {"monotone", r.monotone},
        {"tiling", r.tiling},
        {"a1_pass", r.a1_pass},
        {"lambda_hat", r.lambda_hat},
        {"a2_pass", r.a2_pass},
        {"k_hat", r.k_hat},
        {"a3_pass", r.a3_pass},
        {"neutral_value_at_0", r.neutral_value_at_0},
        {"neutral_slope_at_0", r.neutral_slope_at_0},
        {"min_neutral_slope", r.min_neutral_slope},
        {"min_neutral_curvature", r.min_neutral_curvature},
        {"beta_hat", r.beta_hat},
        {"curvature_ratio_min", r.curvature_ratio_min},
        {"curvature_ratio_max", r.curvature_ratio_max},
        {"a4_pass", r.a4_pass},
        {"truncation_residual", r.truncation_residual},
        {"all_pass", r.all_pass()},
    };
}

inline int cmd_validate(CommandContext& ctx) {
    const MapSpec map = build_family(ctx.cfg.family);
    const ValidationReport rep = validate_axioms(map);
    json j = to_json(rep);
    j["beta"] = map.beta();
    j["expansion"] = map.expansion();
    j["distortion_bound"] = map.distortion_bound();
    ctx.write_json("validation.json", j);
    ctx.summary = j;
    ctx.out << "A1 " << (rep.a1_pass ? "pass" : "FAIL") << "  A2 " << (rep.a2_pass ? "pass" : "FAIL")
            << " (lambda_hat " << rep.lambda_hat << ")  A3 " << (rep.a3_pass ? "pass" : "FAIL") << "  A4 "
            << (rep.a4_pass ? "pass" : "FAIL") << " (beta_hat " << rep.beta_hat << ")\n";
    return rep.all_pass() ? kOk : kFailed;
}

inline int cmd_partition(CommandContext& ctx) {
    const RunConfig& c = ctx.cfg;
    require_range(c.depth >= 1 && c.depth <= 64, "depth must lie in [1, 64]");
    require_range(c.kmax >= 1 && c.kmax <= 10000000, "kmax must lie in [1, 1e7]");
    require_range(c.samples >= 1 && c.samples <= 10000000, "samples must lie in [1, 1e7]");
    const MapSpec map = build_family(c.family);
    const RefinedPartition part = compute_b_sequence(map, c.kmax);

    io::CsvTable b({"k", "b_k", "L_minus_k"});
    for (int k = 0; k <= part.k_max(); ++k) b.add_row({std::int64_t{k}, part.b(k), part.neutral_length(-k)});
    ctx.write_csv("b_sequence.csv", b);

    CylinderScanOptions opt;
    opt.seed = c.seed;
    const auto scans = max_cylinder_lengths(map, part, c.depth, static_cast<std::size_t>(c.samples), opt);
    io::CsvTable cyl({"depth", "max_length", "words", "exhaustive", "argmax"});
    for (const CylinderScan& s : scans)
        cyl.add_row({std::int64_t{s.depth}, s.max_length, static_cast<std::int64_t>(s.words),
                     std::int64_t{s.exhaustive ? 1 : 0}, word_text(s.argmax)});
    ctx.write_csv("cylinders.csv", cyl);

    json j{{"k_max", part.k_max()}, {"b_1", part.k_max() >= 1 ? part.b(1) : part.b(0)}, {"b_kmax", part.b(part.k_max())}};
    if (part.k_max() >= 20) {
        const int hi = part.k_max();
        const int lo = std::max(1, hi / 100);
        const BSequenceAsymptotics a = analyze_b_sequence(part, map.beta(), lo, hi);
        j["asymptotics"] = json{{"k_lo", lo},
                                {"k_hi", hi},
                                {"loglog_slope", a.loglog_slope},
                                {"expected_slope", a.expected_slope},
                                {"gap_ratio_min", a.gap_ratio_min},
                                {"gap_ratio_max", a.gap_ratio_max},
                                {"max_grid_cells_per_element", a.max_grid_cells_per_element},
                                {"max_elements_per_grid_cell", a.max_elements_per_grid_cell},
                                {"summability_max", a.summability_max},
                                {"summability_tail", a.summability_tail}};
        ctx.out << "b-sequence slope " << a.loglog_slope << " (expected " << a.expected_slope << ")\n";
    }
    j["max_cylinder_length_at_depth"] = scans.back().max_length;
    if (!c.word.empty()) {
        const Word w = parse_word(c.word);
        const Cylinder cy = cylinder_of(map, part, w);
        j["cylinder"] = json{{"word", w}, {"lo", cy.interval.lo}, {"hi", cy.interval.hi}, {"empty", cy.empty()}};
        ctx.out << "cylinder [" << word_text(w) << "] = [" << io::format_double(cy.interval.lo) << ", "
                << io::format_double(cy.interval.hi) << "]\n";
    }
    ctx.write_json("partition.json", j);
    ctx.summary = j;
    ctx.out << "b_1 = " << io::format_double(part.b(std::min(1, part.k_max()))) << ", max cylinder length at depth "
            << c.depth << " = " << scans.back().max_length << "\n";
    return kOk;
}

inline int cmd_distortion(CommandContext& ctx) {
    const RunConfig& c = ctx.cfg;
    require_range(c.depth >= 2 && c.depth <= 64, "depth must lie in [2, 64]");
    require_range(c.trials >= 100 && c.trials <= 10000000, "trials must lie in [100, 1e7]");
    require_range(c.pairs >= 3 && c.pairs <= 10000000, "pairs must lie in [3, 1e7]");
    const MapSpec map = build_family(c.family);
    const RefinedPartition part = compute_b_sequence(map, c.kmax);

    std::vector<int> depths;
    for (int d = 5; d < c.depth; d += 5) depths.push_back(d);
    depths.push_back(c.depth);
    io::CsvTable t({"depth", "max_abs_log", "d_observed", "eta_hat", "kappa_hat", "c_hat", "d_hat", "pairs",
                    "pairs_skipped", "violations_ii", "violations_iii"});
    DistortionReport last;
    for (int d : depths) {
        last = verify_lem_dist(map, part, d, static_cast<std::size_t>(c.trials), c.seed);
        t.add_row({std::int64_t{d}, last.max_abs_log, last.d_observed, last.eta_hat, last.kappa_hat, last.c_hat,
                   last.d_hat, static_cast<std::int64_t>(last.pairs), static_cast<std::int64_t>(last.pairs_skipped),
                   static_cast<std::int64_t>(last.violations_ii), static_cast<std::int64_t>(last.violations_iii)});
    }
    ctx.write_csv("distortion.csv", t);

    io::CsvTable fr({"pair", "frame", "type", "start", "end", "sep_start", "sep_next", "log_sum"});
    for (const FrameRecord& f : last.frames)
        fr.add_row({static_cast<std::int64_t>(f.pair), static_cast<std::int64_t>(f.frame),
                    static_cast<std::int64_t>(f.type), std::int64_t{f.start}, std::int64_t{f.end}, f.sep_start,
                    f.sep_next, f.log_sum});
    ctx.write_csv("frames.csv", fr);

    const int jy = std::min(c.young_j, part.k_max());
    require_range(jy >= 1, "young_j must be >= 1");
    const YoungCheckRecord y = verify_young(map, part, jy, static_cast<std::size_t>(c.pairs), c.seed);
    io::CsvTable yt({"j", "n_j", "gap_ratio", "envelope"});
    for (int j = 1; j <= jy; ++j) {
        const auto i = static_cast<std::size_t>(j - 1);
        yt.add_row({std::int64_t{j}, y.n_k[i], y.gap_ratio[i], y.envelope_by_j[i]});
    }
    ctx.write_csv("young.csv", yt);

    json j{{"depth", c.depth},
           {"max_abs_log", last.max_abs_log},
           {"d_observed", last.d_observed},
           {"eta_hat", last.eta_hat},
           {"kappa_hat", last.kappa_hat},
           {"c_hat", last.c_hat},
           {"d_hat", last.d_hat},
           {"c_hat_sound", last.c_hat_sound},
           {"frame_counts", last.frame_counts},
           {"worst_ratio_ii", last.worst_ratio_ii},
           {"worst_ratio_iii", last.worst_ratio_iii},
           {"young", json{{"j_max", jy},
                          {"c_prime", y.c_prime},
                          {"max_abs_log", y.max_abs_log},
                          {"second_inequality", y.second_inequality},
                          {"separations_within_cells", y.separations_within_cells},
                          {"comparability_spread", y.comparability_spread}}}};
    ctx.write_json("distortion.json", j);
    ctx.summary = j;
    ctx.out << "max |log distortion| at depth " << c.depth << " = " << last.max_abs_log << ", C_hat = " << last.c_hat
            << ", Young envelope C' = " << y.c_prime << "\n";
    return kOk;
}

inline int cmd_exactness(CommandContext& ctx) {
    const RunConfig& c = ctx.cfg;
    const std::int64_t n_max = c.nmax.value_or(30);
    require_range(n_max >= 1 && n_max <= 100000, "nmax must lie in [1, 1e5]");
    require_range(c.tol >= 0.0, "tol must be >= 0");
    const MapSpec map = build_family(c.family);
    const RefinedPartition part = compute_b_sequence(map, c.kmax);
    const IntervalSet a = parse_set(c.set, part);
    require_range(part.is_symbol(c.jbar) && c.jbar >= 1, "jbar must be a positive symbol of the partition");

    const IntersectionProfile prof = mn_test(map, a, static_cast<int>(n_max), c.tol);
    io::CsvTable t({"n", "value", "slack", "components", "positive"});
    for (std::size_t n = 0; n < prof.value.size(); ++n)
        t.add_row({static_cast<std::int64_t>(n), prof.value[n], prof.slack[n],
                   static_cast<std::int64_t>(prof.components[n]), std::int64_t{prof.positive_at(n) ? 1 : 0}});
    ctx.write_csv("profile.csv", t);

    std::vector<int> times;
    for (int n = 0; n <= n_max; ++n) times.push_back(n);
    const auto cov = density_coverage_test(map, part, a, c.jbar, times);
    io::CsvTable ct({"n", "conditional", "slack"});
    for (const CoverageSample& s : cov) ct.add_row({std::int64_t{s.n}, s.conditional, s.slack});
    ctx.write_csv("coverage.csv", ct);

    double d = c.dhat;
    if (d == 0.0) {
        const DistortionReport r = verify_lem_dist(map, part, std::max(2, c.depth), 100, c.seed);
        d = r.d_hat;
    }
    json j{{"set", c.set},
           {"measure", a.measure()},
           {"n_star", prof.first_positive ? json(*prof.first_positive) : json(nullptr)},
           {"persistent", prof.persistent()},
           {"jbar", c.jbar},
           {"d_hat", d}};
    if (std::isfinite(d) && d >= 1.0) j["delta"] = delta_threshold(d, c.jbar, part);
    ctx.write_json("exactness.json", j);
    ctx.summary = j;
    ctx.out << "n* = " << (prof.first_positive ? std::to_string(*prof.first_positive) : "none")
            << ", persistent: " << (prof.persistent() ? "yes" : "no") << "\n";
    return kOk;
}

inline int cmd_diffusion(CommandContext& ctx) {
    const RunConfig& c = ctx.cfg;
    const std::int64_t n_max = c.nmax.value_or(10000);
    require_range(n_max >= 10 && n_max <= 100000000, "nmax must lie in [10, 1e8]");
    require_range(c.ensemble >= 1000 && c.ensemble <= 100000000, "ensemble must lie in [1000, 1e8]");
    require_range(c.cap >= 100 && c.cap <= 1000000000, "cap must lie in [100, 1e9]");
    require_range(c.bootstrap >= 0, "bootstrap must be >= 0");
    const MapSpec map = build_family(c.family);
    const LiftSpec lift = make_lift(map, c.displacement);

    const DiffusionRecord rec =
        msd_estimate(lift, static_cast<std::size_t>(c.ensemble), static_cast<int>(n_max), c.seed, c.bootstrap);
    io::CsvTable m({"n", "msd", "mean"});
    for (std::size_t i = 0; i < rec.n.size(); ++i) m.add_row({std::int64_t{rec.n[i]}, rec.msd[i], rec.mean[i]});
    ctx.write_csv("msd.csv", m);

    const ReturnTimeHistogram h = return_time_tail(map, static_cast<std::size_t>(c.ensemble), c.cap, c.seed);
    io::CsvTable tail({"n", "survival"});
    for (std::size_t i = 0; i < h.tail_n.size(); ++i) tail.add_row({h.tail_n[i], h.tail_prob[i]});
    ctx.write_csv("return_tail.csv", tail);
    io::CsvTable hist({"R", "count"});
    for (const auto& [r, n] : h.counts) hist.add_row({r, n});
    ctx.write_csv("return_hist.csv", hist);

    json j{{"displacement", c.displacement},
           {"gamma_hat", rec.gamma_hat},
           {"gamma_band", {rec.gamma_lo, rec.gamma_hi}},
           {"fit_from", rec.fit_from},
           {"degenerate", rec.degenerate},
           {"tail_slope", h.fit.slope},
           {"tail_slope_stderr", h.fit.slope_stderr},
           {"tail_fit_window", {h.fit_lo, h.fit_hi}},
           {"tail_fit_points", h.fit.points},
           {"censored", h.censored},
           {"returned_fraction", 1.0 - static_cast<double>(h.censored) / static_cast<double>(h.ensemble)}};
    ctx.write_json("diffusion.json", j);
    ctx.summary = j;
    ctx.out << "gamma_hat = " << rec.gamma_hat << " [" << rec.gamma_lo << ", " << rec.gamma_hi
            << "], return tail slope = " << h.fit.slope << "\n";
    return kOk;
}

inline int cmd_density(CommandContext& ctx) {
    const RunConfig& c = ctx.cfg;
    require_range(c.grid >= 1024 && c.grid <= (1 << 22), "grid must lie in [1024, 2^22]");
    const MapSpec map = build_family(c.family);
    const UlamDensity d = ulam_density(map, c.grid, c.epsilon, c.power_iters);
    io::CsvTable t({"bin", "x_lo", "x_hi", "density"});
    for (int i = 0; i < d.m; ++i)
        t.add_row({std::int64_t{i}, static_cast<double>(i) / d.m, static_cast<double>(i + 1) / d.m,
                   d.density[static_cast<std::size_t>(i)]});
    ctx.write_csv("density.csv", t);

    std::vector<double> eps;
    for (double e = c.epsilon; e * d.m >= 4.0; e /= 2.0) eps.push_back(e);
    const std::vector<double> ratio = neutral_mass_profile(d, map.a(1), eps);
    io::CsvTable mp({"epsilon", "mass_ratio"});
    for (std::size_t i = 0; i < eps.size(); ++i) mp.add_row({eps[i], ratio[i]});
    ctx.write_csv("mass_profile.csv", mp);

    json j{{"grid", d.m},
           {"epsilon", d.epsilon},
           {"sup", d.sup},
           {"iterations", d.iterations},
           {"residual", d.residual},
           {"max_row_error", d.max_row_error}};
    ctx.write_json("density.json", j);
    ctx.summary = j;
    ctx.out << "sup of density on [" << c.epsilon << ", 1] = " << d.sup << " after " << d.iterations
            << " iterations\n";
    return kOk;
}

// ---------------------------------------------------------------------------

inline json versions() {
    return json{{"intmaps", kVersion},
                {"compiler", __VERSION__},
                {"cxx_standard", static_cast<long>(__cplusplus)},
                {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                      std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                      std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                {"cli11", CLI11_VERSION}};
}

inline int dispatch(const std::string& command, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    static const std::map<std::string, int (*)(CommandContext&)> commands = {
        {"validate", cmd_validate},   {"partition", cmd_partition}, {"distortion", cmd_distortion},
        {"exactness", cmd_exactness}, {"diffusion", cmd_diffusion}, {"density", cmd_density},
    };
    CommandContext ctx{cfg, out, {}};
    const auto t0 = std::chrono::steady_clock::now();
    int code = kOk;
    std::string error;
    try {
        code = commands.at(command)(ctx);
    } catch (const Error& e) {
        code = e.code() == ErrorCode::InvalidArgument ? kFailed : kNumerical;
        error = e.what();
    } catch (const ConfigError& e) {
        code = kUsage;
        error = e.what();
    } catch (const std::exception& e) {
        err << "intmaps " << command << ": " << e.what() << "\n";
        return kIoError;
    }
    if (!error.empty()) err << "intmaps " << command << ": " << error << "\n";
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    json manifest{{"command", command},
                  {"exit_code", code},
                  {"config", json(cfg.echo)},
                  {"versions", versions()},
                  {"worker_threads", worker_count()},
                  {"wall_time_seconds", wall},
                  {"outputs", ctx.outputs},
                  {"summary", ctx.summary}};
    if (!error.empty()) manifest["error"] = error;
    try {
        io::write_atomic(io::fs::path(cfg.out) / "manifest.json", manifest.dump(2) + "\n");
    } catch (const std::exception& e) {
        err << "intmaps " << command << ": " << e.what() << "\n";
        return kIoError;
    }
    return code;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Numerical toolkit for intermittent interval maps", "intmaps"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", kVersion);

    std::string config_path;
    std::map<std::string, std::string> flags;
    std::vector<std::string> params;
    const std::vector<std::pair<std::string, std::string>> flag_keys = {
        {"seed", "RNG seed"},
        {"out", "output directory"},
        {"map", "map descriptor, e.g. pm:s=1 or geo:s=1,r=0.5"},
        {"kmax", "truncation depth K_max of the refined partition"},
        {"depth", "cylinder depth"},
        {"ensemble", "number of random starts"},
        {"nmax", "time horizon"},
        {"epsilon", "left end of the density window [epsilon, 1]"},
        {"grid", "Ulam grid size"},
    };
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"validate", "check the axioms for a map"},
        {"partition", "b-sequence, cylinder decay and cylinder queries"},
        {"distortion", "distortion envelopes on cylinders and along neutral excursions"},
        {"exactness", "intersection profile of T^(n+1)A and T^n A"},
        {"diffusion", "mean square displacement of the lift and return-time tail"},
        {"density", "Ulam approximation of the invariant density"},
    };
    for (const auto& [name, desc] : commands) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", config_path, "key = value config file");
        for (const auto& [key, help] : flag_keys) sub->add_option("--" + key, flags[key], help);
        sub->add_option("--param", params, "extra key=value setting (repeatable)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    const CLI::App* sub = app.get_subcommands().front();

    RunConfig cfg;
    try {
        std::vector<std::pair<std::string, std::string>> settings;
        if (!config_path.empty()) {
            std::string text;
            try {
                text = io::read_file(config_path);
            } catch (const std::exception& e) {
                throw ConfigError(e.what());
            }
            settings = parse_config_text(text);
        }
        for (const auto& [key, _] : flag_keys)
            if (sub->count("--" + key) > 0) settings.emplace_back(key, flags[key]);
        for (const std::string& p : params) {
            const auto eq = p.find('=');
            if (eq == std::string::npos) throw ConfigError("--param expects key=value, got '" + p + "'");
            settings.emplace_back(detail::trim(p.substr(0, eq)), detail::trim(p.substr(eq + 1)));
        }
        cfg = resolve_config(settings);
    } catch (const ConfigError& e) {
        err << "intmaps " << command << ": " << e.what() << "\n";
        return kUsage;
    }
    return dispatch(command, cfg, out, err);
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    std::vector<const char*> argv{"intmaps"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace intmaps::cli
