#include "ekbound/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <variant>

#include "CLI11.hpp"
#include "ekbound/optimizer.hpp"
#include "json.hpp"

namespace ekbound::cli {

using nlohmann::ordered_json;

std::string format_number(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One output cell: empty, number, boolean or text.
using Cell = std::variant<std::monostate, double, bool, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

std::string cell_text(const Cell& c) {
    if (std::holds_alternative<double>(c)) return format_number(std::get<double>(c));
    if (std::holds_alternative<bool>(c)) return std::get<bool>(c) ? "true" : "false";
    if (std::holds_alternative<std::string>(c)) return std::get<std::string>(c);
    return "";
}

ordered_json cell_json(const Cell& c) {
    if (std::holds_alternative<double>(c)) return std::get<double>(c);
    if (std::holds_alternative<bool>(c)) return std::get<bool>(c);
    if (std::holds_alternative<std::string>(c)) return std::get<std::string>(c);
    return nullptr;
}

void write_csv(std::ostream& out, const Table& t) {
    for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
    out << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << cell_text(r[i]);
        out << '\n';
    }
}

ordered_json table_json(const Table& t) {
    ordered_json a = ordered_json::array();
    for (const auto& r : t.rows) {
        ordered_json o = ordered_json::object();
        for (std::size_t i = 0; i < r.size(); ++i) o[t.columns[i]] = cell_json(r[i]);
        a.push_back(std::move(o));
    }
    return a;
}

// Options shared by commands that run the optimizer.
struct SearchFlags {
    int budget = OptimizerOptions{}.budget;
    int certify_dim = OptimizerOptions{}.certify_dim;
    int certify_k_points = OptimizerOptions{}.certify_k_points;
    int n_segments = OptimizerOptions{}.n_segments;

    void add(CLI::App* cmd) {
        cmd->add_option("--budget", budget, "Feasibility sweeps per search")->check(CLI::PositiveNumber);
        cmd->add_option("--certify-dim", certify_dim, "Basis size of the final certificate")->check(CLI::Range(4, 4096));
        cmd->add_option("--certify-kpoints", certify_k_points, "k points of the final certificate")
            ->check(CLI::Range(2, 100000));
        cmd->add_option("--segments", n_segments, "Profile segments for --method profile")->check(CLI::Range(3, 63));
    }

    OptimizerOptions options(int threads) const {
        OptimizerOptions o;
        o.budget = budget;
        o.certify_dim = certify_dim;
        o.certify_k_points = certify_k_points;
        o.n_segments = n_segments;
        o.threads = threads;
        return o;
    }
};

const std::vector<std::string> kMethods{"simplified", "recipe", "family", "profile", "literature"};

struct MethodRow {
    std::string method;
    double nu_upper = 1.0;
    std::optional<double> b, delta;
    BoundValue terms;
    bool has_terms = false;
    std::optional<bool> feasible;
    double ms = 0.0;
};

MethodRow row_of(const BoundResult& r, const std::string& method) {
    MethodRow m;
    m.method = method;
    m.nu_upper = r.bound.nu_upper;
    m.b = r.b;
    m.delta = boundary_layer_width(r.profile);
    m.terms = r.bound;
    m.has_terms = true;
    m.feasible = r.certified();
    return m;
}

// Rows for one (ek, ra) point in canonical method order.
std::vector<MethodRow> evaluate_point(double ra, double ek, const std::vector<std::string>& methods,
                                      const OptimizerOptions& o) {
    const auto p = derive_params(ra, ek);
    std::vector<MethodRow> out;
    std::optional<BoundResult> family;
    auto t0 = std::chrono::steady_clock::now();
    auto lap = [&] {
        const auto t1 = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        t0 = t1;
        return ms;
    };
    auto want = [&](const char* m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };
    if (want("simplified")) {
        const auto rp = recipe(p);
        MethodRow m;
        m.method = "simplified";
        m.terms = bound_simplified(p);
        m.has_terms = true;
        m.nu_upper = m.terms.nu_upper;
        m.b = rp.b;
        m.delta = rp.delta;
        m.feasible = certified_verify_recipe(p, rp);
        m.ms = lap();
        out.push_back(m);
    }
    if (want("recipe")) {
        out.push_back(row_of(paper_recipe_bound(p), "recipe"));
        out.back().ms = lap();
    }
    if (want("family") || want("profile")) family = optimize_family(p, o);
    if (want("family")) {
        out.push_back(row_of(*family, "family"));
        out.back().ms = lap();
    }
    if (want("profile")) {
        out.push_back(row_of(optimize_profile(p, o, &*family), "profile"));
        out.back().ms = lap();
    }
    if (want("literature")) {
        for (const auto& l : literature_bounds(ra, ek)) {
            MethodRow m;
            m.method = l.label;
            m.nu_upper = l.value;
            m.ms = lap();
            out.push_back(m);
        }
    }
    return out;
}

template <class T>
Cell opt_cell(const std::optional<T>& v) {
    if (!v) return std::monostate{};
    return Cell(*v);
}

void check_methods(const std::vector<std::string>& methods) {
    for (const auto& m : methods) {
        if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end()) {
            throw UsageError("unknown method: " + m);
        }
    }
}

std::vector<std::string> canonical(std::vector<std::string> methods) {
    std::vector<std::string> r;
    for (const auto& m : kMethods) {
        if (std::find(methods.begin(), methods.end(), m) != methods.end()) r.push_back(m);
    }
    return r;
}

void emit(std::ostream& out, const Table& t, bool json, bool single) {
    if (json) {
        auto j = table_json(t);
        out << (single && j.size() == 1 ? j[0] : j).dump(2) << '\n';
    } else {
        write_csv(out, t);
    }
}

std::vector<double> parse_number_list(const std::string& line, const std::string& where) {
    std::vector<double> v;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const auto a = tok.find_first_not_of(" \t\r");
        const auto b = tok.find_last_not_of(" \t\r");
        if (a == std::string::npos) throw UsageError(where + ": empty field");
        tok = tok.substr(a, b - a + 1);
        double x = 0.0;
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
            throw UsageError(where + ": not a number: " + tok);
        }
        v.push_back(x);
    }
    return v;
}

PiecewiseLinearProfile read_profile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open profile file " + path);
    std::vector<double> z, v;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (z.empty() && v.empty() && line.find_first_of("abcdfghijklmnopqrstuvwxyzABCDFGHIJKLMNOPQRSTUVWXYZ_") !=
                                          std::string::npos) {
            continue;  // header row
        }
        const auto row = parse_number_list(line, path + ":" + std::to_string(n));
        if (row.size() != 2) throw UsageError(path + ":" + std::to_string(n) + ": expected two columns");
        z.push_back(row[0]);
        v.push_back(row[1]);
    }
    try {
        return PiecewiseLinearProfile(std::move(z), std::move(v));
    } catch (const std::invalid_argument& e) {
        throw UsageError(path + ": " + e.what());
    }
}

template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
    const auto nt = static_cast<std::size_t>(std::max(1, threads));
    if (nt == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex m;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(nt, n); ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard lock(m);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Upper bounds on the Nusselt number for rapidly rotating convection with Ekman pumping", "ekbound"};
    app.set_config("--config", "", "Read options from a key = value file ([command] sections)");
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "Worker threads")->check(CLI::Range(1, 1024));

    // bound
    auto* bound = app.add_subcommand("bound", "Evaluate one upper bound");
    double b_ra = 0.0, b_ek = 0.0;
    std::string b_method = "recipe";
    bool b_json = false;
    SearchFlags b_search;
    bound->add_option("--ra", b_ra, "Rayleigh number")->required();
    bound->add_option("--ek", b_ek, "Ekman number")->required();
    bound->add_option("--method", b_method, "simplified|recipe|family|profile|literature")
        ->check(CLI::IsMember(kMethods));
    bound->add_flag("--json", b_json, "JSON output");
    b_search.add(bound);

    // verify
    auto* verify = app.add_subcommand("verify", "Eigenvalue feasibility certificate");
    double v_ra = 0.0, v_ek = 0.0, v_tol = 1e-8;
    std::optional<double> v_b, v_delta, v_kmax;
    std::string v_profile;
    int v_dim = 128, v_kpoints = 200, v_quad = 16;
    bool v_json = false;
    verify->add_option("--ra", v_ra, "Rayleigh number")->required();
    verify->add_option("--ek", v_ek, "Ekman number")->required();
    verify->add_option("--b", v_b, "Balance parameter (default: recipe value)");
    auto* o_delta = verify->add_option("--delta", v_delta, "Boundary-layer width of the two-parameter family");
    verify->add_option("--profile", v_profile, "Two-column CSV of (z, value) breakpoints")->excludes(o_delta);
    verify->add_option("--dim", v_dim, "Basis size")->check(CLI::Range(1, 4096));
    verify->add_option("--kpoints", v_kpoints, "Number of k grid points")->check(CLI::Range(2, 100000));
    verify->add_option("--kmax", v_kmax, "Largest k of the grid")->check(CLI::PositiveNumber);
    verify->add_option("--tol", v_tol, "Tolerance relative to the diffusion norm")->check(CLI::NonNegativeNumber);
    verify->add_option("--quad", v_quad, "Gauss points per panel")->check(CLI::Range(2, 64));
    verify->add_flag("--json", v_json, "JSON output");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Bounds on an (Ek, Ra) grid");
    std::vector<double> s_ek;
    double s_ra_min = 0.0, s_ra_max = 0.0;
    int s_count = 0;
    std::string s_spacing = "log", s_output;
    std::vector<std::string> s_methods{"simplified", "recipe"};
    bool s_json = false, s_timing = false;
    SearchFlags s_search;
    sweep->add_option("--ek", s_ek, "Ekman numbers")->required();
    sweep->add_option("--ra-min", s_ra_min, "Smallest Rayleigh number")->required();
    sweep->add_option("--ra-max", s_ra_max, "Largest Rayleigh number")->required();
    sweep->add_option("--ra-count", s_count, "Number of Rayleigh numbers")->required();
    sweep->add_option("--spacing", s_spacing, "log|linear")->check(CLI::IsMember({"log", "linear"}));
    sweep->add_option("--methods", s_methods, "Subset of simplified, recipe, family, profile, literature");
    sweep->add_option("--output", s_output, "Output file (default: stdout)");
    sweep->add_flag("--timing", s_timing, "Fill the wall_ms column");
    sweep->add_flag("--json", s_json, "JSON output");
    s_search.add(sweep);

    // profile
    auto* profile = app.add_subcommand("profile", "Sample a background profile");
    double p_ra = 0.0, p_ek = 0.0;
    std::string p_method = "recipe";
    int p_samples = 100;
    bool p_json = false;
    SearchFlags p_search;
    profile->add_option("--ra", p_ra, "Rayleigh number")->required();
    profile->add_option("--ek", p_ek, "Ekman number")->required();
    profile->add_option("--method", p_method, "recipe|family|profile")
        ->check(CLI::IsMember({"recipe", "family", "profile"}));
    profile->add_option("--samples", p_samples, "Uniform intervals")->check(CLI::Range(1, 10000000));
    profile->add_flag("--json", p_json, "JSON output");
    p_search.add(profile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return Ok;
    } catch (const CLI::Success&) {
        const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        out << sub->help();
        return Ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return Usage;
    }

    try {
        if (bound->parsed()) {
            const auto rows = evaluate_point(b_ra, b_ek, {b_method}, b_search.options(threads));
            Table t{{"ek", "ra", "method", "nu_upper", "b", "delta", "leading_term", "linear_term",
                     "constant_term", "feasible"},
                    {}};
            bool ok = true;
            for (const auto& r : rows) {
                Cell lead, lin, con;
                if (r.has_terms) {
                    lead = r.terms.leading_term;
                    lin = r.terms.linear_term;
                    con = r.terms.constant_term;
                }
                t.rows.push_back({b_ek, b_ra, r.method, r.nu_upper, opt_cell(r.b), opt_cell(r.delta), lead, lin, con,
                                  opt_cell(r.feasible)});
                if (r.feasible && !*r.feasible) ok = false;
            }
            emit(out, t, b_json, true);
            return ok ? Ok : NumericalFailure;
        }

        if (verify->parsed()) {
            const auto p = derive_params(v_ra, v_ek);
            const auto rp = recipe(p);
            const double b = v_b.value_or(rp.b);
            if (!(b > 1.0)) throw UsageError("--b must exceed 1");
            PiecewiseLinearProfile prof;
            if (!v_profile.empty()) {
                prof = read_profile(v_profile);
            } else {
                const double delta = v_delta.value_or(rp.delta);
                if (!(delta > 0.0 && delta <= 0.5)) throw UsageError("--delta must lie in (0, 1/2]");
                prof = make_paper_profile(b, delta);
            }
            auto grid = default_k_grid(prof, v_kpoints);
            if (v_kmax) {
                const double lo = grid.front();
                if (!(*v_kmax > lo)) throw UsageError("--kmax must exceed the smallest grid k " + format_number(lo));
                for (int i = 0; i < v_kpoints; ++i) {
                    grid[static_cast<std::size_t>(i)] =
                        std::exp(std::log(lo) + (std::log(*v_kmax) - std::log(lo)) * i / (v_kpoints - 1));
                }
                grid.back() = *v_kmax;
            }
            VerifyOptions vo;
            vo.dim = v_dim;
            vo.tol = v_tol;
            vo.quad_order = v_quad;
            vo.threads = threads;
            if (v_dim < 4) throw UsageError("--dim must be at least 4");
            const auto c = verify_profile(p, b, prof, grid, vo);

            Table t{{"k", "lambda_min", "lambda_min_coarse", "lambda_min_limit", "diffusion_norm", "scaled"}, {}};
            for (std::size_t i = 0; i < c.k_grid.size(); ++i) {
                Cell coarse, limit;
                if (i < c.lambda_min_coarse.size()) coarse = c.lambda_min_coarse[i];
                if (i < c.lambda_min_limit.size()) limit = c.lambda_min_limit[i];
                t.rows.push_back({c.k_grid[i], c.lambda_min[i], coarse, limit, c.diffusion_norm[i],
                                  c.lambda_min[i] / c.diffusion_norm[i]});
            }
            Table s{{"verdict", "feasible", "resolved", "tail_small_k", "tail_large_k", "dim", "coarse_dim",
                     "stabilization_dim", "refined_k", "deepened_k", "worst_k", "b", "delta", "tol", "ra", "ek"},
                    {}};
            s.rows.push_back({std::string(verdict_name(c.verdict)), c.feasible, c.resolved, c.tail_small_k_ok,
                              c.tail_large_k_ok, double(c.dim), double(c.coarse_dim), double(c.stabilization_dim),
                              double(c.refined), double(c.deepened), c.k_grid[c.worst_index], b, boundary_layer_width(prof), v_tol, v_ra, v_ek});
            if (v_json) {
                auto j = table_json(s)[0];
                j["table"] = table_json(t);
                out << j.dump(2) << '\n';
            } else {
                write_csv(out, t);
                out << '\n';
                write_csv(out, s);
            }
            switch (c.verdict) {
                case Verdict::Feasible: return Ok;
                case Verdict::Infeasible: return Infeasible;
                case Verdict::Unresolved: return Unresolved;
            }
            return NumericalFailure;
        }

        if (sweep->parsed()) {
            check_methods(s_methods);
            const auto methods = canonical(s_methods);
            if (methods.empty()) throw UsageError("--methods is empty");
            if (s_count < 2) throw UsageError("--ra-count must be at least 2");
            if (!(s_ra_min < s_ra_max)) throw UsageError("--ra-min must be below --ra-max");
            if (!(s_ra_min > 0.0)) throw UsageError("--ra-min must be positive");
            for (double e : s_ek) {
                if (!(e > 0.0)) throw UsageError("--ek values must be positive");
            }
            std::vector<double> ra(static_cast<std::size_t>(s_count));
            for (int i = 0; i < s_count; ++i) {
                const double f = double(i) / (s_count - 1);
                ra[static_cast<std::size_t>(i)] =
                    s_spacing == "log" ? std::exp(std::log(s_ra_min) + f * (std::log(s_ra_max) - std::log(s_ra_min)))
                                       : s_ra_min + f * (s_ra_max - s_ra_min);
            }
            ra.front() = s_ra_min;
            ra.back() = s_ra_max;

            struct Point {
                double ek, ra;
                std::vector<MethodRow> rows;
            };
            std::vector<Point> pts;
            for (double e : s_ek) {
                for (double r : ra) pts.push_back({e, r, {}});
            }
            const bool outer = pts.size() > 1;
            const auto o = s_search.options(outer ? 1 : threads);
            parallel_for(pts.size(), outer ? threads : 1, [&](std::size_t i) {
                pts[i].rows = evaluate_point(pts[i].ra, pts[i].ek, methods, o);
            });
            std::stable_sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
                return a.ek != b.ek ? a.ek < b.ek : a.ra < b.ra;
            });

            Table t{{"ek", "ra", "method", "nu_upper", "b", "delta", "feasible", "wall_ms"}, {}};
            for (const auto& pt : pts) {
                for (const auto& r : pt.rows) {
                    Cell ms;
                    if (s_timing) ms = std::round(r.ms * 1000.0) / 1000.0;
                    t.rows.push_back(
                        {pt.ek, pt.ra, r.method, r.nu_upper, opt_cell(r.b), opt_cell(r.delta), opt_cell(r.feasible), ms});
                }
            }
            if (s_output.empty()) {
                emit(out, t, s_json, false);
            } else {
                std::ofstream f(s_output, std::ios::binary);
                if (!f) throw UsageError("cannot write " + s_output);
                emit(f, t, s_json, false);
                if (!f) throw std::runtime_error("write failed: " + s_output);
            }
            return Ok;
        }

        if (profile->parsed()) {
            const auto p = derive_params(p_ra, p_ek);
            const auto o = p_search.options(threads);
            BoundResult r = paper_recipe_bound(p);
            if (p_method != "recipe") r = optimize_family(p, o);
            if (p_method == "profile") r = optimize_profile(p, o, &r);
            const auto& prof = r.profile;
            std::map<double, double> pts;
            for (int i = 0; i <= p_samples; ++i) {
                const double z = double(i) / p_samples;
                pts[z] = profile_eval(prof, z);
            }
            const auto zb = prof.breakpoints();
            const auto vb = prof.values();
            for (std::size_t i = 0; i < zb.size(); ++i) pts[zb[i]] = vb[i];
            Table t{{"z", "phi"}, {}};
            for (const auto& [z, v] : pts) t.rows.push_back({z, v});
            if (p_json) {
                ordered_json j;
                j["method"] = p_method;
                j["b"] = r.b;
                j["nu_upper"] = r.bound.nu_upper;
                j["breakpoints"] = std::vector<double>(zb.begin(), zb.end());
                j["samples"] = table_json(t);
                out << j.dump(2) << '\n';
            } else {
                write_csv(out, t);
            }
            return Ok;
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return Usage;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << '\n';
        return Usage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return Usage;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return NumericalFailure;
    }
    return Usage;
}

}  // namespace ekbound::cli
