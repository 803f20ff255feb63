#include "qtgp/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qtgp/spin_model.hpp"

namespace qtgp::cli {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string theta, phi, g, kappa;
    int branch = 1;
    int loop_points = 1024;
    long long ode_steps = 100000;
    std::uint64_t seed = 0;
    std::string out;
    std::string format;
    bool degrees = false;
    int jobs = 1;
    double duration = 100;
    double tol = 1e-2;
    double eps = 1e-3;
    double threshold = 0.5;
    double kappa_max = 5;
    std::string config;
};

double parse_double(std::string_view s) {
    double v = 0;
    const char* b = s.data();
    const char* e = b + s.size();
    if (!s.empty() && *b == '+') ++b;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) throw UsageError("not a number: '" + std::string(s) + "'");
    return v;
}

std::string trim(std::string s) {
    const auto ws = " \t\r\n";
    s.erase(0, s.find_first_not_of(ws));
    s.erase(s.find_last_not_of(ws) + 1);
    return s;
}

// ---- output ----

void dump(const json& j, std::string& s, int indent) {
    const std::string pad(indent + 2, ' ');
    switch (j.type()) {
        case json::value_t::object: {
            if (j.empty()) {
                s += "{}";
                return;
            }
            s += "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {  // std::map: sorted keys
                if (!first) s += ",\n";
                first = false;
                s += pad + json(it.key()).dump() + ": ";
                dump(it.value(), s, indent + 2);
            }
            s += "\n" + std::string(indent, ' ') + "}";
            return;
        }
        case json::value_t::array: {
            if (j.empty()) {
                s += "[]";
                return;
            }
            s += "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) s += ",\n";
                s += pad;
                dump(j[i], s, indent + 2);
            }
            s += "\n" + std::string(indent, ' ') + "]";
            return;
        }
        case json::value_t::number_float: {
            const double x = j.get<double>();
            s += std::isfinite(x) ? format_number(x) : "null";
            return;
        }
        default:
            s += j.dump();
    }
}

std::string csv_line(const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) s += ',';
        s += cells[i];
    }
    return s + "\n";
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

struct Result {
    json params = json::object();
    json results;
    Table table;
};

// ---- argument handling ----

double scalar(const std::string& spec, const char* name, bool angle, const Options& o) {
    if (spec.empty()) throw UsageError(std::string("--") + name + " is required");
    const std::vector<double> v = parse_grid(spec);
    if (v.size() != 1) throw UsageError(std::string("--") + name + " takes a single value here");
    return angle && o.degrees ? v[0] * kPi / 180.0 : v[0];
}

std::vector<double> grid(const std::string& spec, const char* name, bool angle, const Options& o) {
    if (spec.empty()) throw UsageError(std::string("--") + name + " is required");
    std::vector<double> v = parse_grid(spec);
    if (angle && o.degrees)
        for (double& x : v) x *= kPi / 180.0;
    return v;
}

std::string params_text(const Options& o) {
    std::string s;
    for (const auto& [k, v] : {std::pair<const char*, const std::string&>{"theta", o.theta}, {"phi", o.phi},
                               {"g", o.g}, {"kappa", o.kappa}})
        if (!v.empty()) s += std::string(s.empty() ? "" : " ") + k + "=" + v;
    s += " branch=" + std::to_string(o.branch);
    return s;
}

json report_json(const PhaseReport& r) {
    return json{{"branch", r.branch},       {"dynamical", r.dynamical}, {"geometric", r.geometric},
                {"geometric_unwrapped", r.geometric_unwrapped},      {"imaginary", r.imaginary},
                {"points", r.points},       {"total", r.total}};
}

const std::vector<std::string> kSweepHeader = {"theta", "kappa", "g", "branch", "gamma", "gamma_unwrapped", "points",
                                               "status"};

std::vector<std::string> sweep_cells(const spin::SweepRow& r) {
    return {format_number(r.theta),
            format_number(r.kappa),
            format_number(r.g),
            std::to_string(r.branch),
            format_number(r.report.geometric),
            format_number(r.report.geometric_unwrapped),
            std::to_string(r.report.points),
            r.status};
}

// ---- commands ----

Result cmd_eig(const Options& o) {
    const spin::ModelParams p{scalar(o.theta, "theta", true, o), o.phi.empty() ? 0.0 : scalar(o.phi, "phi", true, o),
                              scalar(o.g, "g", false, o), o.kappa.empty() ? 0.0 : scalar(o.kappa, "kappa", false, o)};
    p.validate();
    Result res;
    res.params = {{"g", p.g}, {"kappa", p.kappa}, {"phi", p.phi}, {"theta", p.theta}};
    const auto an = spin::analytic_eigensystem(p);
    const BiorthogonalEigensystem num = eig_general(spin::effective_hamiltonian(p));
    json branches = json::array(), numeric = json::array();
    res.table.header = {"branch", "energy_re", "energy_im", "eigenvalue_re", "eigenvalue_im", "path"};
    for (const auto& b : an) {
        const std::string path = b.path == spin::EigenPath::Analytic ? "analytic" : "numeric";
        branches.push_back({{"branch", b.index},
                            {"energy_re", b.energy.real()},
                            {"energy_im", b.energy.imag()},
                            {"eigenvalue_re", b.eigenvalue.real()},
                            {"eigenvalue_im", b.eigenvalue.imag()},
                            {"path", path}});
        res.table.rows.push_back({std::to_string(b.index), format_number(b.energy.real()),
                                  format_number(b.energy.imag()), format_number(b.eigenvalue.real()),
                                  format_number(b.eigenvalue.imag()), path});
    }
    for (int k = 0; k < num.size(); ++k)
        numeric.push_back({{"branch", k + 1},
                           {"condition", num.condition[k]},
                           {"eigenvalue_re", num.values[k].real()},
                           {"eigenvalue_im", num.values[k].imag()}});
    res.results = {{"analytic", branches}, {"sorted", numeric}};
    return res;
}

Result cmd_berry(const Options& o) {
    const double theta = scalar(o.theta, "theta", true, o);
    const double g = scalar(o.g, "g", false, o);
    const double kappa = o.kappa.empty() ? 0.0 : scalar(o.kappa, "kappa", false, o);
    spin::ModelParams{theta, 0, g, kappa}.validate();
    Result res;
    res.params = {{"branch", o.branch}, {"g", g}, {"kappa", kappa}, {"loop_points", o.loop_points}, {"theta", theta}};
    const PhaseReport r = adiabatic_berry_phase(spin::effective_builder(kappa), spin::phi_loop(theta, g, o.loop_points),
                                                o.branch);
    res.results = report_json(r);
    spin::SweepRow row{theta, kappa, g, o.branch, r, "ok"};
    res.table.header = kSweepHeader;
    res.table.rows.push_back(sweep_cells(row));
    return res;
}

Result cmd_split(const Options& o) {
    const double theta = scalar(o.theta, "theta", true, o);
    const double g = scalar(o.g, "g", false, o);
    const double kappa = o.kappa.empty() ? 0.0 : scalar(o.kappa, "kappa", false, o);
    spin::ModelParams{theta, 0, g, kappa}.validate();
    Result res;
    res.params = {{"branch", o.branch}, {"g", g}, {"kappa", kappa}, {"loop_points", o.loop_points}, {"theta", theta}};
    const SubsystemPhaseSplit s = subsystem_phase_split(spin::effective_builder(kappa),
                                                        spin::phi_loop(theta, g, o.loop_points), o.branch, 2, 2);
    json terms = json::array();
    res.table.header = {"term",       "weight_re",  "weight_im",  "gamma_a_re", "gamma_a_im",
                        "gamma_b_re", "gamma_b_im", "recombined", "direct"};
    for (std::size_t j = 0; j < s.weights.size(); ++j) {
        terms.push_back({{"gamma_a_im", s.gamma_a[j].imag()},
                         {"gamma_a_re", s.gamma_a[j].real()},
                         {"gamma_b_im", s.gamma_b[j].imag()},
                         {"gamma_b_re", s.gamma_b[j].real()},
                         {"term", j + 1},
                         {"weight_im", s.weights[j].imag()},
                         {"weight_re", s.weights[j].real()}});
        res.table.rows.push_back({std::to_string(j + 1), format_number(s.weights[j].real()),
                                  format_number(s.weights[j].imag()), format_number(s.gamma_a[j].real()),
                                  format_number(s.gamma_a[j].imag()), format_number(s.gamma_b[j].real()),
                                  format_number(s.gamma_b[j].imag()), format_number(s.recombined),
                                  format_number(s.direct)});
    }
    res.results = {{"direct", s.direct},
                   {"pairing_residual", s.pairing_residual},
                   {"recombined", s.recombined},
                   {"terms", terms}};
    return res;
}

Result cmd_jump(const Options& o) {
    const std::vector<double> thetas = grid(o.theta, "theta", true, o);
    const std::vector<double> kappas = o.kappa.empty() ? std::vector<double>{0.0} : grid(o.kappa, "kappa", false, o);
    const double g = scalar(o.g, "g", false, o);
    const double phi = o.phi.empty() ? kPi : scalar(o.phi, "phi", true, o);
    if (o.branch < 0 || o.branch > 4) throw UsageError("--branch must be 1..4 (0 = all)");
    std::vector<int> branches;
    for (int b = 1; b <= 4; ++b)
        if (o.branch == 0 || o.branch == b) branches.push_back(b);

    Result res;
    res.params = {{"branch", o.branch}, {"g", g}, {"kappa", o.kappa}, {"phi", phi}, {"theta", o.theta}};
    res.table.header = {"theta", "kappa", "g", "phi", "branch", "phase", "status"};
    json rows = json::array();
    for (double th : thetas)
        for (double k : kappas)
            for (int b : branches) {
                double phase = std::numeric_limits<double>::quiet_NaN();
                std::string status = "ok";
                try {
                    phase = spin::model_jump_phase(b, {th, phi, g, k});
                } catch (const Error& e) {
                    status = kind_name(e.kind());
                }
                rows.push_back({{"branch", b}, {"g", g}, {"kappa", k}, {"phase", phase}, {"phi", phi},
                                {"status", status}, {"theta", th}});
                res.table.rows.push_back({format_number(th), format_number(k), format_number(g), format_number(phi),
                                          std::to_string(b), format_number(phase), status});
            }
    res.results = rows;
    return res;
}

Result cmd_sweep(const Options& o) {
    const std::vector<double> thetas = grid(o.theta, "theta", true, o);
    const std::vector<double> kappas = grid(o.kappa, "kappa", false, o);
    const double g = scalar(o.g, "g", false, o);
    if (o.jobs < 1) throw UsageError("--jobs must be >= 1");
    Result res;
    res.params = {{"branch", o.branch},           {"g", g},          {"kappa", o.kappa},
                  {"loop_points", o.loop_points}, {"theta", o.theta}};
    const auto rows = spin::berry_sweep(thetas, kappas, g, o.branch, o.loop_points, o.jobs);
    res.table.header = kSweepHeader;
    json arr = json::array();
    for (const auto& r : rows) {
        res.table.rows.push_back(sweep_cells(r));
        arr.push_back({{"branch", r.branch},
                       {"g", r.g},
                       {"gamma", r.report.geometric},
                       {"gamma_unwrapped", r.report.geometric_unwrapped},
                       {"kappa", r.kappa},
                       {"points", r.report.points},
                       {"status", r.status},
                       {"theta", r.theta}});
    }
    res.results = arr;
    return res;
}

Result cmd_kappa0(const Options& o) {
    const double g = scalar(o.g, "g", false, o);
    spin::DiscontinuityConfig cfg;
    cfg.eps = o.eps;
    cfg.threshold = o.threshold;
    cfg.kappa_max = o.kappa_max;
    Result res;
    res.params = {{"branch", o.branch},       {"eps", cfg.eps},
                  {"g", g},                   {"kappa_max", cfg.kappa_max},
                  {"loop_points", o.loop_points}, {"threshold", cfg.threshold},
                  {"tol", o.tol}};
    const double k0 = spin::critical_kappa(g, o.branch, o.tol, o.loop_points, cfg);
    res.results = {{"kappa0", k0}};
    res.table.header = {"g", "branch", "kappa0"};
    res.table.rows.push_back({format_number(g), std::to_string(o.branch), format_number(k0)});
    return res;
}

Result cmd_trajectory(const Options& o) {
    const double theta = scalar(o.theta, "theta", true, o);
    const double g = scalar(o.g, "g", false, o);
    const double kappa = o.kappa.empty() ? 0.0 : scalar(o.kappa, "kappa", false, o);
    spin::ModelParams{theta, 0, g, kappa}.validate();
    if (!(o.duration > 0)) throw UsageError("--T must be positive");
    if (o.ode_steps < 1 || o.ode_steps > 100000000) throw UsageError("--ode-steps out of range");
    const double T = o.duration;
    const LindbladModel model = spin::lindblad_model(kappa);
    auto path = [theta, g, T](double t) { return Point{theta, 2 * kPi * t / T, g}; };

    const BiorthogonalEigensystem es0 = eig_general(qtgp::effective_hamiltonian(model, path(0)));
    if (o.branch < 1 || o.branch > es0.size()) throw UsageError("--branch must be 1..4");
    const BipartiteState psi0(2, 2, es0.rights[o.branch - 1].normalized());

    std::mt19937_64 rng(o.seed);
    TrajectoryRecord rec;
    rec.duration = T;
    rec.steps = static_cast<int>(o.ode_steps);
    BipartiteState psi = psi0;
    double t0 = 0;
    std::optional<double> first_jump_phase;
    while (rec.jump_events.size() < 10000) {
        const double u = uniform_open(rng());
        const double span = T - t0;
        const int steps = std::max(1, static_cast<int>(std::llround(o.ode_steps * span / T)));
        const TimeMatrix h = [&](double t) { return qtgp::effective_hamiltonian(model, path(t0 + t)); };
        const std::optional<double> tj = sample_jump_time(h, psi, span, u, steps);
        if (!tj) break;
        BipartiteState at = *tj > 0 ? propagate_nojump(h, psi, 0.0, *tj, std::max(1, static_cast<int>(steps * *tj / span)))
                                    : psi;
        at.amp.normalize();
        const CMatrix& gamma = model.jump_ops.at(0).op;
        if (!first_jump_phase) {
            try {
                first_jump_phase = jump_phase_total(at, gamma);
            } catch (const Error&) {
                first_jump_phase = std::numeric_limits<double>::quiet_NaN();
            }
        }
        auto [next, w] = apply_jump(at, gamma);
        (void)w;
        next.amp.normalize();
        t0 += *tj;
        rec.jump_events.push_back({t0, 0});
        psi = next;
        if (t0 >= T) break;
    }

    Result res;
    res.params = {{"T", T},         {"branch", o.branch}, {"g", g}, {"kappa", kappa}, {"ode_steps", o.ode_steps},
                  {"seed", o.seed}, {"theta", theta}};
    json events = json::array();
    res.table.header = {"event", "time", "op"};
    for (std::size_t i = 0; i < rec.jump_events.size(); ++i) {
        events.push_back({{"op", rec.jump_events[i].op_index}, {"time", rec.jump_events[i].time}});
        res.table.rows.push_back({std::to_string(i + 1), format_number(rec.jump_events[i].time),
                                  std::to_string(rec.jump_events[i].op_index)});
    }
    json nojump = nullptr;
    if (rec.jump_events.empty()) nojump = report_json(nojump_geometric_phase(model, path, T, psi0, rec.steps));
    res.results = {{"duration", T},
                   {"first_jump_phase", first_jump_phase ? json(*first_jump_phase) : json(nullptr)},
                   {"jump_events", events},
                   {"nojump_phase", nojump},
                   {"steps", rec.steps}};
    return res;
}

// key = value lines become flags placed before the explicit ones
std::vector<std::string> config_tokens(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file '" + path + "'");
    static const std::vector<std::string> known = {"theta",     "phi",  "g",   "kappa",  "branch",    "loop-points",
                                                   "ode-steps", "seed", "out", "format", "degrees",   "jobs",
                                                   "T",         "tol",  "eps", "threshold", "kappa-max"};
    std::vector<std::string> tokens;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        std::replace(key.begin(), key.end(), '_', '-');
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw UsageError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (key == "degrees") {
            if (value == "true" || value == "1") tokens.push_back("--degrees");
            else if (value != "false" && value != "0") throw UsageError("degrees must be true or false");
            continue;
        }
        tokens.push_back("--" + key);
        tokens.push_back(value);
    }
    return tokens;
}

std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;
    auto cmd = std::find_if(args.begin(), args.end(), [](const std::string& a) { return !a.empty() && a[0] != '-'; });
    if (cmd == args.end()) return args;
    const std::vector<std::string> extra = config_tokens(path);
    args.insert(cmd + 1, extra.begin(), extra.end());
    return args;
}

void emit(const Result& r, const std::string& format, const Options& o, std::ostream& out) {
    std::string text;
    if (format == "json") {
        json top = {{"params", r.params}, {"results", r.results}, {"version", kVersion}};
        dump(top, text, 0);
        text += "\n";
    } else {
        text = csv_line(r.table.header);
        for (const auto& row : r.table.rows) text += csv_line(row);
    }
    if (o.out.empty() || o.out == "-") {
        out << text;
        out.flush();
        return;
    }
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw UsageError("cannot open '" + o.out + "' for writing");
    f << text;
}

}  // namespace

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (x == 0) return "0";
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 12);
    return std::string(buf, p);
}

std::vector<double> parse_grid(const std::string& spec) {
    const std::string s = trim(spec);
    const auto c1 = s.find(':');
    if (c1 == std::string::npos) return {parse_double(s)};
    const auto c2 = s.find(':', c1 + 1);
    if (c2 == std::string::npos || s.find(':', c2 + 1) != std::string::npos)
        throw UsageError("grid must look like min:max:steps, got '" + spec + "'");
    const double lo = parse_double(s.substr(0, c1));
    const double hi = parse_double(s.substr(c1 + 1, c2 - c1 - 1));
    const double nd = parse_double(s.substr(c2 + 1));
    if (!(lo <= hi)) throw UsageError("grid min exceeds max in '" + spec + "'");
    if (!(nd >= 1) || nd != std::floor(nd) || nd > 1e7) throw UsageError("grid steps must be a positive integer");
    const long n = static_cast<long>(nd);
    std::vector<double> v(n);
    for (long i = 0; i < n; ++i) v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    if (n > 1) v.back() = hi;
    return v;
}

int run(const std::vector<std::string>& raw, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Geometric phases of an open two-spin system along quantum trajectories", "qtgp"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    struct Cmd {
        const char* name;
        const char* help;
        Result (*fn)(const Options&);
        const char* default_format;
    };
    const std::vector<Cmd> cmds = {
        {"eig", "analytic and numeric eigensystem at one parameter point", cmd_eig, "json"},
        {"berry", "adiabatic Berry phase over the phi loop", cmd_berry, "json"},
        {"split", "subsystem decomposition of the loop phase", cmd_split, "json"},
        {"jump", "jump phase on theta/kappa grids (phi defaults to pi)", cmd_jump, "csv"},
        {"sweep", "Berry phase over a theta x kappa grid", cmd_sweep, "csv"},
        {"kappa0", "critical decay rate of the theta = pi/2 discontinuity", cmd_kappa0, "json"},
        {"trajectory", "one seeded quantum trajectory along the phi loop", cmd_trajectory, "json"},
    };
    std::vector<CLI::App*> subs;
    for (const auto& c : cmds) {
        CLI::App* s = app.add_subcommand(c.name, c.help);
        s->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        s->add_option("--theta", o.theta, "polar angle, value or min:max:steps");
        s->add_option("--phi", o.phi, "azimuthal angle");
        s->add_option("--g", o.g, "coupling");
        s->add_option("--kappa", o.kappa, "decay rate, value or min:max:steps");
        s->add_option("--branch", o.branch, "branch index");
        s->add_option("--loop-points", o.loop_points, "samples on the phi loop")->check(CLI::PositiveNumber);
        s->add_option("--ode-steps", o.ode_steps, "integrator steps")->check(CLI::PositiveNumber);
        s->add_option("--seed", o.seed, "trajectory seed");
        s->add_option("--T", o.duration, "trajectory duration");
        s->add_option("--tol", o.tol, "bisection tolerance")->check(CLI::PositiveNumber);
        s->add_option("--eps", o.eps, "offset from theta = pi/2")->check(CLI::PositiveNumber);
        s->add_option("--threshold", o.threshold, "jump threshold (rad)")->check(CLI::PositiveNumber);
        s->add_option("--kappa-max", o.kappa_max, "upper end of the kappa bracket")->check(CLI::PositiveNumber);
        s->add_option("--out", o.out, "output file (default stdout)");
        s->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        s->add_flag("--degrees", o.degrees, "angles given in degrees");
        s->add_option("--jobs", o.jobs, "worker threads for sweeps");
        s->add_option("--config", o.config, "key = value file; explicit flags win");
        subs.push_back(s);
    }

    try {
        std::vector<std::string> args = expand_config(raw);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        err << "qtgp: " << e.what() << "\n";
        return 2;
    }

    for (std::size_t i = 0; i < cmds.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        try {
            const Result r = cmds[i].fn(o);
            emit(r, o.format.empty() ? cmds[i].default_format : o.format, o, out);
            return 0;
        } catch (const UsageError& e) {
            err << "qtgp " << cmds[i].name << ": " << e.what() << "\n";
            return 2;
        } catch (const Error& e) {
            err << "qtgp " << cmds[i].name << ": " << e.what() << "\n  parameters: " << params_text(o) << "\n";
            return e.kind() == ErrorKind::InvalidArgument ? 2 : 1;
        }
    }
    return 2;
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace qtgp::cli
