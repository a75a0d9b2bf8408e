#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "qlwave/oracle.hpp"
#include "qlwave/theorem1.hpp"
#include "qlwave/theorem2.hpp"
#include "svg.hpp"

namespace qlwave::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

/// One JSON object section: rejects unknown keys and records every value it
/// hands out (defaults included) into `out`.
class Section {
public:
    Section(const json& in, std::string path, json& out, std::set<std::string> keys)
        : in_(in), path_(std::move(path)), out_(out) {
        if (!in_.is_object()) throw ConfigError(where() + ": expected an object");
        for (auto it = in_.begin(); it != in_.end(); ++it) {
            if (!keys.count(it.key())) throw ConfigError("unknown key '" + join(it.key()) + "'");
        }
        out_ = json::object();
    }

    double number(const std::string& k, double def) {
        const double v = has(k) ? as_number(in_.at(k), join(k)) : def;
        out_[k] = v;
        return v;
    }

    std::optional<double> opt_number(const std::string& k) {
        if (!has(k) || in_.at(k).is_null()) {
            out_[k] = nullptr;
            return std::nullopt;
        }
        const double v = as_number(in_.at(k), join(k));
        out_[k] = v;
        return v;
    }

    int integer(const std::string& k, int def) {
        int v = def;
        if (has(k)) {
            const json& j = in_.at(k);
            if (!j.is_number_integer()) throw ConfigError(join(k) + ": expected an integer");
            v = j.get<int>();
        }
        out_[k] = v;
        return v;
    }

    std::string choice(const std::string& k, const std::string& def, const std::set<std::string>& allowed) {
        std::string v = def;
        if (has(k)) {
            if (!in_.at(k).is_string()) throw ConfigError(join(k) + ": expected a string");
            v = in_.at(k).get<std::string>();
        }
        if (!allowed.count(v)) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            throw ConfigError(join(k) + ": '" + v + "' is not one of " + list);
        }
        out_[k] = v;
        return v;
    }

    std::optional<std::string> opt_string(const std::string& k) {
        if (!has(k) || in_.at(k).is_null()) {
            out_[k] = nullptr;
            return std::nullopt;
        }
        if (!in_.at(k).is_string()) throw ConfigError(join(k) + ": expected a string");
        out_[k] = in_.at(k);
        return in_.at(k).get<std::string>();
    }

    std::vector<double> numbers(const std::string& k) {
        std::vector<double> v;
        if (has(k)) {
            const json& j = in_.at(k);
            if (!j.is_array()) throw ConfigError(join(k) + ": expected an array");
            for (std::size_t i = 0; i < j.size(); ++i) v.push_back(as_number(j[i], join(k) + "[" + std::to_string(i) + "]"));
        }
        out_[k] = v;
        return v;
    }

    bool has(const std::string& k) const { return in_.contains(k); }
    const json& raw(const std::string& k) const { return in_.at(k); }
    std::string join(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
    std::string where() const { return path_.empty() ? "config" : path_; }
    json& out() { return out_; }

private:
    static double as_number(const json& j, const std::string& path) {
        if (!j.is_number()) throw ConfigError(path + ": expected a number");
        return j.get<double>();
    }

    const json& in_;
    std::string path_;
    json& out_;
};

const json& section_or_empty(const json& doc, const char* key) {
    static const json empty = json::object();
    return doc.contains(key) ? doc.at(key) : empty;
}

Profile read_bumps(const json& in, const std::string& path, json& out, std::vector<BumpProfile> defaults) {
    out = json::array();
    std::vector<BumpProfile> bumps;
    if (in.is_null()) {
        bumps = std::move(defaults);
        for (const auto& b : bumps) out.push_back({{"center", b.center}, {"halfwidth", b.halfwidth}, {"amplitude", b.amplitude}});
    } else {
        if (!in.is_array()) throw ConfigError(path + ": expected an array of bumps");
        for (std::size_t i = 0; i < in.size(); ++i) {
            json o;
            const std::string p = path + "[" + std::to_string(i) + "]";
            Section s(in[i], p, o, {"center", "halfwidth", "amplitude"});
            const double c = s.number("center", 0.0);
            const double h = s.number("halfwidth", 1.0);
            const double a = s.number("amplitude", 1.0);
            if (!(h > 0.0)) throw ConfigError(p + ".halfwidth: must be positive");
            bumps.push_back(make_bump_profile(c, h, a));
            out.push_back(o);
        }
    }
    if (bumps.empty()) return Profile::zero();
    return Profile(std::move(bumps));
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_atomic(const fs::path& target, const std::string& content) {
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
        if (!o) throw std::runtime_error("cannot write " + tmp.string());
        o << content;
        o.flush();
        if (!o) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
}

json real(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string csv_num(double v) { return scaling::format_real(v); }

}  // namespace

RunConfig load_config_json(const json& doc) {
    json resolved = json::object();
    Section top(doc, "", resolved, {"problem", "solver", "experiment", "output"});

    // problem
    json prob_out;
    Section pr(section_or_empty(doc, "problem"), "problem", prob_out,
               {"p", "A", "epsilon", "variant", "sigma", "sigma0", "f", "g", "g_mode", "delta_hyp"});
    const double p = pr.number("p", 2.0);
    const double A = pr.number("A", 2.0);
    const double eps = pr.number("epsilon", 0.05);
    const std::string variant = pr.choice("variant", "space", {"space", "time"});
    const double sigma = pr.number("sigma", 1.0);
    if (!(sigma >= 1.0)) {
        throw ConfigError("problem.sigma: must satisfy sigma >= 1 (got " + csv_num(sigma) + ")");
    }
    const auto s0 = pr.opt_number("sigma0");
    const double sigma0 = s0.value_or(sigma / 2.0);
    prob_out["sigma0"] = sigma0;
    if (!(sigma0 > 0.0 && sigma0 < sigma)) throw ConfigError("problem.sigma0: must lie in (0, sigma)");
    const std::string g_mode = pr.choice("g_mode", "bumps", {"bumps", "simple_wave"});
    const double delta = pr.number("delta_hyp", 1e-6);
    Profile f = read_bumps(pr.has("f") ? pr.raw("f") : json(nullptr), "problem.f", prob_out["f"],
                           {make_bump_profile(0.0, 1.0, 1.0)});
    Profile g = read_bumps(pr.has("g") ? pr.raw("g") : json(json::array()), "problem.g", prob_out["g"], {});
    if (g_mode == "simple_wave" && g.support()) throw ConfigError("problem.g: must be empty when g_mode is simple_wave");
    if (!(p > 1.0)) throw ConfigError("problem.p: must exceed 1");
    if (!(A >= 0.0)) throw ConfigError("problem.A: must be nonnegative");
    if (!(eps > 0.0)) throw ConfigError("problem.epsilon: must be positive");

    std::optional<ProblemSpec> spec;
    try {
        const Variant var = variant == "space" ? Variant::SpaceDerivative : Variant::TimeDerivative;
        InitialData data = g_mode == "simple_wave" ? oracle::simple_wave_data(f, eps, p, A, sigma, delta)
                                                   : InitialData(f, g, sigma);
        spec.emplace(p, A, eps, var, std::move(data), delta);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("problem: ") + e.what());
    }
    resolved["problem"] = prob_out;

    // solver
    json sol_out;
    Section so(section_or_empty(doc, "solver"), "solver", sol_out,
               {"dx", "cfl", "t_max", "gradient_threshold", "gradient_growth", "gradient_fraction", "dt_min", "scheme",
                "snapshot_interval"});
    SolverConfig sc;
    sc.dx = so.number("dx", sc.dx);
    sc.cfl = so.number("cfl", sc.cfl);
    sc.t_max = so.number("t_max", sc.t_max);
    sc.gradient_threshold = so.opt_number("gradient_threshold");
    sc.gradient_growth = so.number("gradient_growth", sc.gradient_growth);
    sc.gradient_fraction = so.number("gradient_fraction", sc.gradient_fraction);
    sc.dt_min = so.number("dt_min", sc.dt_min);
    sc.scheme = so.choice("scheme", "lax_wendroff", {"lax_wendroff", "lax_friedrichs"}) == "lax_wendroff"
                    ? Scheme::LaxWendroff
                    : Scheme::LaxFriedrichs;
    sc.snapshot_interval = so.number("snapshot_interval", 0.05);
    try {
        sc.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("solver: ") + e.what());
    }
    resolved["solver"] = sol_out;

    // experiment
    json ex_out;
    Section ex(section_or_empty(doc, "experiment"), "experiment", ex_out,
               {"epsilons", "source", "levels", "branch", "j_max", "tol_E", "slack_t1", "slack_t2", "t_end_fraction",
                "slope_tolerance", "guard", "sweep_csv"});
    ExperimentConfig ec;
    ec.epsilons = ex.numbers("epsilons");
    ec.source = ex.choice("source", "oracle", {"oracle", "solver"}) == "oracle" ? scaling::Source::Oracle
                                                                              : scaling::Source::Solver;
    ec.levels = ex.integer("levels", 3);
    ec.branch = ex.choice("branch", "f", {"f", "g"}) == "f" ? Branch::FBranch : Branch::GBranch;
    ec.j_max = ex.integer("j_max", 20);
    ec.tol_E = ex.number("tol_E", 1e-12);
    ec.slack_t1 = ex.number("slack_t1", 0.02);
    ec.slack_t2 = ex.number("slack_t2", 0.05);
    ec.t_end_fraction = ex.number("t_end_fraction", 0.9);
    ec.slope_tolerance = ex.number("slope_tolerance", scaling::default_slope_tolerance(ec.source));
    ec.guard = ex.number("guard", 0.05);
    ec.sweep_csv = ex.opt_string("sweep_csv");
    for (std::size_t i = 0; i < ec.epsilons.size(); ++i) {
        if (!(ec.epsilons[i] > 0.0)) throw ConfigError("experiment.epsilons[" + std::to_string(i) + "]: must be positive");
        if (i && !(ec.epsilons[i] < ec.epsilons[i - 1]))
            throw ConfigError("experiment.epsilons: must be strictly decreasing");
    }
    if (ec.levels < 2) throw ConfigError("experiment.levels: must be >= 2");
    if (ec.j_max < 1) throw ConfigError("experiment.j_max: must be >= 1");
    if (!(ec.tol_E > 0.0)) throw ConfigError("experiment.tol_E: must be positive");
    if (!(ec.t_end_fraction > 0.0 && ec.t_end_fraction <= 1.0))
        throw ConfigError("experiment.t_end_fraction: must lie in (0, 1]");
    resolved["experiment"] = ex_out;

    json out_dummy;
    std::optional<std::string> output;
    if (doc.contains("output") && !doc.at("output").is_null()) {
        if (!doc.at("output").is_string()) throw ConfigError("output: expected a string");
        output = doc.at("output").get<std::string>();
    }
    resolved["output"] = output ? json(*output) : json(nullptr);

    return RunConfig{std::move(*spec), sigma0, sc, ec, output, resolved};
}

RunConfig load_config_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return load_config_json(doc);
}

RunConfig load_config(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
    return load_config_text(read_file(path));
}

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256 failed");
    }
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string s;
    for (unsigned i = 0; i < len; ++i) {
        s += hex[md[i] >> 4];
        s += hex[md[i] & 15];
    }
    return s;
}

std::vector<ManifestEntry> emit_outputs(const std::vector<Artifact>& artifacts, const fs::path& dir,
                                        const json& header) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
    std::vector<ManifestEntry> entries;
    for (const auto& a : artifacts) {
        write_atomic(dir / a.name, a.content);
        entries.push_back({a.name, sha256_hex(a.content), a.content.size()});
    }
    json m = header.is_object() ? header : json::object();
    json files = json::array();
    for (const auto& e : entries) files.push_back({{"name", e.name}, {"sha256", e.sha256}, {"bytes", e.bytes}});
    m["files"] = files;
    write_atomic(dir / kManifestName, m.dump(2) + "\n");
    return entries;
}

fs::path default_out_dir(const std::string& command, const RunConfig& cfg) {
    if (cfg.output) return *cfg.output;
    const char* root = std::getenv("QLWAVE_OUT_ROOT");
    const fs::path base = root && *root ? fs::path(root) : fs::path("runs");
    return base / (command + "-" + sha256_hex(command + "\n" + cfg.resolved.dump()).substr(0, 12));
}

namespace {

struct Outcome {
    std::vector<Artifact> artifacts;
    int status = kSuccess;
    std::string summary;
};

json certificate1_json(const theorem1::IterationCertificate& c) {
    json j = {{"branch", to_string(c.branch)},
              {"p", c.p},
              {"sigma", c.sigma},
              {"sigma0", c.sigma0},
              {"sigma1", c.sigma1},
              {"epsilon", c.epsilon},
              {"scale", c.scale},
              {"epsilon_normalized", c.epsilon_normalized},
              {c.branch == Branch::FBranch ? "C_f" : "C_g", c.Cf_or_Cg},
              {"first_step", c.first_step},
              {"B", c.B},
              {"D", c.D},
              {"K", c.K},
              {"E", c.E},
              {"E_tail_bound", c.E_tail_bound},
              {"E_terms", c.E_terms},
              {"T_star", real(c.T_star)},
              {"log_T_star", c.log_T_star},
              {"eps0", real(c.eps0)},
              {"data_positive", c.data_positive},
              {"recursion_margin", theorem1::recursion_inequality_margin(c)},
              {"notes", c.notes}};
    json seq = json::array();
    for (std::size_t i = 0; i < c.a.size(); ++i)
        seq.push_back({{"j", i + 1}, {"a", c.a[i]}, {"b", c.b[i]}, {"log_C", c.logC[i]}});
    j["sequences"] = seq;
    return j;
}

json certificate2_json(const theorem2::Theorem2Certificate& c) {
    return {{"branch", to_string(c.branch)},
            {"p", c.p},
            {"sigma", c.sigma},
            {"epsilon", c.epsilon},
            {"scale", c.scale},
            {"Fconst", c.Fconst},
            {"Ctilde", c.Ctilde},
            {"eps1", real(c.eps1)},
            {"eps0", real(c.eps0)},
            {"g_sup", c.g_sup},
            {"x_blow", real(c.x_blow)},
            {"T_bound", real(c.T_bound)},
            {"smallness", c.smallness},
            {"notes", c.notes}};
}

json bound_report_json(const theorem1::BoundReport& r) {
    json e = json::array();
    for (const auto& b : r.entries) {
        e.push_back({{"name", b.name},
                     {"range", {real(b.range_lo), real(b.range_hi)}},
                     {"worst_margin", real(b.worst_margin)},
                     {"worst_time", real(b.worst_time)},
                     {"tested", b.tested},
                     {"pass", b.pass},
                     {"note", b.note}});
    }
    std::vector<std::string> failed;
    for (const auto& b : r.entries)
        if (b.tested && !b.pass) failed.push_back(b.name);
    return {{"all_pass", r.all_pass()},
            {"failed", failed},
            {"slack", r.slack},
            {"required_slack", r.required_slack()},
            {"first_J_positive", real(r.first_J_positive)},
            {"T_star", real(r.T_star)},
            {"H2_at_zero", r.H2_at_zero},
            {"entries", e},
            {"notes", r.notes}};
}

json trace_summary(const RunTrace& tr) {
    json b = nullptr;
    if (tr.blowup) b = {{"detected_time", tr.blowup->detected_time}, {"criterion", to_string(tr.blowup->criterion)}};
    return {{"variant", to_string(tr.variant)},
            {"dx", tr.dx},
            {"threshold", real(tr.threshold)},
            {"initial_gradient", tr.initial_gradient},
            {"steps", tr.steps},
            {"final_time", tr.final_time},
            {"snapshots", tr.snapshots.size()},
            {"blowup", b}};
}

SolverConfig with_snapshots(SolverConfig c) {
    if (c.snapshot_interval == 0.0) c.snapshot_interval = 0.05;
    return c;
}

void require_variant(const RunConfig& cfg, Variant v, const std::string& cmd) {
    if (cfg.spec.variant != v)
        throw ConfigError("problem.variant: " + cmd + " needs variant '" + to_string(v) + "'");
}

Outcome cmd_solve(const RunConfig& cfg) {
    const RunTrace tr = solve(cfg.spec, cfg.solver);
    std::string csv = "t,x,v,w,z\n";
    for (const auto& s : tr.snapshots) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            csv += csv_num(s.t) + "," + csv_num(s.x(i)) + "," + csv_num(s.v[i]) + "," + csv_num(s.w[i]) + "," +
                   csv_num(s.z[i]) + "\n";
        }
    }
    Outcome o;
    o.artifacts.push_back({"snapshots.csv", csv});
    o.artifacts.push_back({"summary.json", trace_summary(tr).dump(2) + "\n"});
    o.summary = tr.blowup ? "blow-up detected at t = " + csv_num(tr.blowup->detected_time) + " (" +
                                to_string(tr.blowup->criterion) + ")"
                          : "no blow-up before t = " + csv_num(tr.final_time);
    return o;
}

Outcome cmd_oracle(const RunConfig& cfg) {
    require_variant(cfg, Variant::SpaceDerivative, "oracle");
    const auto setup = oracle::SimpleWaveSetup::from_spec(cfg.spec);
    const double T = oracle::crossing_time_exact(setup);
    const double p = cfg.spec.p;
    json j = {{"epsilon", cfg.spec.epsilon},
              {"T", real(T)},
              {"T_eps_pow", real(T * std::pow(cfg.spec.epsilon, p - 1.0))},
              {"note", "first crossing of the straight characteristics of the simple wave built from f"}};
    Outcome o;
    if (!cfg.experiment.epsilons.empty()) {
        scaling::SweepPlan plan{cfg.spec, cfg.experiment.epsilons, scaling::Source::Oracle, cfg.solver, 3, {}};
        const auto res = scaling::run_sweep(plan);
        o.artifacts.push_back({"oracle_sweep.csv", scaling::sweep_csv(res)});
    }
    o.artifacts.push_back({"oracle.json", j.dump(2) + "\n"});
    o.summary = "crossing time T = " + csv_num(T);
    return o;
}

json fit_json(const scaling::FitResult& f) {
    return {{"slope", f.slope}, {"prefactor", f.prefactor}, {"residual", f.residual}, {"points", f.points}};
}

Outcome cmd_sweep(const RunConfig& cfg, const fs::path& dir) {
    if (cfg.experiment.epsilons.empty()) throw ConfigError("experiment.epsilons: sweep needs at least one value");
    scaling::SweepPlan plan{cfg.spec, cfg.experiment.epsilons, cfg.experiment.source, cfg.solver,
                            cfg.experiment.levels, (dir / "sweep.csv").string()};
    plan.solver.snapshot_interval = 0.0;
    const auto res = scaling::run_sweep(plan);
    Outcome o;
    o.artifacts.push_back({"sweep.csv", scaling::sweep_csv(res)});
    json summary = {{"source", to_string(plan.source)}, {"entries", res.entries.size()}, {"resumed", res.resumed}};
    json errors = json::array();
    for (const auto& e : res.entries)
        if (!e.error.empty()) errors.push_back({{"epsilon", e.epsilon}, {"error", e.error}});
    summary["errors"] = errors;

    std::optional<theorem1::IterationCertificate> c1;
    std::optional<theorem2::Theorem2Certificate> c2;
    std::vector<std::string> notes;
    try {
        if (cfg.spec.variant == Variant::SpaceDerivative)
            c1 = theorem1::build_certificate(cfg.spec, cfg.sigma0, cfg.experiment.branch, cfg.experiment.j_max,
                                             cfg.experiment.tol_E);
        else
            c2 = theorem2::build_certificate_t(cfg.spec, cfg.experiment.branch);
    } catch (const CertificateRefused& e) {
        notes.emplace_back(std::string("no certificate: ") + e.what());
    }
    try {
        const auto fit = scaling::fit_power_law(res);
        summary["fit"] = fit_json(fit);
        const auto cmp = scaling::compare_theory(fit, c1, c2, res, cfg.spec.p,
                                                 {cfg.experiment.slope_tolerance, cfg.experiment.guard});
        json viol = json::array();
        for (const auto& v : cmp.violations)
            viol.push_back({{"epsilon", v.epsilon}, {"T_num", v.T_num}, {"bound", v.bound}, {"which", v.which}});
        summary["comparison"] = {{"slope_expected", cmp.slope_expected},
                                 {"slope_tolerance", cmp.slope_tolerance},
                                 {"slope_ok", cmp.slope_ok},
                                 {"bounds_ok", cmp.bounds_ok},
                                 {"violations", viol},
                                 {"fitted_prefactor", cmp.fitted_prefactor},
                                 {"certificate_prefactor_t1", cmp.certificate_prefactor_t1 ? real(*cmp.certificate_prefactor_t1) : json(nullptr)},
                                 {"certificate_prefactor_t2", cmp.certificate_prefactor_t2 ? real(*cmp.certificate_prefactor_t2) : json(nullptr)},
                                 {"notes", cmp.notes}};
        if (!cmp.pass()) o.status = kVerificationFailure;
        o.summary = "slope " + csv_num(fit.slope) + (cmp.pass() ? " (pass)" : " (FAIL)");
    } catch (const InsufficientData& e) {
        notes.emplace_back(e.what());
        o.summary = "too few finite lifespans to fit";
        // bound check still applies entry by entry
        for (const auto& e2 : res.entries) {
            if (!std::isfinite(e2.T)) continue;
            if ((c1 && e2.T > c1->T_star_at(e2.epsilon)) ||
                (c2 && e2.T > c2->T_bound_at(e2.epsilon) * (1.0 + cfg.experiment.guard)))
                o.status = kVerificationFailure;
        }
    }
    summary["notes"] = notes;
    o.artifacts.push_back({"summary.json", summary.dump(2) + "\n"});
    return o;
}

Outcome refused(const CertificateRefused& e) {
    Outcome o;
    json j = {{"status", "refused"}, {"reason", e.what()}, {"translation_hint", real(e.translation_hint())}};
    o.artifacts.push_back({"report.json", j.dump(2) + "\n"});
    o.status = kVerificationFailure;
    o.summary = e.what();
    return o;
}

Outcome cmd_verify_t1(const RunConfig& cfg) {
    require_variant(cfg, Variant::SpaceDerivative, "verify-t1");
    theorem1::IterationCertificate cert;
    try {
        cert = theorem1::build_certificate(cfg.spec, cfg.sigma0, cfg.experiment.branch, cfg.experiment.j_max,
                                           cfg.experiment.tol_E);
    } catch (const CertificateRefused& e) {
        return refused(e);
    }
    const RunTrace tr = solve(cfg.spec, with_snapshots(cfg.solver));
    const UField u = antiderivative_u(tr, Variant::SpaceDerivative);
    const auto fs = theorem1::compute_functionals(u, cfg.spec.data.sigma(), cfg.sigma0, cfg.spec.p, &tr);
    const double T_run = tr.blowup ? tr.blowup->detected_time : tr.final_time;
    theorem1::VerifyOptions vo;
    vo.slack = cfg.experiment.slack_t1;
    vo.t_end = cfg.experiment.t_end_fraction * T_run;
    const auto rep = theorem1::verify_bounds(fs, cert, vo);

    std::string csv = "t,H,H1,H2,Fser\n";
    for (std::size_t k = 0; k < fs.times.size(); ++k) {
        csv += csv_num(fs.times[k]) + "," + csv_num(fs.H[k]) + "," + csv_num(fs.H1[k]) + "," + csv_num(fs.H2[k]) +
               "," + csv_num(fs.Fser.empty() ? 0.0 : fs.Fser[k]) + "\n";
    }
    svg::Plot plot{"H(t) against its lower bounds", "t", "H (normalized)", false, true, {}};
    svg::Series h{"H", {}, "#1f77b4"}, b1{"first step", {}, "#d62728", false, true}, j2{"j = 2 curve", {}, "#2ca02c", false, true};
    for (std::size_t k = 1; k < fs.times.size(); ++k) {
        const double t = fs.times[k];
        if (t > vo.t_end) break;
        h.points.emplace_back(t, fs.H[k] / cert.scale);
        if (cert.branch == Branch::FBranch || t >= cert.sigma1) b1.points.emplace_back(t, cert.first_step * t * t);
        if (t > cert.sigma1 && cert.logC.size() > 1) {
            j2.points.emplace_back(t, std::exp(cert.logC[1] + cert.a[1] * std::log(t - cert.sigma1) +
                                               (1.0 - 2.0 * cert.p) * cert.b[1] * std::log(t)));
        }
    }
    plot.series = {h, b1, j2};

    Outcome o;
    json report = bound_report_json(rep);
    report["run"] = trace_summary(tr);
    o.artifacts.push_back({"certificate.json", certificate1_json(cert).dump(2) + "\n"});
    o.artifacts.push_back({"bound_report.json", report.dump(2) + "\n"});
    o.artifacts.push_back({"functionals.csv", csv});
    o.artifacts.push_back({"H_bounds.svg", svg::render(plot)});
    o.status = rep.all_pass() ? kSuccess : kVerificationFailure;
    o.summary = rep.all_pass() ? "all inequalities hold" : "inequality failed: " + report["failed"].dump();
    return o;
}

Outcome cmd_verify_t2(const RunConfig& cfg) {
    require_variant(cfg, Variant::TimeDerivative, "verify-t2");
    theorem2::Theorem2Certificate cert;
    try {
        cert = theorem2::build_certificate_t(cfg.spec, cfg.experiment.branch);
    } catch (const CertificateRefused& e) {
        return refused(e);
    }
    const RunTrace tr = solve(cfg.spec, with_snapshots(cfg.solver));
    const UField u = antiderivative_u(tr, Variant::TimeDerivative);
    const auto diag = theorem2::extract_U(u, cert.sigma, 0.9 * cert.x_blow);
    const auto rep = theorem2::verify_comparison(diag, cert, cfg.spec.epsilon, cfg.experiment.slack_t2);

    std::string csv = "x,U,W\n";
    svg::Plot plot{"diagonal trace U against W", "x", "value (normalized)", false, false, {}};
    svg::Series su{"U", {}, "#1f77b4"}, sw{"W", {}, "#d62728", false, true};
    for (const auto& s : rep.samples) {
        csv += csv_num(s.x) + "," + csv_num(s.U) + "," + csv_num(s.W) + "\n";
        su.points.emplace_back(s.x, s.U);
        sw.points.emplace_back(s.x, s.W);
    }
    plot.series = {su, sw};
    json j = {{"status", to_string(rep.status)},
              {"slack", rep.slack},
              {"epsilon", rep.epsilon},
              {"range", {rep.x_lo, rep.x_hi}},
              {"worst_margin", real(rep.worst_margin)},
              {"worst_x", real(rep.worst_x)},
              {"x_blow", real(rep.x_blow)},
              {"T_bound", real(rep.T_bound)},
              {"trace_truncated", rep.trace_truncated},
              {"samples", rep.samples.size()},
              {"notes", rep.notes},
              {"run", trace_summary(tr)}};
    Outcome o;
    o.artifacts.push_back({"certificate.json", certificate2_json(cert).dump(2) + "\n"});
    o.artifacts.push_back({"comparison.json", j.dump(2) + "\n"});
    o.artifacts.push_back({"U_W.csv", csv});
    o.artifacts.push_back({"U_W.svg", svg::render(plot)});
    o.status = rep.status == theorem2::ComparisonStatus::Fail ? kVerificationFailure : kSuccess;
    o.summary = std::string("comparison ") + to_string(rep.status);
    return o;
}

Outcome cmd_report(const RunConfig& cfg) {
    if (!cfg.experiment.sweep_csv) throw ConfigError("experiment.sweep_csv: report needs a sweep CSV");
    std::vector<scaling::SweepEntry> entries;
    try {
        entries = scaling::read_sweep_csv(*cfg.experiment.sweep_csv);
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("experiment.sweep_csv: ") + e.what());
    }
    scaling::SweepResult res{entries, 0};
    const double p = cfg.spec.p;
    svg::Plot plot{"lifespan against amplitude", "epsilon", "T", true, true, {}};
    svg::Series pts{"measured T", {}, "#1f77b4", true};
    for (const auto& e : entries) pts.points.emplace_back(e.epsilon, e.T);
    plot.series.push_back(pts);
    json summary = {{"sweep_csv", *cfg.experiment.sweep_csv}, {"entries", entries.size()}};
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& e : entries) {
        lo = std::min(lo, e.epsilon);
        hi = std::max(hi, e.epsilon);
    }
    try {
        const auto fit = scaling::fit_power_law(res);
        summary["fit"] = fit_json(fit);
        svg::Series line{"fit C eps^" + csv_num(std::round(fit.slope * 1000) / 1000), {}, "#ff7f0e"};
        for (double e : {lo, hi}) line.points.emplace_back(e, fit.prefactor * std::pow(e, fit.slope));
        plot.series.push_back(line);
    } catch (const InsufficientData& e) {
        summary["fit"] = nullptr;
        summary["note"] = e.what();
    }
    if (cfg.spec.variant == Variant::SpaceDerivative && std::isfinite(lo)) {
        try {
            const auto c1 = theorem1::build_certificate(cfg.spec, cfg.sigma0, cfg.experiment.branch,
                                                        cfg.experiment.j_max, cfg.experiment.tol_E);
            svg::Series tb{"T* bound", {}, "#d62728", false, true};
            for (double e : {lo, hi}) tb.points.emplace_back(e, c1.T_star_at(e));
            plot.series.push_back(tb);
            summary["T_star_prefactor"] = real(c1.T_star * std::pow(c1.epsilon, p - 1.0));
        } catch (const CertificateRefused& e) {
            summary["T_star_prefactor"] = nullptr;
        }
    }
    Outcome o;
    o.artifacts.push_back({"scaling.svg", svg::render(plot)});
    o.artifacts.push_back({"report.json", summary.dump(2) + "\n"});
    o.summary = "rendered " + std::to_string(entries.size()) + " sweep entries";
    return o;
}

}  // namespace

int dispatch(const std::string& command, const RunConfig& cfg, const DispatchOptions& opt) {
    static const std::set<std::string> commands{"solve", "sweep", "verify-t1", "verify-t2", "oracle", "report"};
    if (!commands.count(command)) {
        std::cerr << "unknown command '" << command << "'\n";
        return kUsageError;
    }
    const fs::path dir = opt.out_dir;
    if (fs::exists(dir / kManifestName) && !fs::exists(dir / kIncompleteMarker)) {
        std::cerr << "refusing to modify completed run directory " << dir.string() << "\n";
        return kUsageError;
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) {
        std::cerr << "cannot create output directory " << dir.string() << "\n";
        return kUsageError;
    }
    {
        std::ofstream m(dir / kIncompleteMarker, std::ios::trunc);
        m << command << "\n";
    }
    Outcome out;
    try {
        if (command == "solve") out = cmd_solve(cfg);
        else if (command == "oracle") out = cmd_oracle(cfg);
        else if (command == "sweep") out = cmd_sweep(cfg, dir);
        else if (command == "verify-t1") out = cmd_verify_t1(cfg);
        else if (command == "verify-t2") out = cmd_verify_t2(cfg);
        else out = cmd_report(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << command << " failed: " << e.what() << "\n";
        return kVerificationFailure;
    }
    out.artifacts.insert(out.artifacts.begin(), Artifact{"config.resolved.json", cfg.resolved.dump(2) + "\n"});
    const json header = {{"tool", "qlwave"},
                         {"version", kToolVersion},
                         {"command", command},
                         {"exit_status", out.status},
                         {"config", cfg.resolved}};
    emit_outputs(out.artifacts, dir, header);
    fs::remove(dir / kIncompleteMarker, ec);
    if (!opt.quiet) std::cout << command << ": " << out.summary << "\n" << "wrote " << dir.string() << "\n";
    return out.status;
}

int main_entry(int argc, char** argv) {
    CLI::App app{"Blow-up experiments for one-dimensional quasilinear wave equations"};
    std::string command, config_path, out;
    bool quiet = false;
    app.add_option("command", command, "solve | sweep | verify-t1 | verify-t2 | oracle | report")->required();
    app.add_option("--config", config_path, "JSON run configuration")->required();
    app.add_option("--out", out, "run directory (default: $QLWAVE_OUT_ROOT/<command>-<digest>)");
    app.add_flag("--quiet", quiet, "suppress progress output");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help();
        return kUsageError;
    }
    std::optional<RunConfig> cfg;
    try {
        cfg.emplace(load_config(config_path));
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsageError;
    }
    DispatchOptions opt;
    opt.quiet = quiet;
    opt.out_dir = out.empty() ? default_out_dir(command, *cfg) : fs::path(out);
    return dispatch(command, *cfg, opt);
}

}  // namespace qlwave::cli
