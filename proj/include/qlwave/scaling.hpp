#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qlwave/error.hpp"
#include "qlwave/model.hpp"
#include "qlwave/oracle.hpp"
#include "qlwave/solver.hpp"
#include "qlwave/theorem1.hpp"
#include "qlwave/theorem2.hpp"

/// Lifespan sweeps over epsilon and power-law fits of T(eps).
namespace qlwave::scaling {

enum class Source { Solver, Oracle };

inline const char* to_string(Source s) { return s == Source::Solver ? "solver" : "oracle"; }

inline constexpr const char* kSweepHeader = "epsilon,T,source,criterion,dx_finest";

/// Shortest decimal text that round-trips a double ("inf" and "nan" spelled out).
inline std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline double parse_real(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw InvalidArgument("malformed number '" + s + "'");
    return v;
}

struct SweepPlan {
    ProblemSpec spec;
    std::vector<double> epsilons;
    Source source = Source::Oracle;
    SolverConfig solver;
    int levels = 3;
    /// When set, rows are appended here as they finish and reused on rerun.
    std::optional<std::string> csv_path;

    void validate() const {
        for (std::size_t i = 0; i < epsilons.size(); ++i) {
            if (!(epsilons[i] > 0.0)) throw InvalidArgument("sweep epsilons must be positive");
            if (i && !(epsilons[i] < epsilons[i - 1])) throw InvalidArgument("sweep epsilons must strictly decrease");
        }
        if (source == Source::Solver) {
            solver.validate();
            if (levels < 2) throw InvalidArgument("sweep levels must be >= 2");
        }
    }
};

/// Geometric sequence from eps_max down to eps_min with n points.
inline std::vector<double> geometric_epsilons(double eps_max, double eps_min, int n) {
    if (n < 1 || !(eps_max > 0.0) || !(eps_min > 0.0)) throw InvalidArgument("geometric_epsilons: bad range");
    std::vector<double> out;
    if (n == 1) return {eps_max};
    const double r = std::log(eps_min / eps_max) / (n - 1);
    for (int i = 0; i < n; ++i) out.push_back(eps_max * std::exp(r * i));
    return out;
}

struct SweepEntry {
    double epsilon = 0.0;
    double T = std::numeric_limits<double>::quiet_NaN();
    Source source = Source::Oracle;
    std::string criterion;
    double dx_finest = std::numeric_limits<double>::quiet_NaN();
    std::string error;  // empty on success

    std::string csv_row() const {
        return format_real(epsilon) + "," + format_real(T) + "," + to_string(source) + "," + criterion + "," +
               format_real(dx_finest);
    }
};

struct SweepResult {
    std::vector<SweepEntry> entries;
    int resumed = 0;  // rows taken from an existing file
};

inline SweepEntry parse_sweep_row(const std::string& line) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    if (cols.size() != 5) throw InvalidArgument("sweep row must have 5 columns: '" + line + "'");
    SweepEntry e;
    e.epsilon = parse_real(cols[0]);
    e.T = parse_real(cols[1]);
    if (cols[2] == "solver") e.source = Source::Solver;
    else if (cols[2] == "oracle") e.source = Source::Oracle;
    else throw InvalidArgument("unknown sweep source '" + cols[2] + "'");
    e.criterion = cols[3];
    e.dx_finest = parse_real(cols[4]);
    return e;
}

inline std::vector<SweepEntry> read_sweep_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open sweep file " + path);
    std::string line;
    if (!std::getline(in, line) || line != kSweepHeader) throw InvalidArgument("sweep file has an unexpected header");
    std::vector<SweepEntry> out;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(parse_sweep_row(line));
    }
    return out;
}

/// Lifespan at one amplitude from the configured source.
inline SweepEntry sweep_entry(const SweepPlan& plan, double eps) {
    SweepEntry e;
    e.epsilon = eps;
    e.source = plan.source;
    try {
        const ProblemSpec spec = plan.spec.with_epsilon(eps);
        if (plan.source == Source::Oracle) {
            e.T = oracle::crossing_time_exact(oracle::SimpleWaveSetup::from_spec(spec));
            e.criterion = "characteristic_crossing";
        } else {
            const auto est = estimate_lifespan(spec, plan.solver, plan.levels);
            e.T = est.T_est;
            e.dx_finest = est.refinement_levels.back().first;
            e.criterion = est.criteria.back();
        }
    } catch (const std::exception& ex) {
        e.T = std::numeric_limits<double>::quiet_NaN();
        e.criterion = "error";
        e.error = ex.what();
    }
    return e;
}

/// One entry per epsilon in plan order; with a csv path, finished rows are
/// appended immediately and rows already on disk are reused.
inline SweepResult run_sweep(const SweepPlan& plan) {
    plan.validate();
    SweepResult res;
    std::map<std::string, SweepEntry> done;
    std::ofstream out;
    if (plan.csv_path) {
        std::ifstream probe(*plan.csv_path);
        if (probe.good()) {
            probe.close();
            for (auto& e : read_sweep_csv(*plan.csv_path)) {
                if (e.source == plan.source) done.emplace(format_real(e.epsilon), std::move(e));
            }
            out.open(*plan.csv_path, std::ios::app);
        } else {
            out.open(*plan.csv_path);
            out << kSweepHeader << '\n';
        }
        if (!out) throw InvalidArgument("cannot write sweep file " + *plan.csv_path);
        out.flush();
    }
    for (double eps : plan.epsilons) {
        auto it = done.find(format_real(eps));
        if (it != done.end()) {
            res.entries.push_back(it->second);
            ++res.resumed;
            continue;
        }
        SweepEntry e = sweep_entry(plan, eps);
        if (out.is_open()) {
            out << e.csv_row() << '\n';
            out.flush();
        }
        res.entries.push_back(std::move(e));
    }
    return res;
}

inline std::string sweep_csv(const SweepResult& r) {
    std::string s = std::string(kSweepHeader) + "\n";
    for (const auto& e : r.entries) s += e.csv_row() + "\n";
    return s;
}

struct FitResult {
    double slope = 0.0;
    double prefactor = 0.0;
    double residual = 0.0;  // max |log T - fit| over the used points
    int points = 0;
};

/// Least squares of log T against log eps over the finite entries.
inline FitResult fit_power_law(const std::vector<SweepEntry>& entries) {
    std::vector<double> X, Y;
    for (const auto& e : entries) {
        if (std::isfinite(e.T) && e.T > 0.0 && e.epsilon > 0.0) {
            X.push_back(std::log(e.epsilon));
            Y.push_back(std::log(e.T));
        }
    }
    if (X.size() < 3) throw InsufficientData("fit_power_law needs at least 3 finite entries");
    const double n = static_cast<double>(X.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        mx += X[i];
        my += Y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        sxx += (X[i] - mx) * (X[i] - mx);
        sxy += (X[i] - mx) * (Y[i] - my);
    }
    if (sxx == 0.0) throw InsufficientData("fit_power_law needs distinct epsilons");
    FitResult f;
    f.slope = sxy / sxx;
    const double intercept = my - f.slope * mx;
    f.prefactor = std::exp(intercept);
    for (std::size_t i = 0; i < X.size(); ++i) {
        f.residual = std::max(f.residual, std::fabs(Y[i] - (intercept + f.slope * X[i])));
    }
    f.points = static_cast<int>(X.size());
    return f;
}

inline FitResult fit_power_law(const SweepResult& r) { return fit_power_law(r.entries); }

struct BoundViolation {
    double epsilon;
    double T_num;
    double bound;
    std::string which;
};

struct ComparisonSummary {
    double p = 2.0;
    double slope = 0.0;
    double slope_expected = 0.0;
    double slope_tolerance = 0.1;
    bool slope_ok = false;
    bool bounds_ok = true;
    std::vector<BoundViolation> violations;
    double fitted_prefactor = 0.0;
    std::optional<double> certificate_prefactor_t1;  // T* eps^{p-1}
    std::optional<double> certificate_prefactor_t2;  // T_bound eps^{p-1}
    std::vector<std::string> notes;

    bool pass() const { return slope_ok && bounds_ok; }
};

struct CompareOptions {
    double slope_tolerance = 0.1;
    double guard = 0.05;  // relative allowance on the time-derivative bound
};

/// Default slope tolerance: looser for solver-sourced sweeps.
inline double default_slope_tolerance(Source s) { return s == Source::Solver ? 0.1 : 0.05; }

inline ComparisonSummary compare_theory(const FitResult& fit, const std::optional<theorem1::IterationCertificate>& cert1,
                                        const std::optional<theorem2::Theorem2Certificate>& cert2,
                                        const SweepResult& sweep, double p, const CompareOptions& opt = {}) {
    ComparisonSummary s;
    s.p = p;
    s.slope = fit.slope;
    s.slope_expected = -(p - 1.0);
    s.slope_tolerance = opt.slope_tolerance;
    s.slope_ok = std::fabs(fit.slope - s.slope_expected) <= opt.slope_tolerance;
    s.fitted_prefactor = fit.prefactor;
    for (const auto& e : sweep.entries) {
        if (!std::isfinite(e.T)) continue;
        if (cert1) {
            const double b = cert1->T_star_at(e.epsilon);
            if (e.T > b) {
                s.violations.push_back({e.epsilon, e.T, b, "T_star"});
                s.bounds_ok = false;
            }
        }
        if (cert2) {
            const double b = cert2->T_bound_at(e.epsilon);
            if (e.T > b * (1.0 + opt.guard)) {
                s.violations.push_back({e.epsilon, e.T, b, "T_bound"});
                s.bounds_ok = false;
            }
        }
    }
    if (cert1) s.certificate_prefactor_t1 = cert1->T_star * std::pow(cert1->epsilon, p - 1.0);
    if (cert2) s.certificate_prefactor_t2 = cert2->T_bound * std::pow(cert2->epsilon, p - 1.0);
    s.notes.emplace_back("certificate bounds lie many orders above the measured lifespans; "
                         "the bound check is a sanity invariant");
    if (std::floor(p) != p) s.notes.emplace_back("fractional p: the measured slope is reported without an optimality claim");
    return s;
}

}  // namespace qlwave::scaling
