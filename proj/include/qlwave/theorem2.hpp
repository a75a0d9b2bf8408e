#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qlwave/error.hpp"
#include "qlwave/model.hpp"
#include "qlwave/quadrature.hpp"
#include "qlwave/solver.hpp"

/// Diagonal trace U(x) = u(x, x + sigma) of the time-derivative problem and
/// its comparison with the explicit blowing-up solution W.
namespace qlwave::theorem2 {

struct Theorem2Certificate {
    Branch branch = Branch::FBranch;
    double p = 2.0;
    double sigma = 1.0;
    double epsilon = 0.0;
    double scale = 1.0;  // v = scale * v_normalized
    double Fconst = 0.0;
    double Ctilde = 0.0;
    double eps1 = 0.0;   // physical units
    double eps0 = 0.0;   // physical units
    double g_sup = 0.0;
    double x_blow = 0.0;
    double T_bound = 0.0;
    bool smallness = false;
    std::vector<std::string> notes;

    double normalized(double eps) const { return eps / scale; }

    /// (eps ||g||)^{p-1} <= 1/2 in normalized units.
    bool smallness_at(double eps) const {
        return std::pow(normalized(eps) * g_sup, p - 1.0) <= 0.5;
    }
    double x_blow_at(double eps) const {
        return sigma + 2.0 * Fconst / ((p - 1.0) * std::pow(Ctilde * normalized(eps), p - 1.0));
    }
    double T_bound_at(double eps) const {
        return 6.0 * Fconst * std::pow(Ctilde, -(p - 1.0)) / (p - 1.0) * std::pow(normalized(eps), -(p - 1.0));
    }
};

/// ((p-1)/(2p-1) (2 sigma)^{(2p-1)/(p-1)})^{p-1}.
inline double constant_F(double p, double sigma) {
    return std::pow((p - 1.0) / (2.0 * p - 1.0) * std::pow(2.0 * sigma, (2.0 * p - 1.0) / (p - 1.0)), p - 1.0);
}

inline Theorem2Certificate build_certificate_t(const ProblemSpec& spec, Branch branch) {
    Theorem2Certificate c;
    c.branch = branch;
    c.p = spec.p;
    c.sigma = spec.data.sigma();
    c.epsilon = spec.epsilon;
    c.scale = spec.A > 0.0 ? spec.normalization_scale() : 1.0;
    if (spec.variant != Variant::TimeDerivative) c.notes.emplace_back("constants refer to the time-derivative equation");
    const auto& fl = spec.data.flags();
    if (!(fl.f_nonneg && fl.g_nonneg)) c.notes.emplace_back("positivity assumption fails");
    const double s = c.sigma, p = c.p;
    c.Ctilde = branch == Branch::FBranch ? 0.5 * spec.data.f().integral(-s, s)
                                         : 0.25 * spec.data.g().moment_integral(-s, s, s);
    if (!(c.Ctilde > 0.0)) {
        throw CertificateRefused(std::string("certificate refused: C~_") + to_string(branch) + " is not positive",
                                 std::numeric_limits<double>::quiet_NaN());
    }
    c.Fconst = constant_F(p, s);
    c.g_sup = spec.data.g_sup_norm();
    c.x_blow = c.x_blow_at(spec.epsilon);
    c.T_bound = c.T_bound_at(spec.epsilon);
    const double k = 2.0 * c.Fconst * std::pow(c.Ctilde, -(p - 1.0)) / (p - 1.0);
    const double e1 = std::pow(k / s, 1.0 / (p - 1.0));
    double e0 = e1;
    if (c.g_sup > 0.0) e0 = std::min(e1, std::pow(2.0, -1.0 / (p - 1.0)) / c.g_sup);
    c.eps1 = e1 * c.scale;
    c.eps0 = e0 * c.scale;
    c.smallness = c.smallness_at(spec.epsilon);
    return c;
}

/// {2F (C eps)^{p-1} / (2F - (p-1)(C eps)^{p-1}(x - sigma))}^{1/(p-1)}, normalized units.
inline double W_closed_form(double x, const Theorem2Certificate& c, double epsilon) {
    if (x < c.sigma) throw InvalidArgument("W_closed_form: x must be >= sigma");
    const double p = c.p;
    const double ce = std::pow(c.Ctilde * c.normalized(epsilon), p - 1.0);
    const double den = 2.0 * c.Fconst - (p - 1.0) * ce * (x - c.sigma);
    if (!(den > 0.0)) throw DivergenceError("W_closed_form: x at or beyond the blow-up abscissa");
    return std::pow(2.0 * c.Fconst * ce / den, 1.0 / (p - 1.0));
}

/// (1/2) int_0^t ds int_{x-t+s}^{x+t-s} q(y, s) dy by nested Simpson; exact for cubics.
template <class Fn>
double duhamel_L(Fn&& q, double x, double t, int panels = 64) {
    auto inner = [&](double s) {
        const double r = t - s;
        if (r <= 0.0) return 0.0;
        return quad::simpson([&](double y) { return q(y, s); }, x - r, x + r, panels);
    };
    return 0.5 * quad::simpson(inner, 0.0, t, panels);
}

struct DiagonalTrace {
    std::vector<double> xs;
    std::vector<double> U;
    bool truncated = false;
    double x_requested = 0.0;
};

/// U(x) = u(x, x + sigma) by bilinear interpolation on [sigma, x_end], grid spacing dx.
inline DiagonalTrace extract_U(const UField& u, double sigma, double x_end = std::numeric_limits<double>::infinity()) {
    if (u.variant != Variant::TimeDerivative) throw InvalidArgument("extract_U: needs the time-derivative u");
    DiagonalTrace d;
    d.x_requested = x_end;
    if (u.times.empty()) {
        d.truncated = true;
        return d;
    }
    const double reach = u.times.back() - sigma;
    double end = x_end;
    if (end > reach) {
        end = reach;
        d.truncated = std::isfinite(x_end);
    }
    if (end < sigma) {
        d.truncated = true;
        return d;
    }
    const double h = u.dx;
    const auto n = static_cast<long>(std::floor((end - sigma) / h + 1e-9));
    for (long i = 0; i <= n; ++i) {
        const double x = sigma + h * static_cast<double>(i);
        const auto val = u.bilinear(x, x + sigma);
        if (!val) {
            d.truncated = true;
            break;
        }
        d.xs.push_back(x);
        d.U.push_back(*val);
    }
    return d;
}

/// u(x, t) rebuilt from its Duhamel representation using the stored u_tt = z:
/// (eps/2) int f + L[(A/p)|z|^p + eps g - (A/p)|eps g|^p].  Every term is
/// nonnegative for nonnegative data under the smallness condition.
inline double representation_u(const RunTrace& trace, const ProblemSpec& spec, double x, double t) {
    if (trace.variant != Variant::TimeDerivative) throw InvalidArgument("representation_u: needs a time-derivative run");
    const double eps = spec.epsilon, p = spec.p, A = spec.A;
    const auto& f = spec.data.f();
    const auto& g = spec.data.g();
    double val = 0.5 * eps * f.integral(x - t, x + t);
    val += duhamel_L([&](double y, double) { return eps * g(y) - A / p * abs_pow(eps * g(y), p); }, x, t);
    if (A == 0.0) return val;
    // nonlinear source from the stored snapshots; the cone width vanishes at s = t
    std::vector<double> s_nodes, inner;
    for (const auto& snap : trace.snapshots) {
        if (snap.t >= t) break;
        const double r = t - snap.t;
        auto zp = [&](double y) {
            const double rel = y / snap.dx - static_cast<double>(snap.i_lo);
            if (rel < -1.0 || rel > static_cast<double>(snap.size())) return 0.0;
            return abs_pow(quad::cubic_interp(snap.z, static_cast<double>(snap.i_lo) * snap.dx, snap.dx, y), p);
        };
        const int panels = std::max(8, static_cast<int>(std::ceil(2.0 * r / snap.dx)));
        s_nodes.push_back(snap.t);
        inner.push_back(quad::simpson(zp, x - r, x + r, panels));
    }
    s_nodes.push_back(t);
    inner.push_back(0.0);
    return val + 0.5 * A / p * quad::simpson(s_nodes, inner);
}

struct ComparisonSample {
    double x, U, W;
};

enum class ComparisonStatus { Pass, Fail, Inapplicable };

inline const char* to_string(ComparisonStatus s) {
    switch (s) {
        case ComparisonStatus::Pass: return "pass";
        case ComparisonStatus::Fail: return "fail";
        default: return "inapplicable";
    }
}

struct ComparisonReport {
    ComparisonStatus status = ComparisonStatus::Inapplicable;
    double slack = 0.05;
    double epsilon = 0.0;
    double x_lo = 0.0;
    double x_hi = 0.0;
    double worst_margin = std::numeric_limits<double>::infinity();
    double worst_x = std::numeric_limits<double>::quiet_NaN();
    double x_blow = 0.0;
    double T_bound = 0.0;
    bool trace_truncated = false;
    std::vector<ComparisonSample> samples;
    std::vector<std::string> notes;

    bool applicable() const { return status != ComparisonStatus::Inapplicable; }
    bool pass() const { return status == ComparisonStatus::Pass; }
};

/// U >= W (1 - slack) on the overlap of the trace with [sigma, 0.9 x_blow].
inline ComparisonReport verify_comparison(const DiagonalTrace& d, const Theorem2Certificate& c, double epsilon,
                                          double slack = 0.05) {
    ComparisonReport r;
    r.slack = slack;
    r.epsilon = epsilon;
    r.x_blow = c.x_blow_at(epsilon);
    r.T_bound = c.T_bound_at(epsilon);
    r.trace_truncated = d.truncated;
    r.x_lo = c.sigma;
    r.x_hi = std::min(0.9 * r.x_blow, d.xs.empty() ? c.sigma : d.xs.back());
    if (!c.smallness_at(epsilon)) {
        r.status = ComparisonStatus::Inapplicable;
        r.notes.emplace_back("smallness condition fails: (eps |g|_inf)^(p-1) > 1/2");
        return r;
    }
    for (std::size_t i = 0; i < d.xs.size(); ++i) {
        const double x = d.xs[i];
        if (x < c.sigma || x > r.x_hi) continue;
        const double U = d.U[i] / c.scale;
        const double W = W_closed_form(x, c, epsilon);
        r.samples.push_back({x, U, W});
        const double m = (U - W) / W;
        if (m < r.worst_margin) {
            r.worst_margin = m;
            r.worst_x = x;
        }
    }
    if (r.samples.empty()) {
        r.status = ComparisonStatus::Fail;
        r.notes.emplace_back("no trace samples on the tested range");
        return r;
    }
    r.status = r.worst_margin >= -slack ? ComparisonStatus::Pass : ComparisonStatus::Fail;
    r.notes.emplace_back("T_bound is a sanity ceiling; a classical solution cannot persist past it");
    return r;
}

}  // namespace qlwave::theorem2
