#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qlwave/error.hpp"
#include "qlwave/model.hpp"
#include "qlwave/quadrature.hpp"

namespace qlwave {

enum class Scheme { LaxFriedrichs, LaxWendroff };

inline const char* to_string(Scheme s) { return s == Scheme::LaxFriedrichs ? "lax_friedrichs" : "lax_wendroff"; }

enum class BlowupCriterion { GradientThreshold, HyperbolicityLoss, CflCollapse };

inline const char* to_string(BlowupCriterion c) {
    switch (c) {
        case BlowupCriterion::GradientThreshold: return "gradient_threshold";
        case BlowupCriterion::HyperbolicityLoss: return "hyperbolicity_loss";
        case BlowupCriterion::CflCollapse: return "cfl_collapse";
    }
    return "unknown";
}

struct SolverConfig {
    double dx = 2e-3;
    double cfl = 0.8;
    double t_max = 10.0;
    /// Absolute threshold on max |Δw|/dx, |Δz|/dx.  When unset the threshold is
    /// min(gradient_growth * G0, gradient_fraction * W0 / dx) with G0 the initial
    /// max gradient and W0 the initial max amplitude of (w, z).
    std::optional<double> gradient_threshold;
    double gradient_growth = 1e3;
    double gradient_fraction = 0.1;
    double dt_min = 1e-12;
    Scheme scheme = Scheme::LaxWendroff;
    /// Spacing of stored snapshots; 0 keeps only the initial and final states.
    double snapshot_interval = 0.0;

    void validate() const {
        if (!(dx > 0.0) || !std::isfinite(dx)) throw InvalidArgument("solver dx must be positive");
        if (!(cfl > 0.0 && cfl < 1.0)) throw InvalidArgument("solver cfl must lie in (0, 1)");
        if (!(t_max > 0.0) || !std::isfinite(t_max)) throw InvalidArgument("solver t_max must be positive");
        if (gradient_threshold && !(*gradient_threshold > 0.0)) throw InvalidArgument("gradient threshold must be positive");
        if (!(gradient_growth > 1.0)) throw InvalidArgument("gradient_growth must exceed 1");
        if (!(gradient_fraction > 0.0)) throw InvalidArgument("gradient_fraction must be positive");
        if (!(dt_min > 0.0)) throw InvalidArgument("dt_min must be positive");
        if (!(snapshot_interval >= 0.0)) throw InvalidArgument("snapshot_interval must be non-negative");
    }
};

/// Grid state on the global lattice x_i = i dx, i in [i_lo, i_lo + size).
/// Outside the stored range every field is zero.
struct GridState {
    double t = 0.0;
    double dx = 0.0;
    long i_lo = 0;
    std::vector<double> v;  // solution
    std::vector<double> w;  // v_x
    std::vector<double> z;  // v_t

    std::size_t size() const { return v.size(); }
    long i_hi() const { return i_lo + static_cast<long>(v.size()) - 1; }
    double x(std::size_t k) const { return static_cast<double>(i_lo + static_cast<long>(k)) * dx; }
};

using Snapshot = GridState;

struct BlowupEvent {
    double detected_time = 0.0;
    BlowupCriterion criterion = BlowupCriterion::GradientThreshold;
};

struct RunTrace {
    Variant variant = Variant::SpaceDerivative;
    double dx = 0.0;
    double sigma = 1.0;
    double threshold = 0.0;         // gradient threshold in effect
    double initial_gradient = 0.0;  // G0
    long steps = 0;
    double final_time = 0.0;
    std::vector<Snapshot> snapshots;
    std::optional<BlowupEvent> blowup;

    std::vector<double> times() const {
        std::vector<double> t;
        t.reserve(snapshots.size());
        for (const auto& s : snapshots) t.push_back(s.t);
        return t;
    }
};

/// Conservative flux of the space-derivative system: w + (A/p)|w|^p.
inline double flux(double w, double p, double A) { return w + (A / p) * abs_pow(w, p); }
inline double flux(double w, const ProblemSpec& spec) { return flux(w, spec.p, spec.A); }

namespace detail {

/// Cells needed at time t to cover the cone |x| <= t + sigma plus two cells.
inline long cone_halfwidth(double sigma, double t, double dx) {
    return static_cast<long>(std::floor((sigma + t) / dx + 1e-9)) + 2;
}

/// Copy src into a zero-padded array on [i_lo_new, i_lo_new + n_new).
inline std::vector<double> embed(const std::vector<double>& src, long i_lo_src, long i_lo_new, std::size_t n_new) {
    std::vector<double> out(n_new, 0.0);
    const long shift = i_lo_src - i_lo_new;
    for (std::size_t k = 0; k < src.size(); ++k) out[static_cast<std::size_t>(static_cast<long>(k) + shift)] = src[k];
    return out;
}

inline double max_gradient(const GridState& s) {
    double g = 0.0;
    const std::size_t n = s.size();
    // fields vanish beyond the stored range, so the outer differences count too
    if (n == 0) return 0.0;
    g = std::max({std::fabs(s.w.front()), std::fabs(s.z.front()), std::fabs(s.w.back()), std::fabs(s.z.back())});
    for (std::size_t i = 0; i + 1 < n; ++i) {
        g = std::max(g, std::fabs(s.w[i + 1] - s.w[i]));
        g = std::max(g, std::fabs(s.z[i + 1] - s.z[i]));
    }
    return g / s.dx;
}

inline double max_amplitude(const GridState& s) {
    double a = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) a = std::max({a, std::fabs(s.w[i]), std::fabs(s.z[i])});
    return a;
}

/// Central-difference v_x used as the w field of the time-derivative variant.
inline void fill_gradient(GridState& s) {
    const std::size_t n = s.size();
    s.w.assign(n, 0.0);
    auto at = [&](std::ptrdiff_t i) {
        return (i < 0 || i >= static_cast<std::ptrdiff_t>(n)) ? 0.0 : s.v[static_cast<std::size_t>(i)];
    };
    for (std::size_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::ptrdiff_t>(i);
        s.w[i] = (at(k + 1) - at(k - 1)) / (2.0 * s.dx);
    }
}

}  // namespace detail

/// Initial grid state (eps f, eps f', eps g) on the cone at t = 0.
inline GridState initial_state(const ProblemSpec& spec, double dx) {
    GridState s;
    s.t = 0.0;
    s.dx = dx;
    const long half = detail::cone_halfwidth(spec.data.sigma(), 0.0, dx);
    s.i_lo = -half;
    const auto n = static_cast<std::size_t>(2 * half + 1);
    s.v.resize(n);
    s.w.resize(n);
    s.z.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double x = s.x(k);
        s.v[k] = spec.epsilon * spec.data.f().eval(x, 0);
        s.w[k] = spec.epsilon * spec.data.f().eval(x, 1);
        s.z[k] = spec.epsilon * spec.data.g().eval(x, 0);
    }
    return s;
}

/// Largest characteristic speed on the grid; nullopt signals loss of hyperbolicity.
inline std::optional<double> max_speed(const GridState& s, const ProblemSpec& spec) {
    double m = 1.0;  // speed of the zero state beyond the stored range
    if (spec.variant == Variant::SpaceDerivative) {
        for (double w : s.w) {
            const double r = speed_radicand(w, spec.p, spec.A);
            if (!(r >= spec.delta_hyp)) return std::nullopt;
            m = std::max(m, r);
        }
        return std::sqrt(m);
    }
    double dmin = 1.0;
    for (double z : s.z) {
        const double d = time_coefficient(z, spec.p, spec.A);
        if (!(d >= spec.delta_hyp)) return std::nullopt;
        dmin = std::min(dmin, d);
    }
    return 1.0 / std::sqrt(dmin);
}

struct StepResult {
    GridState state;
    std::optional<BlowupEvent> event;
    double dt = 0.0;
    double gradient = 0.0;  // max gradient of the returned state
};

/// Gradient threshold for a run starting from `init`.
inline double resolve_threshold(const GridState& init, const SolverConfig& cfg) {
    if (cfg.gradient_threshold) return *cfg.gradient_threshold;
    const double g0 = detail::max_gradient(init);
    const double w0 = detail::max_amplitude(init);
    if (g0 == 0.0 || w0 == 0.0) return std::numeric_limits<double>::infinity();
    return std::min(cfg.gradient_growth * g0, cfg.gradient_fraction * w0 / cfg.dx);
}

/// Advance one step of at most dt_cap.  Guard violations and threshold
/// crossings are reported through `event`; the state is then returned unchanged
/// for pre-step events and advanced for threshold crossings.
inline StepResult step(const GridState& s, const SolverConfig& cfg, const ProblemSpec& spec, double threshold,
                       double dt_cap = std::numeric_limits<double>::infinity()) {
    StepResult out;
    const double g_start = detail::max_gradient(s);
    if (g_start >= threshold) {
        out.state = s;
        out.event = BlowupEvent{s.t, BlowupCriterion::GradientThreshold};
        out.gradient = g_start;
        return out;
    }
    const auto speed = max_speed(s, spec);
    if (!speed) {
        out.state = s;
        out.event = BlowupEvent{s.t, BlowupCriterion::HyperbolicityLoss};
        out.gradient = g_start;
        return out;
    }
    double dt = cfg.cfl * s.dx / *speed;
    // equal substeps up to the cap
    if (dt >= dt_cap) dt = dt_cap;
    else if (std::isfinite(dt_cap)) dt = dt_cap / std::ceil(dt_cap / dt * (1.0 - 1e-12));
    if (dt < cfg.dt_min) {
        out.state = s;
        out.event = BlowupEvent{s.t, BlowupCriterion::CflCollapse};
        out.gradient = g_start;
        return out;
    }

    const double dx = s.dx;
    const double t_new = s.t + dt;
    const long half = std::max(detail::cone_halfwidth(spec.data.sigma(), t_new, dx), -s.i_lo);
    GridState ns;
    ns.t = t_new;
    ns.dx = dx;
    ns.i_lo = -half;
    const auto n = static_cast<std::size_t>(2 * half + 1);
    const std::vector<double> v = detail::embed(s.v, s.i_lo, ns.i_lo, n);
    const std::vector<double> z = detail::embed(s.z, s.i_lo, ns.i_lo, n);
    const double p = spec.p, A = spec.A;
    const double lam = dt / dx;

    if (spec.variant == Variant::SpaceDerivative) {
        const std::vector<double> w = detail::embed(s.w, s.i_lo, ns.i_lo, n);
        std::vector<double> fw(n);
        for (std::size_t i = 0; i < n; ++i) fw[i] = flux(w[i], p, A);
        ns.w.resize(n);
        ns.z.resize(n);
        auto W = [&](std::ptrdiff_t i) { return (i < 0 || i >= static_cast<std::ptrdiff_t>(n)) ? 0.0 : w[static_cast<std::size_t>(i)]; };
        auto Z = [&](std::ptrdiff_t i) { return (i < 0 || i >= static_cast<std::ptrdiff_t>(n)) ? 0.0 : z[static_cast<std::size_t>(i)]; };
        auto FW = [&](std::ptrdiff_t i) { return (i < 0 || i >= static_cast<std::ptrdiff_t>(n)) ? 0.0 : fw[static_cast<std::size_t>(i)]; };
        const auto nn = static_cast<std::ptrdiff_t>(n);
        if (cfg.scheme == Scheme::LaxWendroff) {
            // Richtmyer two-step: half-step states on interfaces j + 1/2, j = -1 .. n-1
            std::vector<double> gz(n + 1), gw(n + 1);
            for (std::ptrdiff_t j = -1; j < nn; ++j) {
                const double wh = 0.5 * (W(j) + W(j + 1)) + 0.5 * lam * (Z(j + 1) - Z(j));
                const double zh = 0.5 * (Z(j) + Z(j + 1)) + 0.5 * lam * (FW(j + 1) - FW(j));
                gz[static_cast<std::size_t>(j + 1)] = zh;
                gw[static_cast<std::size_t>(j + 1)] = flux(wh, p, A);
            }
            for (std::size_t i = 0; i < n; ++i) {
                ns.w[i] = w[i] + lam * (gz[i + 1] - gz[i]);
                ns.z[i] = z[i] + lam * (gw[i + 1] - gw[i]);
            }
        } else {
            for (std::ptrdiff_t i = 0; i < nn; ++i) {
                const auto k = static_cast<std::size_t>(i);
                ns.w[k] = 0.5 * (W(i - 1) + W(i + 1)) + 0.5 * lam * (Z(i + 1) - Z(i - 1));
                ns.z[k] = 0.5 * (Z(i - 1) + Z(i + 1)) + 0.5 * lam * (FW(i + 1) - FW(i - 1));
            }
        }
        ns.v.resize(n);
        for (std::size_t i = 0; i < n; ++i) ns.v[i] = v[i] + 0.5 * dt * (z[i] + ns.z[i]);
    } else {
        // (1 - A|z|^{p-2}z) z_t = v_xx, advanced by a velocity-Verlet splitting.
        const double idx2 = 1.0 / (dx * dx);
        auto laplacian = [&](const std::vector<double>& u, std::vector<double>& out) {
            out.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double l = i > 0 ? u[i - 1] : 0.0;
                const double r = i + 1 < n ? u[i + 1] : 0.0;
                out[i] = (l - 2.0 * u[i] + r) * idx2;
            }
        };
        std::vector<double> lap;
        laplacian(v, lap);
        std::vector<double> zh(n);
        for (std::size_t i = 0; i < n; ++i) zh[i] = z[i] + 0.5 * dt * lap[i] / time_coefficient(z[i], p, A);
        ns.v.resize(n);
        for (std::size_t i = 0; i < n; ++i) ns.v[i] = v[i] + dt * zh[i];
        laplacian(ns.v, lap);
        ns.z.resize(n);
        bool lost = false;
        for (std::size_t i = 0; i < n; ++i) {
            double zn = zh[i];
            for (int it = 0; it < 4; ++it) {
                const double d = time_coefficient(zn, p, A);
                if (!(d >= spec.delta_hyp)) {
                    lost = true;
                    break;
                }
                zn = zh[i] + 0.5 * dt * lap[i] / d;
            }
            ns.z[i] = zn;
        }
        detail::fill_gradient(ns);
        if (lost) {
            out.state = s;
            out.event = BlowupEvent{t_new, BlowupCriterion::HyperbolicityLoss};
            out.dt = dt;
            out.gradient = g_start;
            return out;
        }
    }

    const double g_new = detail::max_gradient(ns);
    out.dt = dt;
    out.gradient = g_new;
    if (!std::isfinite(g_new)) {
        out.event = BlowupEvent{t_new, BlowupCriterion::GradientThreshold};
    } else if (g_new >= threshold) {
        // 1/G is close to affine in t just before a gradient blow-up
        double td = t_new;
        if (g_start > 0.0) {
            const double a = 1.0 / g_start, b = 1.0 / g_new, c = 1.0 / threshold;
            if (a > b) td = s.t + dt * (a - c) / (a - b);
        }
        out.event = BlowupEvent{std::clamp(td, s.t, t_new), BlowupCriterion::GradientThreshold};
    }
    out.state = std::move(ns);
    return out;
}

/// Solve from t = 0 until a blow-up event or t_max.
inline RunTrace solve(const ProblemSpec& spec, const SolverConfig& cfg) {
    spec.validate();
    cfg.validate();
    RunTrace trace;
    trace.variant = spec.variant;
    trace.dx = cfg.dx;
    trace.sigma = spec.data.sigma();

    GridState s = initial_state(spec, cfg.dx);
    trace.initial_gradient = detail::max_gradient(s);
    trace.threshold = resolve_threshold(s, cfg);
    trace.snapshots.push_back(s);

    const double dT = cfg.snapshot_interval;
    long next_snap = 1;
    while (s.t < cfg.t_max) {
        double target = cfg.t_max;
        if (dT > 0.0) target = std::min(target, static_cast<double>(next_snap) * dT);
        const double cap = target - s.t;
        StepResult r = step(s, cfg, spec, trace.threshold, cap);
        if (r.event && r.dt == 0.0) {  // event before any advance
            trace.blowup = r.event;
            break;
        }
        if (r.event && r.event->criterion == BlowupCriterion::HyperbolicityLoss) {
            trace.blowup = r.event;
            break;
        }
        ++trace.steps;
        s = std::move(r.state);
        // land exactly on snapshot/horizon times
        if (std::fabs(s.t - target) <= 1e-12 * std::max(1.0, target)) s.t = target;
        if (r.event) {
            trace.blowup = r.event;
            break;
        }
        if (dT > 0.0 && s.t == static_cast<double>(next_snap) * dT) {
            trace.snapshots.push_back(s);
            ++next_snap;
        }
    }
    trace.final_time = s.t;
    if (trace.snapshots.back().t != s.t) trace.snapshots.push_back(std::move(s));
    return trace;
}

struct BlowupEstimate {
    double T_est = std::numeric_limits<double>::infinity();
    double uncertainty = 0.0;
    std::vector<std::pair<double, double>> refinement_levels;  // (dx, detected time or inf)
    std::vector<std::string> criteria;
    double order = 1.0;
    bool low_confidence = false;

    bool finite() const { return std::isfinite(T_est); }
};

/// Detected blow-up times on dx, dx/2, ... and their Richardson limit.
inline BlowupEstimate estimate_lifespan(const ProblemSpec& spec, const SolverConfig& cfg, int levels) {
    if (levels < 2) throw InvalidArgument("estimate_lifespan needs at least 2 levels");
    BlowupEstimate est;
    std::vector<double> finite_t;
    for (int k = 0; k < levels; ++k) {
        SolverConfig c = cfg;
        c.dx = cfg.dx / std::pow(2.0, k);
        c.snapshot_interval = 0.0;
        const RunTrace tr = solve(spec, c);
        const double t = tr.blowup ? tr.blowup->detected_time : std::numeric_limits<double>::infinity();
        est.refinement_levels.emplace_back(c.dx, t);
        est.criteria.emplace_back(tr.blowup ? to_string(tr.blowup->criterion) : "none");
        if (std::isfinite(t)) finite_t.push_back(t);
    }
    if (finite_t.empty()) return est;
    if (finite_t.size() != static_cast<std::size_t>(levels)) est.low_confidence = true;
    const std::size_t m = finite_t.size();
    if (m == 1) {
        est.T_est = finite_t[0];
        est.uncertainty = std::numeric_limits<double>::infinity();
        est.low_confidence = true;
        return est;
    }
    // consistent direction of change across levels
    for (std::size_t i = 2; i < m; ++i) {
        const double d0 = finite_t[i - 1] - finite_t[i - 2], d1 = finite_t[i] - finite_t[i - 1];
        if (d0 * d1 < 0.0) est.low_confidence = true;
    }
    double order = 1.0;
    if (m >= 3) {
        const double d0 = finite_t[m - 2] - finite_t[m - 3], d1 = finite_t[m - 1] - finite_t[m - 2];
        if (d0 != 0.0 && d1 != 0.0 && d0 / d1 > 0.0) {
            order = std::log2(d0 / d1);
            if (order < 0.5 || order > 4.0) {
                est.low_confidence = true;
                order = std::clamp(order, 0.5, 4.0);
            }
        }
    }
    est.order = order;
    const double last = finite_t[m - 1], prev = finite_t[m - 2];
    est.T_est = last + (last - prev) / (std::pow(2.0, order) - 1.0);
    est.uncertainty = std::fabs(last - prev);
    return est;
}

/// Antiderivative field u on the snapshot grid: int_{-inf}^x v dy (space) or int_0^t v ds (time).
struct UField {
    Variant variant = Variant::SpaceDerivative;
    double dx = 0.0;
    std::vector<double> times;
    std::vector<long> i_lo;
    std::vector<std::vector<double>> values;

    std::size_t size() const { return times.size(); }

    /// u at snapshot k; zero to the left, constant (space) or zero (time) to the right.
    double at_snapshot(std::size_t k, double x) const {
        const auto& u = values[k];
        if (u.empty()) return 0.0;
        const double x0 = static_cast<double>(i_lo[k]) * dx;
        const double x1 = x0 + dx * static_cast<double>(u.size() - 1);
        if (x <= x0) return x < x0 - dx ? 0.0 : quad::cubic_interp(u, x0, dx, x);
        if (x >= x1) {
            if (variant == Variant::SpaceDerivative) return u.back();
            return x > x1 + dx ? 0.0 : quad::cubic_interp(u, x0, dx, x);
        }
        return quad::cubic_interp(u, x0, dx, x);
    }

    /// Piecewise-linear value at snapshot k (used for bilinear sampling).
    double linear_at_snapshot(std::size_t k, double x) const {
        const auto& u = values[k];
        if (u.empty()) return 0.0;
        const double r = x / dx - static_cast<double>(i_lo[k]);
        const auto n = static_cast<std::ptrdiff_t>(u.size());
        auto at = [&](std::ptrdiff_t i) {
            if (i < 0) return 0.0;
            if (i >= n) return variant == Variant::SpaceDerivative ? u.back() : 0.0;
            return u[static_cast<std::size_t>(i)];
        };
        const auto i = static_cast<std::ptrdiff_t>(std::floor(r));
        const double t = r - static_cast<double>(i);
        return (1.0 - t) * at(i) + t * at(i + 1);
    }

    /// Bilinear interpolation in (x, t); nullopt outside the stored time range.
    std::optional<double> bilinear(double x, double t) const {
        if (times.empty() || t < times.front() || t > times.back()) return std::nullopt;
        auto it = std::upper_bound(times.begin(), times.end(), t);
        std::size_t k1 = static_cast<std::size_t>(it - times.begin());
        if (k1 >= times.size()) k1 = times.size() - 1;
        const std::size_t k0 = k1 == 0 ? 0 : k1 - 1;
        if (k0 == k1) return linear_at_snapshot(k0, x);
        const double a = (t - times[k0]) / (times[k1] - times[k0]);
        return (1.0 - a) * linear_at_snapshot(k0, x) + a * linear_at_snapshot(k1, x);
    }
};

/// Cumulative integration of v in x (space variant) or t (time variant), with
/// the stored derivative (w or z) supplying the endpoint correction.
inline UField antiderivative_u(const RunTrace& trace, Variant variant) {
    UField u;
    u.variant = variant;
    u.dx = trace.dx;
    const auto& snaps = trace.snapshots;
    for (const auto& s : snaps) {
        u.times.push_back(s.t);
        u.i_lo.push_back(s.i_lo);
    }
    if (variant == Variant::SpaceDerivative) {
        for (const auto& s : snaps) {
            u.values.push_back(quad::cumulative_corrected_trapezoid(s.dx, s.v, s.w));
        }
        return u;
    }
    // time variant: u(., t_0) = 0, then step between snapshots on the current extent
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        const auto& s = snaps[k];
        std::vector<double> cur(s.size(), 0.0);
        if (k > 0) {
            const auto& ps = snaps[k - 1];
            const double h = s.t - ps.t;
            const auto prev_u = detail::embed(u.values[k - 1], ps.i_lo, s.i_lo, s.size());
            const auto pv = detail::embed(ps.v, ps.i_lo, s.i_lo, s.size());
            const auto pz = detail::embed(ps.z, ps.i_lo, s.i_lo, s.size());
            for (std::size_t i = 0; i < s.size(); ++i) {
                cur[i] = prev_u[i] + 0.5 * h * (pv[i] + s.v[i]) + h * h / 12.0 * (pz[i] - s.z[i]);
            }
        }
        u.values.push_back(std::move(cur));
    }
    return u;
}

}  // namespace qlwave
