#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qlwave/error.hpp"

namespace qlwave {

/// sign(w)|w|^e, well defined for every e > 0.  Integer exponents avoid pow.
inline double signed_pow(double w, double e) {
    if (e == 1.0) return w;
    if (e == 2.0) return w * std::fabs(w);
    const double a = std::fabs(w);
    if (a == 0.0) return 0.0;
    return std::copysign(std::pow(a, e), w);
}

/// |w|^e for e > 0.
inline double abs_pow(double w, double e) {
    const double a = std::fabs(w);
    if (e == 1.0) return a;
    if (e == 2.0) return a * a;
    if (e == 3.0) return a * a * a;
    if (a == 0.0) return 0.0;
    return std::pow(a, e);
}

enum class Variant { SpaceDerivative, TimeDerivative };

inline const char* to_string(Variant v) {
    return v == Variant::SpaceDerivative ? "space" : "time";
}

/// Compactly supported C^2 bump  amplitude * (1 - s^2)^3,  s = (x - center) / halfwidth.
struct BumpProfile {
    double center = 0.0;
    double halfwidth = 1.0;
    double amplitude = 0.0;

    /// Analytic derivative of the given order (0, 1 or 2).
    double eval(double x, int order = 0) const {
        const double s = (x - center) / halfwidth;
        if (std::fabs(s) >= 1.0) return 0.0;
        const double q = 1.0 - s * s;
        switch (order) {
            case 0: return amplitude * q * q * q;
            case 1: return amplitude * (-6.0 * s * q * q) / halfwidth;
            case 2: return amplitude * (q * (30.0 * s * s - 6.0)) / (halfwidth * halfwidth);
            default: throw InvalidArgument("bump derivative order must be 0, 1 or 2");
        }
    }

    double operator()(double x) const { return eval(x, 0); }

    /// Exact integral over [a, b].
    double integral(double a, double b) const {
        // antiderivative of (1-s^2)^3 in s
        auto prim = [](double s) {
            s = std::clamp(s, -1.0, 1.0);
            const double s2 = s * s;
            return s * (1.0 - s2 + 0.6 * s2 * s2 - s2 * s2 * s2 / 7.0);
        };
        return amplitude * halfwidth * (prim((b - center) / halfwidth) - prim((a - center) / halfwidth));
    }

    /// Exact integral of (y + shift) * bump(y) over [a, b].
    double moment_integral(double a, double b, double shift) const {
        auto prim_s = [](double s) {  // antiderivative of s(1-s^2)^3
            s = std::clamp(s, -1.0, 1.0);
            const double q = 1.0 - s * s;
            return -q * q * q * q / 8.0;
        };
        const double sa = (a - center) / halfwidth;
        const double sb = (b - center) / halfwidth;
        const double first = amplitude * halfwidth * halfwidth * (prim_s(sb) - prim_s(sa));
        return first + (center + shift) * integral(a, b);
    }
};

inline BumpProfile make_bump_profile(double center, double halfwidth, double amplitude) {
    if (!(halfwidth > 0.0) || !std::isfinite(halfwidth)) {
        throw InvalidArgument("bump halfwidth must be positive, got " + std::to_string(halfwidth));
    }
    return BumpProfile{center, halfwidth, amplitude};
}

/// Uniformly tabulated samples, evaluated by cubic Lagrange interpolation
/// and extended by zero outside the table.
struct TabulatedProfile {
    double x0 = 0.0;
    double h = 1.0;
    std::vector<double> values;

    double x_end() const { return x0 + h * static_cast<double>(values.size() - 1); }

    double sample(std::ptrdiff_t i) const {
        if (i < 0 || i >= static_cast<std::ptrdiff_t>(values.size())) return 0.0;
        return values[static_cast<std::size_t>(i)];
    }

    double eval(double x, int order = 0) const {
        if (values.empty() || x < x0 || x > x_end()) return 0.0;
        const double r = (x - x0) / h;
        auto i = static_cast<std::ptrdiff_t>(std::floor(r));
        i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(values.size()) - 2);
        const double t = r - static_cast<double>(i);
        const double ym = sample(i - 1), y0 = sample(i), y1 = sample(i + 1), y2 = sample(i + 2);
        // Lagrange basis on nodes -1, 0, 1, 2
        switch (order) {
            case 0:
                return ym * (-t * (t - 1) * (t - 2) / 6.0) + y0 * ((t + 1) * (t - 1) * (t - 2) / 2.0) +
                       y1 * (-(t + 1) * t * (t - 2) / 2.0) + y2 * ((t + 1) * t * (t - 1) / 6.0);
            case 1: {
                const double dm = -(3 * t * t - 6 * t + 2) / 6.0;
                const double d0 = (3 * t * t - 4 * t - 1) / 2.0;
                const double d1 = -(3 * t * t - 2 * t - 2) / 2.0;
                const double d2 = (3 * t * t - 1) / 6.0;
                return (ym * dm + y0 * d0 + y1 * d1 + y2 * d2) / h;
            }
            case 2: {
                const double dm = -(t - 1.0);
                const double d0 = (3 * t - 2) ;
                const double d1 = -(3 * t - 1);
                const double d2 = t;
                return (ym * dm + y0 * d0 + y1 * d1 + y2 * d2) / (h * h);
            }
            default: throw InvalidArgument("tabulated derivative order must be 0, 1 or 2");
        }
    }
};

/// Initial profile: a finite sum of bumps (empty means identically zero) or a table.
class Profile {
public:
    using Bumps = std::vector<BumpProfile>;

    Profile() = default;
    explicit Profile(Bumps bumps) : rep_(std::move(bumps)) {}
    explicit Profile(BumpProfile bump) : rep_(Bumps{bump}) {}
    explicit Profile(TabulatedProfile table) : rep_(std::move(table)) {
        const auto& t = std::get<TabulatedProfile>(rep_);
        if (!(t.h > 0.0)) throw InvalidArgument("tabulated profile spacing must be positive");
        if (t.values.size() < 4) throw InvalidArgument("tabulated profile needs at least 4 samples");
    }

    static Profile zero() { return Profile{}; }

    bool is_tabulated() const { return std::holds_alternative<TabulatedProfile>(rep_); }
    const Bumps* bumps() const { return std::get_if<Bumps>(&rep_); }
    const TabulatedProfile* table() const { return std::get_if<TabulatedProfile>(&rep_); }

    double eval(double x, int order = 0) const {
        if (const auto* b = bumps()) {
            double s = 0.0;
            for (const auto& bump : *b) s += bump.eval(x, order);
            return s;
        }
        return std::get<TabulatedProfile>(rep_).eval(x, order);
    }

    double operator()(double x) const { return eval(x, 0); }

    /// Closed interval outside which the profile vanishes; nullopt when identically zero.
    std::optional<std::pair<double, double>> support() const {
        if (const auto* b = bumps()) {
            std::optional<std::pair<double, double>> s;
            for (const auto& bump : *b) {
                if (bump.amplitude == 0.0) continue;
                const double lo = bump.center - bump.halfwidth, hi = bump.center + bump.halfwidth;
                if (!s) s = std::pair{lo, hi};
                else s = std::pair{std::min(s->first, lo), std::max(s->second, hi)};
            }
            return s;
        }
        const auto& t = std::get<TabulatedProfile>(rep_);
        std::ptrdiff_t first = -1, last = -1;
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            if (t.values[i] != 0.0) {
                if (first < 0) first = static_cast<std::ptrdiff_t>(i);
                last = static_cast<std::ptrdiff_t>(i);
            }
        }
        if (first < 0) return std::nullopt;
        // cubic interpolation reaches one cell past the outermost nonzero sample
        return std::pair{t.x0 + t.h * static_cast<double>(first - 1),
                         t.x0 + t.h * static_cast<double>(last + 1)};
    }

    /// Integral over [a, b]: exact for bumps, composite Simpson on 2048 panels otherwise.
    double integral(double a, double b) const {
        if (b <= a) return 0.0;
        if (const auto* bs = bumps()) {
            double s = 0.0;
            for (const auto& bump : *bs) s += bump.integral(a, b);
            return s;
        }
        return simpson_([this](double x) { return eval(x); }, a, b);
    }

    /// Integral of (y + shift) * profile(y) over [a, b].
    double moment_integral(double a, double b, double shift) const {
        if (b <= a) return 0.0;
        if (const auto* bs = bumps()) {
            double s = 0.0;
            for (const auto& bump : *bs) s += bump.moment_integral(a, b, shift);
            return s;
        }
        return simpson_([this, shift](double y) { return (y + shift) * eval(y); }, a, b);
    }

    /// Profile translated by offset (x -> x - offset).
    Profile translated(double offset) const {
        if (const auto* bs = bumps()) {
            Bumps out = *bs;
            for (auto& b : out) b.center += offset;
            return Profile{std::move(out)};
        }
        auto t = std::get<TabulatedProfile>(rep_);
        t.x0 += offset;
        return Profile{std::move(t)};
    }

private:
    template <class Fn>
    static double simpson_(Fn&& fn, double a, double b) {
        constexpr int panels = 2048;
        const double h = (b - a) / panels;
        double s = fn(a) + fn(b);
        for (int i = 1; i < panels; ++i) s += fn(a + h * i) * ((i % 2) ? 4.0 : 2.0);
        return s * h / 3.0;
    }

    std::variant<Bumps, TabulatedProfile> rep_;
};

struct PositivityFlags {
    bool f_nonneg = false;
    bool g_nonneg = false;
    bool f_nontrivial = false;
    bool g_nontrivial = false;
};

/// Initial data (f, g) supported in |x| <= sigma, sigma >= 1.
class InitialData {
public:
    static constexpr int kSamples = 20001;

    InitialData(Profile f, Profile g, double sigma)
        : f_(std::move(f)), g_(std::move(g)), sigma_(sigma) {
        if (!(sigma_ >= 1.0) || !std::isfinite(sigma_)) {
            throw InvalidArgument("support radius sigma must satisfy sigma >= 1, got " + std::to_string(sigma_));
        }
        check_support_(f_, "f");
        check_support_(g_, "g");
        flags_ = compute_flags_();
    }

    const Profile& f() const { return f_; }
    const Profile& g() const { return g_; }
    double sigma() const { return sigma_; }
    const PositivityFlags& flags() const { return flags_; }

    /// max |g| on the support (sampled).
    double g_sup_norm() const {
        double m = 0.0;
        for (int i = 0; i < kSamples; ++i) m = std::max(m, std::fabs(g_(sample_x(i))));
        return m;
    }

    double sample_x(int i) const {
        return -sigma_ + 2.0 * sigma_ * static_cast<double>(i) / static_cast<double>(kSamples - 1);
    }

private:
    void check_support_(const Profile& p, const char* name) const {
        const auto s = p.support();
        if (!s) return;
        constexpr double tol = 1e-12;
        if (s->first < -sigma_ - tol || s->second > sigma_ + tol) {
            // tables may carry explicit zeros past sigma; sample to decide
            const double lo = std::min(s->first, -sigma_), hi = std::max(s->second, sigma_);
            constexpr int n = 4001;
            for (int i = 0; i < n; ++i) {
                const double x = lo + (hi - lo) * i / (n - 1);
                if (std::fabs(x) > sigma_ + tol && p(x) != 0.0) {
                    throw InvalidArgument(std::string("profile ") + name + " is not supported in |x| <= sigma");
                }
            }
        }
    }

    PositivityFlags compute_flags_() const {
        double fmin = 0.0, gmin = 0.0, fmax = 0.0, gmax = 0.0;
        for (int i = 0; i < kSamples; ++i) {
            const double x = sample_x(i);
            const double fv = f_(x), gv = g_(x);
            fmin = std::min(fmin, fv);
            gmin = std::min(gmin, gv);
            fmax = std::max(fmax, std::fabs(fv));
            gmax = std::max(gmax, std::fabs(gv));
        }
        PositivityFlags fl;
        fl.f_nonneg = fmin >= -1e-14 * std::max(1.0, fmax);
        fl.g_nonneg = gmin >= -1e-14 * std::max(1.0, gmax);
        fl.f_nontrivial = fmax > 0.0;
        fl.g_nontrivial = gmax > 0.0;
        return fl;
    }

    Profile f_;
    Profile g_;
    double sigma_;
    PositivityFlags flags_;
};

/// The initial value problem: exponent p, coefficient A, amplitude epsilon.
struct ProblemSpec {
    double p;
    double A;
    double epsilon;
    Variant variant;
    InitialData data;
    /// Smallest admissible squared speed (or time-derivative coefficient).
    double delta_hyp = 1e-6;

    ProblemSpec(double p_, double A_, double epsilon_, Variant variant_, InitialData data_,
                double delta_hyp_ = 1e-6)
        : p(p_), A(A_), epsilon(epsilon_), variant(variant_), data(std::move(data_)), delta_hyp(delta_hyp_) {
        validate();
    }

    void validate() const {
        if (!(p > 1.0) || !std::isfinite(p)) throw InvalidArgument("exponent p must exceed 1");
        if (!(A > 0.0) && !(A == 0.0)) throw InvalidArgument("coefficient A must be positive");
        if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("amplitude epsilon must be positive");
        if (!(delta_hyp > 0.0)) throw InvalidArgument("hyperbolicity guard must be positive");
    }

    ProblemSpec with_epsilon(double eps) const {
        ProblemSpec s = *this;
        s.epsilon = eps;
        s.validate();
        return s;
    }

    /// v -> lambda v maps the coefficient A to p; the normalized amplitude is epsilon / lambda.
    double normalization_scale() const { return std::pow(p / A, 1.0 / (p - 1.0)); }
};

/// 1 + A|w|^{p-2}w, the squared characteristic speed of the space-derivative equation.
inline double speed_radicand(double w, double p, double A) { return 1.0 + A * signed_pow(w, p - 1.0); }

inline double wave_speed(double w, double p, double A, double delta_hyp = 1e-6) {
    const double r = speed_radicand(w, p, A);
    if (!(r >= delta_hyp)) {
        throw HyperbolicityLoss("wave speed radicand " + std::to_string(r) + " below guard", r);
    }
    return std::sqrt(r);
}

/// c(w) = sqrt(1 + A|w|^{p-2}w).
inline double wave_speed(double w, const ProblemSpec& spec) {
    return wave_speed(w, spec.p, spec.A, spec.delta_hyp);
}

/// 1 - A|z|^{p-2}z, the coefficient of v_tt in the time-derivative equation.
inline double time_coefficient(double z, double p, double A) { return 1.0 - A * signed_pow(z, p - 1.0); }

enum class Assumption { Positive1, Positive2 };

/// Which initial profile drives a lower bound.
enum class Branch { FBranch, GBranch };

inline const char* to_string(Branch b) { return b == Branch::FBranch ? "f" : "g"; }

struct ValidationReport {
    Assumption assumption = Assumption::Positive1;
    double sigma = 0.0;
    double sigma0 = 0.0;
    double window_lo = 0.0;
    double window_hi = 0.0;
    bool positivity = false;
    bool nontrivial = false;         // the branch profile is nonzero somewhere
    double window_integral = 0.0;    // integral of the branch profile over the window
    bool window_nontrivial = false;
    bool sigma_condition = true;     // sigma > 3 sigma0 on the Positive2 branch
    std::optional<double> translation_offset;
    std::vector<std::string> notes;

    bool passes() const { return positivity && window_nontrivial && sigma_condition; }
};

/// Report-style check of the positivity assumptions and the window
/// (-sigma, -(sigma + sigma0)/2) on which the branch profile must be nontrivial.
inline ValidationReport validate_initial_data(const InitialData& data, Assumption assumption, double sigma0) {
    const double sigma = data.sigma();
    if (!(sigma0 > 0.0 && sigma0 < sigma)) {
        throw InvalidArgument("sigma0 must lie in (0, sigma)");
    }
    ValidationReport r;
    r.assumption = assumption;
    r.sigma = sigma;
    r.sigma0 = sigma0;
    r.window_lo = -sigma;
    r.window_hi = -(sigma + sigma0) / 2.0;

    const auto& fl = data.flags();
    r.positivity = fl.f_nonneg && fl.g_nonneg;
    if (!fl.f_nonneg) r.notes.emplace_back("f takes negative values");
    if (!fl.g_nonneg) r.notes.emplace_back("g takes negative values");

    const Profile& branch = assumption == Assumption::Positive1 ? data.f() : data.g();
    r.nontrivial = assumption == Assumption::Positive1 ? fl.f_nontrivial : fl.g_nontrivial;
    r.window_integral = branch.integral(r.window_lo, r.window_hi);
    r.window_nontrivial = r.window_integral > 0.0;

    if (assumption == Assumption::Positive2) {
        r.sigma_condition = sigma > 3.0 * sigma0;
        if (!r.sigma_condition) r.notes.emplace_back("requires sigma > 3 sigma0");
    }

    if (!r.window_nontrivial && r.nontrivial) {
        const auto bs = branch.support();
        const auto fs = data.f().support();
        const auto gs = data.g().support();
        double lo = bs->first, hi = bs->second;
        if (fs) { lo = std::min(lo, fs->first); hi = std::max(hi, fs->second); }
        if (gs) { lo = std::min(lo, gs->first); hi = std::max(hi, gs->second); }
        const double offset = -sigma - bs->first;
        constexpr double tol = 1e-12;
        if (lo + offset >= -sigma - tol && hi + offset <= sigma + tol) {
            r.translation_offset = offset;
            r.notes.emplace_back("translate data by " + std::to_string(offset) + " to populate the window");
        } else {
            r.notes.emplace_back("no admissible translation populates the window");
        }
    }
    return r;
}

}  // namespace qlwave
