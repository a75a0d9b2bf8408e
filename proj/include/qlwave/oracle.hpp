#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "qlwave/error.hpp"
#include "qlwave/model.hpp"
#include "qlwave/quadrature.hpp"

/// Exact blow-up times of simple waves: straight characteristics of the
/// space-derivative equation and their first crossing.
namespace qlwave::oracle {

namespace detail {

/// int_0^w c(s) ds with s = w u^2, which smooths the |s|^{p-1} endpoint behaviour.
inline double ell_integral(double w, double p, double A) {
    return quad::adaptive([&](double u) { return 2.0 * w * u * std::sqrt(speed_radicand(w * u * u, p, A)); }, 0.0,
                          1.0, 1e-14, 15);
}

}  // namespace detail

/// ell(w) = int_0^w c(s) ds.  Closed form for p = 2, adaptive Gauss-Kronrod otherwise.
inline double ell(double w, double p, double A, double delta_hyp = 1e-6) {
    if (w == 0.0) return 0.0;
    if (A == 0.0) return w;
    // 1 + A|s|^{p-2}s is monotone in s, so the endpoint decides hyperbolicity on [0, w]
    const double r = speed_radicand(w, p, A);
    if (!(r >= delta_hyp)) {
        throw HyperbolicityLoss("hyperbolicity lost inside the integration range of ell", r);
    }
    if (p == 2.0) return 2.0 / (3.0 * A) * (std::pow(1.0 + A * w, 1.5) - 1.0);
    return detail::ell_integral(w, p, A);
}

inline double ell(double w, const ProblemSpec& spec) { return ell(w, spec.p, spec.A, spec.delta_hyp); }

/// Same integral by quadrature only, for cross-checking the closed form.
inline double ell_quadrature(double w, double p, double A) {
    return detail::ell_integral(w, p, A);
}

/// dc/dw = A (p-1) |w|^{p-2} / (2 c(w)).
inline double speed_derivative(double w, double p, double A, double delta_hyp = 1e-6) {
    const double c = wave_speed(w, p, A, delta_hyp);
    if (p == 2.0) return A / (2.0 * c);
    return A * (p - 1.0) * abs_pow(w, p - 2.0) / (2.0 * c);
}

struct SimpleWaveSetup {
    Profile profile;  // f
    double epsilon = 0.0;
    double p = 2.0;
    double A = 0.0;
    double sigma = 1.0;
    double delta_hyp = 1e-6;

    static SimpleWaveSetup from_spec(const ProblemSpec& spec) {
        if (spec.variant != Variant::SpaceDerivative) {
            throw InvalidArgument("simple-wave oracle applies to the space-derivative equation only");
        }
        return {spec.data.f(), spec.epsilon, spec.p, spec.A, spec.data.sigma(), spec.delta_hyp};
    }
};

inline constexpr int kTableSamples = 8193;

/// Data (f, g) with g = -ell(eps f')/eps, so the left-moving Riemann invariant
/// z + ell(w) vanishes identically and the solution is a right-moving simple wave.
inline InitialData simple_wave_data(const Profile& f, double epsilon, double p, double A, double sigma,
                                    double delta_hyp = 1e-6) {
    if (!(epsilon > 0.0)) throw InvalidArgument("simple_wave_data: epsilon must be positive");
    const auto supp = f.support();
    if (!supp) return InitialData(f, Profile::zero(), sigma);
    const double lo = supp->first, hi = supp->second;
    TabulatedProfile t;
    t.x0 = lo;
    t.h = (hi - lo) / (kTableSamples - 1);
    t.values.resize(kTableSamples);
    for (int i = 0; i < kTableSamples; ++i) {
        const double x = lo + t.h * i;
        const double w = epsilon * f.eval(x, 1);
        try {
            t.values[static_cast<std::size_t>(i)] = -ell(w, p, A, delta_hyp) / epsilon;
        } catch (const HyperbolicityLoss& e) {
            throw InvalidArgument(std::string("simple_wave_data: ") + e.what());
        }
    }
    t.values.front() = 0.0;
    t.values.back() = 0.0;
    return InitialData(f, Profile(std::move(t)), sigma);
}

inline InitialData simple_wave_data(const Profile& f, double epsilon, const ProblemSpec& spec) {
    return simple_wave_data(f, epsilon, spec.p, spec.A, spec.data.sigma(), spec.delta_hyp);
}

/// Compression rate -d/dx0 c(eps f'(x0)) along the characteristic from x0.
inline double compression_rate(const SimpleWaveSetup& s, double x0) {
    const double w = s.epsilon * s.profile.eval(x0, 1);
    const double wx = s.epsilon * s.profile.eval(x0, 2);
    return -speed_derivative(w, s.p, s.A, s.delta_hyp) * wx;
}

/// First crossing time of the characteristics x0 + c(eps f'(x0)) t; infinity if they never cross.
inline double crossing_time_exact(const SimpleWaveSetup& s) {
    if (s.A == 0.0) return std::numeric_limits<double>::infinity();
    if (s.p < 2.0) throw InvalidArgument("crossing_time_exact requires p >= 2");
    const auto supp = s.profile.support();
    if (!supp) return std::numeric_limits<double>::infinity();
    constexpr int samples = 10000;
    const double lo = supp->first, hi = supp->second;
    const double h = (hi - lo) / (samples - 1);
    double best = -std::numeric_limits<double>::infinity();
    int ibest = 0;
    for (int i = 0; i < samples; ++i) {
        const double r = compression_rate(s, lo + h * i);
        if (r > best) {
            best = r;
            ibest = i;
        }
    }
    const double a = std::max(lo, lo + h * (ibest - 1));
    const double b = std::min(hi, lo + h * (ibest + 1));
    const double xs = quad::golden_section_max([&](double x) { return compression_rate(s, x); }, a, b);
    best = std::max(best, compression_rate(s, xs));
    if (!(best > 0.0)) return std::numeric_limits<double>::infinity();
    return 1.0 / best;
}

}  // namespace qlwave::oracle
