#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "qlwave/error.hpp"

namespace qlwave::quad {

/// Simpson weights for one panel [x0, x2] with unequal halves h0 = x1 - x0, h1 = x2 - x1.
/// Exact for quadratics; reduces to h/3 (1, 4, 1) on a uniform panel.
inline double simpson_panel(double h0, double h1, double y0, double y1, double y2) {
    const double h = h0 + h1;
    return h / 6.0 *
           (y0 * (2.0 - h1 / h0) + y1 * (h * h / (h0 * h1)) + y2 * (2.0 - h0 / h1));
}

/// Integral over the last interval [x1, x2] of the quadratic through three points.
inline double quadratic_tail(double h0, double h1, double y0, double y1, double y2) {
    // Quadratic through (−h0, y0), (0, y1), (h1, y2) integrated over [0, h1].
    const double a = (y2 - y1) / h1 - (y1 - y0) / h0;  // = c (h0 + h1)
    const double c = a / (h0 + h1);
    const double b = (y2 - y1) / h1 - c * h1;
    return h1 * (y1 + b * h1 / 2.0 + c * h1 * h1 / 3.0);
}

/// Composite Simpson over samples at increasing abscissae; an odd panel
/// count closes with the quadratic through the last three samples.
inline double simpson(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n != y.size()) throw InvalidArgument("simpson: abscissa/ordinate size mismatch");
    if (n < 2) return 0.0;
    if (n == 2) return 0.5 * (x[1] - x[0]) * (y[0] + y[1]);
    double s = 0.0;
    std::size_t i = 0;
    for (; i + 2 < n; i += 2) s += simpson_panel(x[i + 1] - x[i], x[i + 2] - x[i + 1], y[i], y[i + 1], y[i + 2]);
    if (i + 1 < n) s += quadratic_tail(x[i] - x[i - 1], x[i + 1] - x[i], y[i - 1], y[i], y[i + 1]);
    return s;
}

/// Uniform-spacing composite Simpson of fn on [a, b] with `panels` subintervals (rounded up to even).
template <class Fn>
double simpson(Fn&& fn, double a, double b, int panels) {
    if (b == a) return 0.0;
    if (panels < 2) panels = 2;
    if (panels % 2) ++panels;
    const double h = (b - a) / panels;
    double s = fn(a) + fn(b);
    for (int i = 1; i < panels; ++i) s += fn(a + h * i) * ((i % 2) ? 4.0 : 2.0);
    return s * h / 3.0;
}

/// Running integrals I_k = int_{x_0}^{x_k} y for every k, fourth order where
/// the samples are smooth: even k by Simpson pairs, odd k by pairs plus a quadratic tail.
inline std::vector<double> cumulative_simpson(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n != y.size()) throw InvalidArgument("cumulative_simpson: size mismatch");
    std::vector<double> out(n, 0.0);
    if (n < 2) return out;
    out[1] = n == 2 ? 0.5 * (x[1] - x[0]) * (y[0] + y[1])
                    : simpson_panel(x[1] - x[0], x[2] - x[1], y[0], y[1], y[2]) -
                          quadratic_tail(x[1] - x[0], x[2] - x[1], y[0], y[1], y[2]);
    for (std::size_t k = 2; k < n; ++k) {
        if (k % 2 == 0) {
            out[k] = out[k - 2] + simpson_panel(x[k - 1] - x[k - 2], x[k] - x[k - 1], y[k - 2], y[k - 1], y[k]);
        } else {
            out[k] = out[k - 1] + quadratic_tail(x[k - 1] - x[k - 2], x[k] - x[k - 1], y[k - 2], y[k - 1], y[k]);
        }
    }
    return out;
}

/// Trapezoid with endpoint derivative correction on a uniform grid:
/// int_{x_i}^{x_{i+1}} y ~ h/2 (y_i + y_{i+1}) + h^2/12 (y'_i - y'_{i+1}).
inline std::vector<double> cumulative_corrected_trapezoid(double h, std::span<const double> y,
                                                          std::span<const double> dy) {
    std::vector<double> out(y.size(), 0.0);
    for (std::size_t i = 1; i < y.size(); ++i) {
        out[i] = out[i - 1] + 0.5 * h * (y[i - 1] + y[i]) + h * h / 12.0 * (dy[i - 1] - dy[i]);
    }
    return out;
}

/// Adaptive 15-point Gauss-Kronrod quadrature on [a, b].
template <class Fn>
double adaptive(Fn&& fn, double a, double b, double tol = 1e-13, unsigned max_depth = 30,
                double* error = nullptr) {
    if (a == b) return 0.0;
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(fn, a, b, max_depth, tol, &err);
    if (error) *error = err;
    return v;
}

/// Four-point Lagrange interpolation on a uniform grid y[i] = y(x0 + i h), zero outside.
inline double cubic_interp(std::span<const double> y, double x0, double h, double x) {
    const auto n = static_cast<std::ptrdiff_t>(y.size());
    if (n == 0) return 0.0;
    const double r = (x - x0) / h;
    if (r < -1.0 || r > static_cast<double>(n)) return 0.0;
    auto at = [&](std::ptrdiff_t i) { return (i < 0 || i >= n) ? 0.0 : y[static_cast<std::size_t>(i)]; };
    if (n == 1) return at(0);
    auto i = static_cast<std::ptrdiff_t>(std::floor(r));
    i = std::max<std::ptrdiff_t>(std::min<std::ptrdiff_t>(i, n - 2), 0);
    const double t = r - static_cast<double>(i);
    return at(i - 1) * (-t * (t - 1) * (t - 2) / 6.0) + at(i) * ((t + 1) * (t - 1) * (t - 2) / 2.0) +
           at(i + 1) * (-(t + 1) * t * (t - 2) / 2.0) + at(i + 2) * ((t + 1) * t * (t - 1) / 6.0);
}

/// Golden-section maximization of a unimodal fn on [a, b].
template <class Fn>
double golden_section_max(Fn&& fn, double a, double b, double tol = 1e-13, int max_iter = 200) {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = fn(c), fd = fn(d);
    for (int it = 0; it < max_iter && (b - a) > tol * (1.0 + std::fabs(a) + std::fabs(b)); ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = fn(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = fn(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace qlwave::quad
