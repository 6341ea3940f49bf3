#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracmfg/grids.hpp"

namespace fracmfg {

enum class WeightScheme { GrunwaldLetnikov, L1 };

/// Convolution weights realizing a discrete fractional operator of given
/// order on a uniform grid. For Grunwald-Letnikov the weights are the
/// binomial coefficients of (1-z)^order (order > 0: derivative, negative
/// entries after w_0; order < 0: integral, all positive). For L1 they are
/// the piecewise-linear Caputo coefficients a_k = (k+1)^{1-beta} - k^{1-beta}.
struct QuadratureWeights {
    double order = 0.0;
    WeightScheme scheme = WeightScheme::GrunwaldLetnikov;
    std::vector<double> weights;
    double dt_scale = 1.0; // multiply convolution by dt_scale = dt^{-order}
};

/// Grunwald-Letnikov weights for derivative order in (0,1):
/// w_0 = 1, w_k = w_{k-1} (1 - (order+1)/k). Array holds count+1 entries.
inline QuadratureWeights gl_weights(double order, int count) {
    if (!(order > 0.0) || !(order < 1.0))
        throw std::domain_error("gl_weights: order must lie in (0,1), got " +
                                std::to_string(order));
    if (count < 1) throw std::domain_error("gl_weights: count must be >= 1");
    QuadratureWeights q;
    q.order = order;
    q.scheme = WeightScheme::GrunwaldLetnikov;
    q.weights.resize(count + 1);
    q.weights[0] = 1.0;
    for (int k = 1; k <= count; ++k)
        q.weights[k] = q.weights[k - 1] * (1.0 - (order + 1.0) / k);
    return q;
}

namespace detail {

/// GL coefficients of (1-z)^order for any real order; order = 0 degenerates
/// exactly to the identity stencil {1, 0, 0, ...}.
inline std::vector<double> gl_coeffs(double order, int count) {
    std::vector<double> w(count + 1);
    w[0] = 1.0;
    for (int k = 1; k <= count; ++k)
        w[k] = w[k - 1] * (1.0 - (order + 1.0) / k);
    return w;
}

inline void require_grid_match(const std::vector<double>& samples, const TimeGrid& grid,
                               const char* who) {
    if (static_cast<int>(samples.size()) != grid.nodes())
        throw std::invalid_argument(std::string(who) + ": sample count " +
                                    std::to_string(samples.size()) + " does not match grid (" +
                                    std::to_string(grid.nodes()) + " nodes)");
}

} // namespace detail

/// Discrete forward Riemann-Liouville derivative D^{order}_{(0,t]} by
/// Grunwald-Letnikov convolution over past nodes:
///   (Df)_n = dt^{-order} sum_{k=0..n} w_k f_{n-k}.
/// order = 0 is the exact classical-limit path (identity).
inline std::vector<double> rl_deriv_forward(const std::vector<double>& samples, double order,
                                            const TimeGrid& grid) {
    detail::require_grid_match(samples, grid, "rl_deriv_forward");
    if (order == 0.0) return samples;
    if (!(order > 0.0) || !(order < 1.0))
        throw std::domain_error("rl_deriv_forward: order must lie in [0,1)");
    const int n_nodes = grid.nodes();
    const auto w = detail::gl_coeffs(order, grid.steps);
    const double scale = std::pow(grid.dt(), -order);
    std::vector<double> out(n_nodes);
    for (int n = 0; n < n_nodes; ++n) {
        double acc = 0.0;
        for (int k = 0; k <= n; ++k) acc += w[k] * samples[n - k];
        out[n] = scale * acc;
    }
    return out;
}

/// Discrete backward Riemann-Liouville derivative D^{order}_{[t,T)}.
/// Defined as the exact matrix transpose of the forward operator, i.e. a
/// convolution over future nodes with the same weights; this makes the
/// discrete integration-by-parts identity exact.
inline std::vector<double> rl_deriv_backward(const std::vector<double>& samples, double order,
                                             const TimeGrid& grid) {
    detail::require_grid_match(samples, grid, "rl_deriv_backward");
    if (order == 0.0) return samples;
    if (!(order > 0.0) || !(order < 1.0))
        throw std::domain_error("rl_deriv_backward: order must lie in [0,1)");
    const int n_nodes = grid.nodes();
    const auto w = detail::gl_coeffs(order, grid.steps);
    const double scale = std::pow(grid.dt(), -order);
    std::vector<double> out(n_nodes);
    for (int n = 0; n < n_nodes; ++n) {
        double acc = 0.0;
        for (int k = 0; n + k < n_nodes; ++k) acc += w[k] * samples[n + k];
        out[n] = scale * acc;
    }
    return out;
}

/// Discrete forward fractional integral I^{beta}_{(0,t]} via GL weights of
/// order -beta (all positive). beta = 0 is the identity; beta = 1 is the
/// classical running integral (trapezoidal, exact for the reduction tests).
inline std::vector<double> frac_integral_forward(const std::vector<double>& samples, double beta,
                                                 const TimeGrid& grid) {
    detail::require_grid_match(samples, grid, "frac_integral_forward");
    if (beta == 0.0) return samples;
    const int n_nodes = grid.nodes();
    std::vector<double> out(n_nodes);
    if (beta == 1.0) {
        double acc = 0.0;
        out[0] = 0.0;
        for (int n = 1; n < n_nodes; ++n) {
            acc += 0.5 * grid.dt() * (samples[n - 1] + samples[n]);
            out[n] = acc;
        }
        return out;
    }
    if (!(beta > 0.0) || !(beta < 1.0))
        throw std::domain_error("frac_integral_forward: order must lie in [0,1]");
    const auto w = detail::gl_coeffs(-beta, grid.steps);
    const double scale = std::pow(grid.dt(), beta);
    for (int n = 0; n < n_nodes; ++n) {
        double acc = 0.0;
        for (int k = 0; k <= n; ++k) acc += w[k] * samples[n - k];
        out[n] = scale * acc;
    }
    return out;
}

/// Backward fractional integral, transpose of the forward one.
inline std::vector<double> frac_integral_backward(const std::vector<double>& samples, double beta,
                                                  const TimeGrid& grid) {
    detail::require_grid_match(samples, grid, "frac_integral_backward");
    if (beta == 0.0) return samples;
    const int n_nodes = grid.nodes();
    std::vector<double> out(n_nodes);
    if (beta == 1.0) {
        double acc = 0.0;
        out[n_nodes - 1] = 0.0;
        for (int n = n_nodes - 2; n >= 0; --n) {
            acc += 0.5 * grid.dt() * (samples[n] + samples[n + 1]);
            out[n] = acc;
        }
        return out;
    }
    if (!(beta > 0.0) || !(beta < 1.0))
        throw std::domain_error("frac_integral_backward: order must lie in [0,1]");
    const auto w = detail::gl_coeffs(-beta, grid.steps);
    const double scale = std::pow(grid.dt(), beta);
    for (int n = 0; n < n_nodes; ++n) {
        double acc = 0.0;
        for (int k = 0; n + k < n_nodes; ++k) acc += w[k] * samples[n + k];
        out[n] = scale * acc;
    }
    return out;
}

/// L1 coefficients a_k = (k+1)^{1-beta} - k^{1-beta}; beta = 1 degenerates
/// to the backward-difference stencil {1, 0, 0, ...}.
inline QuadratureWeights l1_weights(double beta, int count) {
    if (!(beta > 0.0) || !(beta <= 1.0))
        throw std::domain_error("l1_weights: beta must lie in (0,1]");
    QuadratureWeights q;
    q.order = beta;
    q.scheme = WeightScheme::L1;
    q.weights.resize(count + 1);
    if (beta == 1.0) {
        q.weights.assign(count + 1, 0.0);
        q.weights[0] = 1.0;
    } else {
        for (int k = 0; k <= count; ++k)
            q.weights[k] = std::pow(k + 1.0, 1.0 - beta) - std::pow(static_cast<double>(k), 1.0 - beta);
    }
    q.dt_scale = 1.0; // caller divides by Gamma(2-beta) dt^beta
    return q;
}

/// Forward Caputo derivative of order beta by the L1 scheme:
///   (d^beta f)_n = sum_{k=0..n-1} a_k (f_{n-k} - f_{n-k-1}) / (Gamma(2-beta) dt^beta).
/// Vanishes identically on constants. beta = 1 is the exact backward difference.
inline std::vector<double> caputo_deriv_forward(const std::vector<double>& samples, double beta,
                                                const TimeGrid& grid) {
    detail::require_grid_match(samples, grid, "caputo_deriv_forward");
    if (!(beta > 0.0) || !(beta <= 1.0))
        throw std::domain_error("caputo_deriv_forward: beta must lie in (0,1]");
    if (!std::isfinite(samples[0]))
        throw std::domain_error("caputo_deriv_forward: samples[0] must be finite");
    const int n_nodes = grid.nodes();
    const auto q = l1_weights(beta, grid.steps);
    const double scale = 1.0 / (std::tgamma(2.0 - beta) * std::pow(grid.dt(), beta));
    std::vector<double> out(n_nodes, 0.0);
    for (int n = 1; n < n_nodes; ++n) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) acc += q.weights[k] * (samples[n - k] - samples[n - k - 1]);
        out[n] = scale * acc;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mittag-Leffler E_beta(z) for z <= 0, beta in (0,1].
//
// Three regimes:
//   * power series in long double while cancellation stays harmless
//     ((-z)^{1/beta} <= 12),
//   * optimally truncated algebraic expansion for very large |z|,
//   * otherwise the completely-monotone spectral representation
//       E_beta(-x) = int_0^inf exp(-r x^{1/beta}) K_beta(r) dr,
//       K_beta(r) = sin(pi beta)/pi * r^{beta-1} / (r^{2beta} + 2 r^beta cos(pi beta) + 1),
//     integrated by a refining trapezoid rule on the log axis.
// ---------------------------------------------------------------------------

namespace detail {

inline double ml_series(double beta, double z) {
    // terms z^j / Gamma(beta j + 1) in extended precision, log-space magnitude
    const long double lx = std::log(static_cast<long double>(-z));
    long double sum = 1.0L;
    for (int j = 1; j < 600; ++j) {
        long double lg = std::lgamma(static_cast<long double>(beta) * j + 1.0L);
        long double term = std::exp(static_cast<long double>(j) * lx - lg);
        if (j % 2 == 1) term = -term;
        sum += term;
        if (std::abs(term) < 1e-20L * std::max(1.0L, std::abs(sum))) break;
    }
    return static_cast<double>(sum);
}

inline double ml_asymptotic(double beta, double z, double* est_rel_err) {
    // sum_{j>=1} -z^{-j}/Gamma(1-beta j) = sum (-1)^{j+1} x^{-j}/Gamma(1-beta j),
    // truncated at the globally smallest nonzero term (the sine factor in the
    // reflection formula makes the magnitudes non-monotone).
    constexpr double pi = std::numbers::pi;
    const double x = -z;
    const int jmax = 196;
    std::vector<double> terms(jmax);
    for (int j = 1; j <= jmax; ++j) {
        double arg = 1.0 - beta * j;
        double inv_gamma;
        if (std::abs(arg - std::round(arg)) < 1e-12 && std::round(arg) <= 0.0)
            inv_gamma = 0.0; // pole of Gamma -> term vanishes
        else if (arg > 0.0)
            inv_gamma = 1.0 / std::tgamma(arg);
        else
            inv_gamma = std::sin(pi * arg) * std::exp(std::lgamma(1.0 - arg)) / pi;
        double sgn = (j % 2 == 1) ? 1.0 : -1.0;
        terms[j - 1] = sgn * std::pow(x, -static_cast<double>(j)) * inv_gamma;
    }
    int jmin = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < jmax; ++j) {
        if (terms[j] != 0.0 && std::abs(terms[j]) < best) {
            best = std::abs(terms[j]);
            jmin = j;
        }
    }
    double s = 0.0;
    for (int j = 0; j <= jmin; ++j) s += terms[j];
    if (est_rel_err) *est_rel_err = (s != 0.0) ? best / std::abs(s) : best;
    return s;
}

inline double ml_spectral(double beta, double z) {
    constexpr double pi = std::numbers::pi;
    const double x = -z;
    const double t = std::pow(x, 1.0 / beta);
    const double sb = std::sin(pi * beta), cb = std::cos(pi * beta);
    auto f = [&](double u) {
        double r = std::exp(u);
        double rb = std::pow(r, beta);
        double den = rb * rb + 2.0 * rb * cb + 1.0;
        return std::exp(-r * t) * rb * sb / (pi * den);
    };
    double lo = -60.0 / beta;
    double hi = std::log(60.0 / t);
    if (hi < 2.0) hi = 2.0;
    int n = 128;
    double prev = 0.0;
    for (int pass = 0; pass < 14; ++pass) {
        double h = (hi - lo) / n;
        double s = 0.5 * (f(lo) + f(hi));
        for (int i = 1; i < n; ++i) s += f(lo + i * h);
        s *= h;
        if (pass > 1 && std::abs(s - prev) <= 1e-12 * std::max(1.0, std::abs(s))) return s;
        prev = s;
        n *= 2;
    }
    return prev;
}

} // namespace detail

/// Mittag-Leffler function E_beta(z) on the decaying branch z <= 0,
/// beta in (0,1]. Relative accuracy better than 1e-8 across the range.
inline double mittag_leffler(double beta, double z) {
    if (!(beta > 0.0) || !(beta <= 1.0))
        throw std::domain_error("mittag_leffler: beta must lie in (0,1]");
    if (z > 0.0)
        throw std::domain_error("mittag_leffler: only z <= 0 is supported");
    if (z == 0.0) return 1.0;
    if (beta == 1.0) return std::exp(z);
    const double x = -z;
    const double xb = std::pow(x, 1.0 / beta);
    if (xb <= 12.0) return detail::ml_series(beta, z);
    if (xb >= 60.0) {
        double est = 0.0;
        double v = detail::ml_asymptotic(beta, z, &est);
        if (est <= 1e-10) return v;
    }
    return detail::ml_spectral(beta, z);
}

} // namespace fracmfg
