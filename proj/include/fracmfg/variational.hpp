#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fracmfg/frac_calc.hpp"
#include "fracmfg/grids.hpp"
#include "fracmfg/mfg.hpp"
#include "fracmfg/rng.hpp"

namespace fracmfg {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Coupling together with its primitive F(x,m) = int_0^m f(x,s) ds (for
/// m >= 0, +infinity below) and the Legendre-Fenchel conjugate F*.
struct CouplingPrimitive {
    CouplingSpec spec;

    explicit CouplingPrimitive(CouplingSpec s) : spec(s) { spec.validate(); }

    double F(double x, double m) const {
        if (m < 0.0) return kInf;
        switch (spec.kind) {
            case CouplingSpec::Kind::Zero: return 0.0;
            case CouplingSpec::Kind::Linear: return 0.5 * m * m;
            case CouplingSpec::Kind::Power:
                return spec.a(x) * std::pow(m, spec.p + 1.0) / (spec.p + 1.0);
        }
        return 0.0;
    }

    /// F*(x,alpha) = sup_{m>=0} (alpha m - F(x,m)); closed form for the
    /// supported kinds (the maximizer solves f(x,m*) = alpha). For the zero
    /// coupling the conjugate is the indicator of alpha <= 0; the infinite
    /// branch is a sentinel value carried by callers, not an exception.
    double F_star(double x, double alpha) const {
        if (!std::isfinite(alpha)) throw std::domain_error("F_star: alpha must be finite");
        if (alpha <= 0.0) return 0.0;
        switch (spec.kind) {
            case CouplingSpec::Kind::Zero:
                return kInf;
            case CouplingSpec::Kind::Linear:
                return 0.5 * alpha * alpha;
            case CouplingSpec::Kind::Power: {
                const double a = spec.a(x);
                const double p = spec.p;
                const double mstar = std::pow(alpha / a, 1.0 / p);
                return alpha * mstar - F(x, mstar);
            }
        }
        return 0.0;
    }
};

struct HStarThresholds {
    double eps_dm = 1e-12;
    double eps_w = 1e-10;
};

/// Kinetic integrand dm * H*(-w/dm) for the quadratic Hamiltonian:
/// |w|^2 / (2 dm) where the memory field is positive, 0 at the (0,0)
/// branch, +infinity sentinel otherwise.
inline double H_star(double w, double dm, HStarThresholds th = {}) {
    if (dm < -kDensityTolerance)
        throw std::domain_error("H_star: negative memory value " + std::to_string(dm));
    if (dm > th.eps_dm) return 0.5 * w * w / dm;
    if (std::abs(w) <= th.eps_w) return 0.0;
    return kInf;
}

struct FunctionalReport {
    double value_A = 0.0;
    double value_B = 0.0;
    double gap = 0.0;
    double kinetic = 0.0;
    double coupling = 0.0;
    double terminal = 0.0;
    std::vector<std::pair<int, int>> infeasible_nodes;
};

namespace detail {

inline double trapezoid_weight(int n, int last, double dt) {
    return (n == 0 || n == last) ? 0.5 * dt : dt;
}

} // namespace detail

/// A(u) = int int F*(x, alpha_u) dx dt - int m0 u(0) dx with
/// alpha_u = -du/dt + D^{1-beta}_{[t,T)}[-Lap u + |grad u|^2/2]
/// built from the discrete backward operator (transpose convention) and
/// trapezoidal time quadrature. Members of K_0 must match u_T at t = T.
inline double functional_A(const Field& u, const MFGProblem& prob) {
    const int nn = prob.tg.nodes();
    const int nx = prob.sg.cells();
    if (u.time_nodes() != nn || u.cells() != nx)
        throw std::invalid_argument("functional_A: field shape mismatch");
    double uT_scale = 1.0;
    for (int j = 0; j < nx; ++j) uT_scale = std::max(uT_scale, std::abs(prob.u_T[j]));
    for (int j = 0; j < nx; ++j)
        if (std::abs(u.at(nn - 1, j) - prob.u_T[j]) > 1e-12 * uT_scale)
            throw std::invalid_argument("functional_A: u(T) does not match the terminal datum");

    const double dx = prob.sg.dx();
    const double dt = prob.tg.dt();
    const double order = 1.0 - prob.beta;
    CouplingPrimitive cp(prob.coupling);

    // G = -Lap u + |grad u|^2 / 2 (centered stencils)
    Field G(nn, nx);
    for (int n = 0; n < nn; ++n) {
        const double* us = u.slice(n);
        for (int j = 0; j < nx; ++j) {
            const int jm = (j + nx - 1) % nx, jp = (j + 1) % nx;
            const double lap = (us[jp] - 2.0 * us[j] + us[jm]) / (dx * dx);
            const double grad = (us[jp] - us[jm]) / (2.0 * dx);
            G.at(n, j) = -lap + 0.5 * grad * grad;
        }
    }
    Field dbG(nn, nx);
    {
        std::vector<double> col(nn);
        for (int j = 0; j < nx; ++j) {
            for (int n = 0; n < nn; ++n) col[n] = G.at(n, j);
            auto d = rl_deriv_backward(col, order, prob.tg);
            for (int n = 0; n < nn; ++n) dbG.at(n, j) = d[n];
        }
    }
    double acc = 0.0;
    for (int n = 0; n < nn; ++n) {
        const double wt = detail::trapezoid_weight(n, nn - 1, dt);
        for (int j = 0; j < nx; ++j) {
            double dudt;
            if (n == 0) dudt = (u.at(1, j) - u.at(0, j)) / dt;
            else if (n == nn - 1) dudt = (u.at(n, j) - u.at(n - 1, j)) / dt;
            else dudt = (u.at(n + 1, j) - u.at(n - 1, j)) / (2.0 * dt);
            const double alpha = -dudt + dbG.at(n, j);
            const double fs = cp.F_star(prob.sg.center(j), alpha);
            if (fs == kInf) return kInf;
            acc += wt * dx * fs;
        }
    }
    for (int j = 0; j < nx; ++j) acc -= prob.m0[j] * u.at(0, j) * dx;
    return acc;
}

/// B(m,w) = int int [dm H*(-w/dm) + F(x,m)] dx dt + int u_T m(T) dx,
/// itemized into kinetic/coupling/terminal parts that sum to the value
/// exactly. Infeasible pairs return the +infinity sentinel together with
/// the offending node list.
inline FunctionalReport functional_B(const Field& m, const Field& w, const MFGProblem& prob,
                                     HStarThresholds th = {}) {
    const int nn = prob.tg.nodes();
    const int nx = prob.sg.cells();
    if (m.time_nodes() != nn || m.cells() != nx || !m.same_shape(w))
        throw std::invalid_argument("functional_B: field shape mismatch");
    const double dx = prob.sg.dx();
    const double dt = prob.tg.dt();

    FunctionalReport rep;
    for (int n = 0; n < nn; ++n) {
        double mass = 0.0;
        for (int j = 0; j < nx; ++j) mass += m.at(n, j);
        if (std::abs(mass * dx - 1.0) > 1e-6)
            throw std::invalid_argument("functional_B: slice " + std::to_string(n) +
                                        " is not unit mass (K_1 membership)");
    }
    const auto mem = memory_field(m, prob.beta, prob.tg);
    CouplingPrimitive cp(prob.coupling);
    bool infeasible = false;
    for (int n = 0; n < nn; ++n) {
        const double wt = detail::trapezoid_weight(n, nn - 1, dt);
        for (int j = 0; j < nx; ++j) {
            const double mv = m.at(n, j);
            double dmv = mem.dm.at(n, j);
            if (mv < -kDensityTolerance || dmv < -kDensityTolerance) {
                rep.infeasible_nodes.emplace_back(n, j);
                infeasible = true;
                continue;
            }
            if (dmv < 0.0) dmv = 0.0; // round-off inside tolerance
            const double kin = H_star(w.at(n, j), dmv, th);
            if (kin == kInf) {
                rep.infeasible_nodes.emplace_back(n, j);
                infeasible = true;
                continue;
            }
            rep.kinetic += wt * dx * kin;
            rep.coupling += wt * dx * cp.F(prob.sg.center(j), std::max(mv, 0.0));
        }
    }
    for (int j = 0; j < nx; ++j) rep.terminal += prob.u_T[j] * m.at(nn - 1, j) * dx;
    rep.value_B = infeasible ? kInf : rep.kinetic + rep.coupling + rep.terminal;
    return rep;
}

/// Duality gap A(u) + B(m,w) of a candidate equilibrium.
inline FunctionalReport duality_gap(const MFGSolution& sol, const MFGProblem& prob) {
    FunctionalReport rep = functional_B(sol.m, sol.w, prob);
    rep.value_A = functional_A(sol.u, prob);
    rep.gap = rep.value_A + rep.value_B;
    return rep;
}

struct PerturbationReport {
    /// one entry per step size h: worst A(u + h phi) - A(u) over the draws
    std::vector<std::pair<double, double>> min_margin_by_h;
    /// worst B(m, w + h psi) - B(m, w) over divergence-free w-probes
    double min_b_margin = 0.0;
    double base_A = 0.0;
    double base_B = 0.0;
};

/// Random smooth space perturbation (Fourier modes k <= 3) with the
/// time profile (1 - t/T)^2, so phi(T) = 0 and K_0 membership survives.
inline Field random_perturbation(const MFGProblem& prob, Rng& rng) {
    const int nn = prob.tg.nodes(), nx = prob.sg.cells();
    Field phi(nn, nx);
    std::vector<double> mode(nx, 0.0);
    for (int k = 1; k <= 3; ++k) {
        const double ck = rng.normal(), sk = rng.normal();
        for (int j = 0; j < nx; ++j) {
            const double arg = 2.0 * std::numbers::pi * k * prob.sg.center(j);
            mode[j] += ck * std::cos(arg) + sk * std::sin(arg);
        }
    }
    for (int n = 0; n < nn; ++n) {
        const double s = 1.0 - prob.tg.node(n) / prob.tg.horizon;
        for (int j = 0; j < nx; ++j) phi.at(n, j) = mode[j] * s * s;
    }
    return phi;
}

/// Verification probes for the equivalence theorem: A must not decrease
/// under admissible perturbations of u, and B must not decrease when w is
/// shifted along feasibility-preserving (x-constant, hence divergence-free)
/// directions with m held fixed. Failures are reported, not raised.
inline PerturbationReport perturbation_verification(const MFGSolution& sol,
                                                    const MFGProblem& prob, int n_samples,
                                                    const std::vector<double>& h_values,
                                                    uint64_t seed = 20240901ULL) {
    PerturbationReport rep;
    rep.base_A = functional_A(sol.u, prob);
    FunctionalReport base_b = functional_B(sol.m, sol.w, prob);
    rep.base_B = base_b.value_B;

    Rng rng(seed);
    std::vector<Field> draws;
    draws.reserve(n_samples);
    for (int s = 0; s < n_samples; ++s) draws.push_back(random_perturbation(prob, rng));

    for (double h : h_values) {
        double worst = kInf;
        for (const auto& phi : draws) {
            for (double sgn : {1.0, -1.0}) {
                Field up = sol.u;
                for (size_t i = 0; i < up.raw().size(); ++i)
                    up.raw()[i] += sgn * h * phi.raw()[i];
                const double a = functional_A(up, prob);
                worst = std::min(worst, a - rep.base_A);
            }
        }
        rep.min_margin_by_h.emplace_back(h, worst);
    }

    // w-probes: psi(t) constant in x keeps div(w) and hence the discrete
    // continuity constraint untouched for fixed m; the feasibility projection
    // zeroes the probe wherever the memory field sits on the (0,0) branch
    rep.min_b_margin = kInf;
    const int nn = prob.tg.nodes();
    const auto mem = memory_field(sol.m, prob.beta, prob.tg);
    const HStarThresholds th;
    for (int s = 0; s < n_samples; ++s) {
        const double c1 = rng.normal(), c2 = rng.normal();
        Field wp = sol.w;
        for (int n = 0; n < nn; ++n) {
            const double t = prob.tg.node(n) / prob.tg.horizon;
            const double psi = c1 * std::cos(std::numbers::pi * t) + c2 * (1.0 - t);
            for (int j = 0; j < prob.sg.cells(); ++j) {
                if (mem.dm.at(n, j) <= th.eps_dm) continue;
                wp.at(n, j) += 0.05 * psi;
            }
        }
        const double b = functional_B(sol.m, wp, prob).value_B;
        rep.min_b_margin = std::min(rep.min_b_margin, b - rep.base_B);
    }
    return rep;
}

} // namespace fracmfg
