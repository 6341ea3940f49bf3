#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracmfg/frac_calc.hpp"
#include "fracmfg/fp_solver.hpp" // PeriodicOperator, NumericalError
#include "fracmfg/grids.hpp"
#include "fracmfg/linalg.hpp"

namespace fracmfg {

struct HJBOptions {
    double inner_tol = 1e-10;
    int max_inner_sweeps = 50;
};

/// Centered periodic gradient of one spatial slice.
inline std::vector<double> gradient(const std::vector<double>& u, const SpaceGrid& sg) {
    if (sg.dim != 1) throw std::invalid_argument("gradient: 1D slice expected");
    const int nx = sg.cells();
    if (static_cast<int>(u.size()) != nx) throw std::invalid_argument("gradient: size mismatch");
    std::vector<double> g(nx);
    const double inv2dx = 1.0 / (2.0 * sg.dx());
    for (int j = 0; j < nx; ++j)
        g[j] = (u[(j + 1) % nx] - u[(j + nx - 1) % nx]) * inv2dx;
    return g;
}

/// Backward time-fractional HJB with quadratic Hamiltonian H(p) = |p|^2/2:
///   -du/dt + D^{1-beta}_{[t,T)}[ -Lap u + |grad u|^2/2 ] = f,  u(T) = u_T.
/// Solved in the time-reversed Caputo form
///   d^beta_s u - Lap u + |grad u|^2/2 = I^{1-beta}_{(0,s]} f~,  u(s=0) = u_T,
/// with L1 Caputo weights, implicit diffusion, and a lagged-gradient inner
/// fixed point for the Hamiltonian. beta = 1 degenerates to the classical
/// semi-implicit backward scheme exactly.
inline Field solve_fractional_hjb(const std::vector<double>& u_T, const Field& source,
                                  double beta, const TimeGrid& tg, const SpaceGrid& sg,
                                  HJBOptions opts = {}) {
    if (!(beta > 0.0) || !(beta <= 1.0))
        throw std::domain_error("solve_fractional_hjb: beta must lie in (0,1]");
    if (sg.dim != 1) throw std::invalid_argument("solve_fractional_hjb: 1D grid expected");
    const int nx = sg.cells();
    const int nn = tg.nodes();
    if (static_cast<int>(u_T.size()) != nx)
        throw std::invalid_argument("solve_fractional_hjb: terminal slice size mismatch");
    if (source.time_nodes() != nn || source.cells() != nx)
        throw std::invalid_argument("solve_fractional_hjb: source field shape mismatch");
    for (double v : u_T)
        if (!std::isfinite(v)) throw std::invalid_argument("solve_fractional_hjb: u_T not finite");

    const double dx = sg.dx();
    const double dt = tg.dt();
    const auto caputo = l1_weights(beta, tg.steps);
    const double lam = (beta == 1.0)
                           ? 1.0 / dt
                           : 1.0 / (std::tgamma(2.0 - beta) * std::pow(dt, beta));

    // reversed-clock source integrated once per cell: I^{1-beta} f~
    Field isrc(nn, nx);
    {
        std::vector<double> col(nn), icol;
        for (int j = 0; j < nx; ++j) {
            for (int s = 0; s < nn; ++s) col[s] = source.at(nn - 1 - s, j);
            icol = frac_integral_forward(col, 1.0 - beta, tg);
            for (int s = 0; s < nn; ++s) isrc.at(s, j) = icol[s];
        }
    }

    // implicit operator lam*a_0*I - Lap (time-independent)
    std::vector<double> asub(nx, -1.0 / (dx * dx));
    std::vector<double> asup(nx, -1.0 / (dx * dx));
    std::vector<double> adiag(nx, lam * caputo.weights[0] + 2.0 / (dx * dx));

    Field u(nn, nx); // reversed clock: u.slice(0) = u_T
    u.set_slice(0, u_T);
    std::vector<double> rhs_const(nx), rhs(nx), uk(nx), un(nx), grad(nx);
    for (int s = 1; s < nn; ++s) {
        // Caputo history lam * sum_{k>=1} a_k (u^{s-k} - u^{s-k-1})
        std::fill(rhs_const.begin(), rhs_const.end(), 0.0);
        for (int k = 1; k < s; ++k) {
            const double ak = caputo.weights[k];
            if (ak == 0.0) continue;
            const double* ua = u.slice(s - k);
            const double* ub = u.slice(s - k - 1);
            for (int j = 0; j < nx; ++j) rhs_const[j] -= ak * (ua[j] - ub[j]);
        }
        const double* uprev = u.slice(s - 1);
        const double* is = isrc.slice(s);
        for (int j = 0; j < nx; ++j)
            rhs_const[j] = lam * (rhs_const[j] + caputo.weights[0] * uprev[j]) + is[j];

        std::copy(uprev, uprev + nx, uk.begin());
        bool converged = false;
        for (int sweep = 0; sweep < opts.max_inner_sweeps; ++sweep) {
            const double inv2dx = 1.0 / (2.0 * dx);
            for (int j = 0; j < nx; ++j)
                grad[j] = (uk[(j + 1) % nx] - uk[(j + nx - 1) % nx]) * inv2dx;
            for (int j = 0; j < nx; ++j) rhs[j] = rhs_const[j] - 0.5 * grad[j] * grad[j];
            un = solve_periodic_tridiagonal(asub, adiag, asup, rhs);
            double delta = 0.0;
            for (int j = 0; j < nx; ++j) {
                if (!std::isfinite(un[j]))
                    throw NumericalError("solve_fractional_hjb: non-finite value at step " +
                                         std::to_string(s));
                delta = std::max(delta, std::abs(un[j] - uk[j]));
            }
            uk.swap(un);
            if (delta < opts.inner_tol) { converged = true; break; }
        }
        if (!converged)
            throw NumericalError("solve_fractional_hjb: inner iteration stalled at step " +
                                 std::to_string(s));
        u.set_slice(s, uk);
    }

    // reverse back to the forward clock; terminal slice is the exact u_T copy
    Field out(nn, nx);
    for (int n = 0; n < nn; ++n)
        for (int j = 0; j < nx; ++j) out.at(n, j) = u.at(nn - 1 - n, j);
    return out;
}

/// Classical backward HJB oracle: the beta = 1 path of the same kernel.
inline Field classical_hjb_solve(const std::vector<double>& u_T, const Field& source,
                                 const TimeGrid& tg, const SpaceGrid& sg, HJBOptions opts = {}) {
    return solve_fractional_hjb(u_T, source, 1.0, tg, sg, opts);
}

} // namespace fracmfg
