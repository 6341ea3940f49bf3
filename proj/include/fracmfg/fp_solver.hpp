#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracmfg/frac_calc.hpp"
#include "fracmfg/grids.hpp"
#include "fracmfg/linalg.hpp"

namespace fracmfg {

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Periodic tridiagonal operator in compact form: row j couples cells
/// j-1, j, j+1 (mod N). Flux-form assembly keeps column sums at zero, which
/// is what makes discrete mass conservation exact.
struct PeriodicOperator {
    std::vector<double> sub, diag, sup;

    explicit PeriodicOperator(int n) : sub(n, 0.0), diag(n, 0.0), sup(n, 0.0) {}

    std::vector<double> apply(const std::vector<double>& x) const {
        const int n = static_cast<int>(diag.size());
        std::vector<double> y(n);
        for (int j = 0; j < n; ++j) {
            const int jm = (j + n - 1) % n, jp = (j + 1) % n;
            y[j] = sub[j] * x[jm] + diag[j] * x[j] + sup[j] * x[jp];
        }
        return y;
    }
};

/// Assemble L = Lap - div(v .) with second-order centered diffusion and
/// first-order upwind drift fluxes; v_edge[j] lives on the edge between
/// cells j and j+1.
inline PeriodicOperator assemble_drift_diffusion(const double* v_edge, int n, double dx) {
    PeriodicOperator L(n);
    const double idx2 = 1.0 / (dx * dx);
    for (int j = 0; j < n; ++j) {
        const int jm = (j + n - 1) % n;
        L.sub[j] += idx2;
        L.diag[j] += -2.0 * idx2;
        L.sup[j] += idx2;
        const double vp = v_edge[j];   // edge j+1/2
        const double vm = v_edge[jm];  // edge j-1/2
        if (vp >= 0.0) L.diag[j] -= vp / dx; else L.sup[j] -= vp / dx;
        if (vm >= 0.0) L.sub[j] += vm / dx; else L.diag[j] += vm / dx;
    }
    return L;
}

struct FPDiagnostics {
    double max_mass_error = 0.0;
    double min_density = 0.0;
    double max_cell_peclet = 0.0;
    std::vector<std::string> warnings;
};

struct FPSolution {
    Field m;
    FPDiagnostics diag;
};

struct FPOptions {
    double peclet_warn = 2.0;
};

inline void validate_initial_density(const std::vector<double>& m0, const SpaceGrid& sg) {
    if (static_cast<int>(m0.size()) != sg.cells())
        throw std::invalid_argument("initial density size does not match grid");
    double mass = 0.0;
    for (double v : m0) {
        if (!(v > 0.0)) throw std::invalid_argument("initial density must be strictly positive");
        mass += v;
    }
    mass *= sg.cell_volume();
    if (std::abs(mass - 1.0) > 1e-8)
        throw std::invalid_argument("initial density must have unit mass, got " +
                                    std::to_string(mass));
}

/// March the time-fractional FP equation
///   dm/dt = [Lap - div(v .)] D^{1-beta}_{(0,t]} m,  m(0) = m0,
/// on the periodic 1D torus. The Grunwald-Letnikov memory sum is split at
/// the newest term, which is treated implicitly together with the spatial
/// operator; history stays explicit. m is the law of the SDE with drift v.
/// beta = 1 runs the same kernel with degenerate weights, i.e. the exact
/// classical implicit-Euler scheme.
inline FPSolution solve_fractional_fp(const std::vector<double>& m0, const Field& v_edge,
                                      double beta, const TimeGrid& tg, const SpaceGrid& sg,
                                      FPOptions opts = {}) {
    if (!(beta > 0.0) || !(beta <= 1.0))
        throw std::domain_error("solve_fractional_fp: beta must lie in (0,1]");
    if (sg.dim != 1)
        throw std::invalid_argument("solve_fractional_fp: 1D grid expected (use the _2d variant)");
    validate_initial_density(m0, sg);
    if (v_edge.time_nodes() != tg.nodes() || v_edge.cells() != sg.cells())
        throw std::invalid_argument("solve_fractional_fp: drift field shape mismatch");

    const int nx = sg.cells();
    const int nn = tg.nodes();
    const double dx = sg.dx();
    const double dt = tg.dt();
    const double alpha = 1.0 - beta;
    const auto w = detail::gl_coeffs(alpha, tg.steps);
    const double c = std::pow(dt, -alpha); // memory scale dt^{beta-1}
    const double implicit_coef = dt * c;   // dt^beta

    FPSolution out;
    out.m = Field(nn, nx);
    out.m.set_slice(0, m0);
    FPDiagnostics& diag = out.diag;
    diag.min_density = *std::min_element(m0.begin(), m0.end());

    std::vector<double> hist(nx), rhs(nx);
    for (int n = 1; n < nn; ++n) {
        // explicit history H = c * sum_{k>=1} w_k m^{n-k}
        std::fill(hist.begin(), hist.end(), 0.0);
        for (int k = 1; k <= n; ++k) {
            const double wk = w[k];
            if (wk == 0.0) continue; // classical path: no memory
            const double* mk = out.m.slice(n - k);
            for (int j = 0; j < nx; ++j) hist[j] += wk * mk[j];
        }
        for (int j = 0; j < nx; ++j) hist[j] *= c;

        const double* ve = v_edge.slice(n);
        for (int j = 0; j < nx; ++j)
            diag.max_cell_peclet = std::max(diag.max_cell_peclet, std::abs(ve[j]) * dx / 2.0);
        PeriodicOperator L = assemble_drift_diffusion(ve, nx, dx);

        auto lh = L.apply(hist);
        const double* mprev = out.m.slice(n - 1);
        for (int j = 0; j < nx; ++j) rhs[j] = mprev[j] + dt * lh[j];

        std::vector<double> asub(nx), adiag(nx), asup(nx);
        for (int j = 0; j < nx; ++j) {
            asub[j] = -implicit_coef * L.sub[j];
            adiag[j] = 1.0 - implicit_coef * L.diag[j];
            asup[j] = -implicit_coef * L.sup[j];
        }
        std::vector<double> mn;
        try {
            mn = solve_periodic_tridiagonal(asub, adiag, asup, rhs);
        } catch (const LinearSolveError& e) {
            throw NumericalError("solve_fractional_fp: linear solve failed at step " +
                                 std::to_string(n) + ": " + e.what());
        }
        double mass = 0.0;
        for (int j = 0; j < nx; ++j) {
            if (!std::isfinite(mn[j]))
                throw NumericalError("solve_fractional_fp: non-finite density at step " +
                                     std::to_string(n));
            mass += mn[j];
            diag.min_density = std::min(diag.min_density, mn[j]);
        }
        diag.max_mass_error = std::max(diag.max_mass_error, std::abs(mass * dx - 1.0));
        out.m.set_slice(n, mn);
    }
    if (diag.max_cell_peclet > opts.peclet_warn)
        diag.warnings.push_back("cell Peclet number " + std::to_string(diag.max_cell_peclet) +
                                " exceeds " + std::to_string(opts.peclet_warn));
    return out;
}

/// Classical FP solver: the beta = 1 path of the same kernel (implicit
/// Euler, identical spatial operator). Used as the subordination oracle.
inline FPSolution solve_classical_fp(const std::vector<double>& m0, const Field& v_edge,
                                     const TimeGrid& tg, const SpaceGrid& sg, FPOptions opts = {}) {
    return solve_fractional_fp(m0, v_edge, 1.0, tg, sg, opts);
}

struct MemoryField {
    Field dm;
    double min_value = 0.0;
};

/// D^{1-beta}_{(0,t]} m per spatial node (Grunwald-Letnikov, forward).
inline MemoryField memory_field(const Field& m, double beta, const TimeGrid& tg) {
    if (m.time_nodes() != tg.nodes())
        throw std::invalid_argument("memory_field: field/grid mismatch");
    const int nn = m.time_nodes(), nx = m.cells();
    const double alpha = 1.0 - beta;
    MemoryField out;
    out.dm = Field(nn, nx);
    if (alpha == 0.0) {
        out.dm = m;
    } else {
        const auto w = detail::gl_coeffs(alpha, tg.steps);
        const double c = std::pow(tg.dt(), -alpha);
        for (int n = 0; n < nn; ++n) {
            double* dn = out.dm.slice(n);
            for (int k = 0; k <= n; ++k) {
                const double wk = w[k];
                const double* mk = m.slice(n - k);
                for (int j = 0; j < nx; ++j) dn[j] += wk * mk[j];
            }
            for (int j = 0; j < nx; ++j) dn[j] *= c;
        }
    }
    out.min_value = *std::min_element(out.dm.raw().begin(), out.dm.raw().end());
    return out;
}

/// Weak-form residual of Definition-style test functions phi(t,x) that
/// vanish at t = T:
///   residual(phi) = | int phi(0) m0 + int int [dphi/dt
///                     + D^{1-beta}_{[t,T)} (Lap phi + v . grad phi)] m |
/// with discrete backward operators and trapezoidal time quadrature.
/// Returns the max over the supplied test functions.
inline double weak_residual(const Field& m, const Field& v_edge, double beta, const TimeGrid& tg,
                            const SpaceGrid& sg,
                            const std::vector<std::function<double(double, double)>>& testfns) {
    if (sg.dim != 1) throw std::invalid_argument("weak_residual: 1D only");
    const int nn = tg.nodes(), nx = sg.cells();
    const double dx = sg.dx(), dt = tg.dt();
    const double order = 1.0 - beta;
    double worst = 0.0;
    for (const auto& phi : testfns) {
        Field ph(nn, nx);
        for (int n = 0; n < nn; ++n)
            for (int j = 0; j < nx; ++j) ph.at(n, j) = phi(tg.node(n), sg.center(j));
        for (int j = 0; j < nx; ++j)
            if (std::abs(ph.at(nn - 1, j)) > 1e-12)
                throw std::invalid_argument("weak_residual: test function must vanish at t = T");

        // spatial terms at each node: Lap phi + v . grad phi (v at centers)
        Field spatial(nn, nx);
        for (int n = 0; n < nn; ++n) {
            const double* p = ph.slice(n);
            const double* ve = v_edge.slice(n);
            for (int j = 0; j < nx; ++j) {
                const int jm = (j + nx - 1) % nx, jp = (j + 1) % nx;
                const double lap = (p[jp] - 2.0 * p[j] + p[jm]) / (dx * dx);
                const double grad = (p[jp] - p[jm]) / (2.0 * dx);
                const double vc = 0.5 * (ve[jm] + ve[j]);
                spatial.at(n, j) = lap + vc * grad;
            }
        }
        // backward fractional derivative in time per cell
        Field dback(nn, nx);
        std::vector<double> col(nn);
        for (int j = 0; j < nx; ++j) {
            for (int n = 0; n < nn; ++n) col[n] = spatial.at(n, j);
            auto dcol = rl_deriv_backward(col, order, tg);
            for (int n = 0; n < nn; ++n) dback.at(n, j) = dcol[n];
        }
        double acc = 0.0;
        for (int j = 0; j < nx; ++j) acc += ph.at(0, j) * m.at(0, j) * dx;
        for (int n = 0; n < nn; ++n) {
            const double wt = (n == 0 || n == nn - 1) ? 0.5 * dt : dt;
            for (int j = 0; j < nx; ++j) {
                double dphidt;
                if (n == 0) dphidt = (ph.at(1, j) - ph.at(0, j)) / dt;
                else if (n == nn - 1) dphidt = (ph.at(n, j) - ph.at(n - 1, j)) / dt;
                else dphidt = (ph.at(n + 1, j) - ph.at(n - 1, j)) / (2.0 * dt);
                acc += wt * dx * (dphidt + dback.at(n, j)) * m.at(n, j);
            }
        }
        worst = std::max(worst, std::abs(acc));
    }
    return worst;
}

struct SubordinationResult {
    std::vector<double> density;
    double coverage = 0.0;
};

/// Monte Carlo subordination identity: m(t,x) ~ mean over inverse-clock
/// samples of rho(E_t, x), with rho the classical FP solution over internal
/// time (time-independent drift). Samples beyond the internal horizon are
/// clipped and reported via the coverage fraction; coverage below 99% is an
/// error (horizon too short).
inline SubordinationResult subordination_density(const Field& rho, const TimeGrid& internal_grid,
                                                 const std::vector<double>& e_samples) {
    if (e_samples.empty())
        throw std::invalid_argument("subordination_density: need E-samples");
    const int nx = rho.cells();
    const double tau_hor = internal_grid.horizon;
    const double dtau = internal_grid.dt();
    SubordinationResult out;
    out.density.assign(nx, 0.0);
    size_t covered = 0;
    for (double e : e_samples) {
        double ec = e;
        if (ec <= tau_hor) ++covered; else ec = tau_hor;
        double pos = ec / dtau;
        int i0 = static_cast<int>(pos);
        if (i0 >= internal_grid.steps) i0 = internal_grid.steps - 1;
        const double frac = pos - i0;
        const double* r0 = rho.slice(i0);
        const double* r1 = rho.slice(i0 + 1);
        for (int j = 0; j < nx; ++j)
            out.density[j] += (1.0 - frac) * r0[j] + frac * r1[j];
    }
    const double inv = 1.0 / static_cast<double>(e_samples.size());
    for (auto& v : out.density) v *= inv;
    out.coverage = static_cast<double>(covered) / static_cast<double>(e_samples.size());
    if (out.coverage < 0.99)
        throw NumericalError("subordination_density: internal horizon too short, coverage " +
                             std::to_string(out.coverage));
    return out;
}

// ---------------------------------------------------------------------------
// 2D variant (smoke-tested configuration): same splitting, dense LU solve.
// Cell (ix,iy) has flat index ix + nx*iy. vx_edge(n, j) is the x-velocity on
// the edge between (ix,iy) and (ix+1,iy); vy_edge the y-velocity between
// (ix,iy) and (ix,iy+1).
// ---------------------------------------------------------------------------

struct EdgeDrift2D {
    Field vx, vy;
};

inline FPSolution solve_fractional_fp_2d(const std::vector<double>& m0, const EdgeDrift2D& v,
                                         double beta, const TimeGrid& tg, const SpaceGrid& sg) {
    if (sg.dim != 2) throw std::invalid_argument("solve_fractional_fp_2d: 2D grid expected");
    validate_initial_density(m0, sg);
    const int nx = sg.cells_per_axis;
    const int nc = sg.cells();
    const int nn = tg.nodes();
    const double dx = sg.dx(), dt = tg.dt();
    const double alpha = 1.0 - beta;
    const auto w = detail::gl_coeffs(alpha, tg.steps);
    const double c = std::pow(dt, -alpha);
    const double implicit_coef = dt * c;

    FPSolution out;
    out.m = Field(nn, nc);
    out.m.set_slice(0, m0);
    out.diag.min_density = *std::min_element(m0.begin(), m0.end());

    auto idx = [nx](int ix, int iy) { return ((ix % nx) + nx) % nx + nx * (((iy % nx) + nx) % nx); };

    std::vector<double> Lmat(static_cast<size_t>(nc) * nc);
    std::vector<double> hist(nc), rhs(nc), amat;
    DenseLU lu;
    for (int n = 1; n < nn; ++n) {
        std::fill(hist.begin(), hist.end(), 0.0);
        for (int k = 1; k <= n; ++k) {
            if (w[k] == 0.0) continue;
            const double* mk = out.m.slice(n - k);
            for (int j = 0; j < nc; ++j) hist[j] += w[k] * mk[j];
        }
        for (int j = 0; j < nc; ++j) hist[j] *= c;

        std::fill(Lmat.begin(), Lmat.end(), 0.0);
        const double idx2 = 1.0 / (dx * dx);
        const double* vx = v.vx.slice(n);
        const double* vy = v.vy.slice(n);
        for (int iy = 0; iy < nx; ++iy) {
            for (int ix = 0; ix < nx; ++ix) {
                const int j = idx(ix, iy);
                auto add = [&](int col, double val) { Lmat[static_cast<size_t>(j) * nc + col] += val; };
                add(idx(ix + 1, iy), idx2);
                add(idx(ix - 1, iy), idx2);
                add(idx(ix, iy + 1), idx2);
                add(idx(ix, iy - 1), idx2);
                add(j, -4.0 * idx2);
                const double vxp = vx[j], vxm = vx[idx(ix - 1, iy)];
                const double vyp = vy[j], vym = vy[idx(ix, iy - 1)];
                if (vxp >= 0) add(j, -vxp / dx); else add(idx(ix + 1, iy), -vxp / dx);
                if (vxm >= 0) add(idx(ix - 1, iy), vxm / dx); else add(j, vxm / dx);
                if (vyp >= 0) add(j, -vyp / dx); else add(idx(ix, iy + 1), -vyp / dx);
                if (vym >= 0) add(idx(ix, iy - 1), vym / dx); else add(j, vym / dx);
                out.diag.max_cell_peclet = std::max(
                    {out.diag.max_cell_peclet, std::abs(vxp) * dx / 2.0, std::abs(vyp) * dx / 2.0});
            }
        }
        amat.assign(Lmat.begin(), Lmat.end());
        for (auto& a : amat) a *= -implicit_coef;
        for (int j = 0; j < nc; ++j) amat[static_cast<size_t>(j) * nc + j] += 1.0;
        lu.factor(amat, nc);

        const double* mprev = out.m.slice(n - 1);
        for (int j = 0; j < nc; ++j) {
            double acc = 0.0;
            const double* row = &Lmat[static_cast<size_t>(j) * nc];
            for (int k2 = 0; k2 < nc; ++k2) acc += row[k2] * hist[k2];
            rhs[j] = mprev[j] + dt * acc;
        }
        auto mn = lu.solve(rhs);
        double mass = 0.0;
        for (int j = 0; j < nc; ++j) {
            if (!std::isfinite(mn[j]))
                throw NumericalError("solve_fractional_fp_2d: non-finite density at step " +
                                     std::to_string(n));
            mass += mn[j];
            out.diag.min_density = std::min(out.diag.min_density, mn[j]);
        }
        out.diag.max_mass_error = std::max(out.diag.max_mass_error,
                                           std::abs(mass * sg.cell_volume() - 1.0));
        out.m.set_slice(n, mn);
    }
    return out;
}

} // namespace fracmfg
