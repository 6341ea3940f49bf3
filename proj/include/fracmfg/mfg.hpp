#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracmfg/fp_solver.hpp"
#include "fracmfg/grids.hpp"
#include "fracmfg/hjb_solver.hpp"

namespace fracmfg {

/// Local coupling f(x,m): zero, linear f = m, or power f = a(x) m^p with
/// p >= 1 and a(x) = a0 + a1 cos(2 pi x) bounded away from zero. All kinds
/// satisfy f(x,0) = 0 and are nondecreasing in m.
struct CouplingSpec {
    enum class Kind { Zero, Linear, Power };
    Kind kind = Kind::Zero;
    double p = 1.0;
    double a0 = 1.0;
    double a1 = 0.0;

    static CouplingSpec zero() { return {}; }
    static CouplingSpec linear() {
        CouplingSpec s;
        s.kind = Kind::Linear;
        return s;
    }
    static CouplingSpec power(double p_, double a0_ = 1.0, double a1_ = 0.0) {
        CouplingSpec s;
        s.kind = Kind::Power;
        s.p = p_;
        s.a0 = a0_;
        s.a1 = a1_;
        s.validate();
        return s;
    }

    void validate() const {
        if (kind == Kind::Power) {
            if (!(p >= 1.0)) throw std::domain_error("coupling: power exponent must be >= 1");
            if (!(a0 - std::abs(a1) > 0.0))
                throw std::domain_error("coupling: a(x) must stay positive");
        }
        // sampled monotonicity + normalization probe
        for (double x : {0.0, 0.31, 0.77}) {
            if (f(x, 0.0) != 0.0) throw std::logic_error("coupling: f(x,0) != 0");
            double prev = 0.0;
            for (double m : {0.25, 0.5, 1.0, 2.0, 5.0}) {
                const double cur = f(x, m);
                if (cur + 1e-15 < prev) throw std::logic_error("coupling: f not nondecreasing");
                prev = cur;
            }
        }
    }

    double a(double x) const { return a0 + a1 * std::cos(2.0 * std::numbers::pi * x); }

    double f(double x, double m) const {
        if (m <= 0.0) return 0.0;
        switch (kind) {
            case Kind::Zero: return 0.0;
            case Kind::Linear: return m;
            case Kind::Power: return a(x) * std::pow(m, p);
        }
        return 0.0;
    }

    const char* name() const {
        switch (kind) {
            case Kind::Zero: return "zero";
            case Kind::Linear: return "linear";
            case Kind::Power: return "power";
        }
        return "?";
    }
};

/// Full problem data for the time-fractional MFG system on the 1D torus.
struct MFGProblem {
    double beta;
    TimeGrid tg;
    SpaceGrid sg;
    CouplingSpec coupling;
    std::vector<double> m0;
    std::vector<double> u_T;

    MFGProblem(double beta_, TimeGrid tg_, SpaceGrid sg_, CouplingSpec cs,
               std::vector<double> m0_, std::vector<double> uT_)
        : beta(beta_), tg(tg_), sg(sg_), coupling(cs), m0(std::move(m0_)), u_T(std::move(uT_)) {
        if (!(beta > 0.0) || !(beta <= 1.0))
            throw std::domain_error("MFGProblem: beta must lie in (0,1]");
        coupling.validate();
        validate_initial_density(m0, sg);
        if (static_cast<int>(u_T.size()) != sg.cells())
            throw std::invalid_argument("MFGProblem: u_T size mismatch");
        for (double v : u_T)
            if (!std::isfinite(v)) throw std::invalid_argument("MFGProblem: u_T must be finite");
    }
};

inline constexpr double kDensityTolerance = 1e-10;

/// Pointwise source g[n][j] = f(x_j, m[n][j]); densities below -tol are a
/// contract violation (the coupling is only defined for m >= 0).
inline Field coupling_eval(const CouplingSpec& spec, const Field& m, const SpaceGrid& sg,
                           double tol_pos = kDensityTolerance) {
    Field g(m.time_nodes(), m.cells());
    for (int n = 0; n < m.time_nodes(); ++n) {
        for (int j = 0; j < m.cells(); ++j) {
            const double mv = m.at(n, j);
            if (mv < -tol_pos)
                throw std::invalid_argument("coupling_eval: negative density " +
                                            std::to_string(mv) + " at node (" + std::to_string(n) +
                                            "," + std::to_string(j) + ")");
            g.at(n, j) = spec.f(sg.center(j), mv);
        }
    }
    return g;
}

/// Edge velocities fed to the FP solver from a value field:
/// v_{j+1/2} = -(u_{j+1} - u_j)/dx (the optimal control v = -grad u,
/// sampled where the fluxes live).
inline Field edge_drift_from_value(const Field& u, const SpaceGrid& sg) {
    const int nx = sg.cells();
    Field v(u.time_nodes(), nx);
    const double inv_dx = 1.0 / sg.dx();
    for (int n = 0; n < u.time_nodes(); ++n)
        for (int j = 0; j < nx; ++j)
            v.at(n, j) = -(u.at(n, (j + 1) % nx) - u.at(n, j)) * inv_dx;
    return v;
}

struct Control {
    Field v; // cell-centered optimal drift -grad u
    Field w; // linearized-constraint variable w = -v D^{1-beta} m = grad(u) dm
};

/// v = -grad u per slice; w = -v . D^{1-beta} m.
inline Control extract_control(const Field& u, const Field& m, double beta, const TimeGrid& tg,
                               const SpaceGrid& sg) {
    if (!u.same_shape(m)) throw std::invalid_argument("extract_control: shape mismatch");
    Control out;
    out.v = Field(u.time_nodes(), u.cells());
    out.w = Field(u.time_nodes(), u.cells());
    const auto mem = memory_field(m, beta, tg);
    for (int n = 0; n < u.time_nodes(); ++n) {
        auto g = gradient(u.slice_copy(n), sg);
        for (int j = 0; j < u.cells(); ++j) {
            out.v.at(n, j) = -g[j];
            out.w.at(n, j) = g[j] * mem.dm.at(n, j);
        }
    }
    return out;
}

struct PicardOptions {
    double damping = 0.5;
    double tol = 1e-6;
    int max_iter = 120;
    HJBOptions hjb;
};

struct MFGSolution {
    Field u, m, v, w;
    std::vector<double> residual_history;
    bool converged = false;
    int iterations = 0;
    // worst-case invariant diagnostics over all Picard iterates
    double max_mass_error = 0.0;
    double min_density = 0.0;
    double min_memory = 0.0;
};

/// Damped Picard iteration on the density:
///   g = f(x, m_k); u = HJB(u_T, g); v = -grad u; m_half = FP(m0, v);
///   m_{k+1} = (1-theta) m_k + theta m_half,
/// stopping when sup_n L1(m_{k+1}[n], m_k[n]) < tol. Non-convergence
/// returns the best iterate flagged, never throws; solver failures do throw.
inline MFGSolution picard_solve(const MFGProblem& prob, PicardOptions opts = {},
                                const std::optional<Field>& initial_guess = std::nullopt) {
    if (!(opts.damping > 0.0) || !(opts.damping <= 1.0))
        throw std::domain_error("picard_solve: damping must lie in (0,1]");
    const int nn = prob.tg.nodes();
    const int nx = prob.sg.cells();

    Field mk(nn, nx);
    if (initial_guess) {
        if (!initial_guess->same_shape(mk))
            throw std::invalid_argument("picard_solve: initial guess shape mismatch");
        mk = *initial_guess;
    } else {
        for (int n = 0; n < nn; ++n) mk.set_slice(n, prob.m0);
    }

    MFGSolution sol;
    sol.min_density = std::numeric_limits<double>::infinity();
    sol.min_memory = std::numeric_limits<double>::infinity();
    Field u;
    for (int it = 0; it < opts.max_iter; ++it) {
        Field g = coupling_eval(prob.coupling, mk, prob.sg);
        u = solve_fractional_hjb(prob.u_T, g, prob.beta, prob.tg, prob.sg, opts.hjb);
        Field v_edge = edge_drift_from_value(u, prob.sg);
        FPSolution fp = solve_fractional_fp(prob.m0, v_edge, prob.beta, prob.tg, prob.sg);
        sol.max_mass_error = std::max(sol.max_mass_error, fp.diag.max_mass_error);
        sol.min_density = std::min(sol.min_density, fp.diag.min_density);
        sol.min_memory = std::min(sol.min_memory,
                                  memory_field(fp.m, prob.beta, prob.tg).min_value);

        Field mnext(nn, nx);
        for (size_t i = 0; i < mnext.raw().size(); ++i)
            mnext.raw()[i] = (1.0 - opts.damping) * mk.raw()[i] + opts.damping * fp.m.raw()[i];
        const double res = sup_time_l1(mnext, mk, prob.sg);
        sol.residual_history.push_back(res);
        mk = std::move(mnext);
        sol.iterations = it + 1;
        if (res < opts.tol) {
            sol.converged = true;
            break;
        }
    }
    sol.m = std::move(mk);
    sol.u = std::move(u);
    Control ctrl = extract_control(sol.u, sol.m, prob.beta, prob.tg, prob.sg);
    sol.v = std::move(ctrl.v);
    sol.w = std::move(ctrl.w);
    return sol;
}

} // namespace fracmfg
