#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "fracmfg/grids.hpp"
#include "fracmfg/rng.hpp"

namespace fracmfg {

struct SimulationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Draw of a standard one-sided beta-stable variable S with
/// E[exp(-k S)] = exp(-k^beta), by the Chambers-Mallows-Stuck/Kanter
/// transform of one uniform angle and one exponential.
inline double sample_standard_stable(double beta, Rng& rng) {
    const double U = std::numbers::pi * rng.uniform_oo();
    const double W = rng.exponential();
    return std::sin(beta * U) * std::pow(std::sin((1.0 - beta) * U), (1.0 - beta) / beta) /
           std::pow(std::sin(U), 1.0 / beta) * std::pow(W, 1.0 - 1.0 / beta);
}

/// Increment D_{tau+dt} - D_tau of the beta-stable subordinator over an
/// internal step dt ( = dt^{1/beta} S by self-similarity). Strictly positive.
/// beta = 1 is the degenerate subordinator D_tau = tau.
inline double sample_stable_increment(double beta, double dt_internal, Rng& rng) {
    if (!(dt_internal > 0.0))
        throw std::domain_error("sample_stable_increment: internal step must be positive");
    if (!(beta > 0.0) || !(beta <= 1.0))
        throw std::domain_error("sample_stable_increment: beta must lie in (0,1]");
    if (beta == 1.0) return dt_internal;
    return std::pow(dt_internal, 1.0 / beta) * sample_standard_stable(beta, rng);
}

/// Inverse-subordinator path E_{t_n} on the external grid. Nondecreasing,
/// E_0 = 0.
struct InversePath {
    std::vector<double> internal_times;
};

struct McOptions {
    /// Internal clock step of the subordinator walk; 0 selects the default
    /// 0.1 * dt^{1/beta}.
    double internal_step = 0.0;
    int threads = 1;
};

inline double resolve_internal_step(double requested, double beta, const TimeGrid& grid) {
    if (requested < 0.0) throw std::domain_error("internal step must be positive");
    if (requested > 0.0) return requested;
    return 0.1 * std::pow(grid.dt(), 1.0 / beta);
}

/// Simulate D forward with fixed internal step delta until it exceeds the
/// horizon; E_{t_n} is the linearly refined first-passage time of level t_n.
inline InversePath sample_inverse_path(double beta, const TimeGrid& grid, Rng& rng,
                                       double delta = 0.0) {
    if (!(beta > 0.0) || !(beta <= 1.0))
        throw std::domain_error("sample_inverse_path: beta must lie in (0,1]");
    InversePath path;
    path.internal_times.resize(grid.nodes());
    if (beta == 1.0) { // E_t = t exactly
        for (int n = 0; n < grid.nodes(); ++n) path.internal_times[n] = grid.node(n);
        return path;
    }
    delta = resolve_internal_step(delta, beta, grid);
    const double step_scale = std::pow(delta, 1.0 / beta);
    double d_prev = 0.0;
    long j = 0;
    int idx = 0;
    while (idx < grid.nodes()) {
        const double d_cur = d_prev + step_scale * sample_standard_stable(beta, rng);
        ++j;
        while (idx < grid.nodes() && d_cur > grid.node(idx)) {
            const double frac = (grid.node(idx) - d_prev) / (d_cur - d_prev);
            path.internal_times[idx] = delta * (static_cast<double>(j - 1) + frac);
            ++idx;
        }
        d_prev = d_cur;
    }
    return path;
}

/// E_t for a single external time t (tight loop used for subordination
/// averages where the whole path is not needed).
inline double sample_inverse_at(double beta, double t, double delta, Rng& rng) {
    if (beta == 1.0) return t;
    const double step_scale = std::pow(delta, 1.0 / beta);
    double d_prev = 0.0;
    long j = 0;
    for (;;) {
        const double d_cur = d_prev + step_scale * sample_standard_stable(beta, rng);
        ++j;
        if (d_cur > t) {
            const double frac = (t - d_prev) / (d_cur - d_prev);
            return delta * (static_cast<double>(j - 1) + frac);
        }
        d_prev = d_cur;
    }
}

template <int D>
using TorusPoint = std::array<double, D>;

template <int D>
inline TorusPoint<D> wrap_torus(TorusPoint<D> p) {
    for (int k = 0; k < D; ++k) {
        p[k] -= std::floor(p[k]);
        if (p[k] >= 1.0) p[k] = 0.0; // floor rounding at the seam
    }
    return p;
}

/// Snapshot ensemble of subordinated walkers X_t = Y_{E_t}. Positions are
/// wrapped onto [0,1)^D per the torus contract; the unwrapped companion
/// array supports displacement statistics.
template <int D>
struct ParticleEnsemble {
    int count = 0;
    uint64_t master_seed = 0;
    std::vector<uint64_t> particle_seeds;
    /// positions[n][i]: particle i at external node n
    std::vector<std::vector<TorusPoint<D>>> positions;
    std::vector<std::vector<TorusPoint<D>>> unwrapped;
};

/// Euler-Maruyama on the internal clock composed with the inverse
/// subordinator. The drift is sampled at the running external-clock value
/// D_tau, matching v(D_t, Y_t) in the subordinated SDE; sqrt(2) diffusion.
/// Identical master seed yields bitwise-identical ensembles for any thread
/// count (per-particle streams, disjoint output slots).
template <int D, class Drift, class InitSampler>
ParticleEnsemble<D> simulate_time_changed_sde(Drift&& drift, double beta, InitSampler&& init,
                                              int n_particles, const TimeGrid& grid,
                                              uint64_t master_seed, McOptions opts = {}) {
    if (!(beta > 0.0) || !(beta <= 1.0))
        throw std::domain_error("simulate_time_changed_sde: beta must lie in (0,1]");
    if (n_particles < 1) throw std::domain_error("simulate_time_changed_sde: need particles");
    const double delta = resolve_internal_step(opts.internal_step, beta, grid);
    const int n_nodes = grid.nodes();

    ParticleEnsemble<D> ens;
    ens.count = n_particles;
    ens.master_seed = master_seed;
    ens.particle_seeds.resize(n_particles);
    ens.positions.assign(n_nodes, std::vector<TorusPoint<D>>(n_particles));
    ens.unwrapped.assign(n_nodes, std::vector<TorusPoint<D>>(n_particles));

    std::atomic<bool> failed{false};
    std::string first_error;

    auto run_range = [&](int lo, int hi) {
        for (int i = lo; i < hi && !failed.load(std::memory_order_relaxed); ++i) {
            const uint64_t seed_i = derive_stream_seed(master_seed, static_cast<uint64_t>(i));
            ens.particle_seeds[i] = seed_i;
            Rng rng(seed_i);
            const double step_scale = (beta == 1.0) ? 0.0 : std::pow(delta, 1.0 / beta);
            const double noise_scale = std::sqrt(2.0 * delta);
            double d_prev = 0.0;
            TorusPoint<D> y_prev = init(rng); // unwrapped running position
            int idx = 0;
            // node t_0 = 0 resolves inside the loop on the first crossing
            while (idx < n_nodes) {
                const double incr = (beta == 1.0)
                                        ? delta
                                        : step_scale * sample_standard_stable(beta, rng);
                const double d_cur = d_prev + incr;
                TorusPoint<D> v = drift(d_prev, wrap_torus<D>(y_prev));
                TorusPoint<D> y_cur;
                bool bad = false;
                for (int k = 0; k < D; ++k) {
                    y_cur[k] = y_prev[k] + v[k] * delta + noise_scale * rng.normal();
                    if (!std::isfinite(y_cur[k])) bad = true;
                }
                if (bad) {
                    bool expected = false;
                    if (failed.compare_exchange_strong(expected, true))
                        first_error = "non-finite state for particle " + std::to_string(i) +
                                      " near external time " + std::to_string(d_prev);
                    return;
                }
                while (idx < n_nodes && d_cur > grid.node(idx)) {
                    const double frac = (grid.node(idx) - d_prev) / (d_cur - d_prev);
                    TorusPoint<D> x;
                    for (int k = 0; k < D; ++k)
                        x[k] = y_prev[k] + frac * (y_cur[k] - y_prev[k]);
                    ens.unwrapped[idx][i] = x;
                    ens.positions[idx][i] = wrap_torus<D>(x);
                    ++idx;
                }
                d_prev = d_cur;
                y_prev = y_cur;
            }
        }
    };

    const int threads = std::max(1, opts.threads);
    if (threads == 1) {
        run_range(0, n_particles);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (n_particles + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int lo = t * chunk, hi = std::min(n_particles, lo + chunk);
            if (lo < hi) pool.emplace_back(run_range, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    if (failed.load()) throw SimulationError(first_error);
    return ens;
}

/// Histogram of one time slice over uniform torus cells, normalized so that
/// sum(density) * dx^d == 1 exactly.
template <int D>
std::vector<double> empirical_density(const ParticleEnsemble<D>& ens, int node,
                                      const SpaceGrid& grid) {
    if (grid.dim != D) throw std::invalid_argument("empirical_density: dimension mismatch");
    if (node < 0 || node >= static_cast<int>(ens.positions.size()))
        throw std::invalid_argument("empirical_density: node out of range");
    if (ens.count == 0) throw std::invalid_argument("empirical_density: empty ensemble");
    const int nx = grid.cells_per_axis;
    std::vector<double> density(grid.cells(), 0.0);
    for (const auto& p : ens.positions[node]) {
        int cell = 0;
        for (int k = D - 1; k >= 0; --k) {
            int c = static_cast<int>(p[k] * nx);
            if (c >= nx) c = nx - 1;
            cell = cell * nx + c;
        }
        density[cell] += 1.0;
    }
    const double norm = 1.0 / (static_cast<double>(ens.count) * grid.cell_volume());
    for (auto& v : density) v *= norm;
    return density;
}

} // namespace fracmfg
