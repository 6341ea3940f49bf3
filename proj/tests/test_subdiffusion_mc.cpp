#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "fracmfg/subdiffusion_mc.hpp"

using namespace fracmfg;

namespace {

struct MeanSe {
    double mean, se;
};

template <class F>
MeanSe monte_carlo(int n, F&& draw) {
    double acc = 0.0, acc2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = draw(i);
        acc += v;
        acc2 += v * v;
    }
    const double mean = acc / n;
    const double var = (acc2 - n * mean * mean) / (n - 1);
    return {mean, std::sqrt(var / n)};
}

TorusPoint<1> zero_drift(double, const TorusPoint<1>&) { return {0.0}; }

TorusPoint<1> point_init_half(Rng&) { return {0.5}; }

} // namespace

TEST_CASE("stable increment degenerates to dt at beta = 1") {
    Rng rng(1);
    CHECK(sample_stable_increment(1.0, 0.25, rng) == 0.25);
    CHECK(sample_stable_increment(1.0, 0.0078125, rng) == 0.0078125);
}

TEST_CASE("stable increments are strictly positive") {
    Rng rng(99);
    for (int i = 0; i < 1000000; ++i) REQUIRE(sample_standard_stable(0.5, rng) > 0.0);
}

TEST_CASE("stable sampler satisfies the Laplace identity E[e^{-D_1}] = e^{-1}") {
    const double target = std::exp(-1.0);
    for (double beta : {0.3, 0.5, 0.7, 0.9}) {
        Rng rng(7777 + static_cast<uint64_t>(beta * 100));
        auto [mean, se] = monte_carlo(100000, [&](int) {
            return std::exp(-sample_standard_stable(beta, rng));
        });
        INFO("beta = " << beta << " mean = " << mean << " se = " << se);
        CHECK(std::abs(mean - target) <= 3.0 * se);
    }
}

TEST_CASE("stable increment scales as dt^{1/beta}") {
    // same uniforms, different step: ratio must be exactly the scale factor
    const double beta = 0.5;
    Rng a(5), b(5);
    const double s1 = sample_stable_increment(beta, 0.01, a);
    const double s2 = sample_stable_increment(beta, 0.04, b);
    CHECK(s2 / s1 == Catch::Approx(std::pow(4.0, 1.0 / beta)).epsilon(1e-12));
}

TEST_CASE("inverse path at beta = 1 is the identity clock") {
    TimeGrid tg(2.0, 16);
    Rng rng(3);
    auto path = sample_inverse_path(1.0, tg, rng);
    for (int n = 0; n < tg.nodes(); ++n) CHECK(path.internal_times[n] == tg.node(n));
}

TEST_CASE("inverse paths are nondecreasing with E_0 = 0") {
    TimeGrid tg(1.0, 32);
    for (uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(seed);
        auto path = sample_inverse_path(0.6, tg, rng, 5e-3);
        REQUIRE(path.internal_times[0] == 0.0);
        for (int n = 1; n < tg.nodes(); ++n)
            REQUIRE(path.internal_times[n] >= path.internal_times[n - 1]);
    }
}

TEST_CASE("mean of E_t matches t^beta/Gamma(1+beta)") {
    for (double beta : {0.5, 0.7}) {
        for (double t : {0.5, 1.0}) {
            Rng rng(31 + static_cast<uint64_t>(100 * beta + 10 * t));
            auto [mean, se] = monte_carlo(60000, [&](int) {
                return sample_inverse_at(beta, t, 1e-3, rng);
            });
            const double target = std::pow(t, beta) / std::tgamma(1.0 + beta);
            INFO("beta = " << beta << " t = " << t << " mean = " << mean << " target = " << target);
            CHECK(std::abs(mean - target) <= 3.0 * se);
        }
    }
}

TEST_CASE("negative internal step is a config error") {
    TimeGrid tg(1.0, 8);
    CHECK_THROWS_AS(resolve_internal_step(-1.0, 0.5, tg), std::domain_error);
    CHECK(resolve_internal_step(0.0, 0.5, tg) ==
          Catch::Approx(0.1 * std::pow(tg.dt(), 2.0)).epsilon(1e-12));
}

TEST_CASE("classical limit: Brownian displacement variance is 2t") {
    TimeGrid tg(0.05, 5);
    McOptions opts;
    opts.internal_step = 1e-3;
    auto ens = simulate_time_changed_sde<1>(zero_drift, 1.0, point_init_half, 20000, tg, 1234,
                                            opts);
    auto [msd, se] = monte_carlo(ens.count, [&](int i) {
        const double d = ens.unwrapped.back()[i][0] - 0.5;
        return d * d;
    });
    CHECK(std::abs(msd - 2.0 * tg.horizon) <= 4.0 * se);
}

TEST_CASE("subdiffusive mean-square displacement grows like t^beta") {
    const double beta = 0.5;
    TimeGrid tg(1.0, 10);
    McOptions opts;
    opts.internal_step = 1e-3;
    opts.threads = 2;
    auto ens =
        simulate_time_changed_sde<1>(zero_drift, beta, point_init_half, 20000, tg, 4321, opts);
    // log-log regression of MSD(t) over t in [0.1, 1]
    std::vector<double> lx, ly;
    for (int n = 1; n < tg.nodes(); ++n) {
        double msd = 0.0;
        for (int i = 0; i < ens.count; ++i) {
            const double d = ens.unwrapped[n][i][0] - 0.5;
            msd += d * d;
        }
        msd /= ens.count;
        lx.push_back(std::log(tg.node(n)));
        ly.push_back(std::log(msd));
        // amplitude check at t = 1: MSD = 2 t^beta / Gamma(1+beta)
        if (n == tg.steps) {
            const double target = 2.0 / std::tgamma(1.0 + beta);
            CHECK(msd == Catch::Approx(target).epsilon(0.05));
        }
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int m = static_cast<int>(lx.size());
    for (int i = 0; i < m; ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    INFO("slope = " << slope);
    CHECK(std::abs(slope - beta) <= 0.1);
}

TEST_CASE("fixed seed is bitwise reproducible across thread counts") {
    TimeGrid tg(0.5, 8);
    McOptions one, eight;
    one.internal_step = eight.internal_step = 2e-3;
    one.threads = 1;
    eight.threads = 8;
    auto drift = [](double, const TorusPoint<1>& x) -> TorusPoint<1> {
        return {-std::sin(2.0 * std::numbers::pi * x[0])};
    };
    auto init = [](Rng& rng) -> TorusPoint<1> { return {rng.uniform_oo()}; };
    auto a = simulate_time_changed_sde<1>(drift, 0.7, init, 3000, tg, 999, one);
    auto b = simulate_time_changed_sde<1>(drift, 0.7, init, 3000, tg, 999, eight);
    REQUIRE(a.count == b.count);
    for (size_t n = 0; n < a.positions.size(); ++n)
        for (int i = 0; i < a.count; ++i) {
            REQUIRE(a.positions[n][i][0] == b.positions[n][i][0]);
            REQUIRE(a.unwrapped[n][i][0] == b.unwrapped[n][i][0]);
        }
    CHECK(a.particle_seeds == b.particle_seeds);
}

TEST_CASE("non-finite drift raises a simulation error with context") {
    TimeGrid tg(0.5, 4);
    auto bad_drift = [](double, const TorusPoint<1>&) -> TorusPoint<1> {
        return {std::numeric_limits<double>::quiet_NaN()};
    };
    McOptions opts;
    opts.internal_step = 1e-2;
    CHECK_THROWS_AS(
        simulate_time_changed_sde<1>(bad_drift, 0.5, point_init_half, 16, tg, 5, opts),
        SimulationError);
}

TEST_CASE("torus closure of emitted coordinates") {
    TimeGrid tg(1.0, 6);
    McOptions opts;
    opts.internal_step = 2e-3;
    auto drift = [](double, const TorusPoint<1>& x) -> TorusPoint<1> {
        return {2.0 * std::cos(2.0 * std::numbers::pi * x[0])};
    };
    auto init = [](Rng& rng) -> TorusPoint<1> { return {rng.uniform_oo()}; };
    auto ens = simulate_time_changed_sde<1>(drift, 0.5, init, 4000, tg, 11, opts);
    for (const auto& slice : ens.positions)
        for (const auto& p : slice) REQUIRE((p[0] >= 0.0 && p[0] < 1.0));
}

TEST_CASE("empirical density: point mass, uniformity, exact mass") {
    SpaceGrid sg(1, 16);
    McOptions opts;
    opts.internal_step = 1e-2;

    // all particles in one cell -> indicator / dx at node 0
    auto ens = simulate_time_changed_sde<1>(
        zero_drift, 1.0, [](Rng&) -> TorusPoint<1> { return {0.53125}; }, 500, TimeGrid(1e-9, 2),
        3, opts);
    auto rho = empirical_density(ens, 0, sg);
    for (int j = 0; j < 16; ++j) {
        if (j == static_cast<int>(0.53125 * 16)) CHECK(rho[j] == Catch::Approx(16.0));
        else CHECK(rho[j] == 0.0);
    }

    // uniform positions -> flat density with O(N^{-1/2}) noise, exact mass
    auto uens = simulate_time_changed_sde<1>(
        zero_drift, 1.0, [](Rng& rng) -> TorusPoint<1> { return {rng.uniform_oo()}; }, 100000,
        TimeGrid(1e-9, 2), 17, opts);
    auto urho = empirical_density(uens, 0, sg);
    double mass = 0.0;
    for (int j = 0; j < 16; ++j) {
        CHECK(std::abs(urho[j] - 1.0) < 0.08); // ~6 sigma at N = 1e5
        mass += urho[j] * sg.dx();
    }
    CHECK(mass == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("2D simulation wraps and bins correctly") {
    TimeGrid tg(0.1, 4);
    SpaceGrid sg(2, 8);
    McOptions opts;
    opts.internal_step = 2e-3;
    auto drift2 = [](double, const TorusPoint<2>& x) -> TorusPoint<2> {
        return {-std::sin(2.0 * std::numbers::pi * x[0]), 0.3};
    };
    auto init2 = [](Rng& rng) -> TorusPoint<2> {
        return {rng.uniform_oo(), rng.uniform_oo()};
    };
    auto ens = simulate_time_changed_sde<2>(drift2, 0.6, init2, 5000, tg, 77, opts);
    for (const auto& slice : ens.positions)
        for (const auto& p : slice) {
            REQUIRE((p[0] >= 0.0 && p[0] < 1.0));
            REQUIRE((p[1] >= 0.0 && p[1] < 1.0));
        }
    auto rho = empirical_density(ens, tg.steps, sg);
    double mass = 0.0;
    for (double v : rho) mass += v * sg.cell_volume();
    CHECK(mass == Catch::Approx(1.0).margin(1e-12));
}
