#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "fracmfg/frac_calc.hpp"
#include "fracmfg/rng.hpp"

using namespace fracmfg;

namespace {

// independent oracle for E_{1/2}(-x) = exp(x^2) erfc(x): direct form for
// small x, continued asymptotic expansion where exp(x^2) would overflow
double ml_half_oracle(double x) {
    if (x < 20.0) return std::exp(x * x) * std::erfc(x);
    double s = 0.0, t = 1.0;
    for (int j = 0; j < 24; ++j) {
        s += t;
        t *= -(2.0 * j + 1.0) / (2.0 * x * x);
    }
    return s / (x * std::sqrt(std::numbers::pi));
}

std::vector<double> sample_function(const TimeGrid& tg, double (*f)(double)) {
    std::vector<double> v(tg.nodes());
    for (int n = 0; n < tg.nodes(); ++n) v[n] = f(tg.node(n));
    return v;
}

} // namespace

TEST_CASE("gl_weights recursion and frozen values") {
    auto q = gl_weights(0.5, 3);
    REQUIRE(q.weights.size() == 4);
    CHECK(q.weights[0] == 1.0);
    CHECK(q.weights[1] == Catch::Approx(-0.5).margin(1e-15));
    CHECK(q.weights[2] == Catch::Approx(-0.125).margin(1e-15));
    CHECK(q.weights[3] == Catch::Approx(-0.0625).margin(1e-15));

    for (double order : {0.1, 0.3, 0.7, 0.99}) {
        auto w = gl_weights(order, 50);
        CHECK(w.weights[0] == 1.0);
        for (int k = 1; k <= 50; ++k) CHECK(w.weights[k] < 0.0);
    }
}

TEST_CASE("gl_weights partial sums decrease to zero from above") {
    // brute-force summation oracle: partial sums of the coefficients of
    // (1-z)^alpha stay positive and tend to 0
    auto q = gl_weights(0.5, 1000);
    long double partial = 0.0L;
    long double prev = 2.0L;
    for (int k = 0; k <= 1000; ++k) {
        partial += q.weights[k];
        REQUIRE(partial > 0.0L);
        if (k >= 1) REQUIRE(partial <= prev);
        prev = partial;
    }
    CHECK(static_cast<double>(partial) < 0.02);
}

TEST_CASE("gl_weights domain errors") {
    CHECK_THROWS_AS(gl_weights(0.0, 4), std::domain_error);
    CHECK_THROWS_AS(gl_weights(1.0, 4), std::domain_error);
    CHECK_THROWS_AS(gl_weights(-0.5, 4), std::domain_error);
    CHECK_THROWS_AS(gl_weights(0.5, 0), std::domain_error);
}

TEST_CASE("rl_deriv_forward of constants matches t^{beta-1}/Gamma(beta)") {
    TimeGrid tg(1.0, 512);
    for (double beta : {0.3, 0.5, 0.7}) {
        std::vector<double> ones(tg.nodes(), 1.0);
        auto d = rl_deriv_forward(ones, 1.0 - beta, tg);
        double worst = 0.0;
        for (int n = 0; n < tg.nodes(); ++n) {
            const double t = tg.node(n);
            if (t < 0.1) continue;
            const double exact = std::pow(t, beta - 1.0) / std::tgamma(beta);
            worst = std::max(worst, std::abs(d[n] - exact) / exact);
        }
        INFO("beta = " << beta);
        CHECK(worst <= 0.02);
    }
}

TEST_CASE("rl_deriv_forward power rule on f(t) = t") {
    // D^{1/2} t = Gamma(2)/Gamma(1.5) t^{1/2} = 2 sqrt(t/pi)
    const double exact = 2.0 / std::sqrt(std::numbers::pi);
    double prev_err = 0.0;
    for (int nt : {256, 512, 1024}) {
        TimeGrid tg(1.0, nt);
        auto d = rl_deriv_forward(sample_function(tg, [](double t) { return t; }), 0.5, tg);
        const double err = std::abs(d[nt] - exact) / exact;
        if (nt == 1024) CHECK(err < 5e-3);
        if (prev_err > 0.0) CHECK(err < prev_err); // first-order decay
        prev_err = err;
    }
}

TEST_CASE("rl_deriv order zero is the identity path") {
    TimeGrid tg(2.0, 64);
    auto f = sample_function(tg, [](double t) { return std::cos(t) + t; });
    CHECK(rl_deriv_forward(f, 0.0, tg) == f);
    CHECK(rl_deriv_backward(f, 0.0, tg) == f);
}

TEST_CASE("rl_deriv_backward is the time reflection of the forward operator") {
    TimeGrid tg(1.0, 97);
    Rng rng(7);
    std::vector<double> f(tg.nodes());
    for (auto& v : f) v = rng.uniform_oo() - 0.5;
    std::vector<double> fr(f.rbegin(), f.rend());
    auto lhs = rl_deriv_backward(f, 0.42, tg);
    auto fwd = rl_deriv_forward(fr, 0.42, tg);
    std::vector<double> rhs(fwd.rbegin(), fwd.rend());
    for (int n = 0; n < tg.nodes(); ++n) CHECK(lhs[n] == rhs[n]); // bitwise
}

TEST_CASE("rl_deriv_backward of constants reflects the forward identity") {
    // D^{1-beta}_{[t,T)} 1 = (T-t)^{beta-1}/Gamma(beta) up to O(dt)
    const double T = 4.0, beta = 0.5;
    TimeGrid tg(T, 2048);
    std::vector<double> ones(tg.nodes(), 1.0);
    auto d = rl_deriv_backward(ones, 1.0 - beta, tg);
    const int n = tg.steps * 3 / 4; // t = 3, T - t = 1
    const double exact = std::pow(T - tg.node(n), beta - 1.0) / std::tgamma(beta);
    CHECK(std::abs(d[n] - exact) / exact < 0.01);
    CHECK(exact == Catch::Approx(0.5641895835477563).epsilon(1e-12));
}

TEST_CASE("discrete integration by parts: transpose adjointness to 1e-14") {
    TimeGrid tg(1.0, 256);
    Rng rng(2024);
    for (double order : {0.3, 0.5, 0.7}) {
        std::vector<double> x(tg.nodes()), y(tg.nodes());
        for (auto& v : x) v = 2.0 * rng.uniform_oo() - 1.0;
        for (auto& v : y) v = 2.0 * rng.uniform_oo() - 1.0;
        auto dx_f = rl_deriv_forward(x, order, tg);
        auto dy_b = rl_deriv_backward(y, order, tg);
        long double lhs = 0.0L, rhs = 0.0L;
        for (int n = 0; n < tg.nodes(); ++n) {
            lhs += static_cast<long double>(dx_f[n]) * y[n];
            rhs += static_cast<long double>(x[n]) * dy_b[n];
        }
        lhs *= tg.dt();
        rhs *= tg.dt();
        const double scale = std::max({1.0, std::abs((double)lhs), std::abs((double)rhs)});
        INFO("order = " << order);
        CHECK(std::abs(static_cast<double>(lhs - rhs)) <= 1e-14 * scale);
    }
}

TEST_CASE("fractional integral of 1 and the classical limit") {
    TimeGrid tg(1.0, 512);
    std::vector<double> ones(tg.nodes(), 1.0);

    // I^{1/2} 1 (t=1) = 1/Gamma(1.5) = 2/sqrt(pi)
    auto i_half = frac_integral_forward(ones, 0.5, tg);
    CHECK(std::abs(i_half[tg.steps] - 1.1283791670955126) < 5e-3);

    // beta = 1: exact running integral, I^1 1 = t
    auto i_one = frac_integral_forward(ones, 1.0, tg);
    for (int n = 0; n < tg.nodes(); ++n)
        CHECK(i_one[n] == Catch::Approx(tg.node(n)).margin(1e-13));
}

TEST_CASE("fractional integral boundedness in the grid max norm") {
    // ||I^beta f||_inf <= T^beta/(beta Gamma(beta)) ||f||_inf
    TimeGrid tg(2.0, 301);
    Rng rng(5);
    for (double beta : {0.3, 0.6, 0.9}) {
        std::vector<double> f(tg.nodes());
        double fnorm = 0.0;
        for (auto& v : f) {
            v = 2.0 * rng.uniform_oo() - 1.0;
            fnorm = std::max(fnorm, std::abs(v));
        }
        const double bound = std::pow(tg.horizon, beta) / (beta * std::tgamma(beta)) * fnorm;
        for (double v : frac_integral_forward(f, beta, tg)) CHECK(std::abs(v) <= bound * (1 + 1e-12));
        for (double v : frac_integral_backward(f, beta, tg)) CHECK(std::abs(v) <= bound * (1 + 1e-12));
    }
}

TEST_CASE("composition D^alpha I^alpha is the identity on the grid") {
    // the GL weight sequences of (1-z)^a and (1-z)^{-a} convolve to delta,
    // so the left-inverse property holds to round-off (stronger than the
    // O(dt) requirement)
    TimeGrid tg(1.5, 200);
    auto f = sample_function(tg, [](double t) { return std::sin(3.0 * t) + 0.5 * t * t; });
    for (double a : {0.25, 0.5, 0.75}) {
        auto comp = rl_deriv_forward(frac_integral_forward(f, a, tg), a, tg);
        for (int n = 0; n < tg.nodes(); ++n)
            CHECK(comp[n] == Catch::Approx(f[n]).margin(1e-10));
    }
}

TEST_CASE("caputo derivative of constants vanishes") {
    TimeGrid tg(1.0, 128);
    std::vector<double> c(tg.nodes(), 3.7);
    for (double beta : {0.3, 0.5, 0.9, 1.0})
        for (double v : caputo_deriv_forward(c, beta, tg)) CHECK(v == 0.0);
}

TEST_CASE("caputo power rule on t^2 with L1 convergence order 2-beta") {
    // d^beta t^2 = Gamma(3)/Gamma(3-beta) t^{2-beta}
    const double beta = 0.5;
    const double exact = 2.0 / std::tgamma(2.5); // t = 1
    CHECK(exact == Catch::Approx(1.5045055561273502).epsilon(1e-12));
    std::vector<double> errs;
    for (int nt : {64, 128, 256, 512}) {
        TimeGrid tg(1.0, nt);
        auto d = caputo_deriv_forward(sample_function(tg, [](double t) { return t * t; }), beta, tg);
        errs.push_back(std::abs(d[nt] - exact));
    }
    CHECK(errs.back() < 1e-3);
    for (size_t i = 1; i < errs.size(); ++i) {
        const double slope = std::log2(errs[i - 1] / errs[i]);
        INFO("refinement " << i);
        CHECK(slope == Catch::Approx(2.0 - beta).margin(0.2));
    }
}

TEST_CASE("caputo beta = 1 is the exact backward difference") {
    TimeGrid tg(1.0, 50);
    auto f = sample_function(tg, [](double t) { return t * t * t - t; });
    auto d = caputo_deriv_forward(f, 1.0, tg);
    CHECK(d[0] == 0.0);
    for (int n = 1; n < tg.nodes(); ++n)
        CHECK(d[n] == Catch::Approx((f[n] - f[n - 1]) / tg.dt()).epsilon(1e-14));
}

TEST_CASE("mittag_leffler trivial branches") {
    CHECK(mittag_leffler(1.0, -1.0) == Catch::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(mittag_leffler(1.0, -7.3) == Catch::Approx(std::exp(-7.3)).epsilon(1e-14));
    for (double beta : {0.2, 0.5, 0.8, 1.0}) CHECK(mittag_leffler(beta, 0.0) == 1.0);
    CHECK_THROWS_AS(mittag_leffler(0.5, 0.5), std::domain_error);
    CHECK_THROWS_AS(mittag_leffler(1.5, -1.0), std::domain_error);
    CHECK_THROWS_AS(mittag_leffler(0.0, -1.0), std::domain_error);
}

TEST_CASE("mittag_leffler against frozen high-precision references") {
    struct Ref { double beta, z, value; };
    // adaptive-precision series (moderate |z|) cross-checked against the
    // optimally truncated algebraic expansion (large |z|)
    const Ref refs[] = {
        {0.5, -1.0, 0.427583576155807},
        {0.5, -2.0, 0.25539567631050574},
        {0.5, -5.0, 0.11070463773306863},
        {0.5, -12.0, 0.046854221014893763},
        {0.5, -19.739208802178716, 0.028545640488108033},
        {0.5, -27.915915731851577, 0.020197377649289365},
        {0.5, -39.47841760435743, 0.014286508754304482},
        {0.3, -0.5, 0.63264900594359902},
        {0.3, -2.0, 0.29023222616787536},
        {0.3, -3.4, 0.1910409686473313},
        {0.3, -10.0, 0.072649729078620452},
        {0.3, -39.47841760435743, 0.019226550624527789},
        {0.7, -1.0, 0.39961197811559939},
        {0.7, -8.0, 0.046069992385362386},
        {0.7, -17.0, 0.020608920742512602},
        {0.7, -39.47841760435743, 0.0086411016259033369},
        {0.9, -3.0, 0.083888354033773262},
        {0.9, -15.0, 0.0079286024323444471},
        {0.9, -30.0, 0.0037137076984598521},
        {0.9, -39.47841760435743, 0.0027813412702449991},
        {0.4, -4.0, 0.15256509446300082},
        {0.6, -10.0, 0.046589654426804281},
        {0.8, -20.0, 0.011617250451432778},
    };
    for (const auto& r : refs) {
        INFO("beta = " << r.beta << ", z = " << r.z);
        CHECK(mittag_leffler(r.beta, r.z) == Catch::Approx(r.value).epsilon(1e-8));
    }
}

TEST_CASE("mittag_leffler beta = 1/2 sweep against the erfc oracle") {
    for (double x = 0.25; x < 120.0; x *= 1.37) {
        INFO("x = " << x);
        CHECK(mittag_leffler(0.5, -x) == Catch::Approx(ml_half_oracle(x)).epsilon(1e-8));
    }
}

TEST_CASE("mittag_leffler is decreasing in |z| on the negative axis") {
    for (double beta : {0.3, 0.6, 0.9}) {
        double prev = 1.0;
        for (double x = 0.1; x < 80.0; x *= 1.5) {
            const double v = mittag_leffler(beta, -x);
            CHECK(v > 0.0);
            CHECK(v < prev);
            prev = v;
        }
    }
}

TEST_CASE("shape errors") {
    TimeGrid tg(1.0, 16);
    std::vector<double> wrong(tg.nodes() + 2, 1.0);
    CHECK_THROWS_AS(rl_deriv_forward(wrong, 0.5, tg), std::invalid_argument);
    CHECK_THROWS_AS(rl_deriv_backward(wrong, 0.5, tg), std::invalid_argument);
    CHECK_THROWS_AS(frac_integral_forward(wrong, 0.5, tg), std::invalid_argument);
    CHECK_THROWS_AS(caputo_deriv_forward(wrong, 0.5, tg), std::invalid_argument);
}
