#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace fracmfg {

struct LinearSolveError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Tridiagonal solve (Thomas), no pivoting: fine for the diagonally dominant
/// M-matrices assembled by the solvers.
inline std::vector<double> solve_tridiagonal(std::vector<double> sub, std::vector<double> diag,
                                             std::vector<double> sup, std::vector<double> rhs) {
    const size_t n = diag.size();
    for (size_t i = 1; i < n; ++i) {
        if (diag[i - 1] == 0.0) throw LinearSolveError("tridiagonal: zero pivot");
        const double w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    if (diag[n - 1] == 0.0) throw LinearSolveError("tridiagonal: zero pivot");
    rhs[n - 1] /= diag[n - 1];
    for (size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
    return rhs;
}

/// Periodic (circulant-cornered) tridiagonal solve via Sherman-Morrison.
/// sub[i] multiplies x[i-1] (sub[0] is the (0,n-1) corner), sup[i]
/// multiplies x[i+1] (sup[n-1] is the (n-1,0) corner).
inline std::vector<double> solve_periodic_tridiagonal(const std::vector<double>& sub,
                                                      const std::vector<double>& diag,
                                                      const std::vector<double>& sup,
                                                      const std::vector<double>& rhs) {
    const size_t n = diag.size();
    if (n < 3) throw LinearSolveError("periodic tridiagonal: need at least 3 unknowns");
    const double gamma = -diag[0];
    std::vector<double> d2(diag);
    d2[0] = diag[0] - gamma;
    d2[n - 1] = diag[n - 1] - sup[n - 1] * sub[0] / gamma;
    std::vector<double> u(n, 0.0);
    u[0] = gamma;
    u[n - 1] = sup[n - 1];

    std::vector<double> sub2(sub), sup2(sup);
    sub2[0] = 0.0;
    sup2[n - 1] = 0.0;
    auto y = solve_tridiagonal(sub2, d2, sup2, rhs);
    auto q = solve_tridiagonal(sub2, d2, sup2, u);

    const double vy = y[0] + (sub[0] / gamma) * y[n - 1];
    const double vq = q[0] + (sub[0] / gamma) * q[n - 1];
    const double denom = 1.0 + vq;
    if (denom == 0.0 || !std::isfinite(denom))
        throw LinearSolveError("periodic tridiagonal: singular correction");
    const double factor = vy / denom;
    for (size_t i = 0; i < n; ++i) y[i] -= factor * q[i];
    return y;
}

/// Dense LU with partial pivoting; used for the 2D implicit solves (desk
/// scale) and as a cross-check oracle for the banded paths.
class DenseLU {
public:
    DenseLU() = default;

    void factor(std::vector<double> a, int n) {
        n_ = n;
        lu_ = std::move(a);
        piv_.resize(n);
        for (int i = 0; i < n; ++i) piv_[i] = i;
        for (int col = 0; col < n; ++col) {
            int p = col;
            double best = std::abs(lu_[col * n + col]);
            for (int r = col + 1; r < n; ++r) {
                double v = std::abs(lu_[r * n + col]);
                if (v > best) { best = v; p = r; }
            }
            if (best == 0.0) throw LinearSolveError("dense LU: singular matrix");
            if (p != col) {
                for (int c = 0; c < n; ++c) std::swap(lu_[p * n + c], lu_[col * n + c]);
                std::swap(piv_[p], piv_[col]);
            }
            const double pivot = lu_[col * n + col];
            for (int r = col + 1; r < n; ++r) {
                const double f = lu_[r * n + col] / pivot;
                lu_[r * n + col] = f;
                for (int c = col + 1; c < n; ++c) lu_[r * n + c] -= f * lu_[col * n + c];
            }
        }
    }

    std::vector<double> solve(const std::vector<double>& b) const {
        std::vector<double> x(n_);
        for (int i = 0; i < n_; ++i) x[i] = b[piv_[i]];
        for (int i = 1; i < n_; ++i) {
            double s = x[i];
            for (int j = 0; j < i; ++j) s -= lu_[i * n_ + j] * x[j];
            x[i] = s;
        }
        for (int i = n_ - 1; i >= 0; --i) {
            double s = x[i];
            for (int j = i + 1; j < n_; ++j) s -= lu_[i * n_ + j] * x[j];
            x[i] = s / lu_[i * n_ + i];
        }
        return x;
    }

    bool ready() const { return n_ > 0; }

private:
    int n_ = 0;
    std::vector<double> lu_;
    std::vector<int> piv_;
};

} // namespace fracmfg
