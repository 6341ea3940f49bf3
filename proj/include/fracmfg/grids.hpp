#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracmfg {

/// Fractional order beta in (0,1]; beta == 1 selects the exact classical
/// limit (no fractional weights are engaged anywhere downstream).
struct FractionalOrder {
    double beta;

    explicit FractionalOrder(double b) : beta(b) {
        if (!(b > 0.0) || !(b <= 1.0))
            throw std::domain_error("FractionalOrder: beta must lie in (0,1], got " +
                                    std::to_string(b));
    }
    bool classical() const { return beta == 1.0; }
};

/// Uniform time grid on [0,T]: nodes t_n = n*dt, n = 0..steps.
struct TimeGrid {
    double horizon;
    int steps;

    TimeGrid(double T, int n_t) : horizon(T), steps(n_t) {
        if (!(T > 0.0))
            throw std::domain_error("TimeGrid: horizon must be positive");
        if (n_t < 2)
            throw std::domain_error("TimeGrid: need at least 2 steps");
    }
    double dt() const { return horizon / steps; }
    double node(int n) const { return n * dt(); }
    int nodes() const { return steps + 1; }
};

/// Uniform periodic grid on the unit torus [0,1)^d, d in {1,2}.
/// Cell centers sit at (j + 1/2)*dx; edge j+1/2 sits at (j+1)*dx.
struct SpaceGrid {
    int dim;
    int cells_per_axis;

    SpaceGrid(int d, int n_x) : dim(d), cells_per_axis(n_x) {
        if (d != 1 && d != 2)
            throw std::domain_error("SpaceGrid: dimension must be 1 or 2");
        if (n_x < 8)
            throw std::domain_error("SpaceGrid: need at least 8 cells per axis");
    }
    double dx() const { return 1.0 / cells_per_axis; }
    int cells() const {
        return dim == 1 ? cells_per_axis : cells_per_axis * cells_per_axis;
    }
    double cell_volume() const { return std::pow(dx(), dim); }
    double center(int j) const { return (j + 0.5) * dx(); }
    double edge(int j) const { return (j + 1.0) * dx(); }
};

/// Dense space-time field: values[n][j] for time node n and cell j,
/// stored row-major. Used for densities, value functions, sources and
/// memory fields alike.
class Field {
public:
    Field() : nt_(0), nx_(0) {}
    Field(int time_nodes, int cells, double fill = 0.0)
        : nt_(time_nodes), nx_(cells), data_(static_cast<size_t>(time_nodes) * cells, fill) {}

    int time_nodes() const { return nt_; }
    int cells() const { return nx_; }

    double& at(int n, int j) { return data_[static_cast<size_t>(n) * nx_ + j]; }
    double at(int n, int j) const { return data_[static_cast<size_t>(n) * nx_ + j]; }

    double* slice(int n) { return data_.data() + static_cast<size_t>(n) * nx_; }
    const double* slice(int n) const { return data_.data() + static_cast<size_t>(n) * nx_; }

    std::vector<double> slice_copy(int n) const {
        return std::vector<double>(slice(n), slice(n) + nx_);
    }
    void set_slice(int n, const std::vector<double>& v) {
        if (static_cast<int>(v.size()) != nx_)
            throw std::invalid_argument("Field::set_slice: size mismatch");
        std::copy(v.begin(), v.end(), slice(n));
    }

    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    bool same_shape(const Field& o) const { return nt_ == o.nt_ && nx_ == o.nx_; }

private:
    int nt_, nx_;
    std::vector<double> data_;
};

inline double sup_norm(const Field& a, const Field& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("sup_norm: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.raw().size(); ++i)
        m = std::max(m, std::abs(a.raw()[i] - b.raw()[i]));
    return m;
}

/// max over time slices of the spatial L1 distance (discrete surrogate of
/// the C([0,T];P_1) topology used for Picard convergence).
inline double sup_time_l1(const Field& a, const Field& b, const SpaceGrid& grid) {
    if (!a.same_shape(b)) throw std::invalid_argument("sup_time_l1: shape mismatch");
    double worst = 0.0;
    for (int n = 0; n < a.time_nodes(); ++n) {
        double s = 0.0;
        for (int j = 0; j < a.cells(); ++j) s += std::abs(a.at(n, j) - b.at(n, j));
        worst = std::max(worst, s * grid.cell_volume());
    }
    return worst;
}

} // namespace fracmfg
